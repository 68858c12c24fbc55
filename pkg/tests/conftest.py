from __future__ import annotations

import random

import pytest

from selfsim.fixtures import load_fixture
from selfsim.machine import Element
from selfsim.omega import build_orbit_automaton
from selfsim.quotients import branch_from_file
from selfsim.structure import nucleus
from selfsim.tree_automata import build_automaton_closed, build_automaton_contracting


def random_word(machine, rng: random.Random, max_len: int) -> Element:
    letters = [(g, e) for g in machine.generators for e in (1, -1)]
    n = rng.randint(0, max_len)
    return Element(machine, tuple(rng.choice(letters) for _ in range(n)))


@pytest.fixture(scope="session")
def grig():
    return load_fixture("grigorchuk")


@pytest.fixture(scope="session")
def adding():
    return load_fixture("adding")


@pytest.fixture(scope="session")
def gs():
    return load_fixture("gupta_sidki")


@pytest.fixture(scope="session")
def ident():
    return load_fixture("identity")


@pytest.fixture(scope="session")
def grig_B(grig):
    return branch_from_file(grig)


@pytest.fixture(scope="session")
def grig_N(grig):
    return nucleus(grig)


@pytest.fixture(scope="session")
def grig_M1(grig_B):
    return build_automaton_closed(grig_B)


@pytest.fixture(scope="session")
def grig_M2(grig, grig_B, grig_N):
    return build_automaton_contracting(grig, grig_B, grig_N)


@pytest.fixture(scope="session")
def grig_orbit(grig_M2):
    return build_orbit_automaton(grig_M2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
