from __future__ import annotations

import itertools
import random

import pytest

from conftest import random_word
from selfsim.machine import equivalent, finitary_element, is_trivial
from selfsim.perm import all_perms
from selfsim.quotients import branch_from_file, full_branch_structure, level_quotient
from selfsim.structure import nucleus
from selfsim.tree_automata import (
    AutomatonError,
    MullerTreeAutomaton,
    RunSlice,
    accepting_run,
    accepts_portrait,
    build_automaton_closed,
    build_automaton_contracting,
    check_acceptance_certificate,
    count_depth_n,
    decide_equal,
    decide_subgroup,
    decode_run,
    enumerate_value_trees,
    productive_states,
)


def test_full_group_automaton():
    M = build_automaton_closed(full_branch_structure(2))
    assert len(M.states) == 1
    assert len(M.transitions) == 2
    assert all(ch == (q, q) for q, _, ch in M.transitions)
    rng = random.Random(0)
    for _ in range(20):
        labels = {v: rng.choice(all_perms(2)) for n in range(4) for v in itertools.product(range(2), repeat=n)}
        assert accepts_portrait(M, finitary_element(2, labels))


def test_grigorchuk_closed_shape(grig_B, grig_M1):
    assert len(grig_M1.states) == 16
    assert len(grig_M1.transitions) == len(grig_B.Q1) == 64
    assert grig_M1.accepting is None


def test_grigorchuk_contracting_shape(grig_M2):
    assert len(grig_M2.states) == 16 + 5
    assert grig_M2.is_absorbing()
    N = grig_M2.accepting
    for q, _, ch in grig_M2.transitions:
        if q in N:
            assert all(c in N for c in ch)


def test_identity_contracting(ident):
    B = branch_from_file(ident)
    M = build_automaton_contracting(ident, B, nucleus(ident))
    assert M.accepting == frozenset({"n:1"})
    assert accepts_portrait(M, ident.one())
    assert not accepts_portrait(M, finitary_element(2, {(1, 0): (1, 0)}))


@pytest.mark.parametrize("which", ["grig_M1", "grig_M2"])
def test_round_trip_random_words(which, request, grig):
    M = request.getfixturevalue(which)
    rng = random.Random(42)
    for _ in range(200):
        assert accepts_portrait(M, random_word(grig, rng, 5))


def _finitary_outside(grig, level, seed):
    lq = level_quotient(grig, level)
    rng = random.Random(seed)
    while True:
        labels = {
            v: rng.choice(all_perms(2)) for n in range(level) for v in itertools.product(range(2), repeat=n)
        }
        f = finitary_element(2, labels)
        if not lq.contains(f.machine.level_perm(f.key, level)):
            return f


def test_finitary_outside_rejected(grig, grig_M1, grig_M2):
    f = _finitary_outside(grig, 5, 1)
    assert not accepts_portrait(grig_M1, f)
    assert not accepts_portrait(grig_M2, f)


def test_adding_machine_not_in_grigorchuk(adding, grig, grig_M2):
    t = adding.gen("t")
    levels = [level_quotient(grig, n).contains(t.machine.level_perm(t.key, n)) for n in range(1, 7)]
    assert levels[:3] == [True, True, True] and levels[3] is False
    assert decide_subgroup([t], grig_M2).result is False


@pytest.mark.parametrize("n", range(5))
def test_count_matches_level_order(n, grig, grig_M1, grig_M2):
    order = level_quotient(grig, n).order()
    for M in (grig_M1, grig_M2):
        rep = count_depth_n(M, n)
        assert rep.value_trees == order
        assert rep.certified
        assert rep.runs >= rep.value_trees


def _nested(labels, v, depth):
    if len(v) == depth:
        return ()
    return (labels[v], tuple(_nested(labels, v + (x,), depth) for x in range(2)))


def test_safety_splicing(grig, grig_M1):
    depth = 3
    accepted = enumerate_value_trees(grig_M1, depth)
    P = productive_states(grig_M1)
    rng = random.Random(9)
    spliced = 0
    for _ in range(60):
        g, h = random_word(grig, rng, 6), random_word(grig, rng, 6)
        rg, rh = accepting_run(grig_M1, g, depth), accepting_run(grig_M1, h, depth)
        for v in [(0,), (1,), (0, 1), (1, 1)]:
            if rg.state_at(v) != rh.state_at(v):
                continue
            trans = {u: t for u, t in rg.transitions.items() if u[: len(v)] != v}
            trans.update({u: t for u, t in rh.transitions.items() if u[: len(v)] == v})
            r = RunSlice(2, depth, rg.root, trans)
            assert r.is_consistent(grig_M1)
            assert all(q in P for q in r.frontier().values())
            assert (_nested(r.value(), (), depth)) in accepted
            spliced += 1
    assert spliced > 20


def test_decode_single_vertex(grig, grig_M2):
    r = RunSlice(2, 0, "n:b", {})
    assert equivalent(decode_run(grig_M2, r), grig.gen("b"))


def test_decode_depth_one(grig, grig_B, grig_M2):
    root = f"q{grig_B.pi(grig.gen('a'))}"
    r = RunSlice(2, 1, root, {(): (root, (1, 0), ("n:1", "n:1"))})
    assert equivalent(decode_run(grig_M2, r), grig.gen("a"))


def test_decode_witness_of_ba(grig, grig_M2):
    ba = grig.parse_element("ba")
    r = accepting_run(grig_M2, ba, 2)
    assert is_trivial(decode_run(grig_M2, r) * ba.inverse())


def test_decode_round_trip(grig, grig_M2):
    rng = random.Random(17)
    for _ in range(100):
        g = random_word(grig, rng, 6)
        r = accepting_run(grig_M2, g)
        assert check_acceptance_certificate(grig_M2, g, r)
        assert is_trivial(decode_run(grig_M2, r) * g.inverse())


def test_decode_rejects_inconsistent(grig_M2):
    with pytest.raises(AutomatonError):
        decode_run(grig_M2, RunSlice(2, 1, "q0", {(): ("q0", (1, 0), ("n:a", "n:a"))}))


def test_certificate_rejects_wrong_element(grig, grig_M2):
    r = accepting_run(grig_M2, grig.parse_element("abac"))
    assert not check_acceptance_certificate(grig_M2, grig.parse_element("abad"), r)


def test_subgroup_and_equality(grig, grig_M2):
    gens = grig.generator_elements()
    assert decide_subgroup(gens, grig_M2).result
    H = [grig.parse_element(w) for w in ["a", "b", "c", "ab"]]
    assert decide_subgroup(H, grig_M2).result
    BH = branch_from_file(grig, H)
    MH = build_automaton_contracting(grig, BH, nucleus(grig, gens=H))
    assert decide_equal(gens, grig_M2, H, MH)


def test_json_round_trip(grig_M2):
    again = MullerTreeAutomaton.from_json(grig_M2.to_json())
    assert again == grig_M2
    assert again.dumps() == grig_M2.dumps()


def test_unknown_state_rejected():
    from selfsim.tree_automata import make_automaton

    with pytest.raises(AutomatonError):
        make_automaton(2, ["q"], all_perms(2), [("q", (0, 1), ("q", "z"))], ["q"])
