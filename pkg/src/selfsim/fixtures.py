"""Bundled group files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .machine import MachineDef, load_machine

FIXTURES = ("grigorchuk", "adding", "gupta_sidki", "identity", "full")


def fixture_path(name: str) -> Path:
    """Path of a bundled ``.grp`` file, by stem or file name."""
    stem = name[:-4] if name.endswith(".grp") else name
    if stem not in FIXTURES:
        raise FileNotFoundError(f"no bundled group file named {name!r}")
    return Path(str(resources.files("selfsim") / "data" / f"{stem}.grp"))


def load_fixture(name: str) -> MachineDef:
    return load_machine(fixture_path(name))


def resolve_group_file(arg: str) -> Path:
    """An existing path, else a bundled fixture of that name."""
    p = Path(arg)
    if p.exists():
        return p
    return fixture_path(p.name)
