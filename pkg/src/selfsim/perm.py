"""Permutations as image tuples, plus a deterministic stabilizer chain.

A permutation ``p`` of ``range(n)`` is stored as the tuple of images
``(p[0], ..., p[n-1])``.  Composition follows function notation:
``compose(p, q)`` is ``p o q``, i.e. apply ``q`` first.
"""

from __future__ import annotations

import itertools
from operator import itemgetter
from collections import deque
from collections.abc import Iterable, Iterator, Sequence

Perm = tuple[int, ...]


class BudgetExceeded(RuntimeError):
    """A configurable resource budget was exhausted before an answer was found."""


def identity(n: int) -> Perm:
    return tuple(range(n))


def is_identity(p: Sequence[int]) -> bool:
    return tuple(p) == tuple(range(len(p)))


def compose(p: Sequence[int], q: Sequence[int]) -> Perm:
    """Return ``p o q`` (apply ``q`` first)."""
    if len(q) == 1:
        return (p[q[0]],)
    return itemgetter(*q)(p)


def inverse(p: Sequence[int]) -> Perm:
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


def check_perm(p: Sequence[int], n: int | None = None) -> None:
    """Raise ValueError if ``p`` is not a bijection of ``range(len(p))``."""
    if n is not None and len(p) != n:
        raise ValueError(f"expected a permutation of {n} points, got {len(p)} images")
    if sorted(p) != list(range(len(p))):
        raise ValueError(f"not a permutation: {tuple(p)}")


def all_perms(n: int) -> list[Perm]:
    """All permutations of ``range(n)`` in lexicographic order."""
    return [tuple(p) for p in itertools.permutations(range(n))]


def fmt_cycles(p: Sequence[int]) -> str:
    """Cycle notation, e.g. ``(0 1)(2 3)``; ``()`` for the identity."""
    seen = set()
    out = []
    for i in range(len(p)):
        if i in seen or p[i] == i:
            continue
        cycle = [i]
        seen.add(i)
        j = p[i]
        while j != i:
            seen.add(j)
            cycle.append(j)
            j = p[j]
        out.append("(%s)" % " ".join(map(str, cycle)))
    return "".join(out) or "()"


def closure(gens: Iterable[Perm], n: int, budget: int = 1_000_000) -> set[Perm]:
    """Enumerate the group generated by ``gens`` by breadth-first search."""
    gens = list(gens)
    e = identity(n)
    seen = {e}
    queue = deque([e])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = compose(g, x)
            if y not in seen:
                seen.add(y)
                if len(seen) > budget:
                    raise BudgetExceeded(f"group enumeration exceeded {budget} elements")
                queue.append(y)
    return seen


def orbit(gens: Iterable[Perm], point: int) -> set[int]:
    gens = list(gens)
    seen = {point}
    queue = deque([point])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = g[x]
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


class _Level:
    __slots__ = ("base", "gens", "transversal")

    def __init__(self, base: int):
        self.base = base
        self.gens: list[Perm] = []
        # orbit point -> coset representative u with u[base] == point
        self.transversal: dict[int, Perm] = {}


class StabChain:
    """Stabilizer chain of a permutation group, built by Schreier-Sims.

    The construction is deterministic: base points are chosen as the least
    moved point, and Schreier generators are processed in a fixed order.
    Supports exact ``order()``, ``contains()`` and element enumeration.
    """

    def __init__(self, gens: Iterable[Sequence[int]], degree: int):
        self.degree = degree
        self.gens: list[Perm] = []
        self._levels: list[_Level] = []
        for g in gens:
            g = tuple(g)
            check_perm(g, degree)
            if not is_identity(g):
                self.gens.append(g)
        for g in self.gens:
            self._add_strong_generator(0, g)

    # -- construction -------------------------------------------------
    def _sift(self, g: Perm, start: int = 0) -> tuple[Perm, int]:
        """Sift ``g`` through levels ``start..``; return residue and drop level."""
        for i in range(start, len(self._levels)):
            lvl = self._levels[i]
            u = lvl.transversal.get(g[lvl.base])
            if u is None:
                return g, i
            g = compose(inverse(u), g)
        return g, len(self._levels)

    def _new_level(self, g: Perm) -> None:
        base = next(i for i, x in enumerate(g) if x != i)
        lvl = _Level(base)
        lvl.transversal[base] = identity(self.degree)
        self._levels.append(lvl)

    def _add_strong_generator(self, i: int, g: Perm) -> None:
        h, j = self._sift(g, i)
        if is_identity(h):
            return
        if j == len(self._levels):
            self._new_level(h)
        # h now needs to be added at level j and all levels between i and j
        for k in range(i, j + 1):
            self._extend(k, h)

    def _extend(self, i: int, g: Perm) -> None:
        lvl = self._levels[i]
        lvl.gens.append(g)
        trans = lvl.transversal
        # only pairs involving the new generator or a new orbit point are new
        work = deque((p, g) for p in sorted(trans))
        new_schreier: list[Perm] = []
        while work:
            p, s = work.popleft()
            q = s[p]
            su = compose(s, trans[p])
            if q not in trans:
                trans[q] = su
                work.extend((q, t) for t in lvl.gens)
            else:
                sg = compose(inverse(trans[q]), su)
                if not is_identity(sg):
                    new_schreier.append(sg)
        for sg in new_schreier:
            h, j = self._sift(sg, i + 1)
            if not is_identity(h):
                if j == len(self._levels):
                    self._new_level(h)
                for k in range(i + 1, j + 1):
                    self._extend(k, h)

    # -- queries ------------------------------------------------------
    def order(self) -> int:
        n = 1
        for lvl in self._levels:
            n *= len(lvl.transversal)
        return n

    def contains(self, g: Sequence[int]) -> bool:
        g = tuple(g)
        if len(g) != self.degree:
            return False
        h, _ = self._sift(g)
        return is_identity(h)

    __contains__ = contains

    @property
    def base(self) -> list[int]:
        return [lvl.base for lvl in self._levels]

    def elements(self) -> Iterator[Perm]:
        """Enumerate every group element exactly once."""
        reps = [list(lvl.transversal.values()) for lvl in self._levels]
        for combo in itertools.product(*reps):
            g = identity(self.degree)
            for u in reversed(combo):
                g = compose(u, g)
            yield g


def normal_closure(
    subgens: Iterable[Sequence[int]],
    ambient_gens: Sequence[Sequence[int]],
    degree: int,
    max_rounds: int = 10_000,
) -> StabChain:
    """Stabilizer chain of the normal closure of ``<subgens>`` in ``<ambient_gens>``.

    Conjugates of the current generators by ambient generators are added until
    no new conjugate lies outside the group built so far.
    """
    gens = [tuple(g) for g in subgens]
    amb = [tuple(a) for a in ambient_gens]
    chain = StabChain(gens, degree)
    i = 0
    rounds = 0
    while i < len(gens):
        k = gens[i]
        for a in amb:
            c = compose(inverse(a), compose(k, a))
            if not chain.contains(c):
                gens.append(c)
                chain = StabChain(gens, degree)
                rounds += 1
                if rounds > max_rounds:
                    raise BudgetExceeded("normal closure did not saturate")
        i += 1
    return chain
