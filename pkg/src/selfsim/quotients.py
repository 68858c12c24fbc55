"""Finite level quotients and branch structures.

Points of ``X^n`` are indexed lexicographically (first letter most
significant).  A branch structure is computed at a congruence level ``m``:
``Q = G_m / K_m`` with ``K_m`` the image of the normal closure of the given
words.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field

from .machine import Element, Key, MachineDef, parse_word
from .perm import (
    BudgetExceeded,
    Perm,
    StabChain,
    all_perms,
    compose,
    identity,
    inverse,
    normal_closure,
)

DEFAULT_POINT_BUDGET = 3 ** 6


class BranchError(RuntimeError):
    """The supplied data does not define a branch structure."""


def point_index(u: Sequence[int], d: int) -> int:
    i = 0
    for x in u:
        i = i * d + x
    return i


def point_word(i: int, d: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        i, r = divmod(i, d)
        out.append(r)
    return tuple(reversed(out))


def _group_gens(machine: MachineDef, gens: Sequence[Element] | None) -> list[Element]:
    return list(machine.generator_elements() if gens is None else gens)


class LevelQuotient:
    """Image ``G_n`` of the group in ``Sym(X^n)``."""

    def __init__(
        self,
        machine: MachineDef,
        n: int,
        gens: Sequence[Element] | None = None,
        point_budget: int = DEFAULT_POINT_BUDGET,
    ):
        if n < 0:
            raise ValueError("level must be non-negative")
        if machine.d ** n > point_budget:
            raise BudgetExceeded(f"level {n} has {machine.d ** n} points (budget {point_budget})")
        self.machine = machine
        self.n = n
        self.degree = machine.d ** n
        self.gens = _group_gens(machine, gens)
        self.gen_perms = [machine.level_perm(g.key, n) for g in self.gens]
        self.chain = StabChain(self.gen_perms, self.degree)

    def order(self) -> int:
        return self.chain.order()

    def contains(self, p: Sequence[int]) -> bool:
        return self.chain.contains(p)

    def image(self, g: Element) -> Perm:
        return self.machine.level_perm(g.key, self.n)

    def bfs_order(self, budget: int = 1_000_000) -> int:
        """Order by exhaustive enumeration (independent of the stabilizer chain)."""
        from .perm import closure

        return len(closure(self.gen_perms, self.degree, budget))


def level_quotient(machine: MachineDef, n: int, gens: Sequence[Element] | None = None,
                   point_budget: int = DEFAULT_POINT_BUDGET) -> LevelQuotient:
    return LevelQuotient(machine, n, gens, point_budget)


def embed_at(p: Sequence[int], x: int, d: int) -> Perm:
    """Permutation of X^(n+1) acting as ``p`` on ``xX^n`` and trivially elsewhere."""
    size = len(p)
    out = list(range(size * d))
    for i, j in enumerate(p):
        out[x * size + i] = x * size + j
    return tuple(out)


@dataclass
class FiniteGroup:
    """Finite group given by a multiplication table over canonical representatives.

    Element 0 is the identity.  ``reps[i]`` is the lexicographically least
    permutation in the coset represented by ``i``.
    """

    reps: list[Perm]
    table: list[list[int]]
    inv: list[int]

    def __len__(self) -> int:
        return len(self.reps)

    @property
    def order(self) -> int:
        return len(self.reps)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]


WreathElt = tuple[tuple[int, ...], Perm]


@dataclass
class BranchStructure:
    """Data ``(Q, pi, Q1, phi)`` of a regularly branched group at congruence level ``m``."""

    machine: MachineDef
    m: int
    Q: FiniteGroup
    kgens: list[Element]
    gens: list[Element]
    K_order: int
    Q1: list[WreathElt]
    phi: dict[WreathElt, int]
    _canon: dict[Perm, int] = field(repr=False)
    _kelems: list[Perm] = field(repr=False)
    _pi_cache: dict[Key, int] = field(default_factory=dict, repr=False)
    _q1_words: dict[WreathElt, Key] | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.machine.d

    def pi_perm(self, p: Perm) -> int:
        hit = self._canon.get(p)
        if hit is not None:
            return hit
        c = min(compose(p, k) for k in self._kelems)
        return self._canon[c]

    def pi_key(self, key: Key) -> int:
        hit = self._pi_cache.get(key)
        if hit is None:
            hit = self.pi_perm(self.machine.level_perm(key, self.m))
            self._pi_cache[key] = hit
        return hit

    def pi(self, g: Element) -> int:
        return self.pi_key(g.key)

    def wreath_image_key(self, key: Key) -> WreathElt:
        mm = self.machine
        return tuple(self.pi_key(mm.key_state(key, x)) for x in range(mm.d)), mm.key_perm(key)

    def wreath_image(self, g: Element) -> WreathElt:
        return self.wreath_image_key(g.key)

    def wreath_mul(self, a: WreathElt, b: WreathElt) -> WreathElt:
        return wreath_mul(self.Q, a, b)

    def q1_word(self, w: WreathElt) -> Key:
        """A shortest group word whose image in ``Q1`` is ``w``."""
        if self._q1_words is None:
            mm = self.machine
            letters = sorted({k for g in self.gens for k in (g.key, g.inverse().key)})
            start = ((0,) * mm.d, identity(mm.d))
            words = {start: ()}
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for s in letters:
                    v = self.wreath_mul(u, self.wreath_image_key(s))
                    if v not in words:
                        words[v] = mm.reduce(words[u] + s)
                        queue.append(v)
            self._q1_words = words
        return self._q1_words[w]

    def is_trivial_structure(self) -> bool:
        return len(self.Q) == 1


def wreath_mul(Q: FiniteGroup, a: WreathElt, b: WreathElt) -> WreathElt:
    (p, s), (r, t) = a, b
    return tuple(Q.table[p[t[x]]][r[x]] for x in range(len(r))), compose(s, t)


def _finite_quotient(gperms: list[Perm], kchain: StabChain, degree: int, budget: int) -> tuple[FiniteGroup, dict[Perm, int], list[Perm]]:
    kelems = list(kchain.elements())
    if len(kelems) > budget:
        raise BudgetExceeded("subgroup too large to enumerate cosets")

    def canon(p: Perm) -> Perm:
        return min(compose(p, k) for k in kelems)

    e = identity(degree)
    reps = {canon(e)}
    queue = deque([canon(e)])
    while queue:
        r = queue.popleft()
        for g in gperms:
            c = canon(compose(g, r))
            if c not in reps:
                reps.add(c)
                if len(reps) > budget:
                    raise BudgetExceeded("quotient too large")
                queue.append(c)
    ordered = sorted(reps)
    index = {r: i for i, r in enumerate(ordered)}
    table = [[index[canon(compose(a, b))] for b in ordered] for a in ordered]
    inv = [index[canon(inverse(a))] for a in ordered]
    return FiniteGroup(ordered, table, inv), index, kelems


def build_branch_structure(
    machine: MachineDef,
    kgens: Sequence[Element],
    m: int,
    gens: Sequence[Element] | None = None,
    budget: int = 200_000,
) -> BranchStructure:
    """Build ``Q = G_m / <<K>>_m``, ``Q1 = psi(G) / K^X`` and ``phi``.

    Raises :class:`BranchError` when ``phi`` is not single-valued.
    """
    gens = _group_gens(machine, gens)
    lq = LevelQuotient(machine, m, gens, point_budget=max(DEFAULT_POINT_BUDGET, machine.d ** m))
    kperms = [machine.level_perm(k.key, m) for k in kgens]
    kchain = normal_closure(kperms, lq.gen_perms, lq.degree)
    Q, canon, kelems = _finite_quotient(lq.gen_perms, kchain, lq.degree, budget)
    B = BranchStructure(machine, m, Q, list(kgens), gens, kchain.order(), [], {}, canon, kelems)

    d = machine.d
    one: WreathElt = ((0,) * d, identity(d))
    pairs = []
    for g in gens:
        for h in (g, g.inverse()):
            pairs.append((B.wreath_image(h), B.pi(h)))
    graph = {(one, 0)}
    queue = deque([(one, 0)])
    while queue:
        w, q = queue.popleft()
        for gw, gq in pairs:
            nxt = (B.wreath_mul(w, gw), Q.table[q][gq])
            if nxt not in graph:
                graph.add(nxt)
                if len(graph) > budget:
                    raise BudgetExceeded("Q1 enumeration exceeded budget")
                queue.append(nxt)
    phi: dict[WreathElt, int] = {}
    for w, q in graph:
        if phi.setdefault(w, q) != q:
            raise BranchError(
                "phi not well-defined: an element of Q1 has two images in Q "
                f"(level {m}); the preimage of K^X is not contained in K"
            )
    B.Q1 = sorted(phi)
    B.phi = phi
    return B


def branch_from_file(machine: MachineDef, gens: Sequence[Element] | None = None) -> BranchStructure:
    """Branch structure from the ``branch`` line of a group file."""
    if machine.branch is None:
        raise BranchError("group file has no 'branch' line")
    kgens = [Element(machine, parse_word(w, machine)) for w in machine.branch.kwords]
    return build_branch_structure(machine, kgens, machine.branch.level, gens)


def full_branch_structure(d: int) -> BranchStructure:
    """Branch data with ``Q = 1`` and ``Q1 = Sym(X)``: the full group ``Aut(T)``."""
    states = {}
    names = []
    for i, p in enumerate(all_perms(d)[1:]):
        name = f"s{i}"
        names.append(name)
        states[name] = (p, [("1", 1)] * d)
    machine = MachineDef(d, states, names)
    return build_branch_structure(machine, [machine.gen(n) for n in names], 0)


@dataclass
class MembershipTest:
    kword: str
    letter: int
    level: int
    member: bool


@dataclass
class BranchingCertificate:
    certified: bool
    tests: list[MembershipTest]

    def to_json(self) -> dict:
        return {
            "certified": self.certified,
            "tests": [
                {"k": t.kword, "x": t.letter, "level": t.level, "member": t.member} for t in self.tests
            ],
        }


def certify_regular_branching(
    machine: MachineDef,
    B: BranchStructure,
    L: int,
    point_budget: int = DEFAULT_POINT_BUDGET,
) -> BranchingCertificate:
    """Test ``K^X <= psi(K)`` on the level quotients up to ``L``.

    For each K-generator ``k`` and letter ``x`` the isometry acting as ``k``
    below ``x`` (and trivially elsewhere) must lie in the level image of the
    normal closure of K.  All tests are run; any failure is a refutation.
    """
    if L < B.m + 1:
        raise ValueError("certification level must exceed the congruence level")
    d = machine.d
    tests = []
    for level in range(1, L + 1):
        lq = LevelQuotient(machine, level, B.gens, point_budget)
        kperms = [machine.level_perm(k.key, level) for k in B.kgens]
        kchain = normal_closure(kperms, lq.gen_perms, lq.degree)
        for k in B.kgens:
            sub = machine.level_perm(k.key, level - 1)
            for x in range(d):
                member = kchain.contains(embed_at(sub, x, d))
                tests.append(MembershipTest(str(k), x, level, member))
    return BranchingCertificate(all(t.member for t in tests), tests)
