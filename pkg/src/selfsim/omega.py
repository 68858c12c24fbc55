"""The orbit relation on the boundary as an ω-automaton, and lasso words.

Rays are ultimately periodic words ``u v v v ...`` written ``u(v)``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field

import networkx as nx

from .machine import Element, MachineDef
from .structure import orbit_of
from .tree_automata import MullerTreeAutomaton, productive_states


@dataclass(frozen=True)
class LassoWord:
    prefix: tuple
    period: tuple

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))
        if not self.period:
            raise ValueError("lasso period must be nonempty")

    def __getitem__(self, i: int):
        p = len(self.prefix)
        if i < p:
            return self.prefix[i]
        return self.period[(i - p) % len(self.period)]

    def take(self, n: int) -> tuple:
        return tuple(self[i] for i in range(n))

    def canonical(self) -> "LassoWord":
        """Shortest prefix and primitive period denoting the same ray."""
        v = self.period
        for k in range(1, len(v) + 1):
            if len(v) % k == 0 and v[:k] * (len(v) // k) == v:
                v = v[:k]
                break
        u = self.prefix
        while u and u[-1] == v[-1]:
            u = u[:-1]
            v = (v[-1],) + v[:-1]
        return LassoWord(u, v)

    def same_ray(self, other: "LassoWord") -> bool:
        return self.canonical() == other.canonical()

    def __str__(self) -> str:
        return "".join(map(str, self.prefix)) + "(" + "".join(map(str, self.period)) + ")"


def parse_lasso(text: str) -> LassoWord:
    """Parse ``u(v)`` with single-digit letters, e.g. ``0(10)``."""
    text = text.strip()
    if not text.endswith(")") or "(" not in text:
        raise ValueError(f"expected a lasso 'u(v)', got {text!r}")
    u, v = text[:-1].split("(", 1)
    if not v or not (u + v).isdigit():
        raise ValueError(f"malformed lasso {text!r}")
    return LassoWord(tuple(int(c) for c in u), tuple(int(c) for c in v))


def align(xi: LassoWord, eta: LassoWord) -> LassoWord:
    """The pair lasso ``(xi_i, eta_i)_i`` with common prefix and period lengths."""
    p = max(len(xi.prefix), len(eta.prefix))
    L = math.lcm(len(xi.period), len(eta.period))
    return LassoWord(
        tuple((xi[i], eta[i]) for i in range(p)),
        tuple((xi[i], eta[i]) for i in range(p, p + L)),
    )


@dataclass(frozen=True)
class OmegaAutomaton:
    states: tuple
    alphabet: tuple
    transitions: tuple  # (q, letter, q')
    initial: tuple
    accepting: frozenset | None = None  # None: every run is accepting
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        declared = set(self.states)
        index = defaultdict(list)
        for q, a, r in self.transitions:
            if q not in declared or r not in declared:
                raise ValueError(f"transition {(q, a, r)} references undeclared states")
            index[(q, a)].append(r)
        object.__setattr__(self, "_index", dict(index))

    def successors(self, q, a) -> list:
        return self._index.get((q, a), [])


def build_orbit_automaton(M: MullerTreeAutomaton) -> OmegaAutomaton:
    """Read the tree automaton along one ray, recording (input letter, image letter).

    Transitions with an unproductive child are dropped first, so every
    ray-run extends to an accepting tree run.
    """
    P = productive_states(M)
    trans = set()
    for q, a, ch in M.transitions:
        if q not in P or any(c not in P for c in ch):
            continue
        for y in range(M.d):
            trans.add((q, (y, a[y]), ch[y]))
    alphabet = tuple((y, z) for y in range(M.d) for z in range(M.d))
    return OmegaAutomaton(
        tuple(M.states),
        alphabet,
        tuple(sorted(trans)),
        tuple(q for q in M.initial if q in P),
        M.accepting,
    )


@dataclass
class LassoVerdict:
    accepted: bool
    word: LassoWord
    stem: list[tuple[Hashable, int]] = field(default_factory=list)
    cycle: list[tuple[Hashable, int]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.accepted

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "prefix": [list(x) if isinstance(x, tuple) else x for x in self.word.prefix],
            "period": [list(x) if isinstance(x, tuple) else x for x in self.word.period],
            "stem": [[q, i] for q, i in self.stem],
            "cycle": [[q, i] for q, i in self.cycle],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LassoVerdict":
        def letter(x):
            return tuple(x) if isinstance(x, list) else x

        word = LassoWord(tuple(map(letter, data["prefix"])), tuple(map(letter, data["period"])))
        return cls(
            bool(data["accepted"]),
            word,
            [(q, i) for q, i in data["stem"]],
            [(q, i) for q, i in data["cycle"]],
        )


def accepts_lasso(A: OmegaAutomaton, w: LassoWord) -> LassoVerdict:
    """Search the product of ``A`` with the lasso for a reachable accepting cycle."""
    p, L = len(w.prefix), len(w.period)

    def nxt(i: int) -> int:
        return i + 1 if i + 1 < p + L else p

    G = nx.DiGraph()
    starts = [(q, 0) for q in A.initial]
    stack = list(starts)
    seen = set(starts)
    G.add_nodes_from(starts)
    while stack:
        q, i = stack.pop()
        for r in A.successors(q, w[i]):
            v = (r, nxt(i))
            G.add_edge((q, i), v)
            if v not in seen:
                seen.add(v)
                stack.append(v)
    allowed = [v for v in G if v[1] >= p and (A.accepting is None or v[0] in A.accepting)]
    H = G.subgraph(allowed)
    best = None
    for comp in nx.strongly_connected_components(H):
        node = min(comp, key=repr)
        if len(comp) == 1 and not H.has_edge(node, node):
            continue
        if best is None or repr(node) < repr(best):
            best = node
    if best is None:
        return LassoVerdict(False, w)
    G.add_node("__start__")
    for s in starts:
        G.add_edge("__start__", s)
    stem = nx.shortest_path(G, "__start__", best)[1:]
    if H.has_edge(best, best):
        cycle = [best, best]
    else:
        cycle = None
        for succ in sorted(H.successors(best), key=repr):
            try:
                back = nx.shortest_path(H, succ, best)
            except nx.NetworkXNoPath:
                continue
            cycle = [best] + back
            break
    return LassoVerdict(True, w, stem, cycle)


def verify_lasso_certificate(A: OmegaAutomaton, v: LassoVerdict) -> bool:
    """Replay an accepting-cycle certificate without searching."""
    w = v.word
    p, L = len(w.prefix), len(w.period)

    def step_ok(a, b) -> bool:
        (q, i), (r, j) = a, b
        return j == (i + 1 if i + 1 < p + L else p) and r in A.successors(q, w[i])

    if not v.accepted or not v.stem or len(v.cycle) < 2:
        return False
    if v.stem[0][1] != 0 or v.stem[0][0] not in A.initial:
        return False
    if v.stem[-1] != v.cycle[0] or v.cycle[-1] != v.cycle[0]:
        return False
    path = v.stem + v.cycle[1:]
    if not all(step_ok(a, b) for a, b in zip(path, path[1:])):
        return False
    return all(i >= p and (A.accepting is None or q in A.accepting) for q, i in v.cycle)


def same_orbit(A: OmegaAutomaton, xi: LassoWord, eta: LassoWord) -> LassoVerdict:
    """Decide whether ``eta`` lies in the orbit of ``xi``."""
    return accepts_lasso(A, align(xi, eta))


def ray_orbit_automaton(A: OmegaAutomaton, xi: LassoWord) -> OmegaAutomaton:
    """Automaton over X recognising the orbit of ``xi`` (first coordinate fixed to ``xi``)."""
    p, L = len(xi.prefix), len(xi.period)
    letters = sorted({z for (_, z) in A.alphabet})
    states = [f"{q}@{i}" for q in A.states for i in range(p + L)]
    trans = []
    for q in A.states:
        for i in range(p + L):
            j = i + 1 if i + 1 < p + L else p
            for z in letters:
                for r in A.successors(q, (xi[i], z)):
                    trans.append((f"{q}@{i}", z, f"{r}@{j}"))
    accepting = None
    if A.accepting is not None:
        accepting = frozenset(f"{q}@{i}" for q in A.accepting for i in range(p + L))
    return OmegaAutomaton(
        tuple(states), tuple(letters), tuple(sorted(trans)), tuple(f"{q}@0" for q in A.initial), accepting
    )


def orbit_levelwise_oracle(
    machine: MachineDef, xi: LassoWord, eta: LassoWord, n: int, gens: Sequence[Element] | None = None
) -> bool:
    """Whether the length-``n`` prefixes lie in one orbit of the level-``n`` action."""
    return eta.take(n) in orbit_of(machine, xi.take(n), gens)


def lasso_image(g: Element, xi: LassoWord) -> LassoWord:
    """The ray ``g(xi)``; the state of ``g`` along the period eventually cycles."""
    m = g.machine
    p, L = len(xi.prefix), len(xi.period)
    k = g.key
    out = []
    seen: dict = {}
    i = 0
    while True:
        if i >= p:
            pos = p + (i - p) % L
            if (k, pos) in seen:
                start = seen[(k, pos)]
                return LassoWord(tuple(out[:start]), tuple(out[start:]))
            seen[(k, pos)] = i
        x = xi[i]
        out.append(m.key_perm(k)[x])
        k = m.key_state(k, x)
        i += 1
