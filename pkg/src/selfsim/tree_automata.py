"""Müller tree automata over Sym(X)-labelled trees and the portrait languages of branched groups.

A run's residual set along a ray is the set of states seen infinitely often.
Two acceptance classes have decision procedures here:

* ``accepting=None`` (every residual set allowed): a safety condition, every
  locally consistent run is accepting;
* ``accepting=N``: residual sets must be subsets of ``N``, i.e. every ray
  eventually stays in ``N`` (a co-Büchi condition).
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from collections.abc import Callable, Hashable, Iterable, Sequence
from dataclasses import dataclass, field

from .machine import Element, Key, MachineDef, equivalent, portrait
from .perm import BudgetExceeded, Perm, all_perms, identity, is_identity
from .quotients import BranchStructure
from .structure import ElementBall, ElementBank, Nucleus

Transition = tuple[str, Perm, tuple[str, ...]]

DEFAULT_PRODUCT_BUDGET = 200_000


class AutomatonError(ValueError):
    """Invalid automaton data or an unsupported operation for its shape."""


@dataclass
class AutomatonContext:
    """Group data behind an automaton built from a branch structure (not exported)."""

    machine: MachineDef
    branch: BranchStructure
    qstate: dict[str, int]
    nucleus: Nucleus | None = None
    nstate: dict[str, Element] = field(default_factory=dict)


@dataclass(frozen=True)
class MullerTreeAutomaton:
    d: int
    states: tuple[str, ...]
    alphabet: tuple[Perm, ...]
    transitions: tuple[Transition, ...]
    initial: tuple[str, ...]
    accepting: frozenset[str] | None = None
    context: AutomatonContext | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        declared = set(self.states)
        for q, a, children in self.transitions:
            if q not in declared or any(c not in declared for c in children):
                raise AutomatonError(f"transition {(q, a, children)} references undeclared states")
            if len(children) != self.d:
                raise AutomatonError("transition arity differs from alphabet size")
        if not set(self.initial) <= declared:
            raise AutomatonError("undeclared initial state")
        if self.accepting is not None and not set(self.accepting) <= declared:
            raise AutomatonError("undeclared accepting state")
        index: dict[tuple[str, Perm], list[tuple[str, ...]]] = defaultdict(list)
        for q, a, children in self.transitions:
            index[(q, a)].append(children)
        object.__setattr__(self, "_index", dict(index))

    def moves(self, q: str, a: Perm) -> list[tuple[str, ...]]:
        return self._index.get((q, a), [])

    @property
    def acceptance_tag(self) -> str | list[str]:
        return "all" if self.accepting is None else sorted(self.accepting)

    def is_absorbing(self) -> bool:
        """True iff no transition leaves the accepting set."""
        if self.accepting is None:
            return True
        return all(
            all(c in self.accepting for c in children)
            for q, _, children in self.transitions
            if q in self.accepting
        )

    # -- serialisation -------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "d": self.d,
            "states": list(self.states),
            "alphabet": [list(a) for a in self.alphabet],
            "transitions": [[q, list(a), list(ch)] for q, a, ch in self.transitions],
            "initial": list(self.initial),
            "acceptance": self.acceptance_tag,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "MullerTreeAutomaton":
        acc = data["acceptance"]
        return make_automaton(
            data["d"],
            data["states"],
            [tuple(a) for a in data["alphabet"]],
            [(q, tuple(a), tuple(ch)) for q, a, ch in data["transitions"]],
            data["initial"],
            None if acc == "all" else frozenset(acc),
        )


def make_automaton(d, states, alphabet, transitions, initial, accepting=None, context=None) -> MullerTreeAutomaton:
    """Build an automaton with transitions stored in sorted order."""
    return MullerTreeAutomaton(
        d,
        tuple(states),
        tuple(sorted(set(alphabet))),
        tuple(sorted(set(transitions))),
        tuple(initial),
        None if accepting is None else frozenset(accepting),
        context,
    )


# -- fixpoint engine ------------------------------------------------------------

Options = Callable[[Hashable], Iterable[tuple]]


def _gfp(nodes: Iterable, options: Options, allowed: Callable[[Hashable], bool], outside: set | None = None) -> set:
    """nu Y. {v allowed : some option has every successor in Y or in ``outside``}."""
    outside = outside or set()
    Y = {v for v in nodes if allowed(v)}
    changed = True
    while changed:
        changed = False
        for v in list(Y):
            if not any(all(c in Y or c in outside for c in opt) for opt in options(v)):
                Y.discard(v)
                changed = True
    return Y


@dataclass
class _Solution:
    winning: set
    rank: dict  # node -> outer iteration at which it was won
    safe: set  # nodes winning by staying in the accepting set forever


def _solve(nodes: list, options: Options, accepting: Callable[[Hashable], bool] | None) -> _Solution:
    if accepting is None:
        W = _gfp(nodes, options, lambda v: True)
        return _Solution(W, {v: 1 for v in W}, W)
    # mu Z. nu Y. (F and CPre(Y)) or CPre(Z)
    Z: set = set()
    rank: dict = {}
    safe = None
    i = 0
    while True:
        i += 1
        Y = set(nodes)
        changed = True
        while changed:
            changed = False
            for v in list(Y):
                ok = False
                for opt in options(v):
                    if all(c in Z for c in opt):
                        ok = True
                        break
                    if accepting(v) and all(c in Y for c in opt):
                        ok = True
                        break
                if not ok:
                    Y.discard(v)
                    changed = True
        if safe is None:
            safe = set(Y)
        new = Y - Z
        if not new:
            break
        for v in new:
            rank[v] = i
        Z |= new
    return _Solution(Z, rank, safe)


def _witness_option(v, options: Options, sol: _Solution, accepting) -> tuple:
    """An option certifying that ``v`` is winning (children of lower rank, or safe)."""
    r = sol.rank[v]
    if v in sol.safe:
        for opt in options(v):
            if all(c in sol.safe for c in opt):
                return opt
    for opt in options(v):
        if all(c in sol.winning and sol.rank[c] < r for c in opt):
            return opt
    for opt in options(v):
        if all(c in sol.winning for c in opt):
            return opt
    raise AssertionError("winning node without witness")


# -- construction -----------------------------------------------------------------


def _qname(i: int) -> str:
    return f"q{i}"


def build_automaton_closed(B: BranchStructure) -> MullerTreeAutomaton:
    """Automaton whose accepted trees are the portraits of the closure of the group."""
    d = B.d
    states = [_qname(i) for i in range(len(B.Q))]
    transitions = []
    for (qs, a), q in B.phi.items():
        transitions.append((_qname(q), a, tuple(_qname(c) for c in qs)))
    ctx = AutomatonContext(B.machine, B, {s: i for i, s in enumerate(states)})
    return make_automaton(d, states, all_perms(d), transitions, states, None, ctx)


def build_automaton_contracting(
    machine: MachineDef, B: BranchStructure, N: Nucleus | Sequence[Element]
) -> MullerTreeAutomaton:
    """Automaton on ``Q + N`` accepting exactly the portraits of the (contracting) group."""
    d = machine.d
    if not isinstance(N, Nucleus):
        N = _nucleus_from_elements(machine, list(N))
    closed = build_automaton_closed(B)
    nnames = [f"n:{e}" for e in N.elements]
    if len(set(nnames)) != len(nnames):
        nnames = [f"n{i}:{e}" for i, e in enumerate(N.elements)]
    transitions = list(closed.transitions)
    for i, e in enumerate(N.elements):
        transitions.append((nnames[i], machine.key_perm(e.key), tuple(nnames[j] for j in N.transitions[i])))
    npi = [B.pi(e) for e in N.elements]
    for combo in itertools.product(range(len(N.elements)), repeat=d):
        qs = tuple(npi[j] for j in combo)
        for a in all_perms(d):
            q = B.phi.get((qs, a))
            if q is not None:
                transitions.append((_qname(q), a, tuple(nnames[j] for j in combo)))
    states = list(closed.states) + nnames
    ctx = AutomatonContext(
        machine, B, dict(closed.context.qstate), N, {nnames[i]: e for i, e in enumerate(N.elements)}
    )
    M = make_automaton(d, states, all_perms(d), transitions, states, frozenset(nnames), ctx)
    if not M.is_absorbing():
        raise AutomatonError("nucleus is not transition-closed")
    return M


def _nucleus_from_elements(machine: MachineDef, elements: list[Element]) -> Nucleus:
    bank = ElementBank(machine)
    for e in elements:
        bank.add(e.key)
    if len(bank) != len(elements):
        raise AutomatonError("nucleus elements are not pairwise distinct")
    transitions = []
    for e in elements:
        row = []
        for s in machine.key_states(e.key):
            j = bank.find(s)
            if j is None:
                raise AutomatonError(f"nucleus not transition-closed: a state of {e} is outside N")
            row.append(j)
        transitions.append(tuple(row))
    return Nucleus(machine, elements, transitions)


# -- acceptance of finite-state portraits -----------------------------------------


@dataclass
class RunSlice:
    """Transitions assigned to every vertex of depth < ``depth``."""

    d: int
    depth: int
    root: str
    transitions: dict[tuple[int, ...], Transition]

    def state_at(self, v: tuple[int, ...]) -> str:
        if not v:
            return self.root
        return self.transitions[v[:-1]][2][v[-1]]

    def value(self) -> dict[tuple[int, ...], Perm]:
        return {v: t[1] for v, t in self.transitions.items()}

    def frontier(self) -> dict[tuple[int, ...], str]:
        return {v: self.state_at(v) for v in itertools.product(range(self.d), repeat=self.depth)}

    def is_consistent(self, M: MullerTreeAutomaton) -> bool:
        if self.root not in M.initial:
            return False
        for v in _vertices(self.d, self.depth):
            t = self.transitions.get(v)
            if t is None or t[0] != self.state_at(v):
                return False
            if t[2] not in M.moves(t[0], t[1]):
                return False
        return True

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "root": self.root,
            "transitions": [
                ["".join(map(str, v)), t[0], list(t[1]), list(t[2])]
                for v, t in sorted(self.transitions.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ],
        }

    @classmethod
    def from_json(cls, d: int, data: dict) -> "RunSlice":
        trans = {
            tuple(int(c) for c in v): (q, tuple(a), tuple(ch)) for v, q, a, ch in data["transitions"]
        }
        return cls(d, data["depth"], data["root"], trans)


def _vertices(d: int, depth: int):
    for n in range(depth):
        yield from itertools.product(range(d), repeat=n)


class _Product:
    """Product of the state closure of an element with an automaton."""

    def __init__(self, M: MullerTreeAutomaton, g: Element, budget: int):
        m = g.machine
        if m.d != M.d:
            raise AutomatonError("alphabet sizes differ")
        self.M = M
        self.machine = m
        graph = m.key_state_closure(g.key, budget)
        self.graph = graph
        self.label = {k: m.key_perm(k) for k in graph}
        if len(graph) * len(M.states) > budget:
            raise BudgetExceeded("product budget exceeded")
        self.nodes = [(k, q) for k in graph for q in M.states]
        self.root = g.key

    def options(self, v):
        k, q = v
        ch = self.graph[k]
        return [tuple(zip(ch, qs)) for qs in self.M.moves(q, self.label[k])]

    def solve(self) -> _Solution:
        acc = self.M.accepting
        return _solve(self.nodes, self.options, None if acc is None else (lambda v: v[1] in acc))


def accepts_portrait(M: MullerTreeAutomaton, g: Element, budget: int = DEFAULT_PRODUCT_BUDGET) -> bool:
    """Decide whether the portrait of ``g`` is accepted by ``M``."""
    P = _Product(M, g, budget)
    sol = P.solve()
    return any((P.root, q) in sol.winning for q in M.initial)


def accepting_run(
    M: MullerTreeAutomaton, g: Element, depth: int | None = None, budget: int = DEFAULT_PRODUCT_BUDGET
) -> RunSlice | None:
    """Witness run slice for ``g``, or None if rejected.

    For co-Büchi automata the default depth is the least one at which every
    frontier vertex carries an accepting-set state.
    """
    P = _Product(M, g, budget)
    sol = P.solve()
    roots = [(P.root, q) for q in M.initial if (P.root, q) in sol.winning]
    if not roots:
        return None
    root = min(roots, key=lambda v: (sol.rank[v], M.states.index(v[1])))
    acc = M.accepting

    def done(v) -> bool:
        return acc is None or v in sol.safe and v[1] in acc

    if depth is None:
        depth = 0
        frontier = [root]
        while not all(done(v) for v in frontier):
            depth += 1
            if depth > len(sol.winning) + 1:
                raise AutomatonError("witness unfolding does not reach the accepting set")
            frontier = [c for v in frontier for c in _witness_option(v, P.options, sol, acc)]
    transitions: dict[tuple[int, ...], Transition] = {}
    frontier = [((), root)]
    for _ in range(depth):
        nxt = []
        for vert, node in frontier:
            opt = _witness_option(node, P.options, sol, acc)
            transitions[vert] = (node[1], P.label[node[0]], tuple(c[1] for c in opt))
            nxt.extend((vert + (x,), c) for x, c in enumerate(opt))
        frontier = nxt
    return RunSlice(M.d, depth, root[1], transitions)


def productive_states(M: MullerTreeAutomaton) -> set[str]:
    """States from which some accepted tree exists."""
    def options(q):
        return [ch for (p, _), chs in M._index.items() if p == q for ch in chs]

    acc = M.accepting
    return _solve(list(M.states), options, None if acc is None else (lambda q: q in acc)).winning


# -- decoding runs to group elements ----------------------------------------------


def decode_run(M: MullerTreeAutomaton, r: RunSlice, search_radius: int = 12) -> Element:
    """Turn a run slice whose frontier lies in the nucleus into a group element.

    Works bottom-up: frontier vertices give nucleus elements; an internal
    vertex labelled ``(q, a, (q_x))`` with children ``g_x`` is replaced by
    ``h*k`` where ``h`` realises ``((pi(g_x)), a)`` in ``Q1`` and ``k`` in K
    has states ``(h@x)^-1 g_x``.
    """
    ctx = M.context
    if ctx is None or ctx.nucleus is None or M.accepting is None:
        raise AutomatonError("decoding needs an automaton built from a contracting branch structure")
    if not r.is_consistent(M):
        raise AutomatonError("run slice is not locally consistent")
    m = ctx.machine
    B = ctx.branch
    lifter = _Lifter(B, search_radius)

    def elem(v: tuple[int, ...]) -> Key:
        q = r.state_at(v)
        if q in ctx.nstate:
            return ctx.nstate[q].key
        if len(v) == r.depth:
            raise AutomatonError(f"frontier state {q} at {v} is not in the nucleus")
        _, a, children = r.transitions[v]
        gx = [elem(v + (x,)) for x in range(r.d)]
        w = (tuple(B.pi_key(k) for k in gx), a)
        if B.phi.get(w) != ctx.qstate[q]:
            raise AutomatonError(f"internal inconsistency: no lift for vertex {v}")
        return lifter.lift(w, gx)

    result = m.element(elem(()))
    value = r.value()
    if portrait(result, r.depth).labels != value:
        raise AutomatonError("decoded element does not reproduce the run's value")
    return result


class _Lifter:
    def __init__(self, B: BranchStructure, radius: int):
        self.B = B
        self.m = B.machine
        self.radius = radius
        # K-elements fixing level 1, shared between decodings
        cache = getattr(B, "_lift_cache", None)
        if cache is None:
            cache = (ElementBall(self.m, B.gens), [])
            B._lift_cache = cache
        self.ball, self.pool = cache

    def _candidates(self):
        yield from list(self.pool)
        m, B = self.m, self.B
        while self.ball.radius < self.radius:
            for k in self.ball.grow():
                if is_identity(m.key_perm(k)) and B.pi_key(k) == 0:
                    self.pool.append(k)
                    yield k

    def lift(self, w, gx: list[Key]) -> Key:
        m = self.m
        h = self.B.q1_word(w)
        hx = m.key_states(h)
        inv = m.class_inv
        targets = [m.reduce(tuple(inv[c] for c in reversed(hx[x])) + gx[x]) for x in range(m.d)]
        if all(m.key_is_trivial(t) for t in targets):
            return h
        for k in self._candidates():
            ks = m.key_states(k)
            if all(
                m.key_is_trivial(m.reduce(ks[x] + tuple(inv[c] for c in reversed(targets[x]))))
                for x in range(m.d)
            ):
                return m.reduce(h + k)
        raise BudgetExceeded(f"no branching lift found within word radius {self.radius}")


# -- counting -------------------------------------------------------------------


def enumerate_value_trees(M: MullerTreeAutomaton, n: int, budget: int = 2_000_000) -> set:
    """All depth-``n`` labellings that extend to accepted trees (nested tuples)."""
    P = productive_states(M)
    level: dict[str, set] = {q: {()} for q in M.states if q in P}
    for _ in range(n):
        nxt: dict[str, set] = {}
        for (q, a), chs in M._index.items():
            acc = nxt.setdefault(q, set())
            for ch in chs:
                if not all(c in level for c in ch):
                    continue
                for combo in itertools.product(*(level[c] for c in ch)):
                    acc.add((a, combo))
                    if len(acc) > budget:
                        raise BudgetExceeded("value-tree enumeration exceeded budget")
        level = {q: s for q, s in nxt.items() if s}
    out = set()
    for q in M.initial:
        out |= level.get(q, set())
    return out


def count_value_trees(M: MullerTreeAutomaton, n: int) -> int:
    """Exact count of depth-``n`` value trees by a subset-annotated transfer recursion.

    Each tree is annotated with the set of states admitting a partial run
    on it with productive frontier; trees are counted per annotation.
    """
    P = frozenset(productive_states(M))
    counts: dict[frozenset, int] = {P: 1} if P else {}
    by_label: dict[Perm, list[tuple[str, tuple[str, ...]]]] = defaultdict(list)
    for q, a, ch in M.transitions:
        by_label[a].append((q, ch))
    for _ in range(n):
        nxt: dict[frozenset, int] = defaultdict(int)
        subsets = list(counts.items())
        for a, moves in by_label.items():
            for combo in itertools.product(subsets, repeat=M.d):
                roots = frozenset(q for q, ch in moves if all(ch[x] in combo[x][0] for x in range(M.d)))
                if not roots:
                    continue
                c = 1
                for _, cnt in combo:
                    c *= cnt
                nxt[roots] += c
        counts = dict(nxt)
    init = set(M.initial)
    return sum(c for s, c in counts.items() if s & init)


def count_runs(M: MullerTreeAutomaton, n: int) -> int:
    """Number of depth-``n`` partial runs from initial states with productive frontier."""
    P = productive_states(M)
    R = {q: (1 if q in P else 0) for q in M.states}
    for _ in range(n):
        new = {q: 0 for q in M.states}
        for q, a, ch in M.transitions:
            c = 1
            for s in ch:
                c *= R[s]
            new[q] += c
        R = new
    return sum(R[q] for q in M.initial)


@dataclass
class CountReport:
    depth: int
    value_trees: int
    enumerated: int | None
    runs: int
    unambiguous: bool

    @property
    def certified(self) -> bool:
        """Transfer count confirmed by explicit enumeration."""
        return self.enumerated == self.value_trees


def count_depth_n(M: MullerTreeAutomaton, n: int, enumerate_up_to: int = 4) -> CountReport:
    """Depth-``n`` value-tree count.

    ``value_trees`` comes from the subset-annotated transfer recursion (runs
    of the bottom-up determinized automaton, hence unambiguous) and, for
    ``n <= enumerate_up_to``, is confirmed by explicit enumeration.  ``runs``
    is the raw run-count recursion of ``M`` itself and ``unambiguous``
    records whether it agrees.
    """
    exact = count_value_trees(M, n)
    enumerated = len(enumerate_value_trees(M, n)) if n <= enumerate_up_to else None
    if enumerated is not None and enumerated != exact:
        raise AssertionError("value-tree enumeration and transfer recursion disagree")
    runs = count_runs(M, n)
    return CountReport(n, exact, enumerated, runs, runs == exact)


# -- decisions ------------------------------------------------------------------


@dataclass
class SubgroupVerdict:
    result: bool
    accepted: dict[str, bool]
    certificates: dict[str, dict | None]


def decide_subgroup(gens: Sequence[Element], M_H: MullerTreeAutomaton, with_certificates: bool = False) -> SubgroupVerdict:
    """Check every generator's portrait against ``M_H``."""
    accepted = {}
    certs: dict[str, dict | None] = {}
    for g in gens:
        ok = accepts_portrait(M_H, g)
        accepted[str(g)] = ok
        if with_certificates and ok and M_H.accepting is not None:
            certs[str(g)] = accepting_run(M_H, g).to_json()
    return SubgroupVerdict(all(accepted.values()), accepted, certs)


def decide_equal(
    G_gens: Sequence[Element], M_G: MullerTreeAutomaton, H_gens: Sequence[Element], M_H: MullerTreeAutomaton
) -> bool:
    return decide_subgroup(G_gens, M_H).result and decide_subgroup(H_gens, M_G).result


def check_acceptance_certificate(M: MullerTreeAutomaton, g: Element, run: RunSlice) -> bool:
    """Replay a co-Büchi acceptance witness: consistent slice, matching value, frontier
    states equal (as isometries) to the corresponding states of ``g``.
    """
    ctx = M.context
    if M.accepting is None or ctx is None or ctx.nucleus is None:
        raise AutomatonError("certificate replay needs a contracting automaton")
    if not run.is_consistent(M):
        return False
    if portrait(g, run.depth).labels != run.value():
        return False
    m = g.machine
    for v, q in run.frontier().items():
        if q not in ctx.nstate:
            return False
        k = g.key
        for x in v:
            k = m.key_state(k, x)
        if not equivalent(m.element(k), ctx.nstate[q]):
            return False
    return True
