"""Nucleus computation and structural checks (level-transitivity, recurrence)."""

from __future__ import annotations

from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field

from .machine import Element, Key, MachineDef, act, state_at
from .perm import BudgetExceeded


class NucleusNotFound(RuntimeError):
    """Contraction could not be certified within the bound (not a proof of non-contraction)."""


class ElementBank:
    """Representatives of pairwise distinct isometries of one machine.

    Lookups hash by the induced permutation of a few levels and confirm
    candidates with an exact triviality check.
    """

    def __init__(self, machine: MachineDef, depth: int | None = None):
        self.machine = machine
        if depth is None:
            depth = 1
            while machine.d ** (depth + 1) <= 64:
                depth += 1
        self.depth = depth
        self.reps: list[Key] = []
        self._buckets: dict[tuple, list[int]] = {}
        self._lookup_cache: dict[Key, int] = {}

    def __len__(self) -> int:
        return len(self.reps)

    def find(self, key: Key) -> int | None:
        hit = self._lookup_cache.get(key)
        if hit is not None:
            return hit
        m = self.machine
        sig = m.level_perm(key, self.depth)
        for i in self._buckets.get(sig, ()):
            r = self.reps[i]
            if m.key_is_trivial(m.reduce(key + tuple(m.class_inv[c] for c in reversed(r)))):
                self._lookup_cache[key] = i
                return i
        return None

    def add(self, key: Key) -> tuple[int, bool]:
        """Return (index, is_new)."""
        i = self.find(key)
        if i is not None:
            return i, False
        i = len(self.reps)
        self.reps.append(key)
        self._buckets.setdefault(self.machine.level_perm(key, self.depth), []).append(i)
        self._lookup_cache[key] = i
        return i, True


def _gen_keys(machine: MachineDef, gens: Sequence[Element] | None) -> list[Key]:
    if gens is None:
        gens = machine.generator_elements()
    keys = []
    for g in gens:
        keys.append(g.key)
        keys.append(g.inverse().key)
    return keys


def _close_states(bank: ElementBank, seeds: list[int], edges: dict[int, tuple[int, ...]], limit: int) -> None:
    m = bank.machine
    queue = deque(i for i in seeds if i not in edges)
    while queue:
        i = queue.popleft()
        if i in edges:
            continue
        key = bank.reps[i]
        children = []
        for x in range(m.d):
            j, new = bank.add(m.key_state(key, x))
            if len(bank) > limit:
                raise NucleusNotFound(f"state closure exceeded {limit} elements")
            children.append(j)
            if j not in edges:
                queue.append(j)
        edges[i] = tuple(children)


def _core(nodes: set[int], edges: dict[int, tuple[int, ...]]) -> set[int]:
    """Nodes lying on a cycle of the state graph, together with their descendants."""
    # a node is on a cycle iff it is reachable from one of its children
    on_cycle = set()
    for v in nodes:
        seen = set()
        stack = list(edges[v])
        while stack:
            w = stack.pop()
            if w == v:
                on_cycle.add(v)
                break
            if w in seen:
                continue
            seen.add(w)
            stack.extend(edges[w])
    core = set(on_cycle)
    stack = list(on_cycle)
    while stack:
        v = stack.pop()
        for w in edges[v]:
            if w not in core:
                core.add(w)
                stack.append(w)
    return core


@dataclass
class Nucleus:
    machine: MachineDef
    elements: list[Element]
    # transitions n -> (n@x) as indices into ``elements``
    transitions: list[tuple[int, ...]] = field(default_factory=list)
    rounds: int = 0

    def __len__(self) -> int:
        return len(self.elements)

    def index_of(self, g: Element) -> int | None:
        bank = self._bank()
        return bank.find(g.key)

    def _bank(self) -> ElementBank:
        bank = getattr(self, "_cached_bank", None)
        if bank is None:
            bank = ElementBank(self.machine)
            for e in self.elements:
                bank.add(e.key)
            self._cached_bank = bank
        return bank


def nucleus(
    machine: MachineDef,
    bound: int = 32,
    gens: Sequence[Element] | None = None,
    closure_limit: int | None = None,
) -> Nucleus:
    """Compute the nucleus by iterating ``N <- core(states(N . N))`` to a fixed point.

    Raises :class:`NucleusNotFound` if the candidate set grows past ``bound``.
    """
    if closure_limit is None:
        closure_limit = max(64, 40 * bound)
    m = machine
    bank = ElementBank(m)
    edges: dict[int, tuple[int, ...]] = {}
    seeds = [bank.add(())[0]] + [bank.add(k)[0] for k in _gen_keys(m, gens)]
    _close_states(bank, seeds, edges, closure_limit)
    current = _core(set(edges), edges)
    if len(current) > bound:
        raise NucleusNotFound(f"candidate nucleus exceeds bound {bound}")
    rounds = 0
    while True:
        rounds += 1
        members = sorted(current)
        prods = [bank.add(m.reduce(bank.reps[i] + bank.reps[j]))[0] for i in members for j in members]
        if len(bank) > closure_limit:
            raise NucleusNotFound(f"state closure exceeded {closure_limit} elements")
        _close_states(bank, prods, edges, closure_limit)
        reach = set()
        stack = list(set(prods) | current)
        while stack:
            v = stack.pop()
            if v in reach:
                continue
            reach.add(v)
            stack.extend(edges[v])
        nxt = _core(reach, edges) | current
        if len(nxt) > bound:
            raise NucleusNotFound(f"candidate nucleus exceeds bound {bound}")
        if nxt == current:
            break
        current = nxt
    members = sorted(current)
    pos = {i: n for n, i in enumerate(members)}
    elements = [m.element(bank.reps[i]) for i in members]
    transitions = [tuple(pos[j] for j in edges[i]) for i in members]
    return Nucleus(m, elements, transitions, rounds)


def check_level_transitive(machine: MachineDef, n: int, gens: Sequence[Element] | None = None) -> bool:
    """True iff the orbit of ``0^n`` under the group is all of ``X^n``."""
    if n == 0:
        return True
    if gens is None:
        gens = machine.generator_elements()
    start = (0,) * n
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for g in gens:
            for h in (g, g.inverse()):
                w = act(h, u)
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return len(seen) == machine.d ** n


@dataclass
class RecurrenceResult:
    certified: bool
    witnesses: dict[tuple[str, tuple[int, ...]], Element]
    missing: list[tuple[str, tuple[int, ...]]]


def ball(machine: MachineDef, radius: int, gens: Sequence[Element] | None = None) -> list[Key]:
    """Distinct reduced words of length at most ``radius`` over generators and inverses, by length."""
    keys = _gen_keys(machine, gens)
    letters = sorted(set(keys))
    out = [()]
    seen = {()}
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for s in letters:
                k = machine.reduce(w + s)
                if k not in seen:
                    seen.add(k)
                    nxt.append(k)
        out.extend(nxt)
        frontier = nxt
    return out


class ElementBall:
    """Distinct group elements grouped by word length, grown one layer at a time."""

    def __init__(self, machine: MachineDef, gens: Sequence[Element] | None = None):
        self.machine = machine
        self.letters = sorted(set(_gen_keys(machine, gens)))
        self.bank = ElementBank(machine)
        self.bank.add(())
        self.layers: list[list[Key]] = [[()]]

    @property
    def radius(self) -> int:
        return len(self.layers) - 1

    def grow(self) -> list[Key]:
        m = self.machine
        layer = []
        for w in self.layers[-1]:
            for s in self.letters:
                k = m.reduce(w + s)
                _, new = self.bank.add(k)
                if new:
                    layer.append(k)
        self.layers.append(layer)
        return layer


def check_recurrent(
    machine: MachineDef,
    depth: int = 1,
    search_len: int = 4,
    gens: Sequence[Element] | None = None,
) -> RecurrenceResult:
    """Search, for each generator g and vertex v with |v| <= depth, a word h
    fixing v with ``h@v == g``.  Bounded search: failure yields "unknown".
    """
    from itertools import product

    if gens is None:
        gens = machine.generator_elements()
    m = machine
    candidates = ball(m, search_len, gens)
    witnesses: dict[tuple[str, tuple[int, ...]], Element] = {}
    missing = []
    for g in gens:
        ginv = tuple(m.class_inv[c] for c in reversed(g.key))
        for n in range(1, depth + 1):
            for v in product(range(m.d), repeat=n):
                found = None
                for h in candidates:
                    if m.key_act(h, v) != v:
                        continue
                    s = h
                    for x in v:
                        s = m.key_state(s, x)
                    if m.key_is_trivial(m.reduce(s + ginv)):
                        found = h
                        break
                if found is None:
                    missing.append((str(g), v))
                else:
                    witnesses[(str(g), v)] = m.element(found)
    return RecurrenceResult(not missing, witnesses, missing)


def orbit_of(machine: MachineDef, u: Sequence[int], gens: Sequence[Element] | None = None,
             budget: int = 1_000_000) -> set[tuple[int, ...]]:
    """Orbit of the vertex ``u`` under the group (breadth-first search)."""
    if gens is None:
        gens = machine.generator_elements()
    letters = [g for h in gens for g in (h, h.inverse())]
    start = tuple(u)
    seen = {start}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        for g in letters:
            y = act(g, w)
            if y not in seen:
                seen.add(y)
                if len(seen) > budget:
                    raise BudgetExceeded("orbit exceeded budget")
                queue.append(y)
    return seen
