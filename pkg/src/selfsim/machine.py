"""Self-similar groups given by finite wreath recursions.

A :class:`MachineDef` lists states with an output permutation of the alphabet
and one target state per letter.  Group elements are words in the states and
their inverses; a word ``s1 s2 ... sk`` acts as the composition
``s1 o s2 o ... o sk`` (the rightmost letter acts first), so that
``act(g*h, u) == act(g, act(h, u))``.

Internally every word is reduced to a tuple of *class ids*: equivalent
states of the inverse-closed machine are merged, the identity class is
deleted and adjacent inverse pairs cancel.
"""

from __future__ import annotations

import re
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .perm import BudgetExceeded, Perm, check_perm, compose, identity, inverse, is_identity

IDENTITY = "1"
Key = tuple[int, ...]
Letter = tuple[str, int]

DEFAULT_TRIVIAL_BUDGET = 500_000


class MachineError(ValueError):
    """Malformed group definition or element word."""


@dataclass(frozen=True)
class BranchLine:
    level: int
    kwords: tuple[str, ...]


class MachineDef:
    """Wreath recursion ``q -> (sigma_q, (q@x)_x)`` on a ``d``-letter alphabet.

    ``states`` maps a state name to ``(perm, targets)`` where targets are
    ``(name, exponent)`` pairs, one per letter.  The identity state ``"1"``
    is implicit.
    """

    def __init__(
        self,
        d: int,
        states: dict[str, tuple[Sequence[int], Sequence[Letter]]],
        generators: Sequence[str] | None = None,
        branch: BranchLine | None = None,
    ):
        if d < 2:
            raise MachineError("alphabet size must be at least 2")
        self.d = d
        self.states: dict[str, tuple[Perm, tuple[Letter, ...]]] = {}
        for name, (perm, targets) in states.items():
            if name == IDENTITY:
                raise MachineError("the identity state '1' is implicit")
            perm = tuple(perm)
            try:
                check_perm(perm, d)
            except ValueError as exc:
                raise MachineError(f"state {name}: {exc}") from None
            targets = tuple((t, e) for t, e in targets)
            if len(targets) != d:
                raise MachineError(f"state {name}: expected {d} targets, got {len(targets)}")
            self.states[name] = (perm, targets)
        for name, (_, targets) in self.states.items():
            for t, e in targets:
                if t != IDENTITY and t not in self.states:
                    raise MachineError(f"state {name}: undeclared target {t!r}")
                if e not in (1, -1):
                    raise MachineError(f"state {name}: bad exponent {e}")
        if generators is None:
            generators = list(self.states)
        for g in generators:
            if g != IDENTITY and g not in self.states:
                raise MachineError(f"undeclared generator {g!r}")
        self.generators = tuple(g for g in generators if g != IDENTITY)
        self.branch = branch
        self._build_classes()
        self._trivial_cache: dict[Key, bool] = {}

    # -- inverse closure and state merging ---------------------------------
    def _build_classes(self) -> None:
        d = self.d
        symbols: list[Letter] = [(IDENTITY, 1)]
        for name in self.states:
            symbols.append((name, 1))
        for name in self.states:
            symbols.append((name, -1))
        index = {s: i for i, s in enumerate(symbols)}
        index[(IDENTITY, -1)] = 0

        perms: list[Perm] = []
        children: list[tuple[int, ...]] = []
        for name, e in symbols:
            if name == IDENTITY:
                perms.append(identity(d))
                children.append((0,) * d)
                continue
            perm, targets = self.states[name]
            if e == 1:
                perms.append(perm)
                children.append(tuple(index[t] for t in targets))
            else:
                # (q^-1)@y = (q@sigma^-1(y))^-1
                inv = inverse(perm)
                perms.append(inv)
                children.append(
                    tuple(index[(targets[inv[y]][0], -targets[inv[y]][1])] for y in range(d))
                )

        # Moore-style partition refinement
        labels = {p: i for i, p in enumerate(sorted(set(perms)))}
        cls = [labels[p] for p in perms]
        while True:
            sig = [(cls[i],) + tuple(cls[c] for c in children[i]) for i in range(len(symbols))]
            order: dict[tuple, int] = {}
            new = []
            for s in sig:
                if s not in order:
                    order[s] = len(order)
                new.append(order[s])
            stable = len(order) == len(set(cls))
            cls = new
            if stable:
                break

        # renumber classes by first occurrence so the identity class is 0
        renum: dict[int, int] = {}
        for c in cls:
            renum.setdefault(c, len(renum))
        cls = [renum[c] for c in cls]
        n = len(renum)
        self._sym_index = index
        self._sym_class = cls
        self.class_rep: list[Letter] = [None] * n  # type: ignore[list-item]
        self.class_perm: list[Perm] = [None] * n  # type: ignore[list-item]
        self.class_child: list[tuple[int, ...]] = [None] * n  # type: ignore[list-item]
        for i, s in enumerate(symbols):
            c = cls[i]
            if self.class_rep[c] is None:
                self.class_rep[c] = s
                self.class_perm[c] = perms[i]
                self.class_child[c] = tuple(cls[ch] for ch in children[i])
        self.class_inv = [0] * n
        for i, (name, e) in enumerate(symbols):
            self.class_inv[cls[i]] = cls[index[(name, -e)]]
        self.identity_class = 0

    # -- words ---------------------------------------------------------
    def reduce(self, classes: Iterable[int]) -> Key:
        """Delete identity classes and cancel adjacent inverse pairs."""
        stack: list[int] = []
        inv = self.class_inv
        for c in classes:
            if c == self.identity_class:
                continue
            if stack and inv[stack[-1]] == c:
                stack.pop()
            else:
                stack.append(c)
        return tuple(stack)

    def key_of(self, word: Iterable[Letter]) -> Key:
        cls = []
        for name, e in word:
            try:
                cls.append(self._sym_class[self._sym_index[(name, e)]])
            except KeyError:
                raise MachineError(f"unknown state {name!r}") from None
        return self.reduce(cls)

    def element(self, key: Key) -> "Element":
        """Element spelled with one representative letter per class."""
        return Element(self, tuple(self.class_rep[c] for c in key))

    def parse_element(self, text: str) -> "Element":
        return Element(self, parse_word(text, self))

    def gen(self, name: str) -> "Element":
        return Element(self, ((name, 1),) if name != IDENTITY else ())

    def one(self) -> "Element":
        return Element(self, ())

    def generator_elements(self, with_inverses: bool = False) -> list["Element"]:
        out = [self.gen(g) for g in self.generators]
        if with_inverses:
            seen = {g.key for g in out}
            for g in list(out):
                gi = g.inverse()
                if gi.key not in seen:
                    seen.add(gi.key)
                    out.append(gi)
        return out

    # -- recursion on keys -------------------------------------------------
    def key_perm(self, key: Key) -> Perm:
        p = identity(self.d)
        for c in reversed(key):
            p = compose(self.class_perm[c], p)
        return p

    def key_state(self, key: Key, x: int) -> Key:
        """Reduced word for ``g@x``."""
        out = [0] * len(key)
        y = x
        for i in range(len(key) - 1, -1, -1):
            c = key[i]
            out[i] = self.class_child[c][y]
            y = self.class_perm[c][y]
        return self.reduce(out)

    def key_states(self, key: Key) -> tuple[Key, ...]:
        return tuple(self.key_state(key, x) for x in range(self.d))

    def key_act(self, key: Key, u: Sequence[int]) -> tuple[int, ...]:
        u = list(u)
        for c in reversed(key):
            for i in range(len(u)):
                x = u[i]
                u[i] = self.class_perm[c][x]
                c = self.class_child[c][x]
        return tuple(u)

    def key_is_trivial(self, key: Key, budget: int = DEFAULT_TRIVIAL_BUDGET) -> bool:
        """Exact triviality by exhausting the finite state closure of ``key``."""
        cache = self._trivial_cache
        if not key:
            return True
        hit = cache.get(key)
        if hit is not None:
            return hit
        seen = {key}
        queue = deque([key])
        while queue:
            k = queue.popleft()
            if not is_identity(self.key_perm(k)):
                cache[key] = False
                return False
            for x in range(self.d):
                s = self.key_state(k, x)
                if not s or s in seen:
                    continue
                if cache.get(s) is True:
                    continue
                seen.add(s)
                if len(seen) > budget:
                    raise BudgetExceeded(f"triviality check exceeded {budget} states")
                queue.append(s)
        for k in seen:
            cache[k] = True
        return True

    def key_state_closure(self, key: Key, budget: int = DEFAULT_TRIVIAL_BUDGET) -> dict[Key, tuple[Key, ...]]:
        """Map every reduced state word reachable from ``key`` to its children."""
        graph: dict[Key, tuple[Key, ...]] = {}
        queue = deque([key])
        graph_keys = {key}
        while queue:
            k = queue.popleft()
            ch = self.key_states(k)
            graph[k] = ch
            for s in ch:
                if s not in graph_keys:
                    graph_keys.add(s)
                    if len(graph_keys) > budget:
                        raise BudgetExceeded(f"state closure exceeded {budget} states")
                    queue.append(s)
        return graph

    def level_perm(self, key: Key, n: int) -> Perm:
        """Permutation of X^n (lexicographic indices) induced by the word."""
        d = self.d
        if n == 0:
            return (0,)
        memo: dict[tuple[Key, int], Perm] = {}

        def rec(k: Key, level: int) -> Perm:
            if level == 0:
                return (0,)
            hit = memo.get((k, level))
            if hit is not None:
                return hit
            sigma = self.key_perm(k)
            size = d ** (level - 1)
            out = [0] * (size * d)
            for x in range(d):
                sub = rec(self.key_state(k, x), level - 1)
                base_in = x * size
                base_out = sigma[x] * size
                for i, j in enumerate(sub):
                    out[base_in + i] = base_out + j
            res = tuple(out)
            memo[(k, level)] = res
            return res

        return rec(key, n)

    def __repr__(self) -> str:
        return f"MachineDef(d={self.d}, states={list(self.states)}, generators={list(self.generators)})"

    # -- text format -----------------------------------------------------
    def to_text(self) -> str:
        lines = [f"alphabet {self.d}"]
        for name, (perm, targets) in self.states.items():
            to = " ".join(t if e == 1 else f"{t}^-1" for t, e in targets)
            lines.append(f"state {name} perm=({' '.join(map(str, perm))}) to=[{to}]")
        lines.append("generators " + " ".join(self.generators))
        if self.branch is not None:
            lines.append(f"branch m={self.branch.level} K={','.join(self.branch.kwords)}")
        return "\n".join(lines) + "\n"


_STATE_RE = re.compile(r"^state\s+(\S+)\s+perm=\(([^)]*)\)\s+to=\[([^\]]*)\]\s*$")
_BRANCH_RE = re.compile(r"^branch\s+m=(\d+)\s+K=(.*)$")


def _parse_target(tok: str) -> Letter:
    if tok.endswith("^-1"):
        return tok[:-3], -1
    return tok, 1


def parse_machine(text: str) -> MachineDef:
    """Parse the line-oriented group-definition format."""
    d = None
    states: dict[str, tuple[list[int], list[Letter]]] = {}
    generators = None
    branch = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("alphabet"):
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise MachineError(f"line {lineno}: expected 'alphabet <d>'")
            d = int(parts[1])
            if d < 2:
                raise MachineError(f"line {lineno}: alphabet size must be at least 2")
        elif line.startswith("state"):
            m = _STATE_RE.match(line)
            if not m:
                raise MachineError(f"line {lineno}: malformed state line")
            name = m.group(1)
            if name in states:
                raise MachineError(f"line {lineno}: duplicate state {name!r}")
            try:
                perm = [int(t) for t in m.group(2).replace(",", " ").split()]
            except ValueError:
                raise MachineError(f"line {lineno}: bad permutation") from None
            targets = [_parse_target(t) for t in m.group(3).replace(",", " ").split()]
            states[name] = (perm, targets)
        elif line.startswith("generators"):
            generators = line.split()[1:]
        elif line.startswith("branch"):
            m = _BRANCH_RE.match(line)
            if not m:
                raise MachineError(f"line {lineno}: expected 'branch m=<level> K=<words>'")
            words = tuple(w.strip() for w in m.group(2).split(",") if w.strip())
            branch = BranchLine(int(m.group(1)), words)
        else:
            raise MachineError(f"line {lineno}: unrecognised directive")
    if d is None:
        raise MachineError("missing 'alphabet' line")
    machine = MachineDef(d, states, generators, branch)
    if branch is not None:
        for w in branch.kwords:
            parse_word(w, machine)
    return machine


def load_machine(path: str | Path) -> MachineDef:
    return parse_machine(Path(path).read_text())


def parse_word(text: str, machine: MachineDef) -> tuple[Letter, ...]:
    """Parse a word such as ``a*b^-1``, ``a b c`` or ``abab`` into letters.

    Names are matched greedily against the declared states; ``1`` is the
    identity; ``^k`` raises the preceding letter to an integer power.
    """
    names = sorted(set(machine.states) | {IDENTITY}, key=len, reverse=True)
    out: list[Letter] = []
    i = 0
    s = text.strip()
    while i < len(s):
        ch = s[i]
        if ch in " *.·\t":
            i += 1
            continue
        for name in names:
            if s.startswith(name, i):
                i += len(name)
                break
        else:
            raise MachineError(f"cannot parse word {text!r} at position {i}")
        exp = 1
        m = re.match(r"\^\(?(-?\d+)\)?", s[i:])
        if m:
            exp = int(m.group(1))
            i += m.end()
        if name == IDENTITY:
            continue
        sign = 1 if exp > 0 else -1
        out.extend([(name, sign)] * abs(exp))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Element:
    """A group element: a word of ``(state name, +-1)`` letters over a machine."""

    machine: MachineDef
    word: tuple[Letter, ...] = ()
    key: Key = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(self.word))
        object.__setattr__(self, "key", self.machine.key_of(self.word))

    def __mul__(self, other: "Element") -> "Element":
        if other.machine is not self.machine:
            raise MachineError("cannot multiply elements of different machines")
        return Element(self.machine, self.word + other.word)

    def inverse(self) -> "Element":
        return Element(self.machine, tuple((n, -e) for n, e in reversed(self.word)))

    def __pow__(self, k: int) -> "Element":
        base = self if k >= 0 else self.inverse()
        return Element(self.machine, base.word * abs(k))

    def __eq__(self, other) -> bool:
        return isinstance(other, Element) and other.machine is self.machine and other.key == self.key

    def __hash__(self) -> int:
        return hash((id(self.machine), self.key))

    def __len__(self) -> int:
        return len(self.key)

    def reduced(self) -> "Element":
        return self.machine.element(self.key)

    def __str__(self) -> str:
        return format_word(self.word)


def format_word(word: Sequence[Letter]) -> str:
    if not word:
        return IDENTITY
    return "*".join(n if e == 1 else f"{n}^-1" for n, e in word)


@dataclass(frozen=True)
class WreathDecomposition:
    perm: Perm
    children: tuple[Element, ...]


@dataclass(frozen=True)
class PortraitTree:
    d: int
    depth: int
    labels: dict[tuple[int, ...], Perm]

    def subtree(self, x: int) -> "PortraitTree":
        labels = {v[1:]: p for v, p in self.labels.items() if v and v[0] == x}
        return PortraitTree(self.d, self.depth - 1, labels)

    def pretty(self) -> str:
        from .perm import fmt_cycles

        lines = []
        for v in sorted(self.labels, key=lambda w: (len(w), w)):
            name = "".join(map(str, v)) or "e"
            lines.append(f"{name}: {fmt_cycles(self.labels[v])}")
        return "\n".join(lines)


def _check_letters(machine: MachineDef, v: Sequence[int]) -> None:
    for x in v:
        if not (isinstance(x, int) and 0 <= x < machine.d):
            raise MachineError(f"letter {x!r} outside alphabet 0..{machine.d - 1}")


def decompose(g: Element) -> WreathDecomposition:
    m = g.machine
    return WreathDecomposition(m.key_perm(g.key), tuple(m.element(s) for s in m.key_states(g.key)))


def state_at(g: Element, v: Sequence[int]) -> Element:
    """Return ``g@v``."""
    m = g.machine
    _check_letters(m, v)
    k = g.key
    for x in v:
        k = m.key_state(k, x)
    return m.element(k)


def act(g: Element, u: Sequence[int]) -> tuple[int, ...]:
    _check_letters(g.machine, u)
    return g.machine.key_act(g.key, u)


def is_trivial(g: Element, budget: int = DEFAULT_TRIVIAL_BUDGET) -> bool:
    return g.machine.key_is_trivial(g.key, budget)


def equivalent(g: Element, h: Element, budget: int = DEFAULT_TRIVIAL_BUDGET) -> bool:
    """True iff ``g`` and ``h`` are the same tree isometry."""
    if g.machine is not h.machine:
        return portraits_equal(g, h, budget)
    return g.machine.key_is_trivial(g.machine.reduce(g.key + tuple(
        g.machine.class_inv[c] for c in reversed(h.key))), budget)


def portraits_equal(g: Element, h: Element, budget: int = DEFAULT_TRIVIAL_BUDGET) -> bool:
    """Compare isometries over possibly different machines by synchronised closure."""
    mg, mh = g.machine, h.machine
    if mg.d != mh.d:
        return False
    start = (g.key, h.key)
    seen = {start}
    queue = deque([start])
    while queue:
        a, b = queue.popleft()
        if mg.key_perm(a) != mh.key_perm(b):
            return False
        for x in range(mg.d):
            nxt = (mg.key_state(a, x), mh.key_state(b, x))
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > budget:
                    raise BudgetExceeded("portrait comparison exceeded budget")
                queue.append(nxt)
    return True


def words_of_length(d: int, n: int) -> list[tuple[int, ...]]:
    """All words of length ``n`` in lexicographic order."""
    import itertools

    return [tuple(w) for w in itertools.product(range(d), repeat=n)]


def portrait(g: Element, n: int) -> PortraitTree:
    m = g.machine
    labels: dict[tuple[int, ...], Perm] = {}
    frontier = [((), g.key)]
    for _ in range(n):
        nxt = []
        for v, k in frontier:
            labels[v] = m.key_perm(k)
            for x in range(m.d):
                nxt.append((v + (x,), m.key_state(k, x)))
        frontier = nxt
    return PortraitTree(m.d, n, labels)


def finitary_element(d: int, labels: dict[tuple[int, ...], Sequence[int]], name: str = "f") -> Element:
    """Element with the given portrait labels and identity labels elsewhere.

    Builds a fresh machine with one state per labelled vertex (and its
    ancestors); useful for isometries outside any given group.
    """
    vertices = set()
    for v in labels:
        for i in range(len(v) + 1):
            vertices.add(tuple(v[:i]))
    if not vertices:
        vertices.add(())

    def sname(v):
        return name + "_" + ("".join(map(str, v)) if v else "e")

    states = {}
    for v in sorted(vertices, key=lambda w: (len(w), w)):
        perm = tuple(labels.get(v, identity(d)))
        targets = [(sname(v + (x,)), 1) if v + (x,) in vertices else (IDENTITY, 1) for x in range(d)]
        states[sname(v)] = (perm, targets)
    machine = MachineDef(d, states, [sname(())])
    return machine.gen(sname(()))
