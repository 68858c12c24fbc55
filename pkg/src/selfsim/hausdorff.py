"""Hausdorff dimension of the closure from exact level orders.

With ``e_n = log #G_n`` and ``log #Aut_n = (d^n - 1)/(d - 1) * log d!``, the
dimension is the limit of ``e_n / log #Aut_n``.  For a regularly branched
group ``e_n`` obeys an affine recurrence ``e_{n+1} = alpha*e_n + beta`` past
the congruence level, which we fit on a window of exact values and then
verify on further levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .machine import MachineDef
from .quotients import BranchStructure, LevelQuotient
from .tree_automata import build_automaton_closed, count_value_trees


class FitRejected(ValueError):
    """The fitted recurrence failed on a verification level."""


def level_orders(machine: MachineDef, N: int, point_budget: int | None = None) -> list[int]:
    """``#G_n`` for ``n = 0..N`` from stabilizer chains."""
    if point_budget is None:
        point_budget = max(machine.d ** N, 1)
    return [LevelQuotient(machine, n, point_budget=point_budget).order() for n in range(N + 1)]


def exact_log(x: int, base: int) -> int | None:
    """``log_base(x)`` if ``x`` is an exact power of ``base``, else None."""
    if x < 1:
        return None
    k = 0
    while x % base == 0 and x > 1:
        x //= base
        k += 1
    return k if x == 1 else None


def _log_base(orders: list[int], d: int) -> int | None:
    """A base of which every order is an exact power: a prime, else ``d!`` (2 when all are 1)."""
    nontrivial = [x for x in orders if x > 1]
    if not nontrivial:
        return 2
    x = nontrivial[0]
    p = next(f for f in range(2, x + 1) if x % f == 0)
    for b in (p, math.factorial(d)):
        if all(exact_log(y, b) is not None for y in nontrivial):
            return b
    return None


def _log_ratio(p: int, d: int) -> Fraction | None:
    """``log p / log d!`` as a rational when both are powers of one integer."""
    f = math.factorial(d)
    for b in range(2, min(p, f) + 1):
        a, c = exact_log(p, b), exact_log(f, b)
        if a is not None and c is not None:
            return Fraction(a, c)
    return None


def aut_log(d: int, n: int) -> Fraction:
    """``log_{d!} #Aut_n = (d^n - 1)/(d - 1)``."""
    return Fraction(d ** n - 1, d - 1)


def hdim_sequence(machine: MachineDef, N: int, orders: list[int] | None = None) -> list[Fraction | float]:
    """``log #G_n / log #Aut_n`` for ``n = 1..N`` (exact when the logs are commensurable)."""
    if orders is None:
        orders = level_orders(machine, N)
    return _ratios(machine.d, orders)[1:]


def _ratios(d: int, orders: list[int]) -> list[Fraction | float | None]:
    p = _log_base(orders, d)
    lr = _log_ratio(p, d) if p else None
    out: list[Fraction | float | None] = [None]
    for n in range(1, len(orders)):
        if lr is not None:
            out.append(exact_log(orders[n], p) * lr / aut_log(d, n))
        else:
            out.append(math.log(orders[n]) / (float(aut_log(d, n)) * math.log(math.factorial(d))))
    return out


@dataclass
class DimensionReport:
    d: int
    orders: list[int]
    log_base: int | None
    log_orders: list[int] | None
    ratios: list[Fraction | float | None]
    fit_window: tuple[int, int]
    alpha: Fraction | None = None
    beta: Fraction | None = None
    alpha_pinned: bool = False
    verified_levels: list[int] = field(default_factory=list)
    # limit = coefficient * log(log_base) / log(d!)
    coefficient: Fraction | None = None
    limit: Fraction | float | None = None
    monotone: bool | None = None
    # set when the ratios are not monotone: ``limit`` is then the least verified ratio
    lower_confidence: bool = False
    automaton_counts: dict[int, int] = field(default_factory=dict)
    sources: dict[str, str] = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return isinstance(self.limit, Fraction)

    @property
    def estimate(self) -> float | None:
        last = next((r for r in reversed(self.ratios) if r is not None), None)
        return None if last is None else float(last)

    def limit_text(self) -> str:
        if self.limit is None:
            return "unknown"
        if isinstance(self.limit, Fraction):
            return str(self.limit)
        return f"{self.coefficient} * log({self.log_base})/log({math.factorial(self.d)}) ~ {self.limit:.12g}"

    def to_json(self) -> dict:
        def num(x):
            if x is None:
                return None
            return str(x) if isinstance(x, Fraction) else x

        return {
            "d": self.d,
            "orders": [str(o) for o in self.orders],
            "log_base": self.log_base,
            "log_orders": self.log_orders,
            "ratios": {n: num(r) for n, r in enumerate(self.ratios) if r is not None},
            "fit_window": list(self.fit_window),
            "recurrence": None
            if self.alpha is None
            else {"alpha": num(self.alpha), "beta": num(self.beta), "alpha_pinned": self.alpha_pinned},
            "verified_levels": self.verified_levels,
            "coefficient": num(self.coefficient),
            "limit": self.limit_text(),
            "limit_float": None if self.limit is None else float(self.limit),
            "monotone": self.monotone,
            "lower_confidence": self.lower_confidence,
            "estimate": self.estimate,
            "automaton_counts": {n: str(c) for n, c in self.automaton_counts.items()},
            "sources": self.sources,
        }


def _fit(e: list[int], n0: int, n1: int, d: int) -> tuple[Fraction, Fraction, bool]:
    """Affine recurrence through ``e[n0..n1]``; alpha is pinned to ``d`` when underdetermined."""
    pairs = [(Fraction(e[n]), Fraction(e[n + 1])) for n in range(n0, n1)]
    alpha = None
    for (x0, y0), (x1, y1) in zip(pairs, pairs[1:]):
        if x0 != x1:
            alpha = (y1 - y0) / (x1 - x0)
            break
    pinned = alpha is None
    if pinned:
        alpha = Fraction(d)
    beta = pairs[0][1] - alpha * pairs[0][0]
    for x, y in pairs:
        if alpha * x + beta != y:
            raise FitRejected(f"no affine recurrence fits levels {n0}..{n1}")
    return alpha, beta, pinned


def hdim_exact(
    machine: MachineDef | None,
    B: BranchStructure,
    fit_window: tuple[int, int] = (3, 4),
    verify_extra: int = 2,
) -> DimensionReport:
    """Certified Hausdorff dimension of the closure.

    Window values come from the level orders of ``machine``, cross-checked
    against the value-tree count of the closure automaton built from ``B``.
    Without a machine the automaton counts are used alone (this covers branch
    data such as the full group, which no finitely generated group realizes
    as a closure).  Verification levels are computed independently of the fit.
    Raises :class:`FitRejected` on any mismatch.
    """
    n0, n1 = fit_window
    if not 0 <= n0 < n1:
        raise ValueError("fit window must satisfy 0 <= n0 < n1")
    d = B.d
    top = n1 + verify_extra
    M = build_automaton_closed(B)
    counts = {n: count_value_trees(M, n) for n in range(top + 1)}
    if machine is not None:
        if machine.d != d:
            raise ValueError("machine and branch structure disagree on the alphabet")
        orders = level_orders(machine, top)
        for n in range(n0, n1 + 1):
            if orders[n] != counts[n]:
                raise FitRejected(
                    f"level {n}: order {orders[n]} differs from closure automaton count {counts[n]}"
                )
        source = "stabilizer chain"
    else:
        orders = [counts[n] for n in range(top + 1)]
        source = "closure automaton value-tree count"

    ratios = _ratios(d, orders)
    p = _log_base(orders, d)
    rep = DimensionReport(d, orders, p, None, ratios, (n0, n1), automaton_counts=counts)
    rep.sources = {"orders": source, "window_cross_check": "closure automaton value-tree count"}
    if p is None:
        raise FitRejected("level orders are not powers of a common base; no exact recurrence")
    e = [exact_log(o, p) for o in orders]
    rep.log_orders = e

    alpha, beta, pinned = _fit(e, n0, n1, d)
    rep.alpha, rep.beta, rep.alpha_pinned = alpha, beta, pinned
    for n in range(n1, top):
        if alpha * e[n] + beta != e[n + 1]:
            raise FitRejected(f"recurrence predicts e_{n + 1} = {alpha * e[n] + beta}, found {e[n + 1]}")
        rep.verified_levels.append(n + 1)

    lr = _log_ratio(p, d)
    if alpha > d:
        raise FitRejected(f"fitted growth rate {alpha} exceeds the degree {d}")
    if alpha < d:
        coeff = Fraction(0)
    else:
        # e_n + beta/(d-1) = C d^n, and log_{d!} #Aut_n ~ d^n/(d-1)
        C = (e[n0] + beta / (d - 1)) / Fraction(d) ** n0
        coeff = C * (d - 1)
    rep.coefficient = coeff
    if lr is not None:
        rep.limit = coeff * lr
    else:
        rep.limit = float(coeff) * math.log(p) / math.log(math.factorial(d))
    tail = [float(r) for r in ratios[n0:] if r is not None]
    rep.monotone = all(a <= b for a, b in zip(tail, tail[1:])) or all(a >= b for a, b in zip(tail, tail[1:]))
    if not rep.monotone:
        rep.limit = min((r for r in ratios[n0:] if r is not None), key=float)
        rep.lower_confidence = True
    return rep


def hdim_report_ratios_only(machine: MachineDef, N: int) -> DimensionReport:
    """Fallback report: orders and ratios without a fitted limit."""
    orders = level_orders(machine, N)
    p = _log_base(orders, machine.d)
    e = [exact_log(o, p) for o in orders] if p else None
    return DimensionReport(machine.d, orders, p, e, _ratios(machine.d, orders), (0, 0))

