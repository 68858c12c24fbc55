from __future__ import annotations

import math
from fractions import Fraction

import pytest

from selfsim.hausdorff import FitRejected, aut_log, hdim_exact, hdim_sequence, level_orders
from selfsim.quotients import branch_from_file, full_branch_structure
from selfsim.tree_automata import count_depth_n


def test_level_orders(grig, ident):
    assert level_orders(grig, 2)[1:] == [2, 8]
    logs = [o.bit_length() - 1 for o in level_orders(grig, 5)[1:]]
    assert logs == [1, 3, 7, 12, 22]
    assert level_orders(ident, 4) == [1] * 5


def test_orders_match_automaton_counts(grig, grig_M1):
    orders = level_orders(grig, 4)
    for n in range(5):
        assert count_depth_n(grig_M1, n).value_trees == orders[n]


def test_closed_form_orders(grig):
    # |G_n| = 2^(5*2^(n-3) + 2) for n >= 3
    orders = level_orders(grig, 6)
    for n in range(3, 7):
        assert orders[n] == 2 ** (5 * 2 ** (n - 3) + 2)


def test_sequence_exact(grig):
    seq = hdim_sequence(grig, 6)
    assert all(isinstance(r, Fraction) for r in seq)
    assert seq[3] == Fraction(4, 5)
    assert all(0 <= r <= 1 for r in seq)


def test_aut_log():
    assert aut_log(2, 4) == 15
    assert aut_log(3, 2) == 4


def test_grigorchuk_dimension(grig, grig_B):
    rep = hdim_exact(grig, grig_B, (3, 4), 2)
    assert rep.limit == Fraction(5, 8)
    assert (rep.alpha, rep.beta) == (2, -2)
    assert rep.verified_levels == [5, 6]
    assert rep.ratios[4] == Fraction(4, 5)
    assert rep.monotone and not rep.lower_confidence
    js = rep.to_json()
    assert js["limit"] == "5/8"
    assert js["ratios"][4] == "4/5"


def test_wider_window_gives_same_answer(grig, grig_B):
    # fitting alpha freely on three levels recovers alpha = 2
    rep = hdim_exact(grig, grig_B, (3, 5), 1)
    assert not rep.alpha_pinned
    assert rep.limit == Fraction(5, 8)


def test_extending_verification_keeps_answer(grig, grig_B):
    a = hdim_exact(grig, grig_B, (3, 4), 1).limit
    b = hdim_exact(grig, grig_B, (3, 4), 3).limit
    assert a == b == Fraction(5, 8)


def test_trivial_and_full(ident):
    assert hdim_exact(ident, branch_from_file(ident)).limit == 0
    assert hdim_exact(None, full_branch_structure(2)).limit == 1
    assert hdim_exact(None, full_branch_structure(3), (1, 2), 2).limit == 1


def test_window_below_congruence_level_rejected(grig, grig_B):
    with pytest.raises(FitRejected):
        hdim_exact(grig, grig_B, (1, 2), 2)


def test_gupta_sidki_dimension(gs):
    rep = hdim_exact(gs, branch_from_file(gs), (2, 3), 1)
    assert (rep.alpha, rep.beta) == (3, -2)
    assert rep.coefficient == Fraction(4, 9)
    assert rep.limit == pytest.approx(4 / 9 * math.log(3) / math.log(6))
    assert not rep.exact
