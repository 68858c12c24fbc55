from __future__ import annotations

import math
import random

import pytest

from conftest import random_word
from selfsim.machine import act, decompose
from selfsim.perm import compose
from selfsim.quotients import (
    BranchError,
    build_branch_structure,
    certify_regular_branching,
    full_branch_structure,
    level_quotient,
    point_index,
    point_word,
)


def test_grigorchuk_level_orders(grig):
    assert level_quotient(grig, 0).order() == 1
    assert level_quotient(grig, 2).order() == 8
    assert level_quotient(grig, 4).order() == 2 ** 12
    for n in range(4):
        lq = level_quotient(grig, n)
        assert lq.order() == lq.bfs_order()


def test_membership(grig):
    from selfsim.perm import closure

    lq = level_quotient(grig, 4)
    for g in grig.generator_elements():
        assert lq.contains(lq.image(g))
    # a lone swap at the vertex 000; G_3 is all of Aut_3 but G_4 is not
    swap = (1, 0) + tuple(range(2, 16))
    everything = closure(lq.gen_perms, 16)
    assert not lq.contains(swap) and swap not in everything


def test_point_indexing():
    for i in range(27):
        assert point_index(point_word(i, 3, 3), 3) == i


@pytest.mark.parametrize("fixture", ["grig", "gs"])
def test_level_image_matches_action(fixture, request):
    m = request.getfixturevalue(fixture)
    rng = random.Random(5)
    n = 3
    for _ in range(30):
        g = random_word(m, rng, 6)
        p = m.level_perm(g.key, n)
        for i in range(m.d ** n):
            assert p[i] == point_index(act(g, point_word(i, m.d, n)), m.d)


def _assembled(g, n):
    """Level-n permutation assembled from the wreath decomposition alone."""
    if n == 0:
        return (0,)
    dec = decompose(g)
    d = len(dec.perm)
    subs = [_assembled(c, n - 1) for c in dec.children]
    size = d ** (n - 1)
    return tuple(dec.perm[x] * size + subs[x][i] for x in range(d) for i in range(size))


def test_level_image_matches_decomposition(grig):
    rng = random.Random(8)
    for _ in range(30):
        g = random_word(grig, rng, 6)
        assert grig.level_perm(g.key, 4) == _assembled(g, 4)


@pytest.mark.parametrize("fixture", ["grig", "gs"])
def test_order_divisibility(fixture, request):
    m = request.getfixturevalue(fixture)
    d = m.d
    orders = [level_quotient(m, n).order() for n in range(4)]
    for n in range(3):
        assert (orders[n + 1] * math.factorial(d) ** (d ** n)) % orders[n] == 0
        # the projection G_{n+1} -> G_n is onto
        assert orders[n + 1] % orders[n] == 0


def test_grigorchuk_branch_structure(grig_B):
    B = grig_B
    assert len(B.Q) == 16
    assert level_quotient(B.machine, 3).order() // B.K_order == 16
    assert len(B.Q1) == 64


def test_pi_is_homomorphism(grig_B):
    B = grig_B
    m = B.machine
    rng = random.Random(1)
    for _ in range(100):
        g, h = random_word(m, rng, 6), random_word(m, rng, 6)
        assert B.pi(g * h) == B.Q.mul(B.pi(g), B.pi(h))


@pytest.mark.parametrize("which", ["grig", "gs"])
def test_phi_of_wreath_image_is_pi(which, request, grig_B):
    from selfsim.quotients import branch_from_file

    B = grig_B if which == "grig" else branch_from_file(request.getfixturevalue("gs"))
    rng = random.Random(2)
    for _ in range(100):
        g = random_word(B.machine, rng, 6)
        assert B.phi[B.wreath_image(g)] == B.pi(g)


def test_wreath_image_is_homomorphism(grig_B):
    B = grig_B
    m = B.machine
    rng = random.Random(4)
    for _ in range(60):
        g, h = random_word(m, rng, 5), random_word(m, rng, 5)
        assert B.wreath_image(g * h) == B.wreath_mul(B.wreath_image(g), B.wreath_image(h))
        assert B.wreath_image(g)[1] == decompose(g).perm


def test_q_table_is_a_group(grig_B):
    Q = grig_B.Q
    n = len(Q)
    for a in range(n):
        assert Q.mul(0, a) == a == Q.mul(a, 0)
        assert Q.mul(a, Q.inv[a]) == 0
    rng = random.Random(0)
    for _ in range(200):
        a, b, c = (rng.randrange(n) for _ in range(3))
        assert Q.mul(Q.mul(a, b), c) == Q.mul(a, Q.mul(b, c))


def test_gupta_sidki_branch(gs):
    from selfsim.quotients import branch_from_file

    B = branch_from_file(gs)
    assert len(B.Q) == 9
    assert certify_regular_branching(gs, B, 4).certified


def test_certify_grigorchuk(grig, grig_B):
    cert = certify_regular_branching(grig, grig_B, 4)
    assert cert.certified
    assert {t.level for t in cert.tests} == {1, 2, 3, 4}


def test_adding_machine_refuted(adding):
    from selfsim.quotients import branch_from_file

    B = branch_from_file(adding)
    cert = certify_regular_branching(adding, B, 3)
    assert not cert.certified
    assert min(t.level for t in cert.tests if not t.member) == 3


def test_trivial_structures(ident, grig):
    from selfsim.quotients import branch_from_file

    B = branch_from_file(ident)
    assert len(B.Q) == 1 and len(B.Q1) == 1
    assert certify_regular_branching(ident, B, 1).certified
    # K = G at level 0: Q is trivial and Q1 is the group of root permutations
    Bg = build_branch_structure(grig, grig.generator_elements(), 0)
    assert len(Bg.Q) == 1
    assert len(Bg.Q1) == 2
    full = full_branch_structure(3)
    assert len(full.Q) == 1 and len(full.Q1) == 6


def test_phi_not_functional_is_reported(grig):
    # the normal closure of a is not regularly branching at level 2
    with pytest.raises(BranchError):
        build_branch_structure(grig, [grig.gen("a")], 2)


def test_wreath_mul_convention(grig_B):
    B = grig_B
    a, b = B.machine.gen("a"), B.machine.gen("b")
    wa, wb = B.wreath_image(a), B.wreath_image(b)
    assert B.wreath_mul(wa, wb)[1] == compose(wa[1], wb[1])
