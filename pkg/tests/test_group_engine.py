import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pink_forge.dickson import element_orders
from pink_forge.errors import (
    CapExceeded,
    DomainError,
    HypothesisUnmet,
    PrecisionMismatch,
)
from pink_forge.group_engine import (
    ball_group,
    closure,
    commutator_ball_certificate,
    commutator_ball_check,
    commutator_subgroup,
    contains_ball,
    derived_subgroup,
    goursat_combine,
    graph_defect,
    index,
    max_normal_proell,
    projection,
    reduction_image,
    reduction_kernel,
    sl2_generators,
)
from pink_forge.padic_matrix import D, GroupElement, L, Mat2, R, comm, power_stabilize
from pink_forge.sampler import (
    conjugation_graph,
    diagonal_construction,
    random_sl2,
    sample_groups,
)


def g1(m):
    return GroupElement((m,))


def all_sl2(p):
    return [(a, b, c, d) for a, b, c, d in itertools.product(range(p), repeat=4) if (a * d - b * c) % p == 1]


def rowset(G):
    return {tuple(r) for r in G.elements().tolist()}


def mul_rows(x, y, q):
    """Product of two tuples of 2x2 blocks, flattened."""
    out = []
    for j in range(0, len(x), 4):
        a, b, c, d = x[j:j + 4]
        e, f, g, h = y[j:j + 4]
        out += [(a * e + b * g) % q, (a * f + b * h) % q, (c * e + d * g) % q, (c * f + d * h) % q]
    return tuple(out)


def inv_rows(x, q):
    out = []
    for j in range(0, len(x), 4):
        a, b, c, d = x[j:j + 4]
        out += [d % q, -b % q, -c % q, a % q]
    return tuple(out)


def brute_normal_ell_core(elems, p):
    """Largest normal p-subgroup of a finite group of 2x2 blocks mod p: the set of x
    whose normal closure is a p-group."""
    elems = [tuple(e) for e in elems]
    ident = tuple([1, 0, 0, 1] * (len(elems[0]) // 4))
    core = set()
    for x in elems:
        if x in core:
            continue
        conj = {mul_rows(mul_rows(g, x, p), inv_rows(g, p), p) for g in elems}
        H = {ident} | conj
        frontier = list(H)
        while frontier:
            new = []
            for a in frontier:
                for b in conj:
                    c = mul_rows(a, b, p)
                    if c not in H:
                        H.add(c)
                        new.append(c)
            frontier = new
        size = len(H)
        while size % p == 0:
            size //= p
        if size == 1:
            core |= H
    return core


# ---------------------------------------------------------------- closure


def test_closure_examples():
    assert closure([GroupElement.identity(5, 2, 1)]).order == 1
    G = closure([g1(L(1, 5, 1)), g1(R(1, 5, 1))])
    assert G.order == 120 == len(all_sl2(5)) == 5 * (25 - 1)
    assert rowset(G) == set(all_sl2(5))
    B = closure([g1(L(5, 5, 2)), g1(R(5, 5, 2)), g1(D(5, 5, 2))])
    assert B.order == 125
    brute = {(a, b, c, d) for a, b, c, d in itertools.product(range(25), repeat=4)
             if (a * d - b * c) % 25 == 1 and a % 5 == 1 and d % 5 == 1 and b % 5 == 0 and c % 5 == 0}
    assert rowset(B) == brute


def test_closure_cap_and_preconditions():
    with pytest.raises(CapExceeded):
        closure([g1(L(1, 5, 1)), g1(R(1, 5, 1))], cap=50)
    with pytest.raises(DomainError):
        closure([g1(Mat2(5, 1, 2, 0, 0, 1))])
    with pytest.raises(PrecisionMismatch):
        closure([g1(L(1, 5, 1)), g1(L(1, 5, 2))])


def test_elements_sorted_and_membership():
    G = closure([g1(L(1, 3, 2)), g1(D(3, 3, 2))])
    rows = G.elements()
    keys = [tuple(r) for r in rows.tolist()]
    assert keys == sorted(keys)
    for r in keys:
        assert g1(Mat2(3, 2, *r)) in G
    assert g1(R(1, 3, 2)) not in G


# ---------------------------------------------------------------- balls


def test_contains_ball_examples():
    full = closure(sl2_generators(5, 2, 2))
    assert contains_ball(full, (1, 2)) and contains_ball(full, (0, 0))
    B = ball_group(5, 3, (1,))
    assert contains_ball(B, (1,))
    assert not contains_ball(B, (0,))
    G = closure([g1(L(4, 2, 6)), g1(R(4, 2, 6)), g1(D(4, 2, 6))])
    assert contains_ball(G, (2,))
    assert G.order == 2**12
    with pytest.raises(DomainError):
        contains_ball(G, (1,))
    with pytest.raises(DomainError):
        contains_ball(closure([GroupElement.identity(3, 2, 1)]), (0,))


def test_ball_order_matches_count():
    # |B_l(s) mod l^m| = l^(3(m - s)) for s >= 1 (+v for l = 2)
    for p, m, s in [(5, 2, 1), (3, 3, 1), (3, 3, 2), (2, 4, 2), (7, 2, 1)]:
        assert ball_group(p, m, (s,)).order == p ** (3 * (m - s))


# ---------------------------------------------------------------- derived subgroup


def test_derived_subgroup_examples():
    A = closure([g1(D(5, 5, 2))])
    assert derived_subgroup(A).order == 1
    S = closure([g1(L(1, 5, 1)), g1(R(1, 5, 1))])
    Sp = derived_subgroup(S)
    assert Sp.order == 120
    brute = set()
    elems = [Mat2(5, 1, *r) for r in all_sl2(5)]
    for a in elems:
        for b in elems:
            brute.add(comm(a, b).residues())
    assert brute <= rowset(Sp)
    B = ball_group(5, 4, (1,))
    assert contains_ball(derived_subgroup(B), (2,))


def test_commutator_subgroup_matches_derived():
    B = ball_group(3, 3, (1,))
    assert rowset(commutator_subgroup(B, B)) == rowset(derived_subgroup(B))


# ---------------------------------------------------------------- reductions


def test_reduction_examples():
    G = closure(sl2_generators(5, 2))
    assert rowset(reduction_image(G, 2)) == rowset(G)
    assert reduction_image(ball_group(5, 2, (1,)), 1).order == 1
    K = reduction_kernel(G, 1)
    assert K.order == 125
    assert reduction_image(G, 1).order == 120
    assert G.order == 120 * 125
    with pytest.raises(DomainError):
        reduction_kernel(G, 3)


def test_projection_and_index():
    G = closure(diagonal_construction(3, 2, 2))
    P = projection(G, [0])
    assert P.order == 24 * 27
    K = reduction_kernel(G, 1)
    assert index(G, K) == reduction_image(G, 1).order
    with pytest.raises(DomainError):
        index(K, G)


# ---------------------------------------------------------------- N(G)


def borel5():
    return closure([g1(Mat2(5, 1, 2, 0, 0, 3)), g1(R(1, 5, 1))])


def test_max_normal_proell_examples():
    B = borel5()
    assert B.order == 20
    N = max_normal_proell(B)
    assert N.order == 5
    cartan = closure([g1(Mat2(5, 1, 2, 0, 0, 3))])
    assert cartan.order == 4
    assert max_normal_proell(cartan).order == 1
    P = ball_group(5, 2, (1,))
    assert rowset(max_normal_proell(P)) == rowset(P)
    S = closure(sl2_generators(5, 1))
    assert max_normal_proell(S).order == 1


def _check_core(G):
    p = G.prime
    img = reduction_image(G, 1)
    assert img.order <= 600
    N = max_normal_proell(G)
    truth = brute_normal_ell_core(img.elements().tolist(), p)
    assert rowset(reduction_image(N, 1)) == truth
    # N is the full preimage of its image, and normal in G
    assert N.order == len(truth) * reduction_kernel(G, 1).order
    for g in G.generators:
        for h in N.generators:
            assert g * h * g.inverse() in N


def test_max_normal_proell_brute_force_small():
    _check_core(borel5())
    p = 3
    gens = [GroupElement((Mat2(p, 1, 2, 0, 0, 2), Mat2(p, 1, 1, 1, 0, 1))),
            GroupElement((R(1, p, 1), Mat2(p, 1, 0, 2, 1, 0)))]
    _check_core(closure(gens))
    _check_core(closure(sl2_generators(3, 1, 2)))


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000))
def test_max_normal_proell_brute_force_sampled(seed):
    sg = sample_groups(3, 2, 2, 1, seed, ball=1)[0]
    G = closure(sg.generators)
    _check_core(G)
    N = max_normal_proell(G)
    assert N.image_is_lgroup()
    assert rowset(max_normal_proell(N)) == rowset(N)


# ---------------------------------------------------------------- Goursat


def test_goursat_examples():
    # the full product SL2(Z/125)^3 is far over the cap, so it is passed by generators
    rep = goursat_combine(sl2_generators(5, 3, 3), [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    assert rep.levels == (2, 2, 2) and rep.verdict == "Verified"
    for k in range(3):
        assert contains_ball(rep.kernels[k], (2,))
    gens = diagonal_construction(5, 4, 3)
    rep = goursat_combine(gens, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    assert rep.verified == (True, True, True)
    for k, comms in rep.witnesses.items():
        for c in comms:
            assert all(c.parts[j].is_identity() for j in range(3) if j != k)
    two = goursat_combine(sl2_generators(5, 2, 2), [[0, 1], [1, 0]])
    assert two.levels == (1, 1) and two.verdict == "Verified"


def test_goursat_hypothesis_unmet():
    # graph of the identity: no (Id, g) elements with g nontrivial
    gens = [GroupElement((g, g)) for g in (L(1, 5, 2), R(1, 5, 2))]
    with pytest.raises(HypothesisUnmet):
        goursat_combine(gens, [[0, 1], [1, 0]])
    with pytest.raises(DomainError):
        goursat_combine(sl2_generators(3, 2, 2), [[0, 0], [0, 0]])


# ---------------------------------------------------------------- graph defect


def test_graph_defect_examples():
    p, m = 5, 2
    diag = closure([GroupElement((g, g)) for g in (L(1, p, m), R(1, p, m))])
    for t in range(m + 1):
        assert graph_defect(diag, t) is None
    prod = closure(sl2_generators(p, m, 2))
    w = graph_defect(prod, 1)
    assert w is not None
    assert w.parts[0].congruent_identity(1) != w.parts[1].congruent_identity(1)
    M = Mat2(p, m, 2, 1, 1, 1)
    ident = Mat2.identity(p, m)
    extra = tuple(GroupElement((ident, x)) for x in (L(5, p, m), R(5, p, m), D(5, p, m)))
    G = closure(conjugation_graph(p, m, M, extra))
    w = graph_defect(G, 2)
    assert w is not None and w.parts[0].is_identity() and not w.parts[1].is_identity()
    assert graph_defect(G, 1) is None
    # the generator-only path agrees with the exhaustive scan
    assert graph_defect(conjugation_graph(p, m, M), 2) is None
    assert graph_defect(list(G.generators), 2) is not None


# ---------------------------------------------------------------- properties


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([(3, 2, 1), (5, 1, 1), (3, 1, 2), (2, 3, 1)]), st.integers(0, 10_000))
def test_closure_order_independent_and_idempotent(pmn, seed):
    p, m, n = pmn
    sg = sample_groups(p, m, n, 1, seed, ball=1 if p > 2 else 2)[0]
    gens = list(sg.generators)
    G = closure(gens)
    random.Random(seed).shuffle(gens)
    assert np.array_equal(closure(gens).elements(), G.elements())
    again = closure(list(G))
    assert np.array_equal(again.elements(), G.elements())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_lagrange(seed, k):
    sg = sample_groups(3, 2, 2, 1, seed)[0]
    G = closure(sg.generators)
    for H in (reduction_kernel(G, k), max_normal_proell(G), derived_subgroup(G)):
        assert G.order % H.order == 0
        assert index(G, H) * H.order == G.order
    assert G.order == reduction_image(G, 1).order * reduction_kernel(G, 1).order


DESK = [(p, s1, s2) for p in (3, 5) for s1 in (1, 2) for s2 in (1, 2)]


@pytest.mark.parametrize("p,s1,s2", DESK)
def test_commutator_desk_scale(p, s1, s2):
    m = s1 + s2 + 2
    level, ok = commutator_ball_check(p, m, (s1, s2), method="frattini")
    assert (level, ok) == (s1 + s2, True)


def test_commutator_desk_scale_two():
    assert commutator_ball_check(2, 6, (2, 2), method="frattini") == (5, True)
    assert commutator_ball_check(2, 6, (2, 2)) == (5, True)


@pytest.mark.parametrize("p,m,levels", [(3, 3, (1, 1)), (3, 4, (1, 1)), (5, 3, (1, 1)), (2, 6, (2, 2))])
def test_frattini_witnesses_lie_in_enumerated_commutator(p, m, levels):
    wit = commutator_ball_certificate(p, m, levels)
    assert wit is not None and len(wit) == 3
    C = ball_group(p, m, (levels[0],))
    for s in levels[1:]:
        C = commutator_subgroup(C, ball_group(p, m, (s,)))
    k = sum(levels) + (len(levels) - 1) * (p == 2)
    for w in wit:
        assert g1(w) in C
        assert w.congruent_identity(k)
    assert contains_ball(C, (k,))


def test_commutator_check_preconditions():
    with pytest.raises(DomainError):
        commutator_ball_check(3, 4, (1,))
    with pytest.raises(DomainError):
        commutator_ball_check(2, 6, (1, 2))
    assert commutator_ball_check(5, 2, (1, 1)) == (2, None)
    with pytest.raises(DomainError):
        commutator_ball_certificate(5, 2, (1, 1))


def _prime_to_ell_element(rng, p, m):
    while True:
        y = random_sl2(rng, p, m)
        o = int(element_orders(np.array([y.reduce(1).residues()]), p)[0])
        if o % p and o > 2:
            return y, o


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([5, 7]), st.integers(0, 10_000), st.booleans())
def test_trivial_mod_ell_implies_trivial(p, seed, sign):
    m = 3
    rng = random.Random(seed)
    q = p**m
    x = L(p * rng.randrange(q), p, m) * R(p * rng.randrange(q), p, m) * D(p * rng.randrange(q), p, m)
    if sign:
        x = x.scale(-1)
    y, o = _prime_to_ell_element(rng, p, m)
    lim = power_stabilize(GroupElement((x, y)), p * p)
    z = lim.parts[1]
    assert lim.parts[0] == Mat2.identity(p, m).scale(-1 if sign else 1)
    assert int(element_orders(np.array([z.reduce(1).residues()]), p)[0]) == o
    assert (z**o).is_identity()


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(3, 2), (5, 2), (2, 4)]), st.integers(0, 10_000))
def test_slot_witnesses_match_enumeration(pm, seed):
    from pink_forge.group_engine import _slot_witnesses

    p, m = pm
    sg = sample_groups(p, m, 2, 1, seed, ball=m, twists=3)[0]
    G = closure(sg.generators)
    q = p**m
    s = 1 if p > 2 else 2
    targets = [Mat2(p, m, *t) for t in ((1, p**s, 0, 1), (1, 0, p**s, 1), (1 + p**s, 0, 0, pow(1 + p**s, -1, q)))]
    got = _slot_witnesses(list(sg.generators), 0, 1, targets)
    for x in targets:
        ident = Mat2.identity(p, m)
        assert (x.residues() in got) == (GroupElement((ident, x)) in G)
        if x.residues() in got:
            w = got[x.residues()]
            assert w.parts[0].is_identity() and w.parts[1] == x and w in G
