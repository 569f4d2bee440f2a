import random

from hypothesis import given, settings
from hypothesis import strategies as st

from pink_forge.group_engine import closure, contains_ball, reduction_image
from pink_forge.padic_matrix import GroupElement, Mat2
from pink_forge.sampler import (
    ELEMENT_KINDS,
    conjugation_graph,
    diagonal_construction,
    random_ball_element,
    random_gl2,
    random_sl2,
    sample_group,
    sample_groups,
)


def test_same_seed_same_groups():
    a = sample_groups(5, 3, 2, 5, seed=11)
    b = sample_groups(5, 3, 2, 5, seed=11)
    assert [s.generators for s in a] == [s.generators for s in b]
    assert [s.label for s in a] == [s.label for s in b]
    assert sample_groups(5, 3, 2, 5, seed=12) != a


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3, 5, 7]), st.integers(1, 4), st.sampled_from(ELEMENT_KINDS), st.integers(0, 10**6))
def test_random_sl2_has_det_one(p, m, kind, seed):
    g = random_sl2(random.Random(seed), p, m, kind)
    assert g.det() == 1
    M = random_gl2(random.Random(seed), p, m)
    assert M.det() % p != 0
    b = random_ball_element(random.Random(seed), p, m, 1)
    assert b.det() == 1 and b.congruent_identity(1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_proell_samples_are_pro_l(seed):
    sg = sample_group(random.Random(seed), 3, 2, 2, proell=True)
    assert sg.proell
    G = closure(sg.generators)
    # every generator is the identity mod l, so G is an l-group
    assert reduction_image(G, 1).order == 1
    order = G.order
    while order % 3 == 0:
        order //= 3
    assert order == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_samples_contain_their_ball(seed):
    sg = sample_group(random.Random(seed), 5, 2, 2, ball=1)
    assert contains_ball(closure(sg.generators), (1, 1))
    sg = sample_group(random.Random(seed), 3, 3, 1, ball=2)
    assert contains_ball(closure(sg.generators), (2,))


def test_graph_constructions():
    p, m = 5, 2
    gens = conjugation_graph(p, m, Mat2(p, m, 2, 1, 1, 1))
    assert all(g.n == 2 for g in gens)
    # a graph: the group is isomorphic to its first projection SL2(Z/25)
    assert closure(gens).order == 25**3 * 24 // 25
    gens = diagonal_construction(p, m, 3)
    assert all(g.n == 3 for g in gens)
    first_two = closure([GroupElement(g.parts[:2]) for g in gens])
    assert contains_ball(first_two, (1, 1))
