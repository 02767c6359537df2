import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haarfactor import dyadic
from haarfactor.dyadic import DyadicInterval as DI, ROOT
from haarfactor.errors import DiagonalError
from haarfactor.faithful import validate
from haarfactor.operators import (HaarMultiplier, OperatorMatrix, check_large_diagonal, identity,
                                  op_norm_lower, random_operator)
from haarfactor.reduce_positive import (factor_through_signed, generations, leaf_cover,
                                        ntilde_min, partition_by_diagonal, quadratic_value,
                                        reduce, select_sign_and_s,
                                        signs_by_conditional_expectation)
from haarfactor.stabilize import StabilizationParams

from oracles import best_signs, generation_index


def test_ntilde_min_examples():
    assert ntilde_min(3, 1) == 192
    assert ntilde_min(1, 1) == 8
    assert [ntilde_min(N, 1) for N in range(6)] == sorted(ntilde_min(N, 1) for N in range(6))


def test_partition_examples():
    A1, A2 = partition_by_diagonal(identity(3), 1.0)
    assert len(A1) == 15 and A2 == []
    A1, A2 = partition_by_diagonal(-identity(3), 1.0)
    assert A1 == [] and len(A2) == 15
    M = HaarMultiplier.from_levels([0.5, -0.5, 0.5, -0.5]).as_operator()
    A1, _ = partition_by_diagonal(M, 0.5)
    assert {K.level for K in A1} == {0, 2}
    with pytest.raises(DiagonalError):
        partition_by_diagonal(identity(2) * 0.3, 0.5)


def test_generations_examples():
    g = generations([ROOT, DI(1, 0), DI(1, 1), DI(2, 0)])
    assert g.generations == ((ROOT,), (DI(1, 0), DI(1, 1)), (DI(2, 0),))
    full = generations(list(dyadic.enumerate_upto(3)))
    assert all(set(full[k]) == set(dyadic.enumerate_level(k)) for k in range(4))
    anti = [DI(2, 0), DI(2, 1), DI(1, 1)]
    assert set(generations(anti)[0]) == set(anti)


@given(st.sets(st.integers(0, 30)))
def test_generations_match_ancestor_count(indices):
    coll = [dyadic.from_index(i) for i in indices]
    g = generations(coll)
    want = generation_index([(K.level, K.pos) for K in coll])
    for k, gen in enumerate(g.generations):
        for K in gen:
            assert want[(K.level, K.pos)] == k
        assert all(a.disjoint(b) for a in gen for b in gen if a != b)
    assert sorted(K for gen in g.generations for K in gen) == sorted(coll)


def _left_subtree_negative(Nt):
    d = np.ones(dyadic.dimension(Nt))
    for K in dyadic.enumerate_upto(Nt):
        if K.level >= 1 and DI(1, 0).contains(K):
            d[K.index] = -1
    return HaarMultiplier(Nt, d).as_operator()


def test_select_sign_examples():
    sel = select_sign_and_s(identity(4), 1, 2, 1.0)
    assert (sel.sigma, sel.s, sel.ratio) == (1, 0, 1)
    neg = select_sign_and_s(-identity(4), 1, 2, 1.0)
    assert (neg.sigma, neg.s) == (-1, 0)
    # left subtree negative: leaf cover ties at 1/2, generations [1, 1/2, 1/2, 1/2, 1/2]
    T = _left_subtree_negative(4)
    assert leaf_cover(T) == (0.5, 0.5)
    sel = select_sign_and_s(T, 1, 2, 1.0)
    assert sel.sigma == 1
    assert sel.measures == [1.0, 0.5, 0.5, 0.5, 0.5]
    assert sel.s == 1 and sel.ratio == 1.0


def test_signs_examples():
    M = HaarMultiplier(2, np.linspace(0.5, 1.0, 7)).as_operator()
    block = [DI(2, 0), DI(2, 3), DI(1, 0)]
    theta = signs_by_conditional_expectation(M, block)
    diag_sum = sum(M.matrix[K.index, K.index] * K.measure for K in block)
    assert quadratic_value(M, block, theta) == pytest.approx(diag_sum)
    T = identity(2).matrix.copy()
    K1, K2 = DI(2, 0), DI(2, 2)
    T[K1.index, K2.index] = -0.4
    T[K2.index, K1.index] = -0.2
    T = OperatorMatrix.square(T)
    theta = signs_by_conditional_expectation(T, [K1, K2])
    c = 0.25 * (-0.4) + 0.25 * (-0.2)
    assert theta[0] * theta[1] == -1
    assert quadratic_value(T, [K1, K2], theta) == pytest.approx(0.5 + abs(c))


@settings(max_examples=25)
@given(st.integers(1, 8), st.integers(0, 10 ** 6))
def test_signs_reach_expectation(size, seed):
    T = random_operator(4, 1.0, 0.5, "positive", seed=seed)
    rng = np.random.default_rng(seed)
    block = [dyadic.from_index(int(i)) for i in rng.choice(31, size, replace=False)]
    theta = signs_by_conditional_expectation(T, block)
    idx = [K.index for K in block]
    G = dyadic.measures(4)[idx, None] * T.matrix[np.ix_(idx, idx)]
    best, mean = best_signs(G)
    value = quadratic_value(T, block, theta)
    assert value >= mean - 1e-12 and value <= best + 1e-12


def test_reduce_identity_and_negative_identity():
    red = reduce(identity(4), 2, 1.0, 1.0, override=True)
    assert red.sigma == 1 and red.a_bound == 1
    np.testing.assert_allclose(red.Tpos.matrix, np.eye(7), atol=1e-12)
    red = reduce(-identity(4), 2, 1.0, 1.0, override=True)
    assert red.sigma == -1 and check_large_diagonal(red.Tpos, 1.0, positive=True)
    with pytest.raises(ValueError):
        reduce(identity(4), 2, 1.0, 1.0)


def test_reduce_meets_threshold_without_override():
    T = random_operator(8, 1.0, 0.5, "signed", seed=11)
    red = reduce(T, 1, 0.5, 1.0)
    assert not red.override and red.l == 4
    assert red.eq_measure_holds and red.a_bound <= 2 * (1 + 1.0) + 1e-12


@settings(max_examples=10)
@given(st.integers(0, 10 ** 6))
def test_reduce_random_signed(seed):
    T = random_operator(8, 1.0, 0.5, "signed", seed=seed)
    red = reduce(T, 2, 0.5, 1.0, override=True)
    assert validate(red.system).almost_faithful
    assert check_large_diagonal(red.Tpos, 0.5, positive=True)
    S = T * red.sigma
    for I in dyadic.enumerate_upto(2):
        block = [K for K, _ in red.system.block(I)]
        theta = [s for _, s in red.system.block(I)]
        assert quadratic_value(S, block, theta) >= 0.5 * red.system.block_measure(I) - 1e-12
    assert op_norm_lower(red.B, budget=10, seed=seed, refine=1)[0] <= 1 + 1e-6
    assert op_norm_lower(red.A, budget=10, seed=seed, refine=0)[0] <= red.a_bound + 1e-6


def test_corollary_composition():
    T = random_operator(8, 1.0, 0.5, "signed", seed=5)
    params = StabilizationParams(n=0, delta=0.5, ntilde=0, m=0, threshold_off=1.0,
                                 threshold_diag=1e-9)
    cert, red = factor_through_signed(T, 2, 0.5, 1.0, params, override=True)
    assert cert.residual <= 1e-8
    assert cert.constant_bound == pytest.approx(red.a_bound * cert.details["qinv_bound"]
                                                / cert.details["c"])
