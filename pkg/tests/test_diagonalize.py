import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haarfactor import dyadic
from haarfactor.dyadic import ROOT
from haarfactor.diagonalize import (DiagonalizationParams, choose_m, diagonal_residual, eta0,
                                    expected_diagonal, expected_gram_diagonal, gram,
                                    gram_samples, random_faithful, residual_check, search)
from haarfactor.errors import ShapeMismatchError
from haarfactor.faithful import validate
from haarfactor.operators import HaarMultiplier, identity, op_norm_exact_l2, random_operator


def test_choose_m_examples():
    assert choose_m(0, 1, 1, 0.5) == 21
    assert choose_m(0, 1, 1, 1) == 17
    assert eta0(1, 1, 1) * 64 == 1
    with pytest.raises(ValueError):
        choose_m(0, 1, 0, 1)


@given(st.integers(0, 3), st.fractions(min_value="1/100", max_value=2),
       st.fractions(min_value="1/100", max_value=2))
def test_choose_m_monotone_and_minimal(n, eta1, eta2):
    lo, hi = sorted((eta1, eta2))
    assert choose_m(n, 1, 1, hi) <= choose_m(n, 1, 1, lo)
    m = choose_m(n, 1, 1, lo)
    bound = 2 ** (4 * (n + 2)) / eta0(n, 1, lo) ** 4
    assert 2 ** m > bound >= 2 ** (m - 1)


@settings(max_examples=30)
@given(st.integers(0, 3), st.integers(0, 4), st.integers(0, 10 ** 6))
def test_random_faithful_is_faithful(n, m, seed):
    sys = random_faithful(n, m, n + m, seed)
    v = validate(sys)
    assert v.faithful and v.frequencies == tuple(range(m, m + n + 1))
    assert sys.mu == 1
    for I in dyadic.enumerate_upto(n):
        assert sys.block_measure(I) == I.measure
    assert random_faithful(n, m, n + m, seed) == sys


def test_random_faithful_needs_room():
    with pytest.raises(ValueError):
        random_faithful(2, 3, 4, 0)


def test_gram_of_identity_and_multiplier():
    sys = random_faithful(2, 2, 5, 1)
    np.testing.assert_allclose(gram(identity(5), sys), np.diag(dyadic.measures(2)), atol=1e-15)
    M = HaarMultiplier(5, np.random.default_rng(0).uniform(-1, 1, 63)).as_operator()
    X = gram(M, sys)
    assert np.abs(X - np.diag(np.diag(X))).max() == 0
    with pytest.raises(ShapeMismatchError):
        gram(identity(4), sys)


def test_gram_matches_double_sum():
    T = random_operator(4, 1.0, seed=2)
    sys = random_faithful(1, 2, 4, 7)
    X = gram(T, sys)
    for i, bi in enumerate(sys.blocks):
        for j, bj in enumerate(sys.blocks):
            total = sum(tk * tl * K.measure * T.matrix[K.index, L.index]
                        for K, tk in bi for L, tl in bj)
            assert X[i, j] == pytest.approx(total, abs=1e-14)


def test_expected_diagonal_examples():
    sys = random_faithful(1, 2, 4, 0)
    assert expected_diagonal(identity(4), sys, ROOT) == 1
    levels = [0.1, 0.2, 0.3, 0.4, 0.5]
    M = HaarMultiplier.from_levels(levels).as_operator()
    assert expected_diagonal(M, sys, ROOT) == pytest.approx(0.3)
    half = dyadic.from_index(2)
    assert expected_diagonal(M, sys, half) == pytest.approx(0.5 * 0.4)


def test_expected_diagonal_by_sampling():
    T = random_operator(6, 1.0, 0.0, seed=1)
    X = gram_samples(T, 1, 3, range(10_000))
    diag = X[:, np.arange(3), np.arange(3)]
    mean, se = diag.mean(0), diag.std(0, ddof=1) / np.sqrt(len(diag))
    exp = expected_gram_diagonal(T, 1, 3)
    assert np.all(np.abs(mean - exp) <= 4 * se + 1e-15)


def test_search_identity_and_level_constant():
    res = search(identity(4), DiagonalizationParams(n=1, m=3, threshold_off=1e-9,
                                                    threshold_diag=1e-9))
    assert res.success and res.tries_used == 1 and res.offdiag_max == 0
    np.testing.assert_allclose(res.D.entries, 1)
    M = HaarMultiplier.from_levels([0.9, 0.8, 0.7, 0.6, 0.5]).as_operator()
    res = search(M, DiagonalizationParams(n=1, m=3, threshold_off=1e-9, threshold_diag=1e-9))
    assert res.success and res.offdiag_max == 0
    np.testing.assert_allclose(res.D.entries, [0.6, 0.5, 0.5])
    assert residual_check(M, res).measured_lower_bound == 0


def test_search_failure_returns_best():
    T = random_operator(5, 1.0, seed=0)
    res = search(T, DiagonalizationParams(n=1, m=4, threshold_off=1e-12,
                                          threshold_diag=1e-12, max_tries=3))
    assert not res.success and res.tries_used == 3
    with pytest.raises(ValueError):
        residual_check(T, res)


def test_search_properties_on_random_operator():
    T = random_operator(8, 1.0, 0.5, "positive", seed=4)
    tau = 0.02
    p = DiagonalizationParams(n=1, m=6, eta=0.1, threshold_off=tau, threshold_diag=tau, seed=2)
    res = search(T, p)
    assert res.success
    assert search(T, p).gram.tolist() == res.gram.tolist()
    np.testing.assert_allclose(res.D.entries, np.diag(res.gram) / dyadic.measures(1))
    gamma = op_norm_exact_l2(T)
    assert np.all(np.abs(res.D.entries) <= gamma + 1e-9)
    lvl = res.D.level(1)
    assert abs(lvl[0] - lvl[1]) <= 2 * tau / 0.5
    assert np.all(res.D.entries >= 0.5 - tau / 0.5)
    chk = residual_check(T, res, budget=20)
    assert chk.passed
    delta = diagonal_residual(T, res)
    assert np.abs(np.diag(delta.matrix)).max() <= 1e-12
