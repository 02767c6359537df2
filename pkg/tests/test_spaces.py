import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from haarfactor import dyadic
from haarfactor.dyadic import DyadicInterval, ROOT
from haarfactor.spaces import (HaarVector, MonteCarlo, SpaceSpec, analyze, base_norm,
                               dual_norm_lower_bound, dual_pairing, haar_analysis,
                               haar_dual_norm, haar_norm, haar_synthesis, hshs_norm, synthesize)

from oracles import brute_norm

SPECS = [SpaceSpec(p, mode) for p in (1.0, 1.5, 2.0, 3.0, math.inf)
         for mode in ("constant", "independent")]
H0H1 = HaarVector.from_dict(1, {ROOT: 1.0, DyadicInterval(1, 0): 1.0})


def coeff_arrays(max_n=4):
    return st.integers(0, max_n).flatmap(lambda n: arrays(
        float, dyadic.dimension(n), elements=st.floats(-3, 3, allow_nan=False)))


def test_synthesis_examples():
    assert list(haar_synthesis(HaarVector.basis(ROOT, 1)).values) == [1, 1, -1, -1]
    f = haar_synthesis(H0H1)
    assert f.resolution == 2
    assert list(f.values) == [2, 0, -1, -1]
    assert base_norm(f, 1) == 1
    assert base_norm(f, math.inf) == 2
    assert base_norm(np.ones(8), 3) == 1


def test_norm_examples():
    for spec in SPECS:
        assert hshs_norm(HaarVector.basis(ROOT, 3), spec) == pytest.approx(1.0, abs=1e-12)
    assert hshs_norm(H0H1, SpaceSpec(1, "independent")) == pytest.approx(1.0)
    assert hshs_norm(H0H1, SpaceSpec(2, "constant")) == pytest.approx(math.sqrt(6) / 2)


def test_pairing_examples():
    I = DyadicInterval(2, 1)
    assert dual_pairing(HaarVector.basis(I, 3), HaarVector.basis(I, 3)) == I.measure
    assert dual_pairing(HaarVector.basis(DyadicInterval(1, 0), 1),
                        HaarVector.basis(DyadicInterval(1, 1), 1)) == 0
    assert dual_pairing(HaarVector.basis(ROOT, 1), H0H1) == pytest.approx(1.0)


def test_haar_norm_examples():
    assert haar_norm(ROOT, SpaceSpec(2)) == 1 and haar_dual_norm(ROOT, SpaceSpec(2)) == 1
    half = DyadicInterval(1, 0)
    assert haar_norm(half, SpaceSpec(1)) == 0.5 and haar_dual_norm(half, SpaceSpec(1)) == 1


def test_dual_lower_bound_examples():
    value, witness = dual_norm_lower_bound(HaarVector.basis(ROOT, 2), SpaceSpec(2), budget=20)
    assert value >= 1 - 1e-6
    assert dual_norm_lower_bound(HaarVector.zeros(2), SpaceSpec(2))[0] == 0


@given(coeff_arrays())
def test_analysis_inverts_synthesis(a):
    np.testing.assert_allclose(analyze(synthesize(a)), a, atol=1e-9)
    N = dyadic.ambient_from_dim(a.size)
    x = HaarVector(N, a)
    assert np.allclose(haar_analysis(haar_synthesis(x), N).coeffs, a, atol=1e-9)


def test_analysis_rejects_nonzero_mean():
    with pytest.raises(ValueError):
        analyze(np.ones(4))


@given(coeff_arrays(3), st.sampled_from(SPECS), st.floats(-4, 4, allow_nan=False))
def test_norm_homogeneity_and_triangle(a, spec, t):
    N = dyadic.ambient_from_dim(a.size)
    b = np.roll(a, 1)
    na, nb = hshs_norm(a, spec), hshs_norm(b, spec)
    assert hshs_norm(t * a, spec) == pytest.approx(abs(t) * na, rel=1e-9, abs=1e-9)
    assert hshs_norm(a + b, spec) <= na + nb + 1e-9


@given(coeff_arrays(3))
def test_independent_dominated_by_constant_in_l2(a):
    # Jensen: the sign average is at most the square function, whose L^2 norm is the constant one
    assert hshs_norm(a, SpaceSpec(2, "independent")) <= hshs_norm(a, SpaceSpec(2)) + 1e-9


def test_exact_matches_brute_force_small():
    rng = np.random.default_rng(5)
    for N in range(3):
        for _ in range(3):
            a = rng.standard_normal(dyadic.dimension(N))
            for spec in SPECS:
                want = brute_norm(a, N, spec.p, spec.rademacher == "independent")
                assert hshs_norm(a, spec) == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_monte_carlo_agrees_with_exact():
    rng = np.random.default_rng(9)
    hits = 0
    seeds = range(20)
    a = rng.standard_normal(dyadic.dimension(4))
    spec = SpaceSpec(1.5, "independent")
    exact = hshs_norm(a, spec)
    for seed in seeds:
        est = hshs_norm(a, spec, MonteCarlo(4000, seed))
        hits += abs(est.value - exact) <= 4 * est.stderr
    assert hits >= 0.95 * len(seeds)
    const = hshs_norm(a, SpaceSpec(3), MonteCarlo(10, 0))
    assert const.stderr == 0 and const.value == pytest.approx(hshs_norm(a, SpaceSpec(3)))


def test_spec_parsing_and_json():
    s = SpaceSpec.parse("inf,independent")
    assert math.isinf(s.p) and s.rademacher == "independent"
    assert SpaceSpec.from_json(s.to_json()) == s
    with pytest.raises(ValueError):
        SpaceSpec(0.5)
    with pytest.raises(ValueError):
        SpaceSpec(2, "gaussian")
