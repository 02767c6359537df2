"""Randomized diagonalization through random faithful Haar systems.

For random signs ``theta`` the faithful system with frequencies
``m, m+1, ..., m+n`` is built by sending ``K+``/``K-`` of every block interval
to the left/right successor block when ``theta_K = 1`` (swapped otherwise).
Its Gram matrix ``X_IJ = <h^_I, T h^_J>`` is close to diagonal for most
``theta``; the diagonal part defines a Haar multiplier ``D`` with
``||A^ T B^ - D||`` small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import dyadic
from .dyadic import DyadicInterval
from .errors import ShapeMismatchError
from .faithful import AlmostFaithfulSystem, associated_faithful, frequency_faithful, validate
from .operators import HaarMultiplier, OperatorMatrix, compose, max_abs, op_norm_lower
from .spaces import HILBERT, SpaceSpec


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, str) else Fraction(x)


def eta0(n: int, delta, eta) -> Fraction:
    """``eta * delta / 2**(4n + 2)``."""
    return _frac(eta) * _frac(delta) / (1 << (4 * n + 2))


def choose_m(n: int, gamma, delta, eta) -> int:
    """Smallest ``m`` with ``2**m > 2**(4(n+2)) gamma**4 / eta0**4``."""
    if min(_frac(gamma), _frac(delta), _frac(eta)) <= 0:
        raise ValueError("gamma, delta and eta must be positive")
    bound = Fraction(1 << (4 * (n + 2))) * _frac(gamma) ** 4 / eta0(n, delta, eta) ** 4
    p, q = bound.numerator, bound.denominator
    m = max(0, p.bit_length() - q.bit_length() - 1)
    while (q << m) <= p:
        m += 1
    return m


@dataclass
class DiagonalizationParams:
    n: int
    gamma: float = 1.0
    delta: float = 1.0
    eta: float = 0.1
    m: Optional[int] = None
    threshold_off: Optional[float] = None
    threshold_diag: Optional[float] = None
    max_tries: int = 50
    seed: int = 0

    @property
    def eta0(self) -> float:
        return float(eta0(self.n, self.delta, self.eta))

    @property
    def resolved_m(self) -> int:
        return choose_m(self.n, self.gamma, self.delta, self.eta) if self.m is None else self.m

    @property
    def tau_off(self) -> float:
        return self.eta0 if self.threshold_off is None else self.threshold_off

    @property
    def tau_diag(self) -> float:
        return self.eta0 if self.threshold_diag is None else self.threshold_diag


@dataclass
class DiagonalizationResult:
    system: AlmostFaithfulSystem
    D: HaarMultiplier
    gram: np.ndarray
    expected: np.ndarray
    offdiag_max: float
    diag_dev_max: float
    tries_used: int
    error_bound: float
    success: bool
    m: int
    thresholds: tuple[float, float] = (0.0, 0.0)
    details: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.system.n

    def operators(self) -> tuple[OperatorMatrix, OperatorMatrix]:
        """``(B^, A^)`` of the chosen faithful system."""
        return associated_faithful(self.system)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "success": self.success,
            "tries_used": self.tries_used,
            "offdiag_max": self.offdiag_max,
            "diag_dev_max": self.diag_dev_max,
            "error_bound": self.error_bound,
            "thresholds": list(self.thresholds),
            "D": self.D.to_json(),
            "gram": self.gram.tolist(),
            "system": self.system.to_json(),
        }


def random_signs(N: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(np.array([-1, 1]), size=dyadic.dimension(N))


def random_faithful(n: int, m: int, N: int, seed) -> AlmostFaithfulSystem:
    """Faithful system with frequencies ``m..m+n`` and uniformly random signs."""
    if N < n + m:
        raise ValueError(f"need N >= n + m, got N={N}, n={n}, m={m}")
    return frequency_faithful(range(m, m + n + 1), N, signs=random_signs(N, seed))


def gram(T: OperatorMatrix, sys: AlmostFaithfulSystem) -> np.ndarray:
    """``X_IJ = <h~_I, T h~_J>`` for ``I, J`` in ``D_{<=n}``."""
    if T.domain != sys.ambient or T.codomain != sys.ambient:
        raise ShapeMismatchError(f"operator on Y_{T.domain}, system in Y_{sys.ambient}")
    H = sys.block_matrix
    W = dyadic.measures(sys.ambient)
    return H.T @ (W[:, None] * (T.matrix @ H))


def _level_means(T: OperatorMatrix) -> np.ndarray:
    d = np.diag(T.matrix)
    return np.array([d[dyadic.level_slice(k)].mean() for k in range(T.domain + 1)])


def expected_gram_diagonal(T: OperatorMatrix, n: int, m: int) -> np.ndarray:
    """``E X_II = |I| * average of d_K over D_{m+k}`` for all ``I`` in ``D_{<=n}``."""
    means = _level_means(T)
    return dyadic.measures(n) * means[m + dyadic.levels(n)]


def expected_diagonal(T: OperatorMatrix, sys: AlmostFaithfulSystem, I: DyadicInterval) -> float:
    freq = validate(sys).frequencies
    if freq is None or any(b - a != 1 for a, b in zip(freq, freq[1:])):
        raise ValueError("system must have consecutive frequencies m, ..., m+n")
    return float(expected_gram_diagonal(T, sys.n, freq[0])[I.index])


def _offdiag(X: np.ndarray) -> float:
    off = X - np.diag(np.diag(X))
    return float(np.abs(off).max(initial=0.0))


def search(T: OperatorMatrix, params: DiagonalizationParams) -> DiagonalizationResult:
    """Resample signs until every off-diagonal and diagonal event is avoided.

    Try ``t`` uses the seed ``(params.seed, t)``. On exhaustion the best try
    (smallest worst threshold ratio) is returned with ``success=False``.
    """
    n, m = params.n, params.resolved_m
    N = T.ambient
    if N < n + m:
        raise ValueError(f"need N >= n + m, got N={N}, n={n}, m={m}")
    tau_off, tau_diag = params.tau_off, params.tau_diag
    expected = expected_gram_diagonal(T, n, m)
    best = None
    for t in range(params.max_tries):
        sys = random_faithful(n, m, N, (params.seed, t))
        X = gram(T, sys)
        off = _offdiag(X)
        dev = float(np.abs(np.diag(X) - expected).max())
        score = max(off / tau_off if tau_off > 0 else math.inf * (off > 0),
                    dev / tau_diag if tau_diag > 0 else math.inf * (dev > 0))
        ok = off < tau_off and dev < tau_diag if (tau_off > 0 and tau_diag > 0) else score == 0
        if best is None or score < best[0]:
            best = (score, sys, X, off, dev, t)
        if ok:
            break
    score, sys, X, off, dev, t = best
    D = HaarMultiplier(n, np.diag(X) / dyadic.measures(n))
    return DiagonalizationResult(
        system=sys, D=D, gram=X, expected=expected, offdiag_max=off, diag_dev_max=dev,
        tries_used=t + 1 if ok else params.max_tries,
        error_bound=float(2 ** (4 * n + 2)) * off, success=bool(ok), m=m,
        thresholds=(tau_off, tau_diag), details={"try": t, "seed": params.seed})


def diagonal_residual(T: OperatorMatrix, result: DiagonalizationResult) -> OperatorMatrix:
    """``Delta = A^ T B^ - D`` formed explicitly."""
    B, A = result.operators()
    P = compose(A, T, B).matrix
    return OperatorMatrix(P - np.diag(result.D.entries), result.n, result.n)


@dataclass
class ResidualCheck:
    residual: OperatorMatrix
    max_abs: float
    measured_lower_bound: float
    error_bound: float

    @property
    def passed(self) -> bool:
        return self.measured_lower_bound <= self.error_bound + 1e-12


def residual_check(T: OperatorMatrix, result: DiagonalizationResult,
                   spec: SpaceSpec = HILBERT, budget: int = 50, seed: int = 0) -> ResidualCheck:
    if not result.success:
        raise ValueError("residual_check needs a successful search result")
    delta = diagonal_residual(T, result)
    lower, _ = op_norm_lower(delta, spec, budget=budget, seed=seed)
    return ResidualCheck(delta, max_abs(delta), lower, result.error_bound)


def gram_samples(T: OperatorMatrix, n: int, m: int, seeds) -> np.ndarray:
    """Gram matrices for a sweep of sign seeds, shape ``(len(seeds), d, d)``."""
    return np.stack([gram(T, random_faithful(n, m, T.ambient, s)) for s in seeds])
