"""Exact size bounds for the factorization theorems (arbitrary precision)."""
from __future__ import annotations

from fractions import Fraction

from .diagonalize import _frac
from .reduce_positive import ntilde_min


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def eta_from_epsilon(epsilon) -> Fraction:
    e = _frac(epsilon)
    return e / (6 * (1 + e))


def floor_4log2(r: Fraction) -> int:
    """Largest ``k`` with ``2**k <= r**4`` (exact)."""
    r4 = r ** 4
    p, q = r4.numerator, r4.denominator
    k = p.bit_length() - q.bit_length()
    while Fraction(2) ** k > r4:
        k -= 1
    while Fraction(2) ** (k + 1) <= r4:
        k += 1
    return k


def _ratio(gamma, delta, epsilon) -> Fraction:
    if min(_frac(gamma), _frac(delta), _frac(epsilon)) <= 0:
        raise ValueError("gamma, delta and epsilon must be positive")
    return _frac(gamma) / (eta_from_epsilon(epsilon) * _frac(delta))


def nmin(gamma, delta, epsilon, n: int) -> int:
    """``42 n(n+1) ceil(G/(eta d)) + 42 + floor(4 log2(G/(eta d)))``."""
    r = _ratio(gamma, delta, epsilon)
    return 42 * n * (n + 1) * _ceil(r) + 42 + floor_4log2(r)


def nmin_unconditional(gamma, delta, epsilon, n: int, K) -> int:
    """``42 n ceil(K G/(eta d)) + 42 + floor(4 log2(G/(eta d)))``."""
    if _frac(K) < 1:
        raise ValueError("K must be >= 1")
    r = _ratio(gamma, delta, epsilon)
    return 42 * n * _ceil(_frac(K) * r) + 42 + floor_4log2(r)


def corollary_ntilde(gamma, delta, epsilon, n: int, K=None) -> int:
    """``ntilde_min(N, epsilon)`` with ``N = nmin(2(1+epsilon) gamma, ...)``."""
    g = 2 * (1 + _frac(epsilon)) * _frac(gamma)
    N = nmin(g, delta, epsilon, n) if K is None else nmin_unconditional(g, delta, epsilon, n, K)
    return ntilde_min(N, epsilon)
