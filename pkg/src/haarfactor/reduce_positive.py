"""Reduction of a signed large diagonal to a positive one (Gamlen-Gaudet).

Intervals with positive diagonal are peeled into generations ``G_0, G_1,
...``; a window ``G_s, ..., G_{s+N}`` losing little measure carries an almost
faithful system whose block signs are fixed by conditional expectations so
that every ``<h~_I, T h~_I>`` stays above ``delta |B_I*|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dyadic
from .diagonalize import _frac
from .dyadic import DyadicInterval
from .errors import DiagonalError, EmptyBlockError, HaarFactorError
from .faithful import AlmostFaithfulSystem, associated_almost
from .operators import (FactorizationCertificate, OperatorMatrix, check_large_diagonal, compose)
from .stabilize import StabilizationParams, factorize


def ntilde_min(N: int, epsilon) -> int:
    """``2N ceil(N/epsilon + 1) 2**N``."""
    r = _frac(N) / _frac(epsilon) + 1
    return 2 * N * (-((-r.numerator) // r.denominator)) * (1 << N)


def partition_by_diagonal(T: OperatorMatrix, delta: float):
    """``(A1, A2)``: intervals with diagonal ``>= delta`` and ``<= -delta``."""
    if not check_large_diagonal(T, delta, positive=False):
        raise DiagonalError(f"T lacks a {delta}-large diagonal")
    d = np.diag(T.matrix)
    all_ = list(dyadic.enumerate_upto(T.ambient))
    return [K for K in all_ if d[K.index] >= delta], [K for K in all_ if d[K.index] < 0]


@dataclass(frozen=True)
class GenerationDecomposition:
    generations: tuple[tuple[DyadicInterval, ...], ...]
    source: tuple[DyadicInterval, ...]

    def __getitem__(self, k: int) -> tuple[DyadicInterval, ...]:
        return self.generations[k] if 0 <= k < len(self.generations) else ()

    def measure(self, k: int) -> float:
        return float(sum(K.measure for K in self[k]))


def _strict_ancestors_in(K: DyadicInterval, members: set) -> int:
    return sum(K.ancestor(lvl) in members for lvl in range(K.level))


def generations(collection: Sequence[DyadicInterval]) -> GenerationDecomposition:
    """``G_k`` holds the members strictly contained in exactly ``k`` members."""
    source = tuple(sorted(set(collection)))
    members = set(source)
    buckets: dict[int, list[DyadicInterval]] = {}
    for K in source:
        buckets.setdefault(_strict_ancestors_in(K, members), []).append(K)
    depth = max(buckets, default=-1) + 1
    return GenerationDecomposition(tuple(tuple(buckets.get(k, ())) for k in range(depth)), source)


def leaf_cover(T: OperatorMatrix) -> tuple[float, float]:
    """Measure of the leaves whose chain is mostly positive / mostly negative.

    A leaf counts for a side when that side holds at least as many of the
    intervals containing it; ties count for both.
    """
    Nt = T.ambient
    pos = (np.diag(T.matrix) > 0).astype(int)
    count = pos[dyadic.level_slice(0)].copy()
    for k in range(1, Nt + 1):
        count = np.repeat(count, 2) + pos[dyadic.level_slice(k)]
    total = Nt + 1
    leaf = 2.0 ** -Nt
    return float((2 * count >= total).sum() * leaf), float((2 * count <= total).sum() * leaf)


@dataclass
class SignSelection:
    sigma: int
    s: int
    l: int
    cover: tuple[float, float]
    measures: list[float]
    ratio: float


def select_sign_and_s(T: OperatorMatrix, N: int, l: int, delta: float) -> SignSelection:
    """Choose ``sigma`` by leaf cover (ties to +1) and the first good window ``s``."""
    if T.ambient < 2 * l * N:
        raise ValueError(f"need ambient >= 2 l N = {2 * l * N}, got {T.ambient}")
    plus, minus = leaf_cover(T)
    sigma = 1 if plus >= minus else -1
    A1, _ = partition_by_diagonal(T * sigma, delta)
    gens = generations(A1)
    measures = [gens.measure(k) for k in range(len(gens.generations))]
    target = 2.0 ** (-1.0 / l)
    for s in range(0, max(l, 1) * N if N else 1, N if N else 1):
        here = gens.measure(s)
        if here > 0 and gens.measure(s + N) >= target * here * (1 - 1e-12):
            return SignSelection(sigma, s, l, (plus, minus), measures, gens.measure(s + N) / here)
    raise HaarFactorError("no window s satisfies the measure ratio")


def signs_by_conditional_expectation(T: OperatorMatrix, block: Sequence[DyadicInterval]) -> np.ndarray:
    """Signs fixed one at a time to keep the conditional expectation from dropping.

    The quadratic form is ``sum theta_K theta_L <h_K, T h_L>``; with later
    signs still random only the cross terms with fixed signs survive.
    """
    idx = np.array([K.index for K in block], dtype=int)
    if idx.size == 0:
        return np.zeros(0, dtype=int)
    meas = dyadic.measures(T.ambient)
    G = meas[idx, None] * T.matrix[np.ix_(idx, idx)]
    S = G + G.T
    theta = np.ones(idx.size, dtype=int)
    for j in range(1, idx.size):
        gain = float(theta[:j] @ S[:j, j])
        theta[j] = 1 if gain >= 0 else -1
    return theta


def quadratic_value(T: OperatorMatrix, block: Sequence[DyadicInterval], theta) -> float:
    """``<h~, T h~>`` for ``h~ = sum theta_K h_K``."""
    idx = np.array([K.index for K in block], dtype=int)
    G = dyadic.measures(T.ambient)[idx, None] * T.matrix[np.ix_(idx, idx)]
    theta = np.asarray(theta, dtype=float)
    return float(theta @ G @ theta)


def _window_children(parent: dict, candidates: Sequence[DyadicInterval], side: int) -> list:
    out = []
    for K in candidates:
        for lvl in range(K.level - 1, -1, -1):
            L = K.ancestor(lvl)
            if L in parent:
                if parent[L] * L.half_containing(K) == side:
                    out.append(K)
                break
    return out


@dataclass
class ReductionResult:
    system: AlmostFaithfulSystem
    A: OperatorMatrix
    B: OperatorMatrix
    Tpos: OperatorMatrix
    a_bound: float
    sigma: int
    s: int
    l: int
    measures: list[float]
    override: bool
    eq_measure_holds: bool
    details: dict = field(default_factory=dict)


def reduce(T: OperatorMatrix, N: int, delta: float, epsilon: float,
           override: bool = False) -> ReductionResult:
    """Operator ``Tpos = A (sigma T) B`` on ``Y_N`` with ``delta``-large positive diagonal.

    Below ``ntilde_min(N, epsilon)`` the call needs ``override=True`` and
    uses ``l = ambient // (2N)``; bounds are then taken from actual measures.
    """
    Nt = T.ambient
    need = ntilde_min(N, epsilon)
    if Nt < need and not override:
        raise ValueError(f"ambient {Nt} below ntilde_min({N}, {epsilon}) = {need}; pass override")
    if N == 0:
        l = 1
    elif Nt >= need:
        l = need // (2 * N)
    else:
        l = Nt // (2 * N)
        if l < 1:
            raise ValueError(f"ambient {Nt} too small for N={N}")
    sel = select_sign_and_s(T, N, l, delta)
    S = T * sel.sigma
    A1, _ = partition_by_diagonal(S, delta)
    gens = generations(A1)

    blocks: list = [()] * dyadic.dimension(N)
    current = {dyadic.ROOT: list(gens[sel.s])}
    for k in range(N + 1):
        nxt = {}
        for I in dyadic.enumerate_level(k):
            members = current.get(I, [])
            if not members:
                raise EmptyBlockError(I)
            theta = signs_by_conditional_expectation(S, members)
            blocks[I.index] = tuple(zip(members, (int(t) for t in theta)))
            if k < N:
                parent = dict(blocks[I.index])
                cand = gens[sel.s + k + 1]
                nxt[I.left_child] = _window_children(parent, cand, 1)
                nxt[I.right_child] = _window_children(parent, cand, -1)
        current = nxt
    system = AlmostFaithfulSystem(N, Nt, tuple(blocks))
    B, A, bound = associated_almost(system)
    Tpos = compose(A, S, B)
    frac = 1.0 / ((N / epsilon + 1) * 2 ** N)
    holds = gens.measure(sel.s + N) >= (1 - frac) * gens.measure(sel.s) * (1 - 1e-12)
    return ReductionResult(system, A, B, Tpos, bound, sel.sigma, sel.s, l, sel.measures,
                           Nt < need, bool(holds),
                           details={"cover": list(sel.cover), "ratio": sel.ratio,
                                    "ntilde_min": need})


def factor_through_signed(T: OperatorMatrix, N: int, delta: float, epsilon: float,
                          params: StabilizationParams, override: bool = False,
                          mode: str = "positive_diagonal") -> tuple[FactorizationCertificate, ReductionResult]:
    """Reduce to positive diagonal and factorize ``I_{Y_n}`` through ``T`` itself."""
    red = reduce(T, N, delta, epsilon, override=override)
    inner = factorize(red.Tpos, params, mode=mode)
    if inner.target != "T":
        raise HaarFactorError("positive reduction requires the T branch")
    A = compose(inner.A, red.A) * float(red.sigma)
    B = compose(red.B, inner.B)
    cert = FactorizationCertificate(
        A=A, B=B, target="T", projectional=False,
        constant_bound=red.a_bound * inner.constant_bound,
        details=dict(inner.details, sigma=red.sigma, s=red.s, l=red.l,
                     a_bound=red.a_bound, reduction_override=red.override))
    cert.residual = cert.measure_residual(T)
    return cert, red
