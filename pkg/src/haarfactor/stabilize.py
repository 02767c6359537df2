"""Stabilization of a diagonalized operator and the full factorization.

After diagonalizing ``T`` on ``Y_ntilde`` the root chain entries
``d_[0,2^-k)`` are binned; ``n + 1`` levels sharing a bin define a faithful
frequency system whose block averages ``D^stab`` stay close to the scalar
``c = d_[0,2^-k_0)``. The projectional pair for ``c I_{Y_n}`` is then
corrected by a Neumann inverse to an exact factorization of the identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import dyadic
from .diagonalize import (DiagonalizationParams, DiagonalizationResult, _frac, choose_m,
                          diagonal_residual, search)
from .dyadic import DyadicInterval
from .errors import DiagonalError, NeumannError, PigeonholeFailure, SearchExhausted
from .faithful import associated_faithful, frequency_faithful
from .operators import (FactorizationCertificate, HaarMultiplier, OperatorMatrix,
                        check_large_diagonal, compose, identity, max_abs, op_norm_exact_l2,
                        op_norm_upper)
from .spaces import HILBERT, SpaceSpec


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def ntilde(n: int, gamma, delta, eta, K=None) -> int:
    """``2n(n+1) ceil(gamma/(eta delta)) + 1``, or ``2n ceil(K gamma/(eta delta)) + 1``."""
    r = _frac(gamma) / (_frac(eta) * _frac(delta))
    if K is None:
        return 2 * n * (n + 1) * _ceil(r) + 1
    return 2 * n * _ceil(_frac(K) * r) + 1


def bin_width(n: int, delta, eta, K=None) -> float:
    return float(eta) * float(delta) / (n + 1 if K is None else float(K))


def pigeonhole_levels(entries: Sequence[float], gamma: float, n: int,
                      width: float) -> tuple[int, ...]:
    """First ``n + 1`` levels whose entries share the first crowded bin.

    ``[-gamma, gamma]`` is cut into ``ceil(2 gamma / width)`` bins of the
    given width, scanned in ascending order.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    d = np.asarray(entries, dtype=float)
    if np.any(np.abs(d) > gamma + 1e-12):
        raise ValueError(f"root chain entries exceed gamma={gamma}")
    nbins = max(1, math.ceil(2 * gamma / width))
    bins = np.clip(np.floor((d + gamma) / width).astype(int), 0, nbins - 1)
    counts = np.bincount(bins, minlength=nbins)
    crowded = np.flatnonzero(counts >= n + 1)
    if crowded.size == 0:
        raise PigeonholeFailure(
            f"no bin of width {width:.3g} holds {n + 1} of {d.size} entries; raise ntilde")
    return tuple(int(k) for k in np.flatnonzero(bins == crowded[0])[:n + 1])


def root_chain(D: HaarMultiplier) -> np.ndarray:
    """Entries ``d_[0,2^-k)`` for ``k = 0..ambient``."""
    return np.array([D[DyadicInterval(k, 0)] for k in range(D.ambient + 1)])


def stabilized_multiplier(D: HaarMultiplier, levels: Sequence[int]) -> HaarMultiplier:
    """``d^stab_I = sum_{K in B_I} d_K |K| / |I|`` for the frequency system of ``levels``."""
    sys = frequency_faithful(levels, D.ambient)
    out = np.empty(dyadic.dimension(sys.n))
    for i, block in enumerate(sys.blocks):
        out[i] = sum(D.entries[K.index] * K.measure for K, _ in block) / dyadic.from_index(i).measure
    return HaarMultiplier(sys.n, out)


def stabilized_by_product(D: HaarMultiplier, levels: Sequence[int]) -> HaarMultiplier:
    """Same multiplier as ``A^ D B^`` formed explicitly (cross-check)."""
    B, A = associated_faithful(frequency_faithful(levels, D.ambient))
    return HaarMultiplier(B.domain, np.diag(compose(A, D.as_operator(), B).matrix).copy())


def center_and_bound(Dstab: HaarMultiplier, c: float, K: Optional[float] = None) -> float:
    """Level-sum bound on ``||D^stab - c I||``; ``K * max`` in unconditional mode."""
    dev = np.abs(Dstab.entries - c)
    if K is not None:
        return float(K) * float(dev.max())
    return float(sum(dev[dyadic.level_slice(k)].max() for k in range(Dstab.ambient + 1)))


def neumann_invert(Q: OperatorMatrix, q: float) -> tuple[OperatorMatrix, float, float]:
    """Invert ``Q`` given a certified ``q >= ||I - Q||``; returns ``(Qinv, q, 1/(1-q))``."""
    if not q < 1:
        raise NeumannError(f"||I - Q|| <= {q:.4g} is not below 1")
    try:
        inv = np.linalg.solve(Q.matrix, np.eye(Q.matrix.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NeumannError(f"singular Q: {exc}") from exc
    if np.abs(Q.matrix @ inv - np.eye(inv.shape[0])).max() > 1e-10:
        raise NeumannError("Q Qinv differs from the identity by more than 1e-10")
    return OperatorMatrix(inv, Q.codomain, Q.domain), float(q), 1.0 / (1.0 - q)


@dataclass
class StabilizationParams:
    n: int
    gamma: float = 1.0
    delta: float = 0.5
    epsilon: float = 1.0
    eta: Optional[float] = None  # defaults to epsilon / (6 (1 + epsilon))
    ntilde: Optional[int] = None
    m: Optional[int] = None
    threshold_off: Optional[float] = None
    threshold_diag: Optional[float] = None
    width: Optional[float] = None
    max_tries: int = 50
    seed: int = 0
    K: Optional[float] = None  # unconditional constant
    spec: SpaceSpec = HILBERT

    @property
    def resolved_eta(self) -> float:
        if self.eta is not None:
            return self.eta
        e = _frac(self.epsilon)
        return float(e / (6 * (1 + e)))

    def _eta_exact(self):
        return _frac(self.eta) if self.eta is not None else _frac(self.epsilon) / (6 * (1 + _frac(self.epsilon)))

    @property
    def paper_ntilde(self) -> int:
        return ntilde(self.n, self.gamma, self.delta, self._eta_exact(), self.K)

    @property
    def resolved_ntilde(self) -> int:
        return self.paper_ntilde if self.ntilde is None else self.ntilde

    @property
    def resolved_width(self) -> float:
        if self.width is not None:
            return self.width
        return bin_width(self.n, self.delta, self.resolved_eta, self.K)

    def diagonalization(self) -> DiagonalizationParams:
        nt = self.resolved_ntilde
        return DiagonalizationParams(
            n=nt, gamma=self.gamma, delta=self.delta, eta=self.resolved_eta,
            m=self.m if self.m is not None else choose_m(nt, self.gamma, self.delta, self._eta_exact()),
            threshold_off=self.threshold_off, threshold_diag=self.threshold_diag,
            max_tries=self.max_tries, seed=self.seed)


@dataclass
class StabilizationResult:
    levels: tuple[int, ...]
    c: float
    Dstab: HaarMultiplier
    stab_error_bound: float
    unconditional_mode: bool
    K: float
    diagonalization: DiagonalizationResult
    certificate: FactorizationCertificate
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError(f"levels must be strictly increasing: {self.levels}")


def stabilize(T: OperatorMatrix, params: StabilizationParams) -> StabilizationResult:
    """Projectional factorization of ``c I_{Y_n}`` through ``T`` with error.

    Raises ``SearchExhausted`` or ``PigeonholeFailure`` when a stage fails.
    """
    n = params.n
    dparams = params.diagonalization()
    diag = search(T, dparams)
    if not diag.success:
        raise SearchExhausted(diag)
    D = diag.D
    chain = root_chain(D)
    levels = pigeonhole_levels(chain, params.gamma, n, params.resolved_width)
    c = float(chain[levels[0]])
    Dstab = stabilized_multiplier(D, levels)
    stab_bound = center_and_bound(Dstab, c, params.K)

    Bd, Ad = diag.operators()
    Bf, Af = associated_faithful(frequency_faithful(levels, dparams.n))
    A = compose(Af, Ad)
    B = compose(Bd, Bf)
    ATB = compose(A, T, B).matrix
    residual = float(np.abs(ATB - c * np.eye(ATB.shape[0])).max())
    cert = FactorizationCertificate(
        A=A, B=B, target="T", projectional=True, constant_bound=1.0,
        error_bound=diag.error_bound + stab_bound, residual=residual, scalar=c,
        details={
            "levels": list(levels),
            "ntilde": dparams.n,
            "m": dparams.m,
            "paper_ntilde": params.paper_ntilde,
            "diag_error_bound": diag.error_bound,
            "stab_error_bound": stab_bound,
            "offdiag_max": diag.offdiag_max,
            "diag_dev_max": diag.diag_dev_max,
            "thresholds": list(diag.thresholds),
            "tries_used": diag.tries_used,
            "bin_width": params.resolved_width,
        })
    details = {}
    if params.K is not None and params.K > n + 1:
        details["wide_bins"] = True
    return StabilizationResult(levels, c, Dstab, stab_bound, params.K is not None,
                               1.0 if params.K is None else float(params.K), diag, cert, details)


def _neumann_q(Q: OperatorMatrix, error_bound: float, c: float, spec: SpaceSpec) -> float:
    I_Q = identity(Q.domain) - Q
    if spec.is_hilbert:
        return op_norm_exact_l2(I_Q)
    return min(error_bound / c, op_norm_upper(I_Q, spec))


def factorize(T: OperatorMatrix, params: StabilizationParams,
              mode: str = "positive_diagonal") -> FactorizationCertificate:
    """Exact factorization ``A' S B' = I_{Y_n}`` with ``S`` in ``{T, I - T}``.

    ``constant_bound = 1/(c (1 - q))`` bounds ``||A'|| ||B'||``.
    """
    if mode not in ("positive_diagonal", "identity_split"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "positive_diagonal" and not check_large_diagonal(T, params.delta, positive=True):
        raise DiagonalError(f"T lacks a {params.delta}-large positive diagonal")
    st = stabilize(T, params)
    cert = st.certificate
    c, target, S = st.c, "T", T
    if mode == "identity_split" and c < 0.5:
        c, target, S = 1.0 - c, "I-T", identity(T.ambient) - T
    if c <= 0:
        raise NeumannError(f"stabilized scalar c={c:.4g} is not positive")
    A, B = cert.A, cert.B
    Q = compose(A, S, B) * (1.0 / c)
    q = _neumann_q(Q, cert.error_bound, c, params.spec)
    Qinv, q, inv_bound = neumann_invert(Q, q)
    A2 = A * (1.0 / c)
    B2 = compose(B, Qinv)
    out = FactorizationCertificate(
        A=A2, B=B2, target=target, projectional=False,
        constant_bound=inv_bound / c, error_bound=0.0, residual=0.0, scalar=1.0,
        details=dict(cert.details, c=c, q=q, mode=mode, qinv_bound=inv_bound,
                     theorem_form=(2.0 if mode == "identity_split" else 1.0 / params.delta) * inv_bound,
                     stabilization_residual=cert.residual))
    out.residual = out.measure_residual(T)
    return out
