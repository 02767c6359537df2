"""Linear maps between spaces ``Y_N`` in Haar coordinates.

Column ``iota(J) - 1`` of an operator matrix holds the Haar coefficients of
``T h_J``. Maps may change ambient level (``A: Y_N -> Y_n``), so both the
domain and codomain levels are stored.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dyadic
from ._search import maximize_ratio
from .dyadic import DyadicInterval
from .errors import ShapeMismatchError
from .spaces import HILBERT, HaarVector, SpaceSpec, norms


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of a linear map ``Y_domain -> Y_codomain``."""

    matrix: np.ndarray
    domain: int
    codomain: int
    gamma: Optional[float] = None  # norm bound carried as metadata

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        expected = (dyadic.dimension(self.codomain), dyadic.dimension(self.domain))
        if m.shape != expected:
            raise ShapeMismatchError(f"expected matrix shape {expected}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def square(cls, matrix, ambient: int | None = None, gamma=None) -> "OperatorMatrix":
        matrix = np.asarray(matrix, dtype=float)
        if ambient is None:
            ambient = dyadic.ambient_from_dim(matrix.shape[1])
        return cls(matrix, ambient, ambient, gamma)

    @property
    def ambient(self) -> int:
        if self.domain != self.codomain:
            raise ShapeMismatchError("ambient is only defined for maps Y_N -> Y_N")
        return self.domain

    @property
    def is_square(self) -> bool:
        return self.domain == self.codomain

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return compose(self, other)
        if isinstance(other, HaarVector):
            return apply(self, other)
        return NotImplemented

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return add(self, other)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "OperatorMatrix":
        return scale(self, -1.0)

    def __mul__(self, scalar: float) -> "OperatorMatrix":
        return scale(self, scalar)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        data = {"ambient": self.domain, "format": "dense", "data": self.matrix.tolist()}
        if self.codomain != self.domain:
            data["codomain"] = self.codomain
        if self.gamma is not None:
            data["gamma"] = self.gamma
        return data


@dataclass(frozen=True)
class HaarMultiplier:
    """Diagonal operator ``h_I -> m_I h_I`` on ``Y_n``."""

    ambient: int
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (dyadic.dimension(self.ambient),):
            raise ShapeMismatchError(
                f"multiplier on Y_{self.ambient} needs {dyadic.dimension(self.ambient)} entries")
        object.__setattr__(self, "entries", e)

    @classmethod
    def from_levels(cls, values) -> "HaarMultiplier":
        """Level-constant multiplier with entry ``values[k]`` on ``D_k``."""
        n = len(values) - 1
        return cls(n, np.concatenate([np.full(1 << k, v, dtype=float)
                                      for k, v in enumerate(values)]))

    @classmethod
    def constant(cls, ambient: int, value: float) -> "HaarMultiplier":
        return cls(ambient, np.full(dyadic.dimension(ambient), float(value)))

    def __getitem__(self, interval: DyadicInterval) -> float:
        return float(self.entries[interval.index])

    @property
    def root(self) -> float:
        return float(self.entries[0])

    def level(self, k: int) -> np.ndarray:
        return self.entries[dyadic.level_slice(k)]

    def as_operator(self, gamma=None) -> OperatorMatrix:
        return OperatorMatrix(np.diag(self.entries), self.ambient, self.ambient, gamma)

    def to_json(self) -> dict:
        return {"ambient": self.ambient, "format": "multiplier", "data": self.entries.tolist()}


def operator_from_json(data: dict) -> OperatorMatrix:
    fmt = data.get("format", "dense")
    ambient = int(data["ambient"])
    if fmt == "multiplier":
        return HaarMultiplier(ambient, np.asarray(data["data"], float)).as_operator(data.get("gamma"))
    if fmt != "dense":
        raise ValueError(f"unknown operator format {fmt!r}")
    codomain = int(data.get("codomain", ambient))
    return OperatorMatrix(np.asarray(data["data"], float), ambient, codomain, data.get("gamma"))


# -- plumbing --------------------------------------------------------------

def identity(ambient: int) -> OperatorMatrix:
    return OperatorMatrix(np.eye(dyadic.dimension(ambient)), ambient, ambient, 1.0)


def zero(domain: int, codomain: int | None = None) -> OperatorMatrix:
    codomain = domain if codomain is None else codomain
    return OperatorMatrix(np.zeros((dyadic.dimension(codomain), dyadic.dimension(domain))),
                          domain, codomain, 0.0)


def compose(*ops: OperatorMatrix) -> OperatorMatrix:
    """``compose(A, T, B) = A T B`` (rightmost applied first)."""
    result = ops[-1]
    for op in reversed(ops[:-1]):
        if op.domain != result.codomain:
            raise ShapeMismatchError(
                f"cannot compose Y_{op.domain}->Y_{op.codomain} after "
                f"Y_{result.domain}->Y_{result.codomain}")
        result = OperatorMatrix(op.matrix @ result.matrix, result.domain, op.codomain)
    return result


def add(S: OperatorMatrix, T: OperatorMatrix) -> OperatorMatrix:
    if (S.domain, S.codomain) != (T.domain, T.codomain):
        raise ShapeMismatchError("operator shapes differ")
    return OperatorMatrix(S.matrix + T.matrix, S.domain, S.codomain)


def scale(T: OperatorMatrix, scalar: float) -> OperatorMatrix:
    gamma = None if T.gamma is None else abs(scalar) * T.gamma
    return OperatorMatrix(scalar * T.matrix, T.domain, T.codomain, gamma)


def apply(T: OperatorMatrix, x: HaarVector) -> HaarVector:
    if x.ambient != T.domain:
        raise ShapeMismatchError(f"operator acts on Y_{T.domain}, vector in Y_{x.ambient}")
    return HaarVector(T.codomain, T.matrix @ x.coeffs)


def max_abs(T) -> float:
    m = T.matrix if isinstance(T, OperatorMatrix) else np.asarray(T)
    return float(np.abs(m).max(initial=0.0))


# -- entries and diagonals -------------------------------------------------

def matrix_entry(T: OperatorMatrix, I: DyadicInterval, J: DyadicInterval) -> float:
    """``<h_I, T h_J>``."""
    if I.level > T.codomain or J.level > T.domain:
        raise ValueError(f"({I}, {J}) outside the index range of the operator")
    return I.measure * float(T.matrix[I.index, J.index])


def diagonal(T: OperatorMatrix) -> HaarMultiplier:
    """Entries ``d_I = <h_I, T h_I> / |I|``."""
    return HaarMultiplier(T.ambient, np.diag(T.matrix).copy())


def check_large_diagonal(T, delta: float, positive: bool = True) -> bool:
    d = T.entries if isinstance(T, HaarMultiplier) else np.diag(T.matrix)
    return bool(np.all(d >= delta) if positive else np.all(np.abs(d) >= delta))


def multiplier_center_bound(M: HaarMultiplier) -> float:
    """``sum_{k=1}^n max_{I in D_k} |m_I - m_[0,1)|``."""
    return float(sum(np.abs(M.level(k) - M.root).max() for k in range(1, M.ambient + 1)))


def su_quantity(M: HaarMultiplier) -> float:
    """Max over root-to-leaf chains of the total variation plus the leaf magnitude."""
    n = M.ambient
    best = np.abs(M.level(n))
    for k in range(n - 1, -1, -1):
        here = M.level(k)
        kids = M.level(k + 1).reshape(-1, 2)
        down = best.reshape(-1, 2)
        best = np.max(np.abs(here[:, None] - kids) + down, axis=1)
    return float(best[0])


# -- norms -----------------------------------------------------------------

def _weights(n: int) -> np.ndarray:
    return dyadic.measures(n)


def op_norm_exact_l2(T: OperatorMatrix) -> float:
    """Exact norm for ``L^2`` with constant signs: Haar basis is orthogonal."""
    wc = np.sqrt(_weights(T.codomain))
    wd = np.sqrt(_weights(T.domain))
    return float(np.linalg.norm(wc[:, None] * T.matrix / wd[None, :], 2))


def op_norm_upper(T: OperatorMatrix, spec: SpaceSpec) -> float:
    """Crude certified upper bound valid in every ``L^p``-based space.

    Uses ``|a_J| <= ||x|| / ||h_J||`` and the triangle inequality:
    ``||T|| <= sum_{I,J} |T_IJ| ||h_I|| / ||h_J||``.
    """
    if math.isinf(spec.p):
        return float(np.abs(T.matrix).sum())
    hi = _weights(T.codomain) ** (1.0 / spec.p)
    hj = _weights(T.domain) ** (1.0 / spec.p)
    return float((np.abs(T.matrix) * hi[:, None] / hj[None, :]).sum())


def multiplier_norm_upper(M: HaarMultiplier) -> float:
    """``|m_root| + center bound``; valid in every Haar system Hardy space."""
    return abs(M.root) + multiplier_center_bound(M)


def op_norm_lower(T: OperatorMatrix, spec: SpaceSpec = HILBERT, budget: int = 200,
                  seed: int = 0, **search) -> tuple[float, HaarVector]:
    """Certified lower bound ``||Tx|| / ||x||`` with its attaining witness."""
    M = T.matrix
    if not np.any(M):
        return 0.0, HaarVector.zeros(T.domain)

    def objective(X):
        return norms(X @ M.T, spec) / norms(X, spec)

    wc = np.sqrt(_weights(T.codomain))
    wd = np.sqrt(_weights(T.domain))
    _, _, vt = np.linalg.svd(wc[:, None] * M / wd[None, :])
    top = vt[0] / wd
    extra = np.vstack([top, np.eye(M.shape[1])])
    if spec.is_hilbert:
        # the top singular vector already attains the supremum
        search.setdefault("refine", 0)
    value, witness = maximize_ratio(objective, M.shape[1], seed, budget, extra=extra, **search)
    return value, HaarVector(T.domain, witness)


def norm_surrogate(T: OperatorMatrix, spec: SpaceSpec) -> float:
    """Exact norm for the Hilbert spec, crude certified upper bound otherwise."""
    return op_norm_exact_l2(T) if spec.is_hilbert else op_norm_upper(T, spec)


# -- synthetic instances ---------------------------------------------------

def random_operator(N: int, gamma: float, delta: float = 0.0, mode: str = "none",
                    seed: int = 0, spec: SpaceSpec = HILBERT,
                    noise: float = 0.5) -> OperatorMatrix:
    """Seeded ``T = D + rho E`` whose norm surrogate is certified ``<= gamma``.

    ``D`` is a multiplier with entries uniform in ``[delta, top]`` (positive),
    ``+-[delta, top]`` (signed) or ``[-top, top]`` (none), where
    ``top = delta + (1 - noise)(gamma - delta)`` leaves room for the
    perturbation. ``E`` is a dense Gaussian matrix with zero diagonal, so the
    diagonal of ``T`` is exactly that of ``D``.

    For the Hilbert spec ``E`` has exact norm one and ``rho`` is the largest
    value up to ``noise * gamma`` with ``max|d| + rho <= gamma``. For
    other specs the surrogate is ``multiplier_norm_upper(D) + rho *
    op_norm_upper(E)``; positive/none multipliers are contracted toward
    their root entry until the first term fits.
    """
    if mode not in ("positive", "signed", "none"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "none" and delta > gamma:
        raise ValueError(f"infeasible: delta={delta} > gamma={gamma}")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0, 1)")
    rng = np.random.default_rng([seed, N])
    dim = dyadic.dimension(N)
    if mode == "none":
        top = (1.0 - noise) * gamma
        d = rng.uniform(-top, top, dim)
    else:
        top = delta + (1.0 - noise) * (gamma - delta)
        d = rng.uniform(delta, top, dim)
        if mode == "signed":
            d *= rng.choice([-1.0, 1.0], dim)
    w = np.sqrt(_weights(N))
    G = rng.standard_normal((dim, dim))
    np.fill_diagonal(G, 0.0)
    # Gaussian in the orthonormalized basis, mapped back to Haar coordinates
    E = G / w[:, None] * w[None, :]

    if spec.is_hilbert:
        # triangle inequality: ||D + rho E|| <= max|d| + rho with ||E|| = 1
        E = E / op_norm_exact_l2(OperatorMatrix(E, N, N))
        rho = max(0.0, min(noise * gamma, gamma - float(np.abs(d).max())))
    else:
        E = E / op_norm_upper(OperatorMatrix(E, N, N), spec)
        M = HaarMultiplier(N, d)
        spread = multiplier_center_bound(M)
        room = top - abs(M.root)
        if spread > room:
            if mode == "signed":
                raise ValueError("cannot certify a signed random multiplier within gamma "
                                 "outside the Hilbert spec")
            d = M.root + (d - M.root) * (room / spread)
        base = multiplier_norm_upper(HaarMultiplier(N, d))
        rho = max(0.0, min(noise * gamma, gamma - base))
    return OperatorMatrix(np.diag(d) + rho * E, N, N, gamma)


# -- certificates ----------------------------------------------------------

@dataclass
class FactorizationCertificate:
    """``scalar * I_{Y_n}`` factored as ``A S B`` with ``S`` in ``{T, I - T}``.

    ``error_bound`` bounds ``||scalar I - A S B||``; ``residual`` is the measured
    max-abs entry of that difference.
    """

    A: OperatorMatrix
    B: OperatorMatrix
    target: str = "T"
    projectional: bool = False
    constant_bound: float = 1.0
    error_bound: float = 0.0
    residual: float = 0.0
    scalar: float = 1.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.target not in ("T", "I-T"):
            raise ValueError(f"target must be 'T' or 'I-T', got {self.target!r}")
        if self.A.codomain != self.B.domain or self.A.domain != self.B.codomain:
            raise ShapeMismatchError("A and B do not form a factorization pair")

    @property
    def n(self) -> int:
        return self.B.domain

    @property
    def N(self) -> int:
        return self.B.codomain

    def target_operator(self, T: OperatorMatrix) -> OperatorMatrix:
        return T if self.target == "T" else identity(T.ambient) - T

    def measure_residual(self, T: OperatorMatrix) -> float:
        S = self.target_operator(T)
        product = compose(self.A, S, self.B).matrix
        return float(np.abs(product - self.scalar * np.eye(product.shape[0])).max())

    def projection_defect(self) -> float:
        AB = compose(self.A, self.B).matrix
        return float(np.abs(AB - np.eye(AB.shape[0])).max())

    def to_json(self) -> dict:
        return {
            "A": self.A.to_json(),
            "B": self.B.to_json(),
            "target": self.target,
            "projectional": self.projectional,
            "constant_bound": self.constant_bound,
            "error_bound": self.error_bound,
            "residual": self.residual,
            "scalar": self.scalar,
            "details": self.details,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FactorizationCertificate":
        return cls(
            A=operator_from_json(data["A"]),
            B=operator_from_json(data["B"]),
            target=data["target"],
            projectional=bool(data["projectional"]),
            constant_bound=float(data["constant_bound"]),
            error_bound=float(data["error_bound"]),
            residual=float(data["residual"]),
            scalar=float(data.get("scalar", 1.0)),
            details=data.get("details", {}),
        )


def diagonal_csv(M: HaarMultiplier) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["iota", "level", "pos", "entry"])
    for i, value in enumerate(M.entries):
        I = dyadic.from_index(i)
        w.writerow([I.iota, I.level, I.pos, repr(float(value))])
    return buf.getvalue()


def certificate_csv(rows: list[FactorizationCertificate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["n", "N", "target", "projectional", "scalar", "constant_bound",
                "error_bound", "residual"])
    for c in rows:
        w.writerow([c.n, c.N, c.target, c.projectional, c.scalar, c.constant_bound,
                    c.error_bound, c.residual])
    return buf.getvalue()
