"""Norms of Haar system spaces and Haar system Hardy spaces on ``Y_N``.

Elements of ``Y_N`` are coefficient arrays over ``D_{<=N}`` in iota order.
They are rendered as step functions at resolution ``N + 1`` so that every
``h_I`` with ``I`` in ``D_{<=N}`` is exactly a +1/-1/0 step function.

Two norm families are provided for the ``L^p`` base norms, ``1 <= p <= inf``:

* constant mode: ``||x|| = ||sum a_I h_I||_p``;
* independent mode: ``||x|| = ||s -> E_eps |sum eps_I a_I h_I(s)| ||_p`` with
  independent signs ``eps_I``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from . import dyadic
from ._search import maximize_ratio
from .dyadic import DyadicInterval, StepFunction
from .errors import ShapeMismatchError

EXACT_CAP = 12
CONSTANT = "constant"
INDEPENDENT = "independent"


@dataclass(frozen=True)
class SpaceSpec:
    """Base ``L^p`` norm plus Rademacher mode (constant or independent)."""

    p: float = 2.0
    rademacher: str = CONSTANT

    def __post_init__(self):
        p = float(self.p)
        if not (p >= 1.0):
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.rademacher not in (CONSTANT, INDEPENDENT):
            raise ValueError(f"unknown rademacher mode {self.rademacher!r}")
        object.__setattr__(self, "p", p)

    @property
    def is_hilbert(self) -> bool:
        return self.p == 2.0 and self.rademacher == CONSTANT

    def to_json(self) -> dict:
        return {"p": "inf" if math.isinf(self.p) else self.p,
                "rademacher": self.rademacher}

    @classmethod
    def from_json(cls, data: dict) -> "SpaceSpec":
        p = data.get("p", 2.0)
        p = math.inf if p in ("inf", "Infinity", "infinity") else float(p)
        return cls(p, data.get("rademacher", CONSTANT))

    @classmethod
    def parse(cls, text: str) -> "SpaceSpec":
        """Parse ``"2,constant"`` / ``"inf,independent"`` / ``"1.5"``."""
        parts = [t.strip() for t in text.split(",")]
        p = math.inf if parts[0].lower() in ("inf", "infinity") else float(parts[0])
        mode = parts[1].lower() if len(parts) > 1 else CONSTANT
        return cls(p, mode)

    def __str__(self) -> str:
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        return f"L^{p}({self.rademacher})"


HILBERT = SpaceSpec(2.0, CONSTANT)


@dataclass(frozen=True)
class HaarVector:
    ambient: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (dyadic.dimension(self.ambient),):
            raise ShapeMismatchError(
                f"Y_{self.ambient} needs {dyadic.dimension(self.ambient)} coefficients, "
                f"got shape {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, ambient: int) -> "HaarVector":
        return cls(ambient, np.zeros(dyadic.dimension(ambient)))

    @classmethod
    def basis(cls, interval: DyadicInterval, ambient: int) -> "HaarVector":
        if interval.level > ambient:
            raise ValueError(f"{interval} is not in D_<={ambient}")
        c = np.zeros(dyadic.dimension(ambient))
        c[interval.index] = 1.0
        return cls(ambient, c)

    @classmethod
    def from_dict(cls, ambient: int, entries: dict) -> "HaarVector":
        c = np.zeros(dyadic.dimension(ambient))
        for interval, value in entries.items():
            c[interval.index] += value
        return cls(ambient, c)

    def __getitem__(self, interval: DyadicInterval) -> float:
        return float(self.coeffs[interval.index])

    def __add__(self, other: "HaarVector") -> "HaarVector":
        _check_same(self, other)
        return HaarVector(self.ambient, self.coeffs + other.coeffs)

    def __sub__(self, other: "HaarVector") -> "HaarVector":
        _check_same(self, other)
        return HaarVector(self.ambient, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "HaarVector":
        return HaarVector(self.ambient, self.coeffs * scalar)

    __rmul__ = __mul__

    def restrict_level(self, k: int) -> "HaarVector":
        c = np.zeros_like(self.coeffs)
        sl = dyadic.level_slice(k)
        c[sl] = self.coeffs[sl]
        return HaarVector(self.ambient, c)

    def support(self) -> list[DyadicInterval]:
        return [dyadic.from_index(i) for i in np.flatnonzero(self.coeffs)]

    def to_json(self) -> dict:
        return {"ambient": self.ambient, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "HaarVector":
        return cls(int(data["ambient"]), np.asarray(data["coeffs"], dtype=float))


def _check_same(x: HaarVector, y: HaarVector) -> None:
    if x.ambient != y.ambient:
        raise ShapeMismatchError(f"ambient mismatch: Y_{x.ambient} vs Y_{y.ambient}")


def _coeff_array(x) -> np.ndarray:
    return x.coeffs if isinstance(x, HaarVector) else np.asarray(x, dtype=float)


# -- change of basis -------------------------------------------------------

def synthesize(coeffs: np.ndarray) -> np.ndarray:
    """Batched synthesis: ``(..., 2**(N+1)-1)`` coefficients -> ``(..., 2**(N+1))`` cells."""
    coeffs = np.asarray(coeffs, dtype=float)
    N = dyadic.ambient_from_dim(coeffs.shape[-1])
    cells = 1 << (N + 1)
    batch = coeffs.shape[:-1]
    out = np.zeros(batch + (cells,))
    for k in range(N + 1):
        a = coeffs[..., dyadic.level_slice(k)]
        half = cells >> (k + 1)
        # each interval: +a over its left half, -a over its right half
        block = np.stack([a, -a], axis=-1)
        out += np.repeat(block.reshape(batch + (2 << k,)), half, axis=-1)
    return out


def analyze(values: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Batched inverse of :func:`synthesize`; input must be mean zero."""
    values = np.asarray(values, dtype=float)
    cells = values.shape[-1]
    res = cells.bit_length() - 1
    if cells != 1 << res or res < 1:
        raise ValueError(f"cell count {cells} is not a power of two >= 2")
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    if np.any(np.abs(values.mean(axis=-1)) > atol * scale):
        raise ValueError("step function is not mean zero; h_empty is not in Y_N")
    N = res - 1
    batch = values.shape[:-1]
    out = np.empty(batch + (dyadic.dimension(N),))
    for k in range(N + 1):
        halves = values.reshape(batch + (1 << k, 2, cells >> (k + 1))).sum(axis=-1)
        # <f, h_I> / |I| with cell width 2^-(N+1) and |I| = 2^-k
        out[..., dyadic.level_slice(k)] = (halves[..., 0] - halves[..., 1]) / (cells >> k)
    return out


def haar_synthesis(x: HaarVector) -> StepFunction:
    return StepFunction(x.ambient + 1, synthesize(x.coeffs))


def haar_analysis(f: StepFunction, N: int) -> HaarVector:
    if f.resolution != N + 1:
        raise ValueError(f"Y_{N} is rendered at resolution {N + 1}, got {f.resolution}")
    return HaarVector(N, analyze(f.values))


# -- norms -----------------------------------------------------------------

def _lp(values: np.ndarray, p: float) -> np.ndarray:
    """Normalized L^p norm along the last axis (cells of equal measure)."""
    a = np.abs(values)
    if math.isinf(p):
        return a.max(axis=-1)
    if p == 1.0:
        return a.mean(axis=-1)
    if p == 2.0:
        return np.sqrt((a * a).mean(axis=-1))
    # scale out the max to avoid overflow for large p
    m = a.max(axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    return m[..., 0] * ((a / safe) ** p).mean(axis=-1) ** (1.0 / p)


def base_norm(f, p: float) -> float:
    values = f.values if isinstance(f, StepFunction) else np.asarray(f, dtype=float)
    return float(_lp(values, float(p)))


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 10_000
    seed: int = 0


class NormEstimate(NamedTuple):
    value: float
    stderr: float


EXACT = "exact"
Method = Union[str, MonteCarlo]

_MAX_ELEMS = 1 << 22
_MC_CHUNK = 2048


def independent_profile(coeffs: np.ndarray) -> np.ndarray:
    """Exact ``g(s) = E_eps |sum eps_I a_I h_I(s)|`` per cell, batched.

    Only the N+1 intervals containing a cell contribute; the sign of the
    root term is fixed by symmetry, leaving ``2**N`` patterns per cell.
    Partial sums are shared down the dyadic tree, and both halves of an
    interval see the same multiset of sums.
    """
    coeffs = np.atleast_2d(np.abs(np.asarray(coeffs, dtype=float)))
    N = dyadic.ambient_from_dim(coeffs.shape[-1])
    B = coeffs.shape[0]
    per = 1 << (2 * N)
    step = max(1, _MAX_ELEMS // max(per, 1))
    out = np.empty((B, 1 << (N + 1)))
    for s in range(0, B, step):
        c = coeffs[s:s + step]
        b = c.shape[0]
        # level 0 with eps_root = +1
        partial = c[:, 0:1, None]                     # (b, 1 interval, 1 pattern)
        for k in range(1, N + 1):
            partial = np.repeat(partial, 2, axis=1)   # children inherit sums
            a = c[:, dyadic.level_slice(k)][:, :, None]
            partial = np.concatenate([partial + a, partial - a], axis=-1)
        g = np.abs(partial).mean(axis=-1)             # (b, 2^N) per level-N interval
        out[s:s + b] = np.repeat(g, 2, axis=1)
    return out


def _mc_chunks(samples: int, seed: int, dim: int):
    for c, start in enumerate(range(0, samples, _MC_CHUNK)):
        size = min(_MC_CHUNK, samples - start)
        rng = np.random.default_rng([seed, c])
        yield rng.choice(np.array([-1.0, 1.0]), size=(size, dim))


def _mc_independent(coeffs: np.ndarray, spec: SpaceSpec, mc: MonteCarlo) -> NormEstimate:
    dim = coeffs.size
    total = np.zeros(dim + 1)
    for eps in _mc_chunks(mc.samples, mc.seed, dim):
        total += np.abs(synthesize(eps * coeffs)).sum(axis=0)
    g = total / mc.samples
    value = float(_lp(g, spec.p))
    # delta-method standard error: linearize the base norm at g
    w = 1.0 / g.size
    if value == 0.0:
        return NormEstimate(0.0, 0.0)
    if math.isinf(spec.p):
        grad = np.zeros_like(g)
        grad[int(np.argmax(g))] = 1.0
    else:
        grad = w * g ** (spec.p - 1.0) * value ** (1.0 - spec.p)
    s1 = s2 = 0.0
    for eps in _mc_chunks(mc.samples, mc.seed, dim):
        lin = np.abs(synthesize(eps * coeffs)) @ grad
        s1 += lin.sum()
        s2 += (lin * lin).sum()
    n = mc.samples
    var = max(s2 - s1 * s1 / n, 0.0) / max(n - 1, 1)
    return NormEstimate(value, math.sqrt(var / n))


def norms(coeffs: np.ndarray, spec: SpaceSpec, cap: int = EXACT_CAP) -> np.ndarray:
    """Exact batched norms of rows of ``coeffs`` in the space ``spec``."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    N = dyadic.ambient_from_dim(coeffs.shape[-1])
    if N > cap:
        raise ValueError(f"exact evaluation capped at N={cap}, got N={N}")
    if spec.rademacher == CONSTANT:
        return _lp(synthesize(coeffs), spec.p)
    return _lp(independent_profile(coeffs), spec.p)


def hshs_norm(x, spec: SpaceSpec, method: Method = EXACT, cap: int = EXACT_CAP):
    """Norm of ``x`` in the Haar system Hardy space described by ``spec``.

    Returns a float for ``method="exact"`` and a :class:`NormEstimate`
    ``(value, stderr)`` for a :class:`MonteCarlo` method. In constant mode the
    Monte-Carlo path is exact and reports zero standard error.
    """
    coeffs = _coeff_array(x)
    if isinstance(method, MonteCarlo):
        if spec.rademacher == CONSTANT:
            return NormEstimate(float(_lp(synthesize(coeffs), spec.p)), 0.0)
        return _mc_independent(coeffs, spec, method)
    if method != EXACT:
        raise ValueError(f"unknown method {method!r}")
    return float(norms(coeffs, spec, cap)[0])


def dual_pairing(f, x) -> float:
    """``<f, x> = integral of f x = sum a_I b_I |I|``."""
    if isinstance(f, HaarVector) and isinstance(x, HaarVector):
        _check_same(f, x)
    a, b = _coeff_array(f), _coeff_array(x)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    N = dyadic.ambient_from_dim(a.size)
    return float(np.dot(a * b, dyadic.measures(N)))


def haar_norm(interval: DyadicInterval, spec: SpaceSpec) -> float:
    """``||h_I||_Y = |I|^{1/p}`` for the ``L^p`` base norm (both modes)."""
    if math.isinf(spec.p):
        return 1.0
    return interval.measure ** (1.0 / spec.p)


def haar_dual_norm(interval: DyadicInterval, spec: SpaceSpec) -> float:
    return interval.measure / haar_norm(interval, spec)


def dual_norm_lower_bound(f, spec: SpaceSpec, budget: int = 200, seed: int = 0,
                          **search) -> tuple[float, HaarVector]:
    """Certified lower bound for ``||f||_{Y*} = sup <f,x> / ||x||_Y``."""
    a = _coeff_array(f)
    N = dyadic.ambient_from_dim(a.size)
    if not np.any(a):
        return 0.0, HaarVector.zeros(N)
    weights = a * dyadic.measures(N)

    def objective(X):
        return (X @ weights) / norms(X, spec)

    extra = np.vstack([a, np.sign(a), np.eye(a.size)])
    value, witness = maximize_ratio(objective, a.size, seed, budget, extra=extra, **search)
    return value, HaarVector(N, witness)
