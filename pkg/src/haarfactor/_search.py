"""Seeded random-start + coordinate pattern search for ratio maximization.

Used for certified lower bounds: every returned value is attained by the
returned witness, so it never overstates the supremum.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

# relative coordinate steps tried during a sweep (both signs)
_STEPS = np.array([2.0, 1.0, 0.5, 0.25, 0.1, 0.03, 0.01, 1e-3, 1e-4])
_CHUNK = 512


def _evaluate(objective, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        for start in range(0, X.shape[0], _CHUNK):
            out[start:start + _CHUNK] = objective(X[start:start + _CHUNK])
    return np.where(np.isfinite(out), out, -np.inf)


def maximize_ratio(
    objective: Callable[[np.ndarray], np.ndarray],
    dim: int,
    seed: int,
    budget: int = 200,
    extra: np.ndarray | None = None,
    refine: int = 3,
    tol: float = 1e-6,
    max_sweeps: int = 30,
) -> tuple[float, np.ndarray]:
    """Maximize a scale-invariant batched ``objective`` over nonzero vectors.

    ``budget`` seeded Gaussian starts plus the rows of ``extra`` are scored,
    then the ``refine`` best are improved by coordinate pattern search until
    a sweep gains less than ``tol`` relatively (``refine=0`` only scores).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((budget, dim))
    if extra is not None and len(extra):
        starts = np.vstack([np.atleast_2d(extra), starts])
    norms = np.abs(starts).max(axis=1)
    starts = starts[norms > 0] / norms[norms > 0, None]
    if starts.shape[0] == 0:
        return 0.0, np.zeros(dim)
    values = _evaluate(objective, starts)
    order = np.argsort(-values, kind="stable")
    best_val, best_x = float(values[order[0]]), starts[order[0]].copy()
    order = order[:refine]
    deltas = np.concatenate([_STEPS, -_STEPS])
    for idx in order:
        x = starts[idx].copy()
        v = float(values[idx])
        for _ in range(max_sweeps):
            before = v
            for i in range(dim):
                trial = np.repeat(x[None, :], deltas.size + 1, axis=0)
                trial[:-1, i] += deltas
                trial[-1, i] = 0.0
                tv = _evaluate(objective, trial)
                j = int(np.argmax(tv))
                if tv[j] > v:
                    v = float(tv[j])
                    x = trial[j]
            scale = np.abs(x).max()
            if scale > 0:
                x = x / scale
            if v - before <= tol * max(abs(before), 1e-300):
                break
        if v > best_val:
            best_val, best_x = v, x
    return best_val, best_x
