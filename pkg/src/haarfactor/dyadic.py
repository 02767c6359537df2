"""Dyadic intervals, the index map iota and Haar functions as step functions.

Intervals of ``[0, 1)`` are identified by ``(level, pos)``; the interval
``[pos / 2**level, (pos + 1) / 2**level)`` has index ``iota = 2**level + pos``.
Coefficient arrays over ``D_{<=N}`` are stored in iota order, so the interval
with index ``iota`` sits at array position ``iota - 1`` and level ``k``
occupies the slice ``[2**k - 1, 2**(k+1) - 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True, order=True)
class DyadicInterval:
    level: int
    pos: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        if not 0 <= self.pos < (1 << self.level):
            raise ValueError(f"pos {self.pos} out of range for level {self.level}")

    @property
    def measure(self) -> float:
        return 2.0 ** -self.level

    @property
    def exact_measure(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def left(self) -> Fraction:
        return Fraction(self.pos, 1 << self.level)

    @property
    def right(self) -> Fraction:
        return Fraction(self.pos + 1, 1 << self.level)

    @property
    def iota(self) -> int:
        return (1 << self.level) + self.pos

    @property
    def index(self) -> int:
        """Array position in an iota-ordered coefficient vector."""
        return self.iota - 1

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        """Return ``(I+, I-)``: left half first, then right half."""
        return (DyadicInterval(self.level + 1, 2 * self.pos),
                DyadicInterval(self.level + 1, 2 * self.pos + 1))

    @property
    def left_child(self) -> "DyadicInterval":
        return DyadicInterval(self.level + 1, 2 * self.pos)

    @property
    def right_child(self) -> "DyadicInterval":
        return DyadicInterval(self.level + 1, 2 * self.pos + 1)

    def parent(self) -> "DyadicInterval":
        if self.level == 0:
            raise ValueError("[0,1) has no parent in D")
        return DyadicInterval(self.level - 1, self.pos >> 1)

    def ancestor(self, level: int) -> "DyadicInterval":
        if not 0 <= level <= self.level:
            raise ValueError(f"no ancestor of {self} at level {level}")
        return DyadicInterval(level, self.pos >> (self.level - level))

    def contains(self, other: "DyadicInterval") -> bool:
        """True when ``other`` is a subset of ``self``."""
        if other.level < self.level:
            return False
        return (other.pos >> (other.level - self.level)) == self.pos

    def strictly_contains(self, other: "DyadicInterval") -> bool:
        return other.level > self.level and self.contains(other)

    def half_containing(self, other: "DyadicInterval") -> int:
        """+1 if ``other`` lies in the left half, -1 if in the right half.

        ``other`` must be strictly contained in ``self``.
        """
        if not self.strictly_contains(other):
            raise ValueError(f"{other} is not strictly inside {self}")
        bit = (other.pos >> (other.level - self.level - 1)) & 1
        return 1 if bit == 0 else -1

    def disjoint(self, other: "DyadicInterval") -> bool:
        return not (self.contains(other) or other.contains(self))

    def to_json(self) -> list[int]:
        return [self.level, self.pos]

    @classmethod
    def from_json(cls, data) -> "DyadicInterval":
        if isinstance(data, (int, np.integer)):
            return from_iota(int(data))
        level, pos = data
        return cls(int(level), int(pos))

    def __str__(self) -> str:
        return f"[{self.left},{self.right})"


ROOT = DyadicInterval(0, 0)


def iota_index(interval: DyadicInterval) -> int:
    return interval.iota


def from_iota(iota: int) -> DyadicInterval:
    if iota < 1:
        raise ValueError(f"iota must be positive, got {iota}")
    level = iota.bit_length() - 1
    return DyadicInterval(level, iota - (1 << level))


def from_index(index: int) -> DyadicInterval:
    return from_iota(index + 1)


def enumerate_level(k: int) -> list[DyadicInterval]:
    """All intervals of ``D_k`` from left to right."""
    return [DyadicInterval(k, i) for i in range(1 << k)]


def enumerate_upto(n: int) -> Iterator[DyadicInterval]:
    """``D_{<=n}`` in iota order."""
    for k in range(n + 1):
        yield from enumerate_level(k)


def dimension(n: int) -> int:
    """``dim Y_n = 2**(n+1) - 1``."""
    return (1 << (n + 1)) - 1


def level_slice(k: int) -> slice:
    return slice((1 << k) - 1, (1 << (k + 1)) - 1)


def ambient_from_dim(dim: int) -> int:
    n = (dim + 1).bit_length() - 2
    if dimension(n) != dim:
        raise ValueError(f"{dim} is not of the form 2**(N+1) - 1")
    return n


def measures(n: int) -> np.ndarray:
    """``|I|`` for all ``I`` in ``D_{<=n}``, iota order."""
    return np.concatenate([np.full(1 << k, 2.0 ** -k) for k in range(n + 1)])


def levels(n: int) -> np.ndarray:
    return np.concatenate([np.full(1 << k, k, dtype=int) for k in range(n + 1)])


def union_measure(collection: Sequence[DyadicInterval]) -> float:
    """``|B*|`` for a collection of pairwise disjoint intervals."""
    return float(sum(K.exact_measure for K in collection))


@dataclass(frozen=True)
class StepFunction:
    """A function constant on each cell of ``D_resolution``."""

    resolution: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape[-1] != 1 << self.resolution:
            raise ValueError(
                f"expected {1 << self.resolution} cells, got {values.shape[-1]}")
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(self.values.sum() * 2.0 ** -self.resolution)

    def __len__(self) -> int:
        return self.values.shape[-1]


def haar_step(interval: DyadicInterval, resolution: int) -> StepFunction:
    """``h_I = chi_{I+} - chi_{I-}`` sampled on the cells of ``D_resolution``."""
    if interval.level + 1 > resolution:
        raise ValueError(
            f"h_I for level {interval.level} needs resolution >= {interval.level + 1}")
    width = 1 << (resolution - interval.level)
    start = interval.pos * width
    values = np.zeros(1 << resolution)
    values[start:start + width // 2] = 1.0
    values[start + width // 2:start + width] = -1.0
    return StepFunction(resolution, values)
