"""(Almost) faithful Haar systems and their associated operators.

A system assigns to every ``I`` in ``D_{<=n}`` a block ``B_I`` of dyadic
intervals in ``D_{<=N}`` with signs ``theta_K``; the block function is
``h~_I = sum_{K in B_I} theta_K h_K``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import dyadic
from .dyadic import DyadicInterval, ROOT
from .errors import EmptyBlockError, NotFaithfulError
from .operators import OperatorMatrix
from .spaces import HaarVector

Block = tuple[tuple[DyadicInterval, int], ...]


@dataclass(frozen=True)
class AlmostFaithfulSystem:
    n: int
    ambient: int
    blocks: tuple[Block, ...]  # indexed by iota(I) - 1 for I in D_{<=n}

    def __post_init__(self):
        blocks = tuple(tuple((K, int(s)) for K, s in b) for b in self.blocks)
        if len(blocks) != dyadic.dimension(self.n):
            raise ValueError(f"need {dyadic.dimension(self.n)} blocks for n={self.n}")
        for b in blocks:
            for K, s in b:
                if K.level > self.ambient:
                    raise ValueError(f"{K} is not in D_<={self.ambient}")
                if s not in (1, -1):
                    raise ValueError(f"sign must be +-1, got {s}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_mapping(cls, n: int, ambient: int, mapping: dict) -> "AlmostFaithfulSystem":
        blocks = [()] * dyadic.dimension(n)
        for I, b in mapping.items():
            blocks[I.index] = tuple(b)
        return cls(n, ambient, tuple(blocks))

    def block(self, I: DyadicInterval) -> Block:
        if I.level > self.n:
            raise KeyError(f"{I} is not in D_<={self.n}")
        return self.blocks[I.index]

    def block_measure(self, I: DyadicInterval) -> float:
        return float(self._measures[I.index])

    @cached_property
    def _measures(self) -> np.ndarray:
        return np.array([sum(K.measure for K, _ in b) for b in self.blocks])

    @property
    def mu(self) -> float:
        return float(self._measures[0])

    @cached_property
    def block_matrix(self) -> np.ndarray:
        """``(dim Y_N, dim Y_n)``: column ``I`` holds the coefficients of ``h~_I``."""
        H = np.zeros((dyadic.dimension(self.ambient), dyadic.dimension(self.n)))
        for i, b in enumerate(self.blocks):
            for K, s in b:
                H[K.index, i] = s
        return H

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ambient": self.ambient,
            "blocks": [[{"interval": K.to_json(), "sign": s} for K, s in b]
                       for b in self.blocks],
        }

    @classmethod
    def from_json(cls, data: dict) -> "AlmostFaithfulSystem":
        blocks = tuple(
            tuple((DyadicInterval.from_json(e["interval"]), int(e["sign"])) for e in b)
            for b in data["blocks"])
        return cls(int(data["n"]), int(data["ambient"]), blocks)


@dataclass
class Validation:
    almost_faithful: bool
    faithful: bool
    frequencies: Optional[tuple[int, ...]] = None
    problems: list[str] = field(default_factory=list)


def _units(K: DyadicInterval, N: int) -> int:
    return 1 << (N - K.level)


def _locate(K: DyadicInterval, parents: dict) -> Optional[DyadicInterval]:
    """The member of ``parents`` strictly containing ``K``, if any."""
    for lvl in range(K.level - 1, -1, -1):
        A = K.ancestor(lvl)
        if A in parents:
            return A
    return None


def validate(sys: AlmostFaithfulSystem) -> Validation:
    N = sys.ambient
    problems: list[str] = []
    seen: set[DyadicInterval] = set()
    for i, b in enumerate(sys.blocks):
        I = dyadic.from_index(i)
        if not b:
            problems.append(f"block of {I} is empty")
            continue
        spans = sorted((K.pos << (N - K.level), (K.pos + 1) << (N - K.level)) for K, _ in b)
        if any(spans[j][1] > spans[j + 1][0] for j in range(len(spans) - 1)):
            problems.append(f"block of {I} has overlapping intervals")
        for K, _ in b:
            if K in seen:
                problems.append(f"{K} appears in more than one block")
            seen.add(K)

    level_set_ok = True
    for i in range(dyadic.dimension(sys.n - 1) if sys.n > 0 else 0):
        I = dyadic.from_index(i)
        parents = dict(sys.blocks[i])
        for child, side in ((I.left_child, 1), (I.right_child, -1)):
            for K, _ in sys.block(child):
                L = _locate(K, parents)
                if L is None or parents[L] * L.half_containing(K) != side:
                    problems.append(f"{K} in block of {child} is outside {{h~_{I} = {side:+d}}}")
                    level_set_ok = False
    almost = not problems

    faithful = False
    if almost:
        units = [sum(_units(K, N) for K, _ in b) for b in sys.blocks]
        faithful = units[0] == 1 << N and all(
            units[I.left_child.index] * 2 == units[i] == units[I.right_child.index] * 2
            for i in range(dyadic.dimension(sys.n - 1) if sys.n > 0 else 0)
            for I in [dyadic.from_index(i)])

    frequencies = None
    if almost and level_set_ok:
        freq = []
        for k in range(sys.n + 1):
            lv = {K.level for i in range((1 << k) - 1, (1 << (k + 1)) - 1) for K, _ in sys.blocks[i]}
            if len(lv) != 1:
                break
            freq.append(lv.pop())
        if len(freq) == sys.n + 1 and all(a < b for a, b in zip(freq, freq[1:])):
            frequencies = tuple(freq)
    return Validation(almost, faithful, frequencies, problems)


def block_vector(sys: AlmostFaithfulSystem, I: DyadicInterval) -> HaarVector:
    b = sys.block(I)
    if not b:
        raise EmptyBlockError(I)
    return HaarVector(sys.ambient, sys.block_matrix[:, I.index].copy())


def associated_faithful(sys: AlmostFaithfulSystem) -> tuple[OperatorMatrix, OperatorMatrix]:
    """``(B^, A^)`` with ``B^ h_I = h^_I`` and ``A^ y = sum <h^_I, y>/|I| h_I``."""
    report = validate(sys)
    if not report.faithful:
        raise NotFaithfulError("; ".join(report.problems) or "system is not faithful")
    H = sys.block_matrix
    B = OperatorMatrix(H, sys.n, sys.ambient)
    A = OperatorMatrix(
        H.T * dyadic.measures(sys.ambient)[None, :] / dyadic.measures(sys.n)[:, None],
        sys.ambient, sys.n)
    return B, A


def almost_faithful_a_bound(sys: AlmostFaithfulSystem) -> float:
    """``1/mu + sum_{k=1}^n max_{I in D_k} (|I|/|B_I*| - 1/mu)``."""
    ratios = dyadic.measures(sys.n) / sys._measures
    inv_mu = 1.0 / sys.mu
    return inv_mu + sum(float(np.max(ratios[dyadic.level_slice(k)] - inv_mu))
                        for k in range(1, sys.n + 1))


def associated_almost(sys: AlmostFaithfulSystem) -> tuple[OperatorMatrix, OperatorMatrix, float]:
    """``(B, A, bound)`` with ``A y = sum <h~_I, y>/|B_I*| h_I`` and ``A B = I``."""
    for i, b in enumerate(sys.blocks):
        if not b:
            raise EmptyBlockError(dyadic.from_index(i))
    report = validate(sys)
    if not report.almost_faithful:
        raise NotFaithfulError("; ".join(report.problems))
    H = sys.block_matrix
    B = OperatorMatrix(H, sys.n, sys.ambient)
    A = OperatorMatrix(H.T * dyadic.measures(sys.ambient)[None, :] / sys._measures[:, None],
                       sys.ambient, sys.n)
    return B, A, almost_faithful_a_bound(sys)


def _level_set_children(parent_block: Block, target_level: int, side: int) -> list[DyadicInterval]:
    """Intervals of ``D_target_level`` inside ``{h~ = side}`` of a block."""
    out = []
    for L, s in parent_block:
        half = L.left_child if s * side == 1 else L.right_child
        shift = target_level - half.level
        out.extend(DyadicInterval(target_level, (half.pos << shift) + j) for j in range(1 << shift))
    return out


def frequency_faithful(frequencies: Sequence[int], ambient: Optional[int] = None,
                       signs: Optional[np.ndarray] = None) -> AlmostFaithfulSystem:
    """Faithful system with ``B_I`` in ``D_{k_i}`` for ``I`` in ``D_i``.

    ``B_[0,1) = D_{k_0}``; every eligible interval of the next frequency is
    kept. Signs are ``+1`` unless ``signs`` (indexed by iota - 1 over
    ``D_{<=ambient}``) is given.
    """
    k = list(frequencies)
    if not k or any(a >= b for a, b in zip(k, k[1:])) or k[0] < 0:
        raise ValueError(f"frequencies must be strictly increasing and >= 0: {k}")
    N = k[-1] if ambient is None else ambient
    if k[-1] > N:
        raise ValueError(f"frequency {k[-1]} exceeds ambient level {N}")
    n = len(k) - 1

    def sign(K):
        return 1 if signs is None else int(signs[K.index])

    blocks: list[Block] = [()] * dyadic.dimension(n)
    blocks[0] = tuple((K, sign(K)) for K in dyadic.enumerate_level(k[0]))
    for i in range(n):
        for I in dyadic.enumerate_level(i):
            parent = blocks[I.index]
            for child, side in ((I.left_child, 1), (I.right_child, -1)):
                blocks[child.index] = tuple(
                    (K, sign(K)) for K in _level_set_children(parent, k[i + 1], side))
    return AlmostFaithfulSystem(n, N, tuple(blocks))


def _random_partition(region: DyadicInterval, max_level: int, split: float,
                      rng: np.random.Generator) -> list[DyadicInterval]:
    if region.level >= max_level or rng.random() >= split:
        return [region]
    a, b = region.children()
    return _random_partition(a, max_level, split, rng) + _random_partition(b, max_level, split, rng)


def random_almost_faithful(n: int, N: int, seed: int, keep: float = 0.7,
                           faithful: bool = False, split: float = 0.5) -> AlmostFaithfulSystem:
    """Random (almost) faithful system with blocks at mixed levels.

    Each admissible region is partitioned into random dyadic pieces; in the
    almost-faithful case pieces are then dropped with probability
    ``1 - keep`` while keeping every block nonempty.
    """
    if N < n:
        raise ValueError("need N >= n")
    rng = np.random.default_rng([seed, n, N])

    def pick(regions, depth_room):
        pieces = []
        for R in regions:
            pieces += _random_partition(R, N - depth_room, split, rng)
        if not faithful:
            mask = rng.random(len(pieces)) < keep
            if not mask.any():
                mask[rng.integers(len(pieces))] = True
            pieces = [P for P, m in zip(pieces, mask) if m]
        return tuple((P, int(rng.choice([-1, 1]))) for P in pieces)

    blocks: list[Block] = [()] * dyadic.dimension(n)
    blocks[0] = pick([ROOT], n)
    for i in range(n):
        for I in dyadic.enumerate_level(i):
            parent = blocks[I.index]
            for child, side in ((I.left_child, 1), (I.right_child, -1)):
                regions = [L.left_child if s * side == 1 else L.right_child for L, s in parent]
                blocks[child.index] = pick(regions, n - i - 1)
    return AlmostFaithfulSystem(n, N, tuple(blocks))
