"""Containers shared by every point-process sampler."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PointSample:
    """A finite sorted set of nonnegative points from one sampler run.

    ``truncated`` marks runs stopped by a step or point budget before the
    process finished on its own.
    """

    points: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        pts = np.sort(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def count_le(self, v: float) -> int:
        return int(np.searchsorted(self.points, v, side="right"))

    @property
    def first(self) -> float:
        return float(self.points[0]) if self.points.size else np.inf

    @property
    def last(self) -> float:
        return float(self.points[-1]) if self.points.size else -np.inf


@dataclass
class PointBatch:
    """Per-replica summaries of many runs of one point process.

    ``low``/``high`` hold each replica's smallest/largest points sorted
    outward from the extreme and padded with ``inf``/``-inf``;
    ``counts[:, c]`` is the number of points ``<= levels[c]``; ``total`` is the
    number of points (a lower bound where ``truncated``).
    """

    total: np.ndarray
    truncated: np.ndarray
    low: np.ndarray
    high: np.ndarray
    counts: np.ndarray
    levels: tuple
    extra: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.total.size

    @property
    def nu(self) -> np.ndarray:
        return self.total

    @property
    def first(self) -> np.ndarray:
        return self.low[:, 0]

    @property
    def last(self) -> np.ndarray:
        return self.high[:, 0]

    def count_at(self, v: float) -> np.ndarray:
        return self.counts[:, self.levels.index(float(v))]

    @staticmethod
    def concat(parts: Sequence["PointBatch"]) -> "PointBatch":
        def cat(name):
            return np.concatenate([getattr(p, name) for p in parts])

        extra = {k: np.concatenate([p.extra[k] for p in parts]) for k in parts[0].extra}
        return PointBatch(
            cat("total"), cat("truncated"), cat("low"), cat("high"), cat("counts"),
            parts[0].levels, extra,
        )


def merge_lowest(best: np.ndarray, new: np.ndarray, k: int) -> np.ndarray:
    """Keep the ``k`` smallest entries of ``best`` and ``new`` per row, sorted."""
    comb = np.concatenate([best, new], axis=1)
    if comb.shape[1] > k:
        comb = np.partition(comb, k - 1, axis=1)[:, :k]
    return np.sort(comb, axis=1)


class BatchAccumulator:
    """Streams chunks of candidate points into a :class:`PointBatch`.

    Each ``add`` call receives, for a subset of replicas, a matrix of point
    values and a boolean mask of which entries are real points.
    """

    def __init__(self, size: int, n_low: int = 1, n_high: int = 1, levels: Sequence[float] = ()):
        self.levels = tuple(float(v) for v in levels)
        self._lev = np.asarray(self.levels)
        self.total = np.zeros(size, dtype=np.int64)
        self.truncated = np.zeros(size, dtype=bool)
        self.low = np.full((size, n_low), np.inf)
        self.high = np.full((size, n_high), -np.inf)
        self.counts = np.zeros((size, len(self.levels)), dtype=np.int64)
        self.extra: dict = {}

    def add(self, rows: np.ndarray, values: np.ndarray, mask: np.ndarray) -> None:
        self.total[rows] += mask.sum(axis=1)
        k = self.low.shape[1]
        if k:
            self.low[rows] = merge_lowest(self.low[rows], np.where(mask, values, np.inf), k)
        k = self.high.shape[1]
        if k:
            self.high[rows] = -merge_lowest(-self.high[rows], np.where(mask, -values, np.inf), k)
        for c, v in enumerate(self._lev):
            self.counts[rows, c] += ((values <= v) & mask).sum(axis=1)

    def result(self) -> PointBatch:
        return PointBatch(
            self.total, self.truncated, self.low, self.high, self.counts, self.levels, self.extra,
        )
