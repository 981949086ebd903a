"""Ranked recommendation lists and the shared top-n selection rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass
class RankedList:
    """Ordered recommendations for one user.

    ``items`` holds ``(hotel_code, score)`` pairs best-first. ``sources`` is
    parallel to ``items`` and records which engine produced each slot.
    ``truncated`` is set when the engine had fewer candidates than requested.
    """

    user_id: str
    items: list[tuple[str, float]] = field(default_factory=list)
    sources: list[str] = field(default_factory=list)
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.sources and len(self.sources) != len(self.items):
            raise ValueError("sources must align with items")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def hotels(self) -> list[str]:
        return [code for code, _ in self.items]

    @property
    def scores(self) -> list[float]:
        return [score for _, score in self.items]

    def head(self, n: int) -> list[str]:
        return [code for code, _ in self.items[:n]]


def top_n(scores: np.ndarray, n: int, exclude: Iterable[int] = ()) -> np.ndarray:
    """Indices of the ``n`` highest scores, best first.

    Equal scores are ordered by ascending index so the result is total and
    deterministic. Excluded indices never appear.
    """
    scores = np.asarray(scores, dtype=float)
    valid = np.ones(scores.shape[0], dtype=bool)
    ex = np.fromiter(exclude, dtype=np.intp)
    if ex.size:
        valid[ex] = False
    cand = np.flatnonzero(valid)
    if n <= 0 or cand.size == 0:
        return np.empty(0, dtype=np.intp)
    vals = scores[cand]
    if n < cand.size:
        # keep every candidate tied with the n-th best so the index tie-break is exact
        kth = np.partition(-vals, n - 1)[n - 1]
        keep = -vals <= kth
        cand, vals = cand[keep], vals[keep]
    order = np.lexsort((cand, -vals))
    return cand[order[:n]]


def make_list(
    user_id: str,
    codes: Sequence[str],
    scores: np.ndarray,
    picked: np.ndarray,
    source: str,
    truncated: bool = False,
) -> RankedList:
    items = [(codes[i], float(scores[i])) for i in picked]
    return RankedList(user_id, items, [source] * len(items), truncated)
