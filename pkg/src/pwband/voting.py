"""Majority-voting aggregation of per-query confidence intervals.

Given K interval estimates for the same query point, each scheme keeps the
values whose weighted vote share exceeds a threshold:

* ``majority``                  equal weights, threshold 1/2,
* ``random_ordering``           intersection of majority sets over growing
                                prefixes of a random permutation,
* ``randomized_threshold_half`` equal weights, threshold (1+U)/2,
* ``randomized_threshold_full`` equal weights, threshold U,
* ``weighted_randomized``       supplied weights, threshold (1+U)/2.

Member intervals are closed and the vote comparison is strict, so membership
at shared endpoints counts for every interval containing the point; an empty
member casts no votes anywhere.  Vote counts over the piecewise-constant
arrangement of endpoints are integers for the equal-weight schemes, which
makes the subset laws between the schemes hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

Interval = tuple[float, float]


@dataclass(frozen=True)
class UnionOfIntervals:
    """Sorted, disjoint, closed intervals (possibly zero-length)."""

    segments: tuple[Interval, ...]

    @classmethod
    def from_segments(cls, segments: Iterable[Interval]) -> "UnionOfIntervals":
        segs = sorted((float(lo), float(hi)) for lo, hi in segments)
        merged: list[list[float]] = []
        for lo, hi in segs:
            if hi < lo:
                raise ValueError(f"segment ({lo}, {hi}) has negative length")
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return cls(tuple((lo, hi) for lo, hi in merged))

    @property
    def is_empty(self) -> bool:
        return not self.segments

    def total_length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.segments))

    def bounds(self) -> Interval | None:
        """Smallest and largest covered value, or None when empty."""
        if self.is_empty:
            return None
        return self.segments[0][0], self.segments[-1][1]

    def contains(self, y: float) -> bool:
        return any(lo <= y <= hi for lo, hi in self.segments)

    def intersect(self, other: "UnionOfIntervals") -> "UnionOfIntervals":
        out = []
        for alo, ahi in self.segments:
            for blo, bhi in other.segments:
                lo, hi = max(alo, blo), min(ahi, bhi)
                if lo <= hi:
                    out.append((lo, hi))
        return UnionOfIntervals.from_segments(out)

    def is_subset_of(self, other: "UnionOfIntervals") -> bool:
        return all(
            any(blo <= alo and ahi <= bhi for blo, bhi in other.segments)
            for alo, ahi in self.segments
        )


EMPTY_UNION = UnionOfIntervals(())


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative voting weights summing to one."""

    w: NDArray[np.float64]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.w)


def equal_weights(k: int) -> WeightVector:
    return WeightVector(np.full(k, 1.0 / k))


class IntervalCollection:
    """K closed intervals (or empty markers) for a single query point."""

    def __init__(self, intervals: Sequence):
        items: list[Interval | None] = []
        for item in intervals:
            if item is None:
                items.append(None)
            elif hasattr(item, "is_empty"):  # IntervalEstimate
                items.append(None if item.is_empty else (float(item.lo), float(item.hi)))
            else:
                lo, hi = item
                if hi < lo:
                    raise ValueError(f"interval ({lo}, {hi}) has lo > hi")
                items.append((float(lo), float(hi)))
        self.intervals: tuple[Interval | None, ...] = tuple(items)

    def __len__(self) -> int:
        return len(self.intervals)


def _arrangement(c: IntervalCollection):
    """Breakpoints plus the K x (2m-1) piece membership matrix.

    Pieces alternate point, open segment, point, ...; an open segment is
    covered only by intervals covering both of its endpoints, so any included
    segment automatically comes with its endpoints and the voted set is a
    union of closed intervals.
    """
    present = [(i, seg) for i, seg in enumerate(c.intervals) if seg is not None]
    if not present:
        return None, None
    bounds = np.unique(
        np.array([v for _, (lo, hi) in present for v in (lo, hi)], dtype=float)
    )
    m = len(bounds)
    member = np.zeros((len(c), 2 * m - 1), dtype=bool)
    for i, (lo, hi) in present:
        at_points = (lo <= bounds) & (bounds <= hi)
        member[i, 0::2] = at_points
        if m > 1:
            member[i, 1::2] = at_points[:-1] & at_points[1:]
    return bounds, member


def _mask_to_union(bounds: NDArray, mask: NDArray) -> UnionOfIntervals:
    if bounds is None or not mask.any():
        return EMPTY_UNION
    edges = (bounds[np.arange(len(mask)) // 2], bounds[(np.arange(len(mask)) + 1) // 2])
    segments = []
    start = None
    for j, keep in enumerate(mask):
        if keep and start is None:
            start = edges[0][j]
        if not keep and start is not None:
            segments.append((start, edges[1][j - 1]))
            start = None
    if start is not None:
        segments.append((start, edges[1][len(mask) - 1]))
    return UnionOfIntervals.from_segments(segments)


def _vote_counts(c: IntervalCollection):
    bounds, member = _arrangement(c)
    if bounds is None:
        return None, None
    return bounds, member.sum(axis=0)


def vote_set(c: IntervalCollection, w: WeightVector, t: float) -> UnionOfIntervals:
    """Values whose weighted vote share strictly exceeds t."""
    if not 0.0 <= t < 1.0:
        raise ValueError(f"threshold must lie in [0, 1), got {t}")
    if len(w) != len(c):
        raise ValueError("one weight per interval required")
    bounds, member = _arrangement(c)
    if bounds is None:
        return EMPTY_UNION
    coverage = np.array(
        [math.fsum(w.w[member[:, j]]) for j in range(member.shape[1])]
    )
    return _mask_to_union(bounds, coverage > t)


def majority(c: IntervalCollection) -> UnionOfIntervals:
    """Values vouched for by more than half of the K intervals."""
    if len(c) < 2:
        raise ValueError("majority voting needs at least two intervals")
    bounds, counts = _vote_counts(c)
    if bounds is None:
        return EMPTY_UNION
    return _mask_to_union(bounds, 2 * counts > len(c))


def random_ordering(c: IntervalCollection, perm: Sequence[int]) -> UnionOfIntervals:
    """Intersection of the majority sets of every prefix of a random ordering.

    ``perm`` must be a permutation of range(K) drawn independently of the
    intervals.  The result is contained in the plain majority set, with the
    same coverage guarantee.
    """
    k = len(c)
    if k < 2:
        raise ValueError("random ordering needs at least two intervals")
    order = np.asarray(perm, dtype=int)
    if sorted(order.tolist()) != list(range(k)):
        raise ValueError("perm must be a permutation of range(K)")
    bounds, member = _arrangement(c)
    if bounds is None:
        return EMPTY_UNION
    prefix_counts = np.cumsum(member[order], axis=0)
    prefix_sizes = np.arange(1, k + 1)[:, None]
    mask = (2 * prefix_counts > prefix_sizes).all(axis=0)
    return _mask_to_union(bounds, mask)


def _threshold_mask(c: IntervalCollection, t: float):
    bounds, counts = _vote_counts(c)
    if bounds is None:
        return None, None
    k = len(c)
    if t >= 1.0:  # unanimity: strict > at a threshold just below one
        return bounds, counts >= k
    return bounds, counts > t * k


def randomized_threshold_half(c: IntervalCollection, u: float) -> UnionOfIntervals:
    """Equal-weight vote at random threshold (1 + u)/2; subset of majority."""
    if len(c) < 2:
        raise ValueError("randomized thresholding needs at least two intervals")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    bounds, mask = _threshold_mask(c, (1.0 + u) / 2.0)
    return EMPTY_UNION if bounds is None else _mask_to_union(bounds, mask)


def randomized_threshold_full(c: IntervalCollection, u: float) -> UnionOfIntervals:
    """Equal-weight vote at random threshold u itself."""
    if len(c) < 2:
        raise ValueError("randomized thresholding needs at least two intervals")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    bounds, mask = _threshold_mask(c, u)
    return EMPTY_UNION if bounds is None else _mask_to_union(bounds, mask)


def weighted_randomized(
    c: IntervalCollection, w: WeightVector, u: float
) -> UnionOfIntervals:
    """Weighted vote at random threshold (1 + u)/2."""
    if len(c) < 2:
        raise ValueError("weighted voting needs at least two intervals")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    t = min((1.0 + u) / 2.0, 1.0 - 1e-9)
    return vote_set(c, w, t)


def total_length(s: UnionOfIntervals) -> float:
    """Lebesgue measure of the union."""
    return s.total_length()
