"""Per-query confidence intervals and grid-evaluated confidence bands.

A candidate value v at query x0 enters the interval when some z in the
output ellipsoid admits an interpolant through {(x_k, z_k)} and (x0, v)
whose squared RKHS norm stays within the norm budget.  Endpoints come from
the bisection/trust-region machinery in :mod:`pwband.quadopt`.

Sinc Gram matrices of oversampled inputs can be numerically singular in
double precision even though they are positive definite in exact arithmetic.
The augmented Gram inverse used here floors eigenvalues at a relative
threshold, which shrinks the norm quadratic and therefore only widens the
interval: coverage guarantees are preserved and the computation stays
stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .ellipsoids import Ellipsoid, axis_halfwidth
from .kernels import DUPLICATE_TOL, KernelConfig, SampleSet, as_points, kernel_matrix
from .norm_bounds import NormBound
from .quadopt import DualSolveError, interval_endpoint

EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class BandConfig:
    """Risk split, subsample size, kernel and bound method of a band."""

    alpha: float
    beta: float
    n0: int
    kernel: KernelConfig
    bound_method: str = "randomized_hoeffding"

    def __post_init__(self):
        if not (0 <= self.alpha < 1 and 0 <= self.beta < 1):
            raise ValueError("alpha and beta must lie in [0, 1)")
        if self.alpha + self.beta >= 1:
            raise ValueError("alpha + beta must be below 1")
        if self.n0 < 0:
            raise ValueError("n0 must be nonnegative")


@dataclass(frozen=True)
class IntervalEstimate:
    """Interval for the regression value at one query point.

    ``lo``/``hi`` are None for an empty interval; an empty confidence region
    is statistically informative, not an error.
    """

    query: NDArray[np.float64]
    lo: float | None
    hi: float | None
    note: str | None = None

    def __post_init__(self):
        if (self.lo is None) != (self.hi is None):
            raise ValueError("lo and hi must both be set or both be None")
        if self.lo is not None and self.lo > self.hi:
            raise ValueError("lo must not exceed hi")

    @property
    def is_empty(self) -> bool:
        return self.lo is None

    @property
    def width(self) -> float:
        return 0.0 if self.is_empty else self.hi - self.lo


def floored_gram_inverse(K: NDArray, floor_rel: float = EIGENVALUE_FLOOR) -> NDArray:
    """Inverse with eigenvalues floored at floor_rel times the largest.

    For a Gram matrix this is a conservative relaxation: flooring raises the
    matrix in the Loewner order, so the inverse (the norm quadratic) can only
    shrink and every exactly-feasible point stays feasible.
    """
    evals, evecs = scipy.linalg.eigh(np.asarray(K, dtype=float))
    floor = floor_rel * float(evals[-1])
    if floor <= 0:
        raise ValueError("Gram matrix must have a positive top eigenvalue")
    clipped = np.maximum(evals, floor)
    return (evecs / clipped) @ evecs.T


def interval_at(
    x0,
    subsample: SampleSet,
    e: Ellipsoid,
    bound: NormBound,
    cfg: BandConfig,
) -> IntervalEstimate:
    """Confidence interval for the regression value at one query point."""
    query = as_points(x0, cfg.kernel.dim)[0]
    tau = bound.value
    if not tau > 0:
        raise ValueError("norm bound must be positive")
    envelope = float(np.sqrt(tau * cfg.kernel.diagonal_value))
    n0 = len(subsample)
    if n0 == 0:
        return IntervalEstimate(query, -envelope, envelope)
    if e.dim != n0:
        raise ValueError("ellipsoid dimension does not match subsample size")

    dists = np.abs(subsample.inputs - query).max(axis=1)
    nearest = int(np.argmin(dists))
    if dists[nearest] < DUPLICATE_TOL:
        # Query coincides with an observed input: augmenting the Gram would be
        # singular, so answer from that coordinate's range in the ellipsoid
        # intersected with the norm envelope.
        hw = axis_halfwidth(e, nearest)
        center = float(e.center[nearest])
        lo = max(center - hw, -envelope)
        hi = min(center + hw, envelope)
        if lo > hi:
            return IntervalEstimate(query, None, None)
        return IntervalEstimate(query, lo, hi)

    aug_nodes = np.vstack([subsample.inputs, query[None, :]])
    K_aug = kernel_matrix(aug_nodes, aug_nodes, cfg.kernel)
    Q = floored_gram_inverse(K_aug)
    lo = interval_endpoint(Q, e, tau, "min")
    hi = interval_endpoint(Q, e, tau, "max")
    if lo is None or hi is None:
        return IntervalEstimate(query, None, None)
    lo = max(lo, -envelope)
    hi = min(hi, envelope)
    if lo > hi:
        return IntervalEstimate(query, None, None)
    return IntervalEstimate(query, float(lo), float(hi))


def band_over_grid(
    grid,
    subsample: SampleSet,
    e: Ellipsoid,
    bound: NormBound,
    cfg: BandConfig,
) -> list[IntervalEstimate]:
    """Pointwise intervals over a grid; per-point failures are recorded on the
    estimate instead of aborting the band."""
    pts = as_points(grid, cfg.kernel.dim)
    estimates = []
    for row in pts:
        try:
            estimates.append(interval_at(row, subsample, e, bound, cfg))
        except (DualSolveError, np.linalg.LinAlgError, ValueError) as err:
            estimates.append(
                IntervalEstimate(row, None, None, note=f"{type(err).__name__}: {err}")
            )
    return estimates
