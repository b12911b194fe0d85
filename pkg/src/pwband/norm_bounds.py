"""Stochastic upper bounds on the squared RKHS norm of the regression function.

Because the Paley-Wiener norm is the L2 norm, the importance-sampling average
of f(x_i)^2 / h(x_i) over the known input density h converges to the squared
norm.  Each bound here is the maximum of that average over the output
confidence ellipsoid, plus a concentration term:

* Hoeffding term (range rho),
* uniformly-randomized Hoeffding term (almost surely strictly smaller),
* empirical Bernstein term, either from the observed noise-free outputs or
  from a certified maximization of the empirical variance over the ellipsoid.

A bound built at risk alpha from an ellipsoid at risk beta covers the true
squared norm with probability at least 1 - alpha - beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .concentration import (
    TailBudget,
    conservative_threshold,
    empirical_bernstein_term,
    empirical_variance,
    hoeffding_term,
    randomized_hoeffding_term,
)
from .ellipsoids import Ellipsoid, axis_halfwidths
from .kernels import SampleSet
from .quadopt import QuadraticObjective, max_quadratic_over_ellipsoid

METHODS = ("hoeffding", "randomized_hoeffding", "bernstein_noisefree", "bernstein_noisy")


@dataclass(frozen=True)
class DensityModel:
    """Known input density plus the envelope constant bounding f^2 / h."""

    pdf: Callable[[NDArray], NDArray]
    ratio_bound: float

    def __post_init__(self):
        if not self.ratio_bound > 0:
            raise ValueError("ratio_bound must be positive")

    def at(self, inputs: NDArray) -> NDArray:
        """Density values at an (n, d) array of points; must be positive."""
        vals = np.asarray(self.pdf(inputs), dtype=float).ravel()
        if np.any(vals <= 0):
            raise ValueError("input density must be strictly positive")
        return vals


@dataclass(frozen=True)
class NormBound:
    """An upper bound on the squared norm together with its risk budget."""

    value: float
    method: str
    alpha: float
    beta: float
    base_estimate: float
    u_draw: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def max_norm_estimate(sample: SampleSet, density: DensityModel, e: Ellipsoid) -> float:
    """Worst-case importance-sampling norm estimate over the ellipsoid.

    Maximizes (1/n0) sum_k z_k^2 / h(x_k) over z in the ellipsoid; for a
    degenerate ellipsoid this is a point evaluation at its center.
    """
    n0 = len(sample)
    if e.dim != n0:
        raise ValueError(f"ellipsoid dim {e.dim} does not match subsample size {n0}")
    h = density.at(sample.inputs)
    if e.degenerate:
        return float(np.mean(e.center**2 / h))
    obj = QuadraticObjective(np.diag(1.0 / (n0 * h)), np.zeros(n0))
    value, _ = max_quadratic_over_ellipsoid(obj, e)
    return value


def hoeffding_bound(
    base: float, density: DensityModel, budget: TailBudget, beta: float = 0.0
) -> NormBound:
    """Base estimate plus the plain Hoeffding term at range rho."""
    rho = density.ratio_bound
    value = base + rho * math.sqrt(math.log(1.0 / budget.alpha) / (2.0 * budget.n))
    return NormBound(value, "hoeffding", budget.alpha, beta, base)


def randomized_hoeffding_bound(
    base: float,
    density: DensityModel,
    budget: TailBudget,
    u: float,
    beta: float = 0.0,
) -> NormBound:
    """Base estimate plus the uniformly-randomized Hoeffding term.

    ``u`` must come from a uniform(0, 1) stream independent of the data; the
    resulting bound is strictly below the plain Hoeffding bound whenever
    u < 1 while keeping the same coverage guarantee.
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    value = base + randomized_hoeffding_term(density.ratio_bound / 2.0, budget, u)
    return NormBound(value, "randomized_hoeffding", budget.alpha, beta, base, u_draw=u)


def _weighted_squares(sample: SampleSet, density: DensityModel, z: NDArray) -> NDArray:
    return np.asarray(z, dtype=float) ** 2 / density.at(sample.inputs)


def bernstein_bound_noise_free(
    sample: SampleSet, density: DensityModel, budget: TailBudget, beta: float = 0.0
) -> NormBound:
    """Empirical Bernstein bound from exactly observed noise-free outputs.

    The Bernstein term applies to the rho-normalized sample (values in
    [0, 1]), so the variance enters divided by rho^2; passing the raw-scale
    variance would inflate the deviation term by a factor of rho.
    """
    if sample.outputs is None:
        raise ValueError("noise-free Bernstein bound needs outputs")
    if len(sample) < 2:
        raise ValueError("Bernstein bound needs at least two points")
    rho = density.ratio_bound
    t = _weighted_squares(sample, density, sample.outputs)
    base = float(np.mean(t))
    value = base + empirical_bernstein_term(
        rho, budget, empirical_variance(t) / rho**2
    )
    return NormBound(value, "bernstein_noisefree", budget.alpha, beta, base)


def _variance_of_weighted_squares(z_batch: NDArray, h: NDArray) -> NDArray:
    """Empirical variance of z^2/h along the last axis for a batch of z."""
    t = z_batch**2 / h
    return t.var(axis=-1, ddof=1)


def _box_variance_max(upper: NDArray) -> float:
    """Exact maximum of the empirical variance over the box prod_k [0, u_k].

    The variance is convex, so the maximum sits at a vertex; a vertex keeps a
    subset of coordinates at their upper level and the rest at zero.  An
    exchange argument shows an optimal subset takes the largest levels, so it
    is a prefix of the descending sort; small boxes are cross-checked against
    full vertex enumeration in the tests.
    """
    u = np.sort(np.asarray(upper, dtype=float))[::-1]
    n = len(u)
    if n < 2:
        return 0.0
    csum = np.cumsum(u)
    csq = np.cumsum(u**2)
    # Prefix m: variance (csq_m - csum_m^2 / n) / (n - 1).
    best = (csq - csum**2 / n) / (n - 1)
    return float(max(0.0, best.max()))


def _box_variance_max_enumerated(upper: NDArray) -> float:
    """Vertex enumeration; exponential, for n <= 12 only."""
    u = np.asarray(upper, dtype=float)
    n = len(u)
    if n > 12:
        raise ValueError("vertex enumeration limited to 12 coordinates")
    best = 0.0
    for mask in range(1 << n):
        x = np.where((mask >> np.arange(n)) & 1, u, 0.0)
        best = max(best, float(np.var(x, ddof=1)))
    return best


def max_empirical_variance(
    density: DensityModel,
    sample: SampleSet,
    e: Ellipsoid,
    rng: np.random.Generator | None = None,
) -> tuple[float, NDArray]:
    """Certified upper bound on the empirical variance of z^2/h over the ellipsoid.

    The objective is quartic in z, so instead of an exact solve this returns
    min(certified coordinate-box bound, 1.01 * best local value), where the
    local value comes from multi-start projected gradient ascent refined by
    boundary sampling.  Downstream validity only needs the returned value to
    dominate the true maximum.
    """
    n0 = len(sample)
    h = density.at(sample.inputs)
    if e.degenerate:
        z = e.center
        return float(_variance_of_weighted_squares(z, h)), z.copy()
    if n0 < 2:
        raise ValueError("empirical variance needs at least two coordinates")
    rng = np.random.default_rng(0) if rng is None else rng

    halfwidths = axis_halfwidths(e)
    upper = (np.abs(e.center) + halfwidths) ** 2 / h
    if n0 <= 12:
        box_bound = _box_variance_max_enumerated(upper)
    else:
        box_bound = _box_variance_max(upper)

    Li = e.whitening_inverse()
    zc = e.center

    def value_of(w_batch: NDArray) -> NDArray:
        z = zc + w_batch @ Li
        return _variance_of_weighted_squares(z, h)

    # Starts: center, coordinate-extremal points, random boundary points.
    starts = [np.zeros(n0)]
    P_inv_cols = Li @ Li  # P^-1
    for k in range(min(n0, 12)):
        direction = P_inv_cols[:, k] / math.sqrt(P_inv_cols[k, k])
        starts.append(np.linalg.solve(Li, direction))
        starts.append(-starts[-1])
    while len(starts) < 20:
        v = rng.normal(size=n0)
        starts.append(v / np.linalg.norm(v))
    starts = np.asarray(starts[:20])

    best_w = starts[0]
    best_val = -np.inf
    for w0 in starts:
        w = w0.copy()
        nw = np.linalg.norm(w)
        if nw > 1:
            w /= nw
        step = 0.25
        val = float(value_of(w[None, :])[0])
        for _ in range(120):
            z = zc + Li @ w
            t = z**2 / h
            grad_z = (4.0 / (n0 - 1)) * (t - t.mean()) * z / h
            grad_w = Li @ grad_z
            gnorm = np.linalg.norm(grad_w)
            if gnorm < 1e-14:
                break
            cand = w + step * grad_w / gnorm
            ncand = np.linalg.norm(cand)
            if ncand > 1:
                cand = cand / ncand
            cval = float(value_of(cand[None, :])[0])
            if cval > val:
                w, val = cand, cval
            else:
                step *= 0.5
                if step < 1e-10:
                    break
        if val > best_val:
            best_val, best_w = val, w

    dirs = rng.normal(size=(10_000, n0))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = value_of(dirs)
    i = int(np.argmax(vals))
    if vals[i] > best_val:
        best_val, best_w = float(vals[i]), dirs[i]

    v_star = min(box_bound, 1.01 * best_val)
    return v_star, zc + Li @ best_w


def bernstein_bound_noisy(
    base: float,
    v_star: float,
    density: DensityModel,
    budget: TailBudget,
    beta: float = 0.0,
) -> NormBound:
    """Empirical Bernstein bound driven by the variance maximized over the
    ellipsoid; base and variance are maximized separately, which can only
    enlarge the bound.  ``v_star`` is on the raw scale of z^2/h and is
    normalized by rho^2 inside, matching the noise-free variant."""
    if budget.n < 2:
        raise ValueError("Bernstein bound needs at least two points")
    rho = density.ratio_bound
    value = base + empirical_bernstein_term(rho, budget, v_star / rho**2)
    return NormBound(value, "bernstein_noisy", budget.alpha, beta, base)


def select_bound_method(budget: TailBudget, density: DensityModel) -> str:
    """"bernstein" once the sample size reaches the conservative switch
    threshold, else "randomized_hoeffding"."""
    threshold = conservative_threshold(budget.alpha, density.ratio_bound)
    if threshold is not None and budget.n >= threshold:
        return "bernstein"
    return "randomized_hoeffding"
