"""Closed-form concentration terms and the Hoeffding/Bernstein switch point.

Three tail terms for the deviation of a sample mean of [0, kappa]-bounded
(or sub-Gaussian) variables:

* ``hoeffding_term``        sigma * sqrt(2 ln(1/alpha) / n)
* ``randomized_hoeffding_term``  the same minus a uniform-draw discount,
  almost surely strictly smaller,
* ``empirical_bernstein_term``   kappa * (sqrt(2 V ln(2/alpha) / n)
  + 7 ln(2/alpha) / (3 (n-1))),

plus the sample size beyond which the Bernstein term wins when the empirical
variance is approximated by a fixed sigma^2.  All logarithms are natural and
no formula is algebraically rearranged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TailBudget:
    """Risk level and sample size a tail term is evaluated at."""

    alpha: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")


def hoeffding_term(sigma: float, budget: TailBudget) -> float:
    """Sub-Gaussian Hoeffding deviation sigma * sqrt(2 ln(1/alpha) / n)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return sigma * math.sqrt(2.0 * math.log(1.0 / budget.alpha) / budget.n)


def randomized_hoeffding_term(sigma: float, budget: TailBudget, u: float) -> float:
    """Uniformly-randomized Hoeffding deviation.

    Equals ``hoeffding_term`` plus ``sigma * ln(u) / sqrt(2 n ln(1/alpha))``,
    which is strictly negative for u < 1, so the randomized term improves on
    the plain one with probability one while keeping the same risk level.
    The draw ``u`` must be independent of the data.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if not 0.0 < u <= 1.0:
        raise ValueError(f"u must lie in (0, 1], got {u}")
    log_term = math.log(1.0 / budget.alpha)
    return hoeffding_term(sigma, budget) + sigma * math.log(u) / math.sqrt(
        2.0 * budget.n * log_term
    )


def empirical_variance(x) -> float:
    """Pairwise-difference empirical variance (1/(n(n-1))) sum_{i<=j} (x_i-x_j)^2.

    Identical to the Bessel-corrected sample variance.
    """
    x = np.asarray(x, dtype=float).ravel()
    if len(x) < 2:
        raise ValueError("empirical variance needs at least two values")
    return float(np.var(x, ddof=1))


def empirical_bernstein_term(kappa: float, budget: TailBudget, v: float) -> float:
    """Empirical Bernstein deviation for [0, kappa]-valued variables."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if v < 0:
        raise ValueError("variance argument must be nonnegative")
    if budget.n < 2:
        raise ValueError("Bernstein term requires n >= 2")
    log2a = math.log(2.0 / budget.alpha)
    return kappa * (
        math.sqrt(2.0 * v * log2a / budget.n) + 7.0 * log2a / (3.0 * (budget.n - 1))
    )


def sigma_switch_bound(alpha: float) -> float:
    """Largest sigma for which the Bernstein term eventually beats Hoeffding."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return math.sqrt(math.log(1.0 / alpha) / (4.0 * math.log(2.0 / alpha)))


def switch_threshold(alpha: float, sigma: float) -> int | None:
    """Smallest n from which the Bernstein term (at variance sigma^2) is
    no larger than the Hoeffding term at range 1.

    Returns ``None`` ("never") when sigma >= sqrt(ln(1/alpha) / (4 ln(2/alpha))),
    in which case the Hoeffding term stays preferable for every n.  That is a
    legitimate regime, not an error.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma >= sigma_switch_bound(alpha):
        return None
    log1a = math.log(1.0 / alpha)
    log2a = math.log(2.0 / alpha)
    gap = math.sqrt(log1a) - 2.0 * sigma * math.sqrt(log2a)
    varsigma = 7.0 * math.sqrt(2.0) * log2a / (3.0 * gap)
    root = (varsigma + math.sqrt(varsigma**2 + 4.0)) ** 2 / 4.0
    return int(math.ceil(root))


def conservative_threshold(alpha: float, rho: float) -> int | None:
    """Switch point with sigma replaced by its worst case rho/2."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    return switch_threshold(alpha, rho / 2.0)
