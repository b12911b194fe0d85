"""Exact quadratic optimization over a single ellipsoid.

Maximizing (or minimizing) an indefinite quadratic over
{z : (z - c)' P (z - c) <= 1} is nonconvex, but with one quadratic
constraint the Lagrangian dual is exact (S-procedure).  After whitening
w = P^(1/2) (z - c) the problem becomes a trust-region subproblem on the unit
ball, solved here by eigendecomposition of the quadratic term plus a
safeguarded one-dimensional root search on the dual multiplier (the secular
equation), including the hard case where the multiplier sits at the edge
eigenvalue and a null-space direction is added to reach the boundary.

The same machinery drives the interval-endpoint computation: a candidate
output value at a query point is feasible when some z in the ellipsoid keeps
the augmented norm quadratic below the norm budget, the feasible set of
candidates is an interval by joint convexity, and its endpoints are located
by bisection with the ellipsoid minimization as the feasibility oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize
from numpy.typing import NDArray

from .ellipsoids import Ellipsoid

# Feasibility slack for comparisons against the norm budget tau; protects
# boundary solutions without visibly distorting endpoints (bisection itself
# resolves to ENDPOINT_XTOL).
FEAS_RTOL = 1e-10
FEAS_ATOL = 1e-12

ENDPOINT_XTOL = 1e-7
ENDPOINT_MAX_ITER = 200


class DualSolveError(RuntimeError):
    """The dual root search could not be bracketed or did not converge."""


@dataclass(frozen=True)
class QuadraticObjective:
    """Objective z' A z + b' z + c with symmetric A."""

    A: NDArray[np.float64]
    b: NDArray[np.float64]
    c: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        if len(b) != A.shape[0]:
            raise ValueError("b length must match A")
        scale = max(1.0, float(np.abs(A).max()))
        if np.abs(A - A.T).max() > 1e-12 * scale:
            raise ValueError("A must be symmetric")
        object.__setattr__(self, "A", (A + A.T) / 2.0)
        object.__setattr__(self, "b", b)

    def __call__(self, z) -> float:
        z = np.asarray(z, dtype=float).ravel()
        return float(z @ self.A @ z + self.b @ z + self.c)


class _BallTRS:
    """min (1/2) w' H w + g' w over ||w|| <= 1, for fixed H and varying g.

    H is eigendecomposed once; each solve is then a one-dimensional root
    search, which makes repeated feasibility checks cheap.
    """

    def __init__(self, H: NDArray):
        H = np.asarray(H, dtype=float)
        H = (H + H.T) / 2.0
        self.evals, self.evecs = scipy.linalg.eigh(H)
        self.shift = max(0.0, -float(self.evals[0]))
        # Distances of the spectrum from the critical multiplier.
        self.d = self.evals + self.shift
        edge_tol = 1e-12 * max(1.0, float(np.abs(self.evals).max()))
        self.edge = self.d <= edge_tol

    def minimize(self, g: NDArray) -> tuple[float, NDArray]:
        """Return (minimum value, minimizer) on the unit ball."""
        gt = self.evecs.T @ np.asarray(g, dtype=float).ravel()

        def w_of(nu: float) -> NDArray:
            with np.errstate(over="ignore", divide="ignore"):
                return -gt / (self.d + nu)

        def norm_of(nu: float) -> float:
            return float(np.linalg.norm(w_of(nu)))

        w = None
        if self.shift == 0.0:
            # Convex (or convex-singular) case: try the interior minimizer.
            blocked = self.edge & (np.abs(gt) > 0.0)
            if not blocked.any():
                wi = np.zeros_like(gt)
                np.divide(-gt, self.d, out=wi, where=~self.edge)
                if np.linalg.norm(wi) <= 1.0:
                    w = wi
        if w is None:
            # Boundary solution: find nu > 0 with ||w(nu)|| = 1, or land in
            # the hard case when the norm stays short even at nu -> 0.
            gnorm = float(np.linalg.norm(gt))
            nu_hi = gnorm + 1.0
            nu_lo = 1e-16 * max(1.0, float(self.d.max()))
            if norm_of(nu_lo) <= 1.0:
                # Hard case: pad with an edge eigenvector to reach the ball.
                wi = w_of(nu_lo)
                wi[self.edge] = 0.0
                residual = 1.0 - float(wi @ wi)
                if residual > 0 and self.edge.any():
                    wi[np.argmax(self.edge)] = math.sqrt(residual)
                w = wi
            else:

                def excess(nu: float) -> float:
                    return 1.0 / norm_of(nu) - 1.0

                if excess(nu_hi) < 0:  # ||w|| > 1 even at the safe upper end
                    raise DualSolveError(
                        f"dual bracket failed: |w({nu_hi})| = {norm_of(nu_hi)}"
                    )
                nu = scipy.optimize.brentq(
                    excess, nu_lo, nu_hi, xtol=1e-15 * max(1.0, nu_hi), maxiter=200
                )
                w = w_of(nu)
        value = 0.5 * float(w @ (self.d * w)) - self.shift / 2.0 * float(
            w @ w
        ) + float(gt @ w)
        return value, self.evecs @ w


def _whitened(obj: QuadraticObjective, e: Ellipsoid):
    """Whitened quadratic pieces (At, bt, ct) so obj(z) = w'At w + bt'w + ct."""
    Li = e.whitening_inverse()
    zc = e.center
    At = Li @ obj.A @ Li
    bt = Li @ (2.0 * obj.A @ zc + obj.b)
    ct = obj(zc)
    return Li, At, bt, ct


def max_quadratic_over_ellipsoid(
    obj: QuadraticObjective, e: Ellipsoid
) -> tuple[float, NDArray]:
    """Global maximum of the quadratic over the ellipsoid, with its argmax."""
    if e.degenerate:
        return obj(e.center), e.center.copy()
    Li, At, bt, ct = _whitened(obj, e)
    solver = _BallTRS(-2.0 * At)
    neg_value, w = solver.minimize(-bt)
    return ct - neg_value, e.center + Li @ w


def min_quadratic_over_ellipsoid(
    obj: QuadraticObjective, e: Ellipsoid
) -> tuple[float, NDArray]:
    """Global minimum of the quadratic over the ellipsoid, with its argmin."""
    if e.degenerate:
        return obj(e.center), e.center.copy()
    Li, At, bt, ct = _whitened(obj, e)
    solver = _BallTRS(2.0 * At)
    value, w = solver.minimize(bt)
    return ct + value, e.center + Li @ w


def _split_augmented(aug_inverse: NDArray, n: int):
    Q = np.asarray(aug_inverse, dtype=float)
    if Q.shape != (n + 1, n + 1):
        raise ValueError(f"augmented inverse must be {(n + 1, n + 1)}, got {Q.shape}")
    scale = max(1.0, float(np.abs(Q).max()))
    if np.abs(Q - Q.T).max() > 1e-9 * scale:
        raise ValueError("augmented inverse must be symmetric")
    Q = (Q + Q.T) / 2.0
    Q11 = Q[:n, :n]
    q01 = Q[:n, n]
    q00 = float(Q[n, n])
    if q00 <= 0:
        raise ValueError("augmented inverse has nonpositive corner entry")
    return Q11, q01, q00


def interval_endpoint(
    aug_inverse: NDArray, e: Ellipsoid, tau: float, sense: str
) -> float | None:
    """Extreme feasible output value at the query point.

    A candidate value v is feasible when some z in the ellipsoid keeps
    [z; v]' Q [z; v] <= tau, where Q is the inverse of the Gram matrix
    augmented with the query point.  Returns the largest (sense "max") or
    smallest (sense "min") feasible v, or None when no candidate is feasible
    at all.  The returned value is itself feasible (inner point of the
    bisection bracket).
    """
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    n = e.dim
    Q11, q01, q00 = _split_augmented(aug_inverse, n)
    feas_cap = tau * (1.0 + FEAS_RTOL) + FEAS_ATOL

    if e.degenerate:
        # Scalar quadratic inequality q00 v^2 + 2 (q01.z) v + z'Q11 z <= tau;
        # the slack keeps an exactly-boundary truth (tau equal to its norm)
        # feasible under floating-point rounding.
        z = e.center
        lin = float(q01 @ z)
        const = float(z @ Q11 @ z)
        disc = lin * lin - q00 * (const - feas_cap)
        if disc < 0:
            return None
        root = math.sqrt(disc)
        return (-lin + root) / q00 if sense == "max" else (-lin - root) / q00

    # Minimizing the augmented quadratic over the free candidate recovers the
    # unaugmented norm quadratic (block-inverse identity), which decides
    # feasibility of the whole program.
    base = QuadraticObjective(Q11 - np.outer(q01, q01) / q00, np.zeros(n))
    base_min, z_anchor = min_quadratic_over_ellipsoid(base, e)
    if base_min > feas_cap:
        return None
    anchor = float(-q01 @ z_anchor / q00)

    Li = e.whitening_inverse()
    zc = e.center
    solver = _BallTRS(2.0 * Li @ Q11 @ Li)
    bt0 = Li @ (2.0 * Q11 @ zc)
    bt1 = 2.0 * Li @ q01
    ct0 = float(zc @ Q11 @ zc)
    ct1 = 2.0 * float(q01 @ zc)

    def min_over_z(v: float) -> float:
        value, _ = solver.minimize(bt0 + v * bt1)
        return ct0 + v * ct1 + q00 * v * v + value

    def feasible(v: float) -> bool:
        return min_over_z(v) <= feas_cap

    # Any feasible v lies within halfspan of the ellipsoid's interpolation
    # range at the query point; that brackets the bisection.
    mid = float(-q01 @ zc / q00)
    spread = float(np.linalg.norm(Li @ q01)) / q00
    halfspan = math.sqrt(tau * (1.0 + FEAS_RTOL) / q00)
    margin = 1e-9 * (1.0 + abs(mid) + spread + halfspan)
    if sense == "max":
        outer = mid + spread + halfspan + margin
        if feasible(outer):
            return outer
        inner = anchor
    else:
        outer = mid - spread - halfspan - margin
        if feasible(outer):
            return outer
        inner = anchor
    if not feasible(inner):
        # Only reachable when base_min sits exactly at the feasibility cap;
        # the feasible set is then a single borderline point.
        return None

    for _ in range(ENDPOINT_MAX_ITER):
        if abs(outer - inner) <= ENDPOINT_XTOL:
            break
        mid_v = 0.5 * (inner + outer)
        if feasible(mid_v):
            inner = mid_v
        else:
            outer = mid_v
    return inner
