"""Confidence ellipsoids for the noiseless outputs at observed inputs.

An :class:`Ellipsoid` is the set {z : (z - center)' shape (z - center) <= 1},
normalized so the level is always 1; a degenerate ellipsoid is the single
point {center}.  Providers build ellipsoids satisfying the coverage contract

    P( (f(x_1), ..., f(x_n0))' in Z ) >= 1 - beta

for the true regression function f.  Any construction with that contract can
be plugged in; this module ships the two simulation-oracle providers used by
the experiment harness (exact noise-free outputs, and a Euclidean ball from a
known-noise-law quantile).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Protocol

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .kernels import SampleSet

# Membership slack protecting boundary points returned by the optimizers.
MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True)
class Ellipsoid:
    """Center/shape confidence set for a vector of noiseless outputs."""

    center: NDArray[np.float64]
    shape: NDArray[np.float64] | None = None
    degenerate: bool = False

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).ravel()
        object.__setattr__(self, "center", center)
        if self.degenerate:
            object.__setattr__(self, "shape", None)
            return
        if self.shape is None:
            raise ValueError("nondegenerate ellipsoid requires a shape matrix")
        P = np.asarray(self.shape, dtype=float)
        if P.shape != (len(center), len(center)):
            raise ValueError("shape matrix does not match center length")
        if not np.allclose(P, P.T, atol=1e-12 * max(1.0, np.abs(P).max())):
            raise ValueError("shape matrix must be symmetric")
        object.__setattr__(self, "shape", (P + P.T) / 2.0)

    @property
    def dim(self) -> int:
        return len(self.center)

    @cached_property
    def _eig(self) -> tuple[NDArray, NDArray]:
        evals, evecs = scipy.linalg.eigh(self.shape)
        if evals[0] <= 0:
            raise ValueError("shape matrix must be positive definite")
        return evals, evecs

    def whitening_inverse(self) -> NDArray[np.float64]:
        """P^(-1/2): maps the unit ball onto the centered ellipsoid."""
        evals, evecs = self._eig
        return (evecs / np.sqrt(evals)) @ evecs.T

    def quadratic(self, z) -> float:
        """(z - center)' shape (z - center)."""
        d = np.asarray(z, dtype=float).ravel() - self.center
        return float(d @ self.shape @ d)


class EllipsoidProvider(Protocol):
    """Anything that maps a subsample and a risk to a covering ellipsoid."""

    def __call__(self, subsample: SampleSet, beta: float) -> Ellipsoid: ...


def contains(e: Ellipsoid, z, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership test with a small slack on the boundary."""
    z = np.asarray(z, dtype=float).ravel()
    if len(z) != e.dim:
        raise ValueError(f"point has length {len(z)}, ellipsoid dim {e.dim}")
    if e.degenerate:
        return bool(np.max(np.abs(z - e.center)) <= 1e-12 * max(1.0, np.abs(e.center).max()))
    return e.quadratic(z) <= 1.0 + tol


def axis_halfwidth(e: Ellipsoid, k: int) -> float:
    """Extent of the ellipsoid along coordinate k: sqrt((P^-1)_kk).

    Zero for degenerate ellipsoids.  ``k`` is a 0-based index.
    """
    if not 0 <= k < e.dim:
        raise ValueError(f"coordinate index {k} out of range for dim {e.dim}")
    if e.degenerate:
        return 0.0
    evals, evecs = e._eig
    return float(np.sqrt(np.sum(evecs[k] ** 2 / evals)))


def axis_halfwidths(e: Ellipsoid) -> NDArray[np.float64]:
    """All coordinate halfwidths at once."""
    if e.degenerate:
        return np.zeros(e.dim)
    evals, evecs = e._eig
    return np.sqrt((evecs**2 / evals).sum(axis=1))


def noise_free_provider(values) -> Ellipsoid:
    """Degenerate ellipsoid at the exactly observed noiseless outputs."""
    return Ellipsoid(center=np.asarray(values, dtype=float), degenerate=True)


def known_noise_ball_provider(
    subsample: SampleSet,
    beta: float,
    noise_radius_quantile: Callable[[float, int], float],
) -> Ellipsoid:
    """Euclidean ball around the observed outputs.

    ``noise_radius_quantile(beta, n0)`` must return r with
    P(||noise vector||_2 <= r) >= 1 - beta under the known noise law; the
    ball around y then contains the noiseless outputs with the same
    probability, because they equal y minus the noise.
    """
    if subsample.outputs is None:
        raise ValueError("known-noise ball provider needs observed outputs")
    n0 = len(subsample)
    radius = float(noise_radius_quantile(beta, n0))
    if radius < 0 or not np.isfinite(radius):
        if beta == 0:
            raise ValueError(
                "beta = 0 with nondegenerate noise: coverage contract unsatisfiable"
            )
        raise ValueError(f"invalid noise radius {radius}")
    if radius == 0.0:
        return Ellipsoid(center=subsample.outputs, degenerate=True)
    shape = np.eye(n0) / radius**2
    return Ellipsoid(center=subsample.outputs, shape=shape)


def ellipsoid_to_json(e: Ellipsoid) -> str:
    """Serialize to a structured-text record for experiment reproducibility."""
    record = {
        "center": e.center.tolist(),
        "degenerate": e.degenerate,
        "shape": None if e.degenerate else e.shape.ravel().tolist(),
    }
    return json.dumps(record)


def ellipsoid_from_json(text: str) -> Ellipsoid:
    record = json.loads(text)
    center = np.asarray(record["center"], dtype=float)
    if record["degenerate"]:
        return Ellipsoid(center=center, degenerate=True)
    n = len(center)
    shape = np.asarray(record["shape"], dtype=float).reshape(n, n)
    return Ellipsoid(center=center, shape=shape)
