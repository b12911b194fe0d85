"""Paley-Wiener (sinc product) kernel, Gram matrices and minimum-norm interpolation.

The kernel of the Paley-Wiener space with band limit ``b`` in dimension ``d`` is

    k(u, v) = (1/pi^d) * prod_j sin(b*(u_j - v_j)) / (u_j - v_j),

with the convention that a zero-coordinate factor equals ``b``, so the
diagonal is (b/pi)^d.  The RKHS norm of a function in this space coincides
with its L2 norm, which is what makes the importance-sampling norm estimates
downstream work.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

# Inputs closer than this (max-norm) are treated as duplicates: the Gram
# matrix would be numerically singular.
DUPLICATE_TOL = 1e-9

# Above this condition number a Gram solve is refused rather than regularized,
# since regularization would silently break the interpolation property.
CONDITION_CAP = 1e12


class GramConditionError(np.linalg.LinAlgError):
    """Gram matrix too ill-conditioned for a trustworthy solve."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"Gram condition number {condition:.3e} exceeds cap {CONDITION_CAP:.1e}"
        )


@dataclass(frozen=True)
class KernelConfig:
    """Band limit and input dimension of the Paley-Wiener space."""

    band_limit: float
    dim: int = 1

    def __post_init__(self):
        if not self.band_limit > 0:
            raise ValueError(f"band_limit must be positive, got {self.band_limit}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")

    @property
    def diagonal_value(self) -> float:
        """k(x, x) = (band_limit/pi)^dim, the same for every x."""
        return float((self.band_limit / np.pi) ** self.dim)


def as_points(x, dim: int) -> NDArray[np.float64]:
    """Normalize point data to shape (n, dim); scalars allowed when dim == 1."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # A flat vector is n points when dim == 1, else one point.
        arr = arr[:, None] if dim == 1 else arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def _min_pairwise_distance(points: NDArray) -> float:
    n = len(points)
    if n < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    dist = np.abs(diff).max(axis=2)
    dist[np.diag_indices(n)] = np.inf
    return float(dist.min())


@dataclass(frozen=True)
class SampleSet:
    """Input points plus (optionally) observed outputs."""

    inputs: NDArray[np.float64]
    outputs: NDArray[np.float64] | None = None

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:  # flat vector of 1-d inputs
            inputs = inputs[:, None]
        if inputs.ndim != 2:
            raise ValueError(f"inputs must be (n, d), got shape {inputs.shape}")
        object.__setattr__(self, "inputs", inputs)
        if _min_pairwise_distance(inputs) < DUPLICATE_TOL:
            raise ValueError("sample inputs contain (near-)duplicates")
        if self.outputs is not None:
            outputs = np.asarray(self.outputs, dtype=float).ravel()
            if len(outputs) != len(inputs):
                raise ValueError(
                    f"{len(inputs)} inputs but {len(outputs)} outputs"
                )
            object.__setattr__(self, "outputs", outputs)

    def __len__(self) -> int:
        return len(self.inputs)

    def take(self, indices) -> "SampleSet":
        """Subsample by index, keeping outputs aligned."""
        idx = np.asarray(indices, dtype=int)
        out = None if self.outputs is None else self.outputs[idx]
        return SampleSet(self.inputs[idx], out)


def kernel_matrix(xs, ys, cfg: KernelConfig) -> NDArray[np.float64]:
    """Cross kernel matrix k(x_i, y_j); duplicates allowed."""
    xs = as_points(xs, cfg.dim)
    ys = as_points(ys, cfg.dim)
    diff = xs[:, None, :] - ys[None, :, :]
    # sin(b*t)/t == b * sinc(b*t/pi); sinc handles t == 0 exactly.
    factors = cfg.band_limit * np.sinc(cfg.band_limit * diff / np.pi)
    return factors.prod(axis=2) / np.pi**cfg.dim


def kernel_eval(u, v, cfg: KernelConfig) -> float:
    """Evaluate the Paley-Wiener kernel at a single pair of points."""
    u = as_points(u, cfg.dim)
    v = as_points(v, cfg.dim)
    if len(u) != 1 or len(v) != 1:
        raise ValueError("kernel_eval expects single points; use kernel_matrix")
    return float(kernel_matrix(u, v, cfg)[0, 0])


def gram(inputs, cfg: KernelConfig) -> NDArray[np.float64]:
    """Gram matrix of pairwise-distinct inputs."""
    pts = as_points(inputs, cfg.dim)
    if _min_pairwise_distance(pts) < DUPLICATE_TOL:
        raise ValueError("gram requires pairwise-distinct inputs")
    return kernel_matrix(pts, pts, cfg)


@dataclass(frozen=True)
class Interpolant:
    """Kernel expansion sum_k coeffs[k] * k(., nodes[k]).

    ``values`` caches the fitted values (Gram @ coeffs), so the squared RKHS
    norm is simply coeffs . values.
    """

    nodes: NDArray[np.float64]
    coeffs: NDArray[np.float64]
    config: KernelConfig
    values: NDArray[np.float64] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        nodes = as_points(self.nodes, self.config.dim)
        coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if len(coeffs) != len(nodes):
            raise ValueError("coeffs and nodes must have equal length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "coeffs", coeffs)
        if self.values is None:
            vals = kernel_matrix(nodes, nodes, self.config) @ coeffs
        else:
            vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", vals)

    def __call__(self, x) -> NDArray[np.float64] | float:
        """Evaluate at one point or a batch of points."""
        pts = as_points(x, self.config.dim)
        out = kernel_matrix(pts, self.nodes, self.config) @ self.coeffs
        if np.asarray(x).ndim == 0 or (
            np.asarray(x).ndim == 1 and self.config.dim > 1
        ):
            return float(out[0])
        return out


def min_norm_interpolant(inputs, values, cfg: KernelConfig) -> Interpolant:
    """Smallest-RKHS-norm function matching the given values at the inputs.

    Coefficients solve ``K a = z`` through a Cholesky factorization.  Raises
    :class:`GramConditionError` when the Gram condition number exceeds
    ``CONDITION_CAP``; no regularization is applied.
    """
    pts = as_points(inputs, cfg.dim)
    z = np.asarray(values, dtype=float).ravel()
    if len(z) != len(pts):
        raise ValueError("values length must match number of inputs")
    K = gram(pts, cfg)
    eigvals = scipy.linalg.eigvalsh(K)
    lo, hi = eigvals[0], eigvals[-1]
    condition = np.inf if lo <= 0 else hi / lo
    if condition > CONDITION_CAP:
        raise GramConditionError(condition)
    cho = scipy.linalg.cho_factor(K, lower=True)
    coeffs = scipy.linalg.cho_solve(cho, z)
    return Interpolant(nodes=pts, coeffs=coeffs, config=cfg, values=z)


def evaluate(f: Interpolant, x) -> float:
    """Pointwise evaluation sum_k coeffs[k] * k(x, node_k)."""
    pts = as_points(x, f.config.dim)
    if len(pts) != 1:
        raise ValueError("evaluate expects a single point; call f(batch) instead")
    return float(kernel_matrix(pts, f.nodes, f.config) @ f.coeffs)


def rkhs_norm_sq(f: Interpolant) -> float:
    """Squared RKHS norm coeffs' K coeffs (== z' K^-1 z for interpolants)."""
    return float(f.coeffs @ f.values)
