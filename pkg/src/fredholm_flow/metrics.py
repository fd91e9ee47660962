"""Accuracy metrics: integrated square error, pointwise MSE, 1-D Wasserstein-1
and reconvolution of an estimate through the kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import wasserstein_distance as _scipy_w1

from .density import EvaluationGrid
from .kernels import KernelModel


@dataclass(frozen=True)
class DensityOnGrid:
    """Density values on the flattened nodes of an evaluation grid."""

    grid: EvaluationGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        n_nodes = int(np.prod(self.grid.shape))
        if values.size != n_nodes:
            raise ValueError(f"{values.size} values for a grid of {n_nodes} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(self.grid.trapezoid_weights() @ self.values)


def ise(estimate: DensityOnGrid, truth: DensityOnGrid) -> float:
    """Trapezoid quadrature of (truth − estimate)² over the common grid."""
    if estimate.grid.spans != truth.grid.spans:
        raise ValueError("ISE requires identical grids")
    diff = truth.values - estimate.values
    return float(estimate.grid.trapezoid_weights() @ diff**2)


def pointwise_mse(replicate_values, truth_value: float) -> float:
    """Mean over replicate estimates of the squared error at one point."""
    reps = np.asarray(replicate_values, dtype=float).ravel()
    if reps.size < 2:
        raise ValueError("pointwise MSE needs at least 2 replicates")
    return float(np.mean((truth_value - reps) ** 2))


def wasserstein1_1d(sample_a, sample_b) -> float:
    """W₁ between two empirical measures on the line.

    Equal sizes use the optimal sorted coupling (1/n) Σ |a_(i) − b_(i)|;
    unequal sizes fall back to the exact quantile-function L¹ distance.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if a.size == b.size:
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return float(_scipy_w1(a, b))


def reconvolve(source, kernel: KernelModel, y_grid: EvaluationGrid) -> DensityOnGrid:
    """Push an estimate of the solution back through the kernel.

    ``source`` is either a particle cloud (or raw point matrix), giving
    (1/N) Σ_k k(X_k, y), or a DensityOnGrid, giving the quadrature
    ∫ k(x, y) π̂(x) dx on its own grid.
    """
    if kernel.dim_x != kernel.dim_y:
        raise ValueError("reconvolution needs a kernel with matching input/output dimension")
    y_nodes = y_grid.nodes()
    if isinstance(source, DensityOnGrid):
        x_nodes = source.grid.nodes()
        weights = source.grid.trapezoid_weights() * source.values
        values = weights @ kernel.eval_matrix(x_nodes, y_nodes)
    else:
        pts = np.atleast_2d(getattr(source, "points", source))
        values = kernel.eval_matrix(pts, y_nodes).mean(axis=0)
    return DensityOnGrid(y_grid, values)
