"""Gaussian kernel density readout of a particle cloud.

Diagonal bandwidths only; the rule of thumb is Silverman's, and grid
evaluation is direct summation (no binning), which keeps the estimator exact
relative to its definition at the scales this package runs at.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LOG_2PI = np.log(2.0 * np.pi)


def _points_of(cloud_or_points) -> np.ndarray:
    pts = getattr(cloud_or_points, "points", cloud_or_points)
    return np.atleast_2d(np.asarray(pts, dtype=float))


@dataclass(frozen=True)
class BandwidthMatrix:
    """Diagonal of the (positive definite) bandwidth matrix H."""

    diag: np.ndarray

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diag, dtype=float))
        if np.any(diag <= 0):
            raise ValueError("bandwidth diagonal must be strictly positive")
        object.__setattr__(self, "diag", diag)

    @property
    def dim(self) -> int:
        return self.diag.size


@dataclass(frozen=True)
class EvaluationGrid:
    """Tensor-product grid, per-dimension (lo, hi, n_points), nodes row-major."""

    spans: tuple

    def __post_init__(self):
        spans = tuple((float(lo), float(hi), int(n)) for lo, hi, n in self.spans)
        for lo, hi, n in spans:
            if not lo < hi:
                raise ValueError("grid requires lo < hi")
            if n < 2:
                raise ValueError("grid requires at least 2 points per dimension")
        object.__setattr__(self, "spans", spans)

    @property
    def dim(self) -> int:
        return len(self.spans)

    @property
    def shape(self) -> tuple:
        return tuple(n for _, _, n in self.spans)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in self.spans]

    def nodes(self) -> np.ndarray:
        """Flattened (n_nodes, d) node list in row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def trapezoid_weights(self) -> np.ndarray:
        """Flattened tensor-product trapezoid quadrature weights."""
        w = None
        for lo, hi, n in self.spans:
            h = (hi - lo) / (n - 1)
            w1 = np.full(n, h)
            w1[0] = w1[-1] = h / 2
            w = w1 if w is None else np.multiply.outer(w, w1)
        return w.ravel()


def silverman_bandwidth(cloud) -> BandwidthMatrix:
    """Rule-of-thumb diagonal bandwidth, h_i = (4/(d+2))^{1/(d+4)} N^{-1/(d+4)} σ̂_i."""
    pts = _points_of(cloud)
    n, d = pts.shape
    if n < 2:
        raise ValueError("bandwidth selection needs at least 2 particles")
    sd = pts.std(axis=0, ddof=1)
    degenerate = np.nonzero(sd <= 0)[0]
    if degenerate.size:
        raise ValueError(f"coordinate {degenerate[0]} has zero sample variance")
    factor = (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4))
    return BandwidthMatrix((factor * sd) ** 2)


def _eval_batch(pts: np.ndarray, diag: np.ndarray, xs: np.ndarray) -> np.ndarray:
    norm = np.exp(-0.5 * (np.sum(np.log(diag)) + diag.size * _LOG_2PI))
    n = pts.shape[0]
    block = max(1, int(4_000_000 // max(n, 1)))
    out = np.empty(xs.shape[0])
    for start in range(0, xs.shape[0], block):
        chunk = xs[start:start + block]
        sq = np.sum((chunk[:, None, :] - pts[None, :, :]) ** 2 / diag, axis=-1)
        out[start:start + block] = norm * np.exp(-0.5 * sq).mean(axis=1)
    return out


def kde_eval(cloud, bandwidth: BandwidthMatrix, x) -> float:
    """Density estimate (1/N) Σ_k det(H)^{-1/2} φ(H^{-1/2}(x − X_k)) at one point."""
    pts = _points_of(cloud)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != pts.shape[1]:
        raise ValueError(f"query has dimension {x.shape[1]}, expected {pts.shape[1]}")
    return float(_eval_batch(pts, bandwidth.diag, x)[0])


def kde_grid(cloud, bandwidth: BandwidthMatrix, grid: EvaluationGrid) -> np.ndarray:
    """Pointwise KDE at every grid node, returned flattened row-major."""
    pts = _points_of(cloud)
    if grid.dim != pts.shape[1]:
        raise ValueError(f"grid has dimension {grid.dim}, expected {pts.shape[1]}")
    return _eval_batch(pts, bandwidth.diag, grid.nodes())


class GaussianKde:
    """Fitted KDE handle: the cloud, a bandwidth and vectorized evaluation."""

    def __init__(self, cloud, bandwidth: BandwidthMatrix | None = None):
        self.points = _points_of(cloud)
        self.bandwidth = silverman_bandwidth(self.points) if bandwidth is None else bandwidth

    def evaluate(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return _eval_batch(self.points, self.bandwidth.diag, xs)

    def log_evaluate(self, xs) -> np.ndarray:
        return np.log(self.evaluate(xs))
