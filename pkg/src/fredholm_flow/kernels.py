"""Markov-kernel densities k(x, y) and their x-gradients.

Every kernel is immutable after construction and exposes, besides pointwise
``eval``/``grad1``, the batched forms the drift loop needs: all particles
against all batch observations in one call.  ``bound_M`` is an analytic
uniform bound on both k and ``‖∇₁k‖`` (second derivatives are bounded too but
nothing downstream consumes them).
"""
from __future__ import annotations

import abc

import numpy as np

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _as_points(arr, dim: int, name: str) -> np.ndarray:
    """Coerce to an (n, dim) float array, accepting a single point."""
    out = np.atleast_2d(np.asarray(arr, dtype=float))
    if out.shape[1] != dim:
        raise ValueError(f"{name} has dimension {out.shape[1]}, expected {dim}")
    return out


class KernelModel(abc.ABC):
    """Density of a Markov kernel: k(x, ·) integrates to 1 over R^p."""

    dim_x: int
    dim_y: int
    bound_M: float

    @abc.abstractmethod
    def eval_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """k(x_i, y_j) for xs (n, d) and ys (m, p); returns (n, m)."""

    @abc.abstractmethod
    def grad1_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """∇₁k(x_i, y_j); returns (n, m, d)."""

    def eval_and_grad1_matrix(self, xs: np.ndarray, ys: np.ndarray):
        """(k matrix, gradient tensor) in one call; concrete kernels share work."""
        return self.eval_matrix(xs, ys), self.grad1_matrix(xs, ys)

    def eval(self, x, y) -> float:
        xs = _as_points(x, self.dim_x, "x")
        ys = _as_points(y, self.dim_y, "y")
        return float(self.eval_matrix(xs, ys)[0, 0])

    def grad1(self, x, y) -> np.ndarray:
        xs = _as_points(x, self.dim_x, "x")
        ys = _as_points(y, self.dim_y, "y")
        return self.grad1_matrix(xs, ys)[0, 0]


class GaussianConvolutionKernel(KernelModel):
    """k(x, y) = ∏_i N(y_i; x_i, σ_i²), the additive-noise deconvolution kernel."""

    def __init__(self, noise_sd):
        sd = np.atleast_1d(np.asarray(noise_sd, dtype=float))
        if np.any(sd <= 0):
            raise ValueError("noise_sd must be positive")
        self.noise_sd = sd
        self.dim_x = self.dim_y = sd.size
        self._var = sd**2
        self._norm = float(np.prod(1.0 / (sd * _SQRT_2PI)))
        # sup k at y = x; sup ‖∇₁k‖ at a unit displacement of the narrowest axis
        self.bound_M = max(self._norm, self._norm * np.exp(-0.5) / sd.min())

    def eval_matrix(self, xs, ys):
        xs = _as_points(xs, self.dim_x, "x")
        ys = _as_points(ys, self.dim_y, "y")
        diff = ys[None, :, :] - xs[:, None, :]
        return self._norm * np.exp(-0.5 * np.sum(diff**2 / self._var, axis=-1))

    def grad1_matrix(self, xs, ys):
        return self.eval_and_grad1_matrix(xs, ys)[1]

    def eval_and_grad1_matrix(self, xs, ys):
        xs = _as_points(xs, self.dim_x, "x")
        ys = _as_points(ys, self.dim_y, "y")
        diff = ys[None, :, :] - xs[:, None, :]
        k = self._norm * np.exp(-0.5 * np.sum(diff**2 / self._var, axis=-1))
        return k, k[:, :, None] * diff / self._var


class GaussianMixtureDelayKernel(KernelModel):
    """1-D delay kernel k(x, y) = Σ_i w_i N(y − x; m_i, s_i²)."""

    def __init__(self, weights, means, sds):
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        m = np.atleast_1d(np.asarray(means, dtype=float))
        s = np.atleast_1d(np.asarray(sds, dtype=float))
        if not (w.size == m.size == s.size):
            raise ValueError("weights, means, sds must have equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        if np.any(s <= 0):
            raise ValueError("sds must be positive")
        self.weights, self.means, self.sds = w, m, s
        self.dim_x = self.dim_y = 1
        peak = float(np.sum(w / (s * _SQRT_2PI)))
        grad_peak = float(np.sum(w * np.exp(-0.5) / (s**2 * _SQRT_2PI)))
        self.bound_M = max(peak, grad_peak)

    def _components(self, xs, ys):
        u = ys[None, :, 0] - xs[:, None, 0]                       # (n, m)
        z = (u[:, :, None] - self.means) / self.sds               # (n, m, c)
        dens = np.exp(-0.5 * z**2) / (self.sds * _SQRT_2PI)
        return u, z, dens

    def eval_matrix(self, xs, ys):
        xs = _as_points(xs, 1, "x")
        ys = _as_points(ys, 1, "y")
        _, _, dens = self._components(xs, ys)
        return np.sum(self.weights * dens, axis=-1)

    def grad1_matrix(self, xs, ys):
        return self.eval_and_grad1_matrix(xs, ys)[1]

    def eval_and_grad1_matrix(self, xs, ys):
        xs = _as_points(xs, 1, "x")
        ys = _as_points(ys, 1, "y")
        _, z, dens = self._components(xs, ys)
        k = np.sum(self.weights * dens, axis=-1)
        # d/dx N(y-x; m, s^2) = N * (y-x-m)/s^2
        grad = np.sum(self.weights * dens * z / self.sds, axis=-1)
        return k, grad[:, :, None]


class RadonAlignmentKernel(KernelModel):
    """Tomography alignment kernel on (x₁, x₂) → (φ, ξ).

    k(x, (φ, ξ)) ∝ exp(−(x₁cosφ + x₂sinφ − ξ)² / 2σ²), renormalized once by
    2-D trapezoid quadrature over [0, 2π] × [−xi_max, xi_max].  The kernel
    integrates to 1 for fixed x up to Gaussian tail clipping, negligible while
    ‖x‖ ≤ xi_max − 8σ.
    """

    def __init__(self, sigma: float, xi_max: float = 2.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if xi_max <= 0:
            raise ValueError("xi_max must be positive")
        self.sigma = float(sigma)
        self.xi_max = float(xi_max)
        self.dim_x = 2
        self.dim_y = 2
        self.norm_const = self._quadrature_norm()
        self.bound_M = max(1.0 / self.norm_const,
                           np.exp(-0.5) / (self.sigma * self.norm_const))

    def _quadrature_norm(self) -> float:
        n_xi = max(2049, int(np.ceil(2 * self.xi_max / (self.sigma / 8.0))) + 1)
        xi = np.linspace(-self.xi_max, self.xi_max, n_xi)
        vals = np.exp(-0.5 * (xi / self.sigma) ** 2)
        inner = np.trapezoid(vals, xi)          # independent of phi and of the line offset
        return float(2.0 * np.pi * inner)

    def _residual(self, xs, ys):
        phi = ys[:, 0]
        xi = ys[:, 1]
        u = np.column_stack([np.cos(phi), np.sin(phi)])           # (m, 2)
        r = xs @ u.T                                              # (n, m)
        return r - xi[None, :], u

    def eval_matrix(self, xs, ys):
        xs = _as_points(xs, 2, "x")
        ys = _as_points(ys, 2, "y")
        res, _ = self._residual(xs, ys)
        return np.exp(-0.5 * (res / self.sigma) ** 2) / self.norm_const

    def grad1_matrix(self, xs, ys):
        return self.eval_and_grad1_matrix(xs, ys)[1]

    def eval_and_grad1_matrix(self, xs, ys):
        xs = _as_points(xs, 2, "x")
        ys = _as_points(ys, 2, "y")
        res, u = self._residual(xs, ys)
        k = np.exp(-0.5 * (res / self.sigma) ** 2) / self.norm_const
        return k, (-k * res / self.sigma**2)[:, :, None] * u[None, :, :]
