"""Interacting-particle solver: empirical drift, tamed update, main loop.

The particle system follows a gradient-flow dynamics for the regularized
objective: each particle feels an attraction ∇₁k(X, y)/(λ[k(·, y)] + η)
averaged over a batch of observations, a restoring force −α∇U from the
reference measure, and isotropic noise with diffusion coefficient √(2α).
The deterministic part of every step is tamed, γb/(1 + γ‖b‖), so its length
never exceeds min(1, γ‖b‖) regardless of how large the drift gets when the
denominator is small.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .density import GaussianKde
from .errors import NumericalFailure
from .functional import FunctionalEstimate, g_hat
from .kernels import KernelModel
from .reference import ReferenceMeasure
from .state import ObservationSample, ParticleCloud

RESAMPLE_POLICIES = ("without_replacement", "iid")


@dataclass(frozen=True)
class SolverConfig:
    """All knobs of one solver run.

    ``minibatch=None`` applies the default batch rule m = min(N, M).  The
    stopping rule is active only when ``stop_tol`` is set: the run stops once
    the relative decrease of the window-averaged objective estimate falls
    below ``stop_tol``.
    """

    alpha: float
    gamma: float
    n_particles: int
    n_steps: int
    seed: int = 0
    eta: float = 0.0
    minibatch: int | None = None
    resample_each_step: bool = True
    resample_policy: str = "without_replacement"
    stop_tol: float | None = None
    stop_window: int = 10
    denom_floor: float = 1e-30

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.n_particles < 1:
            raise ValueError("n_particles must be at least 1")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.minibatch is not None and self.minibatch < 1:
            raise ValueError("minibatch must be at least 1")
        if self.resample_policy not in RESAMPLE_POLICIES:
            raise ValueError(f"resample_policy must be one of {RESAMPLE_POLICIES}")
        if self.stop_tol is not None and self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.stop_window < 1:
            raise ValueError("stop_window must be at least 1")
        if self.denom_floor <= 0:
            raise ValueError("denom_floor must be positive")


@dataclass
class SolverTrace:
    """Per-step records; row n describes the state after n steps.

    The drift statistics in row n belong to the step taken *from* that state;
    the final row has no outgoing step and carries NaN there.
    """

    steps: list = field(default_factory=list)
    g_total: list = field(default_factory=list)
    g_data: list = field(default_factory=list)
    g_kl: list = field(default_factory=list)
    drift_mean: list = field(default_factory=list)
    drift_max: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    var: list = field(default_factory=list)

    def append(self, step, estimate, drift_norms, points):
        self.steps.append(int(step))
        if estimate is None:
            self.g_total.append(np.nan)
            self.g_data.append(np.nan)
            self.g_kl.append(np.nan)
        else:
            self.g_total.append(estimate.total)
            self.g_data.append(estimate.data_term)
            self.g_kl.append(estimate.kl_term)
        if drift_norms is None:
            self.drift_mean.append(np.nan)
            self.drift_max.append(np.nan)
        else:
            self.drift_mean.append(float(drift_norms.mean()))
            self.drift_max.append(float(drift_norms.max()))
        self.mean.append(points.mean(axis=0))
        self.var.append(points.var(axis=0))

    def __len__(self) -> int:
        return len(self.steps)


def _drift_from_matrices(k_matrix, grads, points, ref, alpha, eta, denom_floor, step):
    denom = np.maximum(k_matrix.mean(axis=0) + eta, denom_floor)       # (m,)
    interaction = np.sum(grads / denom[None, :, None], axis=1) / k_matrix.shape[1]
    drift = interaction - alpha * ref.grad_u(points)
    finite_rows = np.all(np.isfinite(drift), axis=1)
    if not np.all(finite_rows):
        raise NumericalFailure("non-finite drift", step=step,
                               index=int(np.argmin(finite_rows)))
    return drift


def drift_empirical(cloud: ParticleCloud, batch: ObservationSample,
                    kernel: KernelModel, ref: ReferenceMeasure,
                    alpha: float, eta: float,
                    denom_floor: float = 1e-30) -> np.ndarray:
    """Empirical drift matrix, one row per particle.

    Row k is (1/m) Σ_j ∇₁k(X_k, y_j) / (λ[k(·, y_j)] + η) − α ∇U(X_k) with
    λ[k(·, y_j)] = (1/N) Σ_l k(X_l, y_j).  The denominator is clamped below at
    ``denom_floor`` so that η = 0 never divides by zero; taming caps whatever
    magnitude results.
    """
    if batch.dim != kernel.dim_y:
        raise ValueError(f"batch dimension {batch.dim} does not match kernel output {kernel.dim_y}")
    if cloud.dim != kernel.dim_x:
        raise ValueError(f"cloud dimension {cloud.dim} does not match kernel input {kernel.dim_x}")
    k_matrix, grads = kernel.eval_and_grad1_matrix(cloud.points, batch.points)
    return _drift_from_matrices(k_matrix, grads, cloud.points, ref, alpha, eta,
                                denom_floor, cloud.step_index)


def tamed_step(cloud: ParticleCloud, drift: np.ndarray, gamma: float, alpha: float,
               noise: np.ndarray) -> ParticleCloud:
    """One tamed update: X + γb/(1 + γ‖b‖) + √(2αγ)·Z, Z standard normal rows."""
    drift = np.asarray(drift, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if drift.shape != cloud.points.shape or noise.shape != cloud.points.shape:
        raise ValueError("drift and noise must have the cloud's shape")
    norms = np.linalg.norm(drift, axis=1, keepdims=True)
    new_points = (cloud.points + gamma * drift / (1.0 + gamma * norms)
                  + np.sqrt(2.0 * alpha * gamma) * noise)
    return ParticleCloud(new_points, cloud.step_index + 1)


def draw_minibatch(full: ObservationSample, m: int, rng: np.random.Generator,
                   policy: str = "without_replacement") -> ObservationSample:
    """m rows of the sample; the whole sample when m ≥ M (no RNG consumed)."""
    if m < 1:
        raise ValueError("minibatch size must be at least 1")
    if policy not in RESAMPLE_POLICIES:
        raise ValueError(f"resample policy must be one of {RESAMPLE_POLICIES}")
    big_m = full.n_observations
    if m >= big_m:
        return full
    replace = policy == "iid"
    idx = rng.choice(big_m, size=m, replace=replace)
    return ObservationSample(full.points[idx])


def _monitor_estimate(cloud, batch, kernel, ref, config,
                      k_matrix=None) -> FunctionalEstimate | None:
    try:
        density = None
        if config.alpha > 0 and ref.kind == "gaussian":
            density = GaussianKde(cloud.points)
        return g_hat(cloud, batch, kernel, ref, config.alpha, config.eta,
                     density=density, denom_floor=config.denom_floor,
                     kernel_matrix=k_matrix)
    except ValueError:
        # degenerate bandwidth (e.g. point-mass cloud) or improper reference:
        # the monitor is undefined there, the dynamics are not
        return None


def _should_stop(g_values: list, tol: float, window: int) -> bool:
    if len(g_values) < 2 * window:
        return False
    prev = np.asarray(g_values[-2 * window:-window])
    cur = np.asarray(g_values[-window:])
    if not (np.all(np.isfinite(prev)) and np.all(np.isfinite(cur))):
        return False
    prev_mean = prev.mean()
    cur_mean = cur.mean()
    return (prev_mean - cur_mean) / max(abs(prev_mean), 1e-12) < tol


def run(config: SolverConfig, kernel: KernelModel, ref: ReferenceMeasure,
        init: ParticleCloud, observations: ObservationSample,
        monitor=None, noise_source=None) -> tuple[ParticleCloud, SolverTrace]:
    """Execute the solver for ``config.n_steps`` steps (or fewer on early stop).

    Parameters
    ----------
    monitor : callable, optional
        Called as ``monitor(step, cloud, estimate)`` after each state is
        recorded; the estimate may be None when it is undefined.
    noise_source : callable, optional
        ``noise_source(step) -> (N, d)`` standard-normal matrix, replacing the
        default keyed stream.  The default depends only on (seed, step), so
        runs sharing a seed share their noise.

    Returns
    -------
    (ParticleCloud, SolverTrace)
        Final cloud and the per-step trace; bit-reproducible given the config
        and inputs.
    """
    if init.n_particles != config.n_particles:
        raise ValueError(f"init has {init.n_particles} particles, config wants {config.n_particles}")
    if init.dim != kernel.dim_x or ref.dim != init.dim:
        raise ValueError("dimension mismatch between init cloud, kernel and reference")
    if observations.dim != kernel.dim_y:
        raise ValueError("dimension mismatch between observations and kernel")

    n, d = init.n_particles, init.dim
    m_eff = config.minibatch if config.minibatch is not None else min(n, observations.n_observations)
    cloud = ParticleCloud(init.points, init.step_index)
    trace = SolverTrace()
    batch = None
    stopped = False

    for step in range(config.n_steps):
        if batch is None or config.resample_each_step:
            batch = draw_minibatch(observations, m_eff,
                                   _rng.stream(config.seed, _rng.ROLE_MINIBATCH, step),
                                   config.resample_policy)
        try:
            k_matrix, grads = kernel.eval_and_grad1_matrix(cloud.points, batch.points)
            drift = _drift_from_matrices(k_matrix, grads, cloud.points, ref,
                                         config.alpha, config.eta, config.denom_floor,
                                         step)
        except NumericalFailure as failure:
            raise NumericalFailure("drift evaluation failed", step=step,
                                   index=failure.index) from failure
        estimate = _monitor_estimate(cloud, batch, kernel, ref, config, k_matrix=k_matrix)
        trace.append(cloud.step_index, estimate, np.linalg.norm(drift, axis=1), cloud.points)
        if monitor is not None:
            monitor(cloud.step_index, cloud, estimate)
        if config.stop_tol is not None and _should_stop(trace.g_total, config.stop_tol,
                                                        config.stop_window):
            stopped = True
            break
        if noise_source is not None:
            noise = np.asarray(noise_source(step), dtype=float)
        else:
            noise = _rng.stream(config.seed, _rng.ROLE_NOISE, step).standard_normal((n, d))
        cloud = tamed_step(cloud, drift, config.gamma, config.alpha, noise)

    if not stopped:
        final_batch = batch if batch is not None else observations
        estimate = _monitor_estimate(cloud, final_batch, kernel, ref, config)
        trace.append(cloud.step_index, estimate, None, cloud.points)
        if monitor is not None:
            monitor(cloud.step_index, cloud, estimate)
    return cloud, trace
