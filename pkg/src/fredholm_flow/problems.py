"""Experiment presets: closed-form targets, samplers and solver defaults.

Each preset bundles the kernel, a closed-form truth density (for metrics), an
observation sampler, the rule that builds the reference measure from the
observed sample, and default solver settings.  Samplers are deterministic
given their seed; all randomness flows through the keyed streams.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng as _rng
from .density import EvaluationGrid
from .kernels import (GaussianConvolutionKernel, GaussianMixtureDelayKernel,
                      KernelModel, RadonAlignmentKernel)
from .reference import ReferenceMeasure
from .solver import SolverConfig
from .state import ObservationSample, ParticleCloud

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# delay mixture fitted to infection-to-death data: weights, means, sds in days
DELAY_WEIGHTS = (0.595, 0.405)
DELAY_MEANS = (8.63, 15.24)
DELAY_SDS = (2.56, 5.39)
DELAY_MEAN_DAYS = float(np.dot(DELAY_WEIGHTS, DELAY_MEANS))
REPORTING_SHIFT_DAYS = 9.0

TOY_SIGMA_PI_SQ = 0.43**2
TOY_SIGMA_K_SQ = 0.45**2


def _gauss_pdf(x, mean, sd):
    z = (x - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * _SQRT_2PI)


def _iso_mixture_pdf(points, weights, means, sds):
    """Σ_i w_i ∏_j N(x_j; m_i, s_i²) for isotropic components."""
    points = np.atleast_2d(points)
    out = np.zeros(points.shape[0])
    for w, m, s in zip(weights, means, sds):
        z = (points - m) / s
        out += w * np.exp(-0.5 * np.sum(z * z, axis=1)) / (s * _SQRT_2PI) ** points.shape[1]
    return out


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    kernel: KernelModel
    solver: SolverConfig
    n_observations: int
    truth_pdf: Callable
    sample_observations: Callable
    sample_truth: Callable
    make_reference: Callable
    metric_grid: EvaluationGrid | None
    observed_pdf: Callable | None = None
    marginal1_pdf: Callable | None = None
    init_shift: float | None = 0.0
    default_metrics: tuple = ("ise",)
    observation_grid: EvaluationGrid | None = None

    @property
    def dim(self) -> int:
        return self.kernel.dim_x


def build_initial_cloud(preset: ExperimentPreset, config: SolverConfig,
                        observations: ObservationSample, ref: ReferenceMeasure,
                        mode: str = "auto", point=None, box=None) -> ParticleCloud:
    """Initial particle positions.

    ``auto`` resamples the observations through the deconvolution shift when
    the preset defines one, else draws from the reference measure.  Explicit
    modes: "observations", "reference", "point", "uniform".
    """
    gen = _rng.stream(config.seed, _rng.ROLE_INIT)
    n = config.n_particles
    if mode == "auto":
        mode = "observations" if preset.init_shift is not None else "reference"
    if mode == "observations":
        if observations.dim != preset.dim:
            raise ValueError("cannot initialize from observations when p differs from d")
        idx = gen.integers(0, observations.n_observations, size=n)
        shift = preset.init_shift or 0.0
        return ParticleCloud(observations.points[idx] + shift)
    if mode == "reference":
        return ParticleCloud(ref.sample(n, gen))
    if mode == "point":
        if point is None:
            raise ValueError("point initialization needs a point")
        return ParticleCloud(np.tile(np.asarray(point, dtype=float), (n, 1)))
    if mode == "uniform":
        if box is None:
            raise ValueError("uniform initialization needs a box")
        box = np.asarray(box, dtype=float)
        return ParticleCloud(gen.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0])))
    raise ValueError(f"unknown init mode {mode!r}")


# ---------------------------------------------------------------------------
# 1-D Gaussian mixture deconvolution
# ---------------------------------------------------------------------------

def preset_gaussian_mixture_1d() -> ExperimentPreset:
    """Two-component mixture observed through additive N(0, 0.045²) noise."""
    weights = (1.0 / 3.0, 2.0 / 3.0)
    means = (0.3, 0.5)
    sds = (0.015, 0.043)
    noise_sd = 0.045
    obs_sds = tuple(np.hypot(s, noise_sd) for s in sds)

    def truth_pdf(points):
        return _iso_mixture_pdf(points, weights, means, sds)

    def observed_pdf(points):
        return _iso_mixture_pdf(points, weights, means, obs_sds)

    def sample_truth(m, seed):
        gen = _rng.stream(seed, _rng.ROLE_OBSERVATIONS)
        comp = gen.random(m) < weights[0]
        x = np.where(comp, means[0] + sds[0] * gen.standard_normal(m),
                     means[1] + sds[1] * gen.standard_normal(m))
        return x[:, None]

    def sample_observations(m, seed):
        x = sample_truth(m, seed)
        gen = _rng.stream(_rng.derive_seed(seed, 1), _rng.ROLE_OBSERVATIONS)
        return ObservationSample(x + noise_sd * gen.standard_normal((m, 1)))

    return ExperimentPreset(
        name="gaussian_mixture_1d",
        kernel=GaussianConvolutionKernel([noise_sd]),
        solver=SolverConfig(alpha=0.01, gamma=1e-3, n_particles=200, n_steps=100),
        n_observations=1000,
        truth_pdf=truth_pdf,
        observed_pdf=observed_pdf,
        marginal1_pdf=truth_pdf,
        sample_observations=sample_observations,
        sample_truth=sample_truth,
        make_reference=ReferenceMeasure.from_sample,
        metric_grid=EvaluationGrid(((-0.25, 1.25, 3001),)),
        init_shift=0.0,
        default_metrics=("ise", "w1_marginal1"),
    )


# ---------------------------------------------------------------------------
# centered Gaussian toy model
# ---------------------------------------------------------------------------

def preset_toy_gaussian() -> ExperimentPreset:
    """N(0, 0.43²) signal under N(0, 0.45²) noise; the analytic baseline's twin."""
    sd_pi = np.sqrt(TOY_SIGMA_PI_SQ)
    sd_k = np.sqrt(TOY_SIGMA_K_SQ)
    sd_mu = np.hypot(sd_pi, sd_k)

    def truth_pdf(points):
        return _iso_mixture_pdf(points, (1.0,), (0.0,), (sd_pi,))

    def observed_pdf(points):
        return _iso_mixture_pdf(points, (1.0,), (0.0,), (sd_mu,))

    def sample_truth(m, seed):
        gen = _rng.stream(seed, _rng.ROLE_OBSERVATIONS)
        return sd_pi * gen.standard_normal((m, 1))

    def sample_observations(m, seed):
        x = sample_truth(m, seed)
        gen = _rng.stream(_rng.derive_seed(seed, 1), _rng.ROLE_OBSERVATIONS)
        return ObservationSample(x + sd_k * gen.standard_normal((m, 1)))

    return ExperimentPreset(
        name="toy_gaussian",
        kernel=GaussianConvolutionKernel([sd_k]),
        solver=SolverConfig(alpha=0.02, gamma=1e-2, n_particles=500, n_steps=300,
                            minibatch=500),
        n_observations=10_000,
        truth_pdf=truth_pdf,
        observed_pdf=observed_pdf,
        marginal1_pdf=truth_pdf,
        sample_observations=sample_observations,
        sample_truth=sample_truth,
        make_reference=ReferenceMeasure.from_sample,
        metric_grid=EvaluationGrid(((-4.0, 4.0, 2001),)),
        init_shift=0.0,
        default_metrics=("ise", "w1_marginal1"),
    )


# ---------------------------------------------------------------------------
# d-dimensional mixture
# ---------------------------------------------------------------------------

def preset_highdim_mixture(dim: int) -> ExperimentPreset:
    """Product-form generalization of the 1-D mixture to d dimensions."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    weights = (1.0 / 3.0, 2.0 / 3.0)
    means = (0.3, 0.7)
    sds = (0.07, 0.1)
    noise_sd = 0.15
    obs_sds = tuple(np.hypot(s, noise_sd) for s in sds)

    def truth_pdf(points):
        return _iso_mixture_pdf(points, weights, means, sds)

    def observed_pdf(points):
        return _iso_mixture_pdf(points, weights, means, obs_sds)

    def marginal1_pdf(points):
        return _iso_mixture_pdf(np.atleast_2d(points)[:, :1], weights, means, sds)

    def sample_truth(m, seed):
        gen = _rng.stream(seed, _rng.ROLE_OBSERVATIONS)
        comp = gen.random(m) < weights[0]
        sd = np.where(comp, sds[0], sds[1])[:, None]
        mean = np.where(comp, means[0], means[1])[:, None]
        return mean + sd * gen.standard_normal((m, dim))

    def sample_observations(m, seed):
        x = sample_truth(m, seed)
        gen = _rng.stream(_rng.derive_seed(seed, 1), _rng.ROLE_OBSERVATIONS)
        return ObservationSample(x + noise_sd * gen.standard_normal((m, dim)))

    def make_reference(_observations):
        return ReferenceMeasure.gaussian(np.full(dim, 0.5), np.full(dim, 0.25**2))

    if dim == 1:
        grid = EvaluationGrid(((-0.3, 1.3, 3201),))
    elif dim == 2:
        grid = EvaluationGrid(((-0.3, 1.3, 321),) * 2)
    else:
        grid = None

    return ExperimentPreset(
        name=f"highdim_mixture_{dim}d",
        kernel=GaussianConvolutionKernel([noise_sd] * dim),
        solver=SolverConfig(alpha=0.01, gamma=1e-2, n_particles=1000, n_steps=50),
        n_observations=100_000,
        truth_pdf=truth_pdf,
        observed_pdf=observed_pdf,
        marginal1_pdf=marginal1_pdf,
        sample_observations=sample_observations,
        sample_truth=sample_truth,
        make_reference=make_reference,
        metric_grid=grid,
        init_shift=0.0,
        default_metrics=("w1_marginal1",) if grid is None else ("ise", "w1_marginal1"),
    )


# ---------------------------------------------------------------------------
# synthetic incidence-curve deconvolution
# ---------------------------------------------------------------------------

_INC_SD1 = np.sqrt(1.0 / (2 * 0.05))      # left branch exp(-0.05 (8-x)^2)
_INC_SD2 = np.sqrt(1.0 / (2 * 0.001))     # right branch exp(-0.001 (x-8)^2)
_INC_PEAK = 8.0
_INC_END = 100.0
# branch masses by Gaussian CDF, exact
_INC_Z1 = float(_INC_SD1 * _SQRT_2PI * (0.5 - ndtr((0.0 - _INC_PEAK) / _INC_SD1)))
_INC_Z2 = float(_INC_SD2 * _SQRT_2PI * (ndtr((_INC_END - _INC_PEAK) / _INC_SD2) - 0.5))
_INC_Z = _INC_Z1 + _INC_Z2


def incidence_pdf(points) -> np.ndarray:
    """Normalized piecewise incidence curve on [0, 100]."""
    x = np.atleast_2d(points)[:, 0]
    left = np.exp(-0.05 * (_INC_PEAK - x) ** 2)
    right = np.exp(-0.001 * (x - _INC_PEAK) ** 2)
    vals = np.where(x <= _INC_PEAK, left, right)
    vals = np.where((x < 0.0) | (x > _INC_END), 0.0, vals)
    return vals / _INC_Z


def _sample_incidence(m, gen) -> np.ndarray:
    take_left = gen.random(m) < _INC_Z1 / _INC_Z
    u = gen.random(m)
    lo_left = ndtr((0.0 - _INC_PEAK) / _INC_SD1)
    hi_right = ndtr((_INC_END - _INC_PEAK) / _INC_SD2)
    q_left = lo_left + u * (0.5 - lo_left)
    q_right = 0.5 + u * (hi_right - 0.5)
    x = np.where(take_left,
                 _INC_PEAK + _INC_SD1 * ndtri(q_left),
                 _INC_PEAK + _INC_SD2 * ndtri(q_right))
    return x[:, None]


def _affected_days(last_day: int) -> np.ndarray:
    days = np.arange(6, last_day + 1)
    return days[(days % 7 == 6) | (days % 7 == 0)]


def preset_epidemiology_synthetic(misspecified: bool = False) -> ExperimentPreset:
    """Incidence curve observed through the infection-to-death delay mixture.

    The misspecified variant moves a U(0.3, 0.5) fraction of the cases
    recorded on each (6th, 7th) day of every week two days later, mimicking
    weekend reporting delays the kernel does not model.
    """
    kernel = GaussianMixtureDelayKernel(DELAY_WEIGHTS, DELAY_MEANS, DELAY_SDS)

    def sample_truth(m, seed):
        return _sample_incidence(m, _rng.stream(seed, _rng.ROLE_OBSERVATIONS))

    def sample_observations(m, seed):
        gen = _rng.stream(seed, _rng.ROLE_OBSERVATIONS)
        x = _sample_incidence(m, gen)[:, 0]
        comp = gen.random(m) < DELAY_WEIGHTS[0]
        mean = np.where(comp, DELAY_MEANS[0], DELAY_MEANS[1])
        sd = np.where(comp, DELAY_SDS[0], DELAY_SDS[1])
        y = x + mean + sd * gen.standard_normal(m)
        if misspecified:
            mgen = _rng.stream(seed, _rng.ROLE_MISSPEC)
            day = np.floor(y).astype(int)
            for d in _affected_days(int(day.max(initial=0))):
                fraction = mgen.uniform(0.3, 0.5)
                on_day = day == d
                moved = on_day & (mgen.random(y.size) < fraction)
                y = np.where(moved, y + 2.0, y)
        return ObservationSample(y[:, None])

    def make_reference(observations):
        return ReferenceMeasure.from_sample(observations.points,
                                            mean_shift=-REPORTING_SHIFT_DAYS)

    return ExperimentPreset(
        name="epidemiology_synthetic" + ("_misspecified" if misspecified else ""),
        kernel=kernel,
        solver=SolverConfig(alpha=1e-3, gamma=1e-1, n_particles=500, n_steps=3000,
                            minibatch=500),
        n_observations=5000,
        truth_pdf=incidence_pdf,
        observed_pdf=None,
        marginal1_pdf=incidence_pdf,
        sample_observations=sample_observations,
        sample_truth=sample_truth,
        make_reference=make_reference,
        metric_grid=EvaluationGrid(((0.0, 100.0, 2001),)),
        init_shift=-REPORTING_SHIFT_DAYS,
        default_metrics=("ise", "reconvolution_ise"),
        observation_grid=EvaluationGrid(((0.0, 130.0, 2601),)),
    )


# ---------------------------------------------------------------------------
# tomography phantom
# ---------------------------------------------------------------------------

def preset_ct_phantom() -> ExperimentPreset:
    """Two Gaussian blobs observed through the line-alignment kernel."""
    weights = (0.5, 0.5)
    centers = (np.array([-0.3, -0.25]), np.array([0.35, 0.2]))
    blob_sds = (0.12, 0.18)
    kernel = RadonAlignmentKernel(sigma=0.05, xi_max=2.0)
    # integral of the alignment Gaussian over xi, used by the closed-form projections
    slice_mass = kernel.sigma * _SQRT_2PI

    def truth_pdf(points):
        points = np.atleast_2d(points)
        out = np.zeros(points.shape[0])
        for w, c, s in zip(weights, centers, blob_sds):
            z = (points - c) / s
            out += w * np.exp(-0.5 * np.sum(z * z, axis=1)) / (2 * np.pi * s * s)
        return out

    def observed_pdf(points):
        points = np.atleast_2d(points)
        phi, xi = points[:, 0], points[:, 1]
        u = np.column_stack([np.cos(phi), np.sin(phi)])
        out = np.zeros(points.shape[0])
        for w, c, s in zip(weights, centers, blob_sds):
            sd = np.hypot(s, kernel.sigma)
            out += w * _gauss_pdf(xi, u @ c, sd)
        return out * slice_mass / kernel.norm_const

    def sample_truth(m, seed):
        gen = _rng.stream(seed, _rng.ROLE_OBSERVATIONS)
        comp = gen.random(m) < weights[0]
        c = np.where(comp[:, None], centers[0], centers[1])
        s = np.where(comp, blob_sds[0], blob_sds[1])[:, None]
        return c + s * gen.standard_normal((m, 2))

    def sample_observations(m, seed):
        x = sample_truth(m, seed)
        gen = _rng.stream(_rng.derive_seed(seed, 1), _rng.ROLE_OBSERVATIONS)
        phi = gen.uniform(0.0, 2.0 * np.pi, m)
        xi = (x[:, 0] * np.cos(phi) + x[:, 1] * np.sin(phi)
              + kernel.sigma * gen.standard_normal(m))
        return ObservationSample(np.column_stack([phi, xi]))

    def make_reference(_observations):
        return ReferenceMeasure.gaussian(np.zeros(2), np.full(2, 0.35**2))

    def marginal1_pdf(points):
        x1 = np.atleast_2d(points)[:, 0]
        out = np.zeros(x1.shape[0])
        for w, c, s in zip(weights, centers, blob_sds):
            out += w * _gauss_pdf(x1, c[0], s)
        return out

    return ExperimentPreset(
        name="ct_phantom",
        kernel=kernel,
        solver=SolverConfig(alpha=7e-3, gamma=1e-3, n_particles=2000, n_steps=200),
        n_observations=20_000,
        truth_pdf=truth_pdf,
        observed_pdf=observed_pdf,
        marginal1_pdf=marginal1_pdf,
        sample_observations=sample_observations,
        sample_truth=sample_truth,
        make_reference=make_reference,
        metric_grid=EvaluationGrid(((-1.2, 1.2, 161), (-1.2, 1.2, 161))),
        init_shift=None,
        default_metrics=("ise", "w1_marginal1"),
    )


# ---------------------------------------------------------------------------
# registry and file input
# ---------------------------------------------------------------------------

def get_preset(name: str, **options) -> ExperimentPreset:
    if name == "gaussian_mixture_1d":
        return preset_gaussian_mixture_1d()
    if name == "toy_gaussian":
        return preset_toy_gaussian()
    if name == "highdim_mixture":
        return preset_highdim_mixture(int(options.get("dim", 2)))
    if name == "epidemiology_synthetic":
        return preset_epidemiology_synthetic(bool(options.get("misspecified", False)))
    if name == "ct_phantom":
        return preset_ct_phantom()
    raise ValueError(f"unknown preset {name!r}")


PRESET_NAMES = ("gaussian_mixture_1d", "toy_gaussian", "highdim_mixture",
                "epidemiology_synthetic", "ct_phantom")


def load_observations_csv(path) -> ObservationSample:
    """One observation per row, p comma-separated columns; a header is allowed."""
    with open(path) as fh:
        first = fh.readline()
        try:
            [float(v) for v in first.split(",")]
            skip = 0
        except ValueError:
            skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return ObservationSample(data)
