import numpy as np
import pytest

from fredholm_flow import EvaluationGrid, ReferenceMeasure
from fredholm_flow.problems import (DELAY_MEAN_DAYS, build_initial_cloud, get_preset,
                                    incidence_pdf, load_observations_csv,
                                    preset_ct_phantom, preset_epidemiology_synthetic,
                                    preset_gaussian_mixture_1d, preset_highdim_mixture,
                                    preset_toy_gaussian)

from conftest import gauss_pdf


def quadrature_convolution(preset, y, lo, hi, n=20001):
    xs = np.linspace(lo, hi, n)[:, None]
    dens = preset.truth_pdf(xs)
    kvals = preset.kernel.eval_matrix(xs, np.atleast_2d(y))[:, 0]
    return np.trapezoid(dens * kvals, xs[:, 0])


def test_mixture_observed_density_is_the_convolution():
    preset = preset_gaussian_mixture_1d()
    ys = np.linspace(0.1, 0.8, 20)
    for y in ys:
        quad = quadrature_convolution(preset, [y], -0.4, 1.4)
        assert abs(quad - preset.observed_pdf(np.array([[y]]))[0]) < 1e-6


def test_mixture_sampler_mean():
    preset = preset_gaussian_mixture_1d()
    n = 1_000_000
    sample = preset.sample_observations(n, seed=5).points
    expected = 13.0 / 30.0
    mc_sd = sample.std() / np.sqrt(n)
    assert abs(sample.mean() - expected) < 3 * mc_sd


def test_mixture_truth_normalized_on_grid():
    preset = preset_gaussian_mixture_1d()
    grid = preset.metric_grid
    vals = preset.truth_pdf(grid.nodes())
    assert grid.trapezoid_weights() @ vals == pytest.approx(1.0, abs=1e-9)


def test_toy_preset_defaults_match_study_settings():
    preset = preset_toy_gaussian()
    cfg = preset.solver
    assert cfg.alpha == 0.02
    assert cfg.gamma == 1e-2
    assert cfg.n_particles == 500
    assert cfg.minibatch == 500
    assert cfg.n_steps == 300
    assert preset.n_observations == 10_000
    assert preset.kernel.noise_sd[0] == 0.45


def test_toy_observed_matches_convolution():
    preset = preset_toy_gaussian()
    for y in (-0.8, 0.0, 0.5, 1.2):
        quad = quadrature_convolution(preset, [y], -6, 6)
        assert abs(quad - preset.observed_pdf(np.array([[y]]))[0]) < 1e-6


def test_highdim_first_marginal_is_1d_mixture(rng):
    preset = preset_highdim_mixture(4)
    pts = rng.normal(0.5, 0.3, size=(50, 1))
    expected = (gauss_pdf(pts[:, 0], 0.3, 0.07**2) / 3
                + 2 * gauss_pdf(pts[:, 0], 0.7, 0.1**2) / 3)
    assert np.allclose(preset.marginal1_pdf(pts), expected, rtol=1e-12)


def test_highdim_marginal_convolution():
    preset1 = preset_highdim_mixture(1)
    for y in (0.2, 0.5, 0.9):
        quad = quadrature_convolution(preset1, [y], -1.0, 2.0)
        assert abs(quad - preset1.observed_pdf(np.array([[y]]))[0]) < 1e-6


def test_highdim_reference_is_fixed():
    preset = preset_highdim_mixture(3)
    ref = preset.make_reference(None)
    assert np.allclose(ref.mean, 0.5)
    assert np.allclose(ref.variances, 0.0625)


def test_incidence_normalization():
    grid = EvaluationGrid(((0.0, 100.0, 20001),))
    vals = incidence_pdf(grid.nodes())
    assert grid.trapezoid_weights() @ vals == pytest.approx(1.0, abs=1e-6)


def test_incidence_continuous_at_junction():
    # both branches equal one at the peak before normalization
    assert np.exp(-0.05 * (8.0 - 8.0) ** 2) == 1.0
    assert np.exp(-0.001 * (8.0 - 8.0) ** 2) == 1.0
    left = incidence_pdf(np.array([[8.0 - 1e-9]]))[0]
    right = incidence_pdf(np.array([[8.0 + 1e-9]]))[0]
    assert left == pytest.approx(right, rel=1e-6)


def test_epidemiology_observation_mean_shift():
    preset = preset_epidemiology_synthetic(misspecified=False)
    n = 200_000
    xs = preset.sample_truth(n, seed=9)
    ys = preset.sample_observations(n, seed=9)
    mc_sd = ys.points.std() / np.sqrt(n)
    assert DELAY_MEAN_DAYS == pytest.approx(11.30705, abs=1e-9)
    assert abs(ys.points.mean() - (xs.mean() + DELAY_MEAN_DAYS)) < 4 * mc_sd


def test_epidemiology_misspecified_moves_cases_later():
    well = preset_epidemiology_synthetic(False).sample_observations(50_000, seed=4)
    mis = preset_epidemiology_synthetic(True).sample_observations(50_000, seed=4)
    moved = mis.points - well.points
    assert set(np.round(np.unique(moved), 9)) <= {0.0, 2.0}
    frac = (moved == 2.0).mean()
    assert 0.02 < frac < 0.25


def test_epidemiology_reference_rule():
    preset = preset_epidemiology_synthetic(False)
    obs = preset.sample_observations(5000, seed=1)
    ref = preset.make_reference(obs)
    assert ref.mean[0] == pytest.approx(obs.points.mean() - 9.0, rel=1e-12)
    assert ref.variances[0] == pytest.approx(obs.points.var(ddof=1), rel=1e-12)


def test_ct_observed_matches_2d_quadrature():
    preset = preset_ct_phantom()
    half = 1.5
    n = 601
    xs = np.linspace(-half, half, n)
    nodes = np.column_stack([m.ravel() for m in np.meshgrid(xs, xs, indexing="ij")])
    dens = preset.truth_pdf(nodes).reshape(n, n)
    for y in ([0.3, 0.1], [2.0, -0.4], [4.4, 0.0]):
        kv = preset.kernel.eval_matrix(nodes, np.atleast_2d(y))[:, 0].reshape(n, n)
        quad = np.trapezoid(np.trapezoid(dens * kv, xs, axis=1), xs)
        assert quad == pytest.approx(preset.observed_pdf(np.atleast_2d(y))[0], rel=1e-5)


def test_samplers_deterministic():
    for preset in (preset_gaussian_mixture_1d(), preset_epidemiology_synthetic(True),
                   preset_ct_phantom()):
        a = preset.sample_observations(200, seed=11).points
        b = preset.sample_observations(200, seed=11).points
        assert np.array_equal(a, b)


def test_init_modes():
    preset = preset_gaussian_mixture_1d()
    obs = preset.sample_observations(100, seed=0)
    ref = preset.make_reference(obs)
    cfg = preset.solver
    for mode in ("auto", "observations", "reference"):
        cloud = build_initial_cloud(preset, cfg, obs, ref, mode=mode)
        assert cloud.points.shape == (cfg.n_particles, 1)
    point = build_initial_cloud(preset, cfg, obs, ref, mode="point", point=[0.5])
    assert np.all(point.points == 0.5)
    box = build_initial_cloud(preset, cfg, obs, ref, mode="uniform", box=[[0.0, 1.0]])
    assert box.points.min() >= 0.0 and box.points.max() <= 1.0
    with pytest.raises(ValueError):
        build_initial_cloud(preset, cfg, obs, ref, mode="nope")


def test_epidemiology_init_applies_shift():
    preset = preset_epidemiology_synthetic(False)
    obs = preset.sample_observations(3000, seed=2)
    ref = preset.make_reference(obs)
    cloud = build_initial_cloud(preset, preset.solver, obs, ref)
    assert cloud.points.mean() == pytest.approx(obs.points.mean() - 9.0, abs=1.0)


def test_ct_init_draws_from_reference():
    preset = preset_ct_phantom()
    obs = preset.sample_observations(500, seed=2)
    ref = preset.make_reference(obs)
    cloud = build_initial_cloud(preset, preset.solver, obs, ref)
    assert cloud.points.shape == (preset.solver.n_particles, 2)
    assert abs(cloud.points.mean()) < 0.05


def test_get_preset_registry():
    assert get_preset("highdim_mixture", dim=3).dim == 3
    with pytest.raises(ValueError):
        get_preset("nope")


def test_load_observations_csv(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text("0.1,0.2\n0.3,0.4\n")
    sample = load_observations_csv(path)
    assert sample.points.shape == (2, 2)


def test_truth_mass_on_metric_grids():
    presets = [preset_gaussian_mixture_1d(), preset_toy_gaussian(),
               preset_highdim_mixture(1), preset_highdim_mixture(2),
               preset_epidemiology_synthetic(False), preset_ct_phantom()]
    for preset in presets:
        grid = preset.metric_grid
        mass = grid.trapezoid_weights() @ preset.truth_pdf(grid.nodes())
        assert abs(mass - 1.0) < 1e-2, preset.name
