"""CSV and JSON artifact writers/readers.

All floats are written with 17 significant digits so every file parses back
bit-exactly; writers emit rows in a fixed order so identical runs produce
identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .density import EvaluationGrid
from .metrics import DensityOnGrid
from .solver import SolverTrace
from .state import ObservationSample, ParticleCloud


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


# -- particle clouds ---------------------------------------------------------

def write_cloud_csv(path, cloud: ParticleCloud) -> None:
    d = cloud.dim
    lines = [",".join(f"x_{i + 1}" for i in range(d))]
    lines += [",".join(fmt(v) for v in row) for row in cloud.points]
    _write_lines(path, lines)


def read_cloud_csv(path) -> ParticleCloud:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ParticleCloud(data)


def write_observations_csv(path, sample: ObservationSample) -> None:
    lines = [",".join(f"y_{i + 1}" for i in range(sample.dim))]
    lines += [",".join(fmt(v) for v in row) for row in sample.points]
    _write_lines(path, lines)


# -- solver traces -----------------------------------------------------------

def write_trace_csv(path, trace: SolverTrace, dim: int) -> None:
    header = ["step", "g_hat", "g_hat_data", "g_hat_kl", "drift_mean", "drift_max"]
    header += [f"mean_{i + 1}" for i in range(dim)] + [f"var_{i + 1}" for i in range(dim)]
    lines = [",".join(header)]
    for i in range(len(trace)):
        row = [str(trace.steps[i]), fmt(trace.g_total[i]), fmt(trace.g_data[i]),
               fmt(trace.g_kl[i]), fmt(trace.drift_mean[i]), fmt(trace.drift_max[i])]
        row += [fmt(v) for v in trace.mean[i]] + [fmt(v) for v in trace.var[i]]
        lines.append(",".join(row))
    _write_lines(path, lines)


def read_trace_csv(path) -> SolverTrace:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    dim = sum(1 for name in header if name.startswith("mean_"))
    trace = SolverTrace()
    for row in data:
        trace.steps.append(int(row[0]))
        trace.g_total.append(row[1])
        trace.g_data.append(row[2])
        trace.g_kl.append(row[3])
        trace.drift_mean.append(row[4])
        trace.drift_max.append(row[5])
        trace.mean.append(row[6:6 + dim])
        trace.var.append(row[6 + dim:6 + 2 * dim])
    return trace


# -- densities on grids ------------------------------------------------------

def write_density_csv(path, density: DensityOnGrid) -> None:
    spans = ";".join(f"{fmt(lo)},{fmt(hi)},{n}" for lo, hi, n in density.grid.spans)
    d = density.grid.dim
    lines = [f"# grid: {spans}",
             ",".join([f"x_{i + 1}" for i in range(d)] + ["density"])]
    nodes = density.grid.nodes()
    for node, value in zip(nodes, density.values):
        lines.append(",".join([fmt(v) for v in node] + [fmt(value)]))
    _write_lines(path, lines)


def read_density_csv(path) -> DensityOnGrid:
    with open(path) as fh:
        comment = fh.readline().strip()
        if not comment.startswith("# grid: "):
            raise ValueError(f"{path} is missing its grid header")
        spans = tuple(tuple(float(v) if i < 2 else int(v)
                            for i, v in enumerate(part.split(",")))
                      for part in comment[len("# grid: "):].split(";"))
        fh.readline()
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return DensityOnGrid(EvaluationGrid(spans), data[:, -1])


# -- metric tables -----------------------------------------------------------

def write_metrics_csv(path, rows) -> None:
    """Rows of (experiment, method, n_particles, n_observations, seed, metric, value)."""
    lines = ["experiment,method,n_particles,n_observations,seed,metric,value"]
    for exp, method, n, m, seed, metric, value in rows:
        lines.append(f"{exp},{method},{n},{m},{seed},{metric},{fmt(value)}")
    _write_lines(path, lines)


def read_metrics_csv(path):
    rows = []
    with open(path) as fh:
        fh.readline()
        for line in fh:
            exp, method, n, m, seed, metric, value = line.strip().split(",")
            rows.append((exp, method, int(n), int(m), int(seed), metric, float(value)))
    return rows


# -- cross-validation tables -------------------------------------------------

def write_cv_csv(path, result) -> None:
    lines = ["alpha,fold,g_hat,status"]
    for cell in result.cells:
        lines.append(f"{fmt(cell.alpha)},{cell.fold},{fmt(cell.value)},{cell.status}")
    for alpha, mean, n_ok in result.summary():
        lines.append(f"{fmt(alpha)},mean,{fmt(mean)},ok_folds={n_ok}")
    _write_lines(path, lines)


# -- baseline tables ---------------------------------------------------------

def write_toy_sweep_csv(path, rows) -> None:
    lines = ["alpha,beta,objective"]
    for alpha, beta, value in rows:
        lines.append(f"{fmt(alpha)},{fmt(beta)},{fmt(value)}")
    _write_lines(path, lines)


def write_grid_state_csv(path, centers: np.ndarray, values: np.ndarray) -> None:
    centers = np.atleast_2d(centers)
    d = centers.shape[1]
    lines = [",".join([f"x_{i + 1}" for i in range(d)] + ["value"])]
    for center, value in zip(centers, values):
        lines.append(",".join([fmt(v) for v in center] + [fmt(value)]))
    _write_lines(path, lines)


# -- config echo -------------------------------------------------------------

def write_resolved_config(path, resolved: dict) -> None:
    Path(path).write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
