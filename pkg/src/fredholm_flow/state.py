"""Particle-cloud and observation-sample containers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure


def _finite_matrix(arr, name: str, step: int | None = None) -> np.ndarray:
    out = np.atleast_2d(np.asarray(arr, dtype=float))
    if out.ndim != 2 or out.shape[0] < 1:
        raise ValueError(f"{name} must be a nonempty 2-D array")
    if not np.all(np.isfinite(out)):
        bad = int(np.argwhere(~np.all(np.isfinite(out), axis=1))[0, 0])
        raise NumericalFailure(f"non-finite entries in {name}", step=step, index=bad)
    return out


@dataclass(frozen=True)
class ParticleCloud:
    """State of the solver: N points in R^d plus the step index that produced them."""

    points: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", _finite_matrix(self.points, "particle cloud",
                                                          step=self.step_index))

    @property
    def n_particles(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class ObservationSample:
    """M draws from the observed measure, one row per observation."""

    points: np.ndarray = field()

    def __post_init__(self):
        object.__setattr__(self, "points", _finite_matrix(self.points, "observation sample"))

    @property
    def n_observations(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]
