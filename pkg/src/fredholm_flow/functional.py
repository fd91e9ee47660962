"""Monte Carlo estimate of the regularized objective.

The estimate splits into the data term, −(1/M) Σ_j log((1/N) Σ_k k(X_k, y_j) + η),
and the penalty term, (α/N) Σ_k [log π̂(X_k) − log π₀(X_k)], where π̂ is the
plug-in KDE of the current cloud evaluated at the particles themselves.
It drives the trace, the stopping rule and cross-validation scoring.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import GaussianKde
from .kernels import KernelModel
from .reference import ReferenceMeasure


@dataclass(frozen=True)
class FunctionalEstimate:
    data_term: float
    kl_term: float
    floored: bool = False

    @property
    def total(self) -> float:
        return self.data_term + self.kl_term


def g_hat(cloud, observations, kernel: KernelModel, ref: ReferenceMeasure,
          alpha: float, eta: float = 0.0, density: GaussianKde | None = None,
          denom_floor: float = 1e-30, kernel_matrix: np.ndarray | None = None) -> FunctionalEstimate:
    """Objective estimate for a cloud against an observation sample.

    ``density`` is a KDE handle fitted on ``cloud``; when omitted (and
    ``alpha > 0``) one is fitted with the default bandwidth rule.  A zero
    mean-kernel at η = 0 is clamped at ``denom_floor`` and the estimate is
    flagged as floored.  ``kernel_matrix`` may carry a precomputed
    k(X_i, y_j) matrix for these exact inputs.
    """
    x = np.atleast_2d(getattr(cloud, "points", cloud))
    y = np.atleast_2d(getattr(observations, "points", observations))
    if kernel_matrix is None:
        kernel_matrix = kernel.eval_matrix(x, y)
    mean_k = kernel_matrix.mean(axis=0) + eta
    floored = bool(np.any(mean_k < denom_floor))
    data_term = float(-np.mean(np.log(np.maximum(mean_k, denom_floor))))

    if alpha == 0.0:
        return FunctionalEstimate(data_term, 0.0, floored)
    if ref.kind != "gaussian":
        raise ValueError("the penalty term needs a proper (gaussian) reference")
    if density is None:
        density = GaussianKde(x)
    kl = float(np.mean(density.log_evaluate(x) - ref.log_density(x)))
    return FunctionalEstimate(data_term, alpha * kl, floored)
