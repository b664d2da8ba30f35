"""Conjugate Bayesian linear regression with an isotropic Gaussian prior."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import BinnError, SingularSystemError

log = logging.getLogger(__name__)

MAX_JITTER = 1e-4


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """``w ~ N(mean, variance * I)``."""

    mean: np.ndarray
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise BinnError("prior variance must be positive")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))

    @classmethod
    def zero(cls, size: int, variance: float) -> "GaussianPrior":
        return cls(np.zeros(size), variance)


@dataclass(frozen=True, eq=False)
class BlrPosterior:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def size(self) -> int:
        return self.mean.shape[0]


def jittered_cholesky(a: np.ndarray, jitter: float = 1e-10, what: str = "matrix"):
    """Lower Cholesky factor of ``a + j I``.

    ``j`` starts at ``jitter`` and grows x10 per failure up to ``MAX_JITTER``.
    Returns ``(L, j)``.
    """
    n = a.shape[0]
    j = float(jitter)
    eye = np.eye(n)
    while True:
        try:
            L = linalg.cholesky(a + j * eye if j > 0 else a, lower=True, check_finite=False)
            if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
                if j > jitter:
                    log.debug("%s factorized after jitter escalation to %g", what, j)
                return L, j
        except linalg.LinAlgError:
            pass
        nxt = 1e-10 if j == 0 else j * 10
        if nxt > MAX_JITTER * (1 + 1e-9):
            raise SingularSystemError(f"{what} is not positive definite (jitter up to {MAX_JITTER:g})")
        j = nxt


def posterior(
    X,
    y,
    prior: GaussianPrior,
    noise_variance: float,
    jitter: float = 1e-10,
) -> BlrPosterior:
    """Gaussian posterior over weights.

    Solves the K x K precision system
    ``(X^T X / s_n^2 + I / s_w^2 + jitter I)`` by Cholesky; no explicit inverse
    of a general matrix is formed.
    """
    if not noise_variance > 0:
        raise BinnError("noise variance must be positive")
    k = prior.mean.shape[0]
    X = np.asarray(X, dtype=float).reshape(-1, k)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise BinnError("design matrix and targets disagree on row count")
    return posterior_from_stats(X.T @ X, X.T @ y, prior, noise_variance, jitter)


def posterior_from_stats(xtx, xty, prior: GaussianPrior, noise_variance: float, jitter: float = 1e-10) -> BlrPosterior:
    """Posterior from the sufficient statistics ``X^T X`` and ``X^T y``."""
    if not noise_variance > 0:
        raise BinnError("noise variance must be positive")
    k = prior.mean.shape[0]
    precision = np.array(xtx, dtype=float).reshape(k, k) / noise_variance
    precision[np.diag_indices(k)] += 1.0 / prior.variance
    rhs = prior.mean / prior.variance + np.asarray(xty, dtype=float).reshape(k) / noise_variance
    return _solve_precision(precision, rhs, jitter)


def _solve_precision(precision, rhs, jitter):
    L, _ = jittered_cholesky(precision, jitter, what="posterior precision")
    factor = (L, True)
    mean = linalg.cho_solve(factor, rhs, check_finite=False)
    cov = linalg.cho_solve(factor, np.eye(precision.shape[0]), check_finite=False)
    cov = 0.5 * (cov + cov.T)
    return BlrPosterior(mean, cov)


def predictive(post: BlrPosterior, phi, noise_variance: float = 0.0, include_noise: bool = False):
    """Predictive mean and variance at feature vector(s) ``phi``.

    ``phi`` may be a single length-K vector (scalars returned) or an n x K
    matrix (length-n arrays returned).
    """
    phi = np.asarray(phi, dtype=float)
    single = phi.ndim == 1
    P = np.atleast_2d(phi)
    mean = P @ post.mean
    var = np.einsum("ij,jk,ik->i", P, post.cov, P)
    var = np.maximum(var, 0.0)
    if include_noise:
        var = var + noise_variance
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
