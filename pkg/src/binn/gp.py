"""Exact Gaussian-process regression, used as a reference for the B-INN.

Two kernels are provided: the squared-exponential kernel and the product
kernel induced by independent zero-mean Gaussian weights on per-dimension
Gaussian bases,

    k(x, x') = prod_d ( s_w^2 * sum_j phi_dj(x_d) phi_dj(x'_d) ).

Cost is O(N^3) in the number of training points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .basis import BasisSpec, basis_matrix
from .blr import jittered_cholesky
from .core import BinnError, Dataset, SingularSystemError

GP_MAX_POINTS = 10_000


@dataclass(frozen=True)
class RbfKernel:
    signal_variance: float = 1.0
    length_scale: float = 0.5

    def __post_init__(self):
        if not (self.signal_variance > 0 and self.length_scale > 0):
            raise BinnError("RBF kernel parameters must be positive")

    def gram(self, a, b) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * a @ b.T
        )
        sq = np.maximum(sq, 0.0)
        return self.signal_variance * np.exp(-sq / (2.0 * self.length_scale**2))

    def diag(self, a) -> np.ndarray:
        return np.full(np.atleast_2d(a).shape[0], float(self.signal_variance))


@dataclass(frozen=True, eq=False)
class BinnProductKernel:
    """Product kernel of a mode-free B-INN; inputs are in normalized units."""

    bases: Sequence[BasisSpec]
    prior_variance: float = 1.0

    def __post_init__(self):
        if not self.prior_variance > 0:
            raise BinnError("prior variance must be positive")
        object.__setattr__(self, "bases", tuple(self.bases))

    def _factors(self, a):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.shape[1] != len(self.bases):
            raise BinnError(f"kernel expects {len(self.bases)}-D inputs, got {a.shape[1]}")
        return [basis_matrix(spec, a[:, d]) for d, spec in enumerate(self.bases)]

    def gram(self, a, b) -> np.ndarray:
        out = None
        for pa, pb in zip(self._factors(a), self._factors(b)):
            term = self.prior_variance * (pa @ pb.T)
            out = term if out is None else out * term
        return out

    def diag(self, a) -> np.ndarray:
        out = None
        for pa in self._factors(a):
            term = self.prior_variance * np.sum(pa * pa, axis=1)
            out = term if out is None else out * term
        return out


Kernel = RbfKernel | BinnProductKernel


def kernel_eval(kernel: Kernel, x, x2) -> float:
    return float(kernel.gram(np.atleast_2d(x), np.atleast_2d(x2))[0, 0])


def gp_fit_predict(
    kernel: Kernel,
    train: Dataset,
    test_inputs,
    noise_variance: float,
    include_noise: bool = False,
    jitter: float = 1e-10,
):
    """Posterior predictive means and variances at ``test_inputs``.

    The training Gram matrix plus noise is factorized once by Cholesky, with
    the same jitter escalation as the weight-space solver.
    """
    if not noise_variance > 0:
        raise BinnError("noise variance must be positive")
    xs = np.atleast_2d(np.asarray(test_inputs, dtype=float))
    prior_var = kernel.diag(xs) if xs.shape[0] else np.zeros(0)
    if train.n == 0:
        means = np.zeros(xs.shape[0])
        variances = prior_var.copy()
    else:
        K = kernel.gram(train.inputs, train.inputs)
        K[np.diag_indices_from(K)] += noise_variance
        try:
            L, _ = jittered_cholesky(K, jitter, what="kernel matrix")
        except SingularSystemError as exc:
            raise SingularSystemError(f"singular kernel: {exc}") from exc
        alpha = linalg.cho_solve((L, True), train.targets, check_finite=False)
        Ks = kernel.gram(train.inputs, xs)
        means = Ks.T @ alpha
        v = linalg.solve_triangular(L, Ks, lower=True, check_finite=False)
        variances = np.maximum(prior_var - np.sum(v * v, axis=0), 0.0)
    if include_noise:
        variances = variances + noise_variance
    return means, variances
