"""Fixed Gaussian radial basis functions on a normalized input axis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinnError

DEDUP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Gaussian bases ``exp(-(x - c_j)^2 / (2 l^2))`` for one input dimension."""

    centers: np.ndarray
    length_scale: float

    def __post_init__(self):
        c = np.array(self.centers, dtype=float).reshape(-1)
        if c.size == 0:
            raise BinnError("a basis needs at least one center")
        if not np.all(np.isfinite(c)):
            raise BinnError("basis centers must be finite")
        if np.any(np.diff(c) <= 0):
            raise BinnError("basis centers must be strictly increasing")
        if not self.length_scale > 0:
            raise BinnError(f"length scale must be positive, got {self.length_scale}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "length_scale", float(self.length_scale))

    @property
    def size(self) -> int:
        return self.centers.shape[0]


def eval_basis(spec: BasisSpec, x: float) -> np.ndarray:
    """Basis evaluation vector at a single scalar input (length J)."""
    if not np.isfinite(x):
        raise BinnError("basis input must be finite")
    return basis_matrix(spec, np.array([x], dtype=float))[0]


def basis_matrix(spec: BasisSpec, xs) -> np.ndarray:
    """N x J matrix whose row i is the basis evaluation vector at ``xs[i]``."""
    xs = np.asarray(xs, dtype=float).reshape(-1)
    diff = xs[:, None] - spec.centers[None, :]
    return np.exp(-(diff * diff) / (2.0 * spec.length_scale**2))


def equispaced_centers(count: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    if count < 1:
        raise BinnError("need at least one center")
    if not hi > lo:
        raise BinnError("center interval must satisfy hi > lo")
    if count == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, count)


def unique_centers(values, tol: float = DEDUP_TOL) -> np.ndarray:
    """Sorted distinct values, merging neighbours closer than ``tol``."""
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise BinnError("cannot place centers on an empty input column")
    keep = np.concatenate([[True], np.diff(v) > tol])
    return v[keep]
