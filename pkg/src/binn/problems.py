"""Deterministic benchmark data: a noisy 1-D function, a parametric Poisson
problem with a closed-form solution, and a parametric transient heat problem
solved by finite differences."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .core import BinnError, Dataset

SYNTHETIC_NOISE_VARIANCE = 0.04


def synthetic_1d_function(x):
    x = np.asarray(x, dtype=float)
    return np.sin(3.0 * x) + 0.3 * np.cos(9.0 * x)


def synthetic_1d(n: int, seed=None, noise: bool = True, noise_variance: float = SYNTHETIC_NOISE_VARIANCE) -> Dataset:
    """``n`` uniform samples on [-1, 1] of sin(3x) + 0.3 cos(9x) + N(0, noise_variance)."""
    if n < 1:
        raise BinnError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    y = synthetic_1d_function(x)
    if noise:
        y = y + rng.normal(0.0, np.sqrt(noise_variance), size=n)
    return Dataset(x[:, None], y, ("x",), "y")


# Poisson on the unit cube: three separable sine modes, source linear in p.
POISSON_MODES = np.array([[2, 3, 2], [4, 1, 3], [5, 5, 2]], dtype=float)
POISSON_COEFFS = np.array([1.0, 0.8, 1.2])


def poisson_forcing(x, p):
    """f(x; p) = sum_r c_r p prod_j sin(pi m_rj x_j); ``x`` has shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    s = np.sin(np.pi * x[..., None, :] * POISSON_MODES)  # (..., 3 terms, 3 coords)
    return np.asarray(p) * np.sum(POISSON_COEFFS * np.prod(s, axis=-1), axis=-1)


def poisson_solution(x, p):
    """Closed-form solution of -lap u = f on [0,1]^3 with u = 0 on the boundary."""
    x = np.asarray(x, dtype=float)
    s = np.sin(np.pi * x[..., None, :] * POISSON_MODES)
    weights = POISSON_COEFFS / (np.pi**2 * np.sum(POISSON_MODES**2, axis=1))
    return np.asarray(p) * np.sum(weights * np.prod(s, axis=-1), axis=-1)


def poisson_grid(points_per_axis: int) -> np.ndarray:
    if points_per_axis < 2:
        raise BinnError("grid needs at least 2 points per axis")
    g = np.linspace(0.0, 1.0, points_per_axis)
    mesh = np.meshgrid(g, g, g, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def poisson_dataset(points_per_axis: int, p_values) -> dict[float, Dataset]:
    """One Dataset per parameter value; inputs are (x1, x2, x3, p)."""
    xs = poisson_grid(points_per_axis)
    out = {}
    for p in np.atleast_1d(np.asarray(p_values, dtype=float)):
        inputs = np.column_stack([xs, np.full(xs.shape[0], p)])
        out[float(p)] = Dataset(inputs, poisson_solution(xs, p), ("x1", "x2", "x3", "p"), "u")
    return out


def default_source_centers() -> np.ndarray:
    g = np.array([0.2, 0.4, 0.6, 0.8])
    cx, cy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([cx.ravel(), cy.ravel()])


@dataclass(frozen=True)
class HeatSpec:
    """u_t = k lap u + b(x, P) on [0,1]^2 x (0, T], u = 0 on the boundary and at t = 0.

    ``nx``/``ny`` count grid nodes including the boundary; ``nt`` snapshots are
    saved at t = T/nt, 2T/nt, ..., T, with ``substeps`` backward-Euler steps
    between consecutive snapshots.
    """

    conductivity: float = 1.0
    power: float = 100.0
    nx: int = 51
    ny: int = 51
    nt: int = 13
    substeps: int = 4
    final_time: float = 0.04
    source_width: float = 0.05
    source_centers: tuple = field(default_factory=lambda: tuple(map(tuple, default_source_centers())))

    K_RANGE = (1.0, 4.0)
    P_RANGE = (100.0, 200.0)

    def validate(self, strict_domain: bool = True):
        if min(self.nx, self.ny, self.nt) < 3:
            raise BinnError("heat grid sizes must be >= 3")
        if self.substeps < 1 or self.final_time <= 0 or self.source_width <= 0:
            raise BinnError("invalid heat time stepping or source width")
        if self.conductivity <= 0:
            raise BinnError("conductivity must be positive")
        if strict_domain:
            lo, hi = self.K_RANGE
            if not lo <= self.conductivity <= hi:
                raise BinnError(f"conductivity {self.conductivity} outside [{lo}, {hi}]")
            lo, hi = self.P_RANGE
            if not (lo <= self.power <= hi or self.power == 0.0):
                raise BinnError(f"source power {self.power} outside [{lo}, {hi}]")

    def metadata(self) -> dict:
        d = asdict(self)
        d["source_centers"] = [list(c) for c in self.source_centers]
        d["equation"] = "u_t = k * laplace(u) + b(x, P); u = 0 on boundary; u(x, 0) = 0"
        d["source"] = "b = sum_i P * exp(-2 * |x - c_i|^2 / r0^2)"
        d["scheme"] = "backward Euler in time, 5-point Laplacian, uniform grid"
        d["time_step"] = self.final_time / (self.nt * self.substeps)
        return d


def heat_source(spec: HeatSpec, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = np.zeros(np.broadcast(x, y).shape)
    for cx, cy in spec.source_centers:
        b += np.exp(-2.0 * ((x - cx) ** 2 + (y - cy) ** 2) / spec.source_width**2)
    return spec.power * b


def _laplacian(n_inner: int, h: float):
    main = -2.0 * np.ones(n_inner)
    off = np.ones(n_inner - 1)
    return sparse.diags([off, main, off], [-1, 0, 1]) / h**2


def heat_field(spec: HeatSpec, strict_domain: bool = True):
    """Solve on the grid; returns (x nodes, y nodes, times, u[nt, nx, ny])."""
    spec.validate(strict_domain)
    xs = np.linspace(0.0, 1.0, spec.nx)
    ys = np.linspace(0.0, 1.0, spec.ny)
    times = spec.final_time * np.arange(1, spec.nt + 1) / spec.nt
    dt = spec.final_time / (spec.nt * spec.substeps)
    ix, iy = spec.nx - 2, spec.ny - 2
    lap = sparse.kronsum(_laplacian(iy, ys[1] - ys[0]), _laplacian(ix, xs[1] - xs[0]), format="csc")
    # kronsum(A, B) = kron(I_B, A) + kron(B, I_A): x is the slow index, y the fast one
    system = (sparse.identity(ix * iy, format="csc") - dt * spec.conductivity * lap).tocsc()
    try:
        solve = splinalg.factorized(system)
    except RuntimeError as exc:
        raise BinnError(f"heat system factorization failed: {exc}") from exc
    gx, gy = np.meshgrid(xs[1:-1], ys[1:-1], indexing="ij")
    b = heat_source(spec, gx, gy).ravel()
    u = np.zeros(ix * iy)
    out = np.zeros((spec.nt, spec.nx, spec.ny))
    for k in range(spec.nt):
        for _ in range(spec.substeps):
            u = solve(u + dt * b)
        if not np.all(np.isfinite(u)):
            raise BinnError("heat solve produced non-finite values")
        out[k, 1:-1, 1:-1] = u.reshape(ix, iy)
    return xs, ys, times, out


def heat_solve(spec: HeatSpec, strict_domain: bool = True) -> Dataset:
    """Rows (x, y, t, k, P) -> u over every grid node and saved time."""
    xs, ys, times, u = heat_field(spec, strict_domain)
    T, X, Y = np.meshgrid(times, xs, ys, indexing="ij")
    n = u.size
    inputs = np.column_stack([
        X.ravel(), Y.ravel(), T.ravel(),
        np.full(n, spec.conductivity), np.full(n, spec.power),
    ])
    return Dataset(inputs, u.ravel(), ("x", "y", "t", "k", "P"), "u")
