"""Bayesian interpolating neural network (B-INN).

The surrogate is a rank-M CP expansion over per-dimension Gaussian bases,

    y(x) = sum_m prod_d  Phi_d(x_d)^T w_d^(m).

Weights of one dimension are inferred with every other dimension frozen at
its current posterior mean, which makes each block update an exact Bayesian
linear regression on a Kronecker-structured design matrix.  A sweep updates
dimensions 0..D-1 in order.

Weights of dimension d are stored mode-major: ``[w^(1); w^(2); ...; w^(M)]``,
each block of length J_d.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import blr
from .basis import BasisSpec, basis_matrix, equispaced_centers, unique_centers
from .core import (
    BinnError,
    CenterPlacement,
    ConfigError,
    Dataset,
    DatasetError,
    ModelConfig,
    Scaler,
    SingularSystemError,
    fit_scaler,
)

log = logging.getLogger(__name__)

FORMAT_NAME = "binn-model"
FORMAT_VERSION = 1
IMPROVEMENT_TOL = 1e-12
ROW_BLOCK = 8192


@dataclass(eq=False)
class BinnModel:
    """A B-INN with one Gaussian weight posterior per input dimension.

    ``means[d]`` has length ``M * J_d`` and ``covs[d]`` is the matching dense
    covariance.  ``prior_means[d]`` is the prior mean used by the block
    updates; it stays fixed while fitting.
    """

    config: ModelConfig
    scaler: Scaler
    bases: list[BasisSpec]
    means: list[np.ndarray]
    covs: list[np.ndarray]
    prior_means: list[np.ndarray]
    input_names: tuple[str, ...] | None = None
    target_name: str | None = None
    train_rmse: list[float] = field(default_factory=list)
    fit_seconds: float | None = None

    @property
    def dim(self) -> int:
        return len(self.bases)

    @property
    def modes(self) -> int:
        return self.config.modes

    def basis_sizes(self) -> list[int]:
        return [b.size for b in self.bases]

    def mode_means(self, d: int) -> np.ndarray:
        """Posterior means of dimension ``d`` as an (M, J_d) array."""
        return self.means[d].reshape(self.modes, self.bases[d].size)

    def mode_blocks(self, d: int) -> np.ndarray:
        """Diagonal J_d x J_d covariance blocks of dimension ``d``, shape (M, J_d, J_d)."""
        j = self.bases[d].size
        cov = self.covs[d]
        return np.stack([cov[m * j:(m + 1) * j, m * j:(m + 1) * j] for m in range(self.modes)])

    def copy(self) -> "BinnModel":
        return BinnModel(
            self.config,
            self.scaler,
            list(self.bases),
            [m.copy() for m in self.means],
            [c.copy() for c in self.covs],
            [p.copy() for p in self.prior_means],
            self.input_names,
            self.target_name,
            list(self.train_rmse),
            self.fit_seconds,
        )


def init_std(config: ModelConfig, dim: int) -> float:
    """Std of the seeded initial weights: s_w * M^(-1/(2D))."""
    return float(np.sqrt(config.prior_variance) * config.modes ** (-1.0 / (2 * dim)))


def place_bases(config: ModelConfig, scaled_inputs: np.ndarray) -> list[BasisSpec]:
    dim = scaled_inputs.shape[1]
    scales = config.scales_for(dim)
    if config.center_placement is CenterPlacement.AT_TRAINING_POINTS:
        return [BasisSpec(unique_centers(scaled_inputs[:, d]), scales[d]) for d in range(dim)]
    counts = config.counts_for(dim)
    return [BasisSpec(equispaced_centers(counts[d], 0.0, 1.0), scales[d]) for d in range(dim)]


def init_model(
    config: ModelConfig,
    data: Dataset,
    scaler: Scaler | None = None,
    bases: Sequence[BasisSpec] | None = None,
    warm_start: BinnModel | None = None,
) -> BinnModel:
    """Model at its prior, with seeded initial weight means.

    Prior means are zero.  With ``warm_start`` both the prior means and the
    initial means are copied from the warm model's posterior means, and its
    scaler and bases are reused so the weight layouts line up.
    """
    if data.n < 1:
        raise DatasetError("cannot initialize a model on an empty dataset")
    config.validate()
    if warm_start is not None:
        if warm_start.dim != data.dim:
            raise ConfigError("warm-start model dimension does not match the data")
        if warm_start.modes != config.modes:
            raise ConfigError("warm-start model has a different number of modes")
        scaler = scaler or warm_start.scaler
        bases = bases or warm_start.bases
    scaler = scaler or fit_scaler(data)
    if scaler.dim != data.dim:
        raise ConfigError(f"scaler is {scaler.dim}-D but data has {data.dim} inputs")
    if bases is None:
        config.scales_for(data.dim)
        if config.center_placement is CenterPlacement.EQUISPACED:
            config.counts_for(data.dim)
        bases = place_bases(config, scaler.transform(data.inputs))
    bases = list(bases)
    if len(bases) != data.dim:
        raise ConfigError("one basis per input dimension is required")

    s2 = config.prior_variance
    M = config.modes
    sizes = [M * b.size for b in bases]
    covs = [s2 * np.eye(k) for k in sizes]
    if warm_start is not None:
        if warm_start.basis_sizes() != [b.size for b in bases]:
            raise ConfigError("warm-start bases do not match")
        priors = [m.copy() for m in warm_start.means]
        means = [m.copy() for m in warm_start.means]
    else:
        rng = np.random.default_rng(config.seed)
        sd = init_std(config, data.dim)
        means = [rng.normal(0.0, sd, size=k) for k in sizes]
        priors = [np.zeros(k) for k in sizes]
    return BinnModel(config, scaler, bases, means, covs, priors, data.input_names, data.target_name)


def frozen_factors(model: BinnModel, data: Dataset, d: int) -> np.ndarray:
    """N x M matrix with entry (i, m) = prod over l != d of Phi_l(x_il)^T m_l^(m)."""
    if not 0 <= d < model.dim:
        raise BinnError(f"dimension index {d} out of range for a {model.dim}-D model")
    u = model.scaler.transform(data.inputs)
    g = np.ones((data.n, model.modes))
    for l in range(model.dim):
        if l != d:
            g *= basis_matrix(model.bases[l], u[:, l]) @ model.mode_means(l).T
    return g


def block_design_matrix(g: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product ``g_i (x) Phi_i``, mode-major (N x M*J)."""
    g = np.asarray(g, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if g.shape[0] != phi.shape[0]:
        raise BinnError("frozen factors and basis matrix disagree on row count")
    n = g.shape[0]
    return (g[:, :, None] * phi[:, None, :]).reshape(n, g.shape[1] * phi.shape[1])


class _Trainer:
    """Holds the per-dimension basis matrices and factor values of one dataset."""

    def __init__(self, model: BinnModel, data: Dataset):
        if data.dim != model.dim:
            raise DatasetError(f"model is {model.dim}-D but data has {data.dim} inputs")
        self.model = model
        self.y = data.targets
        u = model.scaler.transform(data.inputs)
        self.phis = [basis_matrix(b, u[:, d]) for d, b in enumerate(model.bases)]
        self.factors = [self.phis[d] @ model.mode_means(d).T for d in range(model.dim)]

    def update(self, d: int):
        model = self.model
        k = model.modes * model.bases[d].size
        xtx = np.zeros((k, k))
        xty = np.zeros(k)
        # accumulate over row blocks so the design matrix never exceeds cache size
        for start in range(0, self.y.shape[0], ROW_BLOCK):
            rows = slice(start, start + ROW_BLOCK)
            g = np.ones_like(self.factors[d][rows])
            for l, f in enumerate(self.factors):
                if l != d:
                    g *= f[rows]
            X = block_design_matrix(g, self.phis[d][rows])
            xtx += X.T @ X
            xty += X.T @ self.y[rows]
        prior = blr.GaussianPrior(model.prior_means[d], model.config.prior_variance)
        try:
            post = blr.posterior_from_stats(xtx, xty, prior, model.config.noise_variance, model.config.jitter)
        except SingularSystemError as exc:
            raise SingularSystemError(f"dimension {d}: {exc}", dimension=d) from exc
        model.means[d] = post.mean
        model.covs[d] = post.cov
        self.factors[d] = self.phis[d] @ model.mode_means(d).T

    def sweep(self):
        for d in range(self.model.dim):
            self.update(d)

    def rmse(self) -> float:
        pred = np.prod(np.stack(self.factors), axis=0).sum(axis=1)
        return float(np.sqrt(np.mean((pred - self.y) ** 2)))


def sweep(model: BinnModel, data: Dataset) -> BinnModel:
    """One pass of block updates over dimensions 0..D-1. Updates ``model`` in place."""
    _Trainer(model, data).sweep()
    return model


def fit(
    config: ModelConfig,
    data: Dataset,
    scaler: Scaler | None = None,
    bases: Sequence[BasisSpec] | None = None,
    warm_start: BinnModel | None = None,
) -> BinnModel:
    """Initialize and run ``config.sweeps`` alternating sweeps.

    With ``config.patience`` set, stops once the training RMSE has not improved
    by at least 1e-12 for that many consecutive sweeps.
    """
    t0 = time.perf_counter()
    model = init_model(config, data, scaler=scaler, bases=bases, warm_start=warm_start)
    trainer = _Trainer(model, data)
    best = np.inf
    stall = 0
    for k in range(config.sweeps):
        trainer.sweep()
        err = trainer.rmse()
        model.train_rmse.append(err)
        if config.patience is None:
            continue
        if err < best - IMPROVEMENT_TOL:
            best, stall = err, 0
        else:
            stall += 1
            if stall >= config.patience:
                log.info("early stop after %d sweeps (train rmse %.6g)", k + 1, err)
                break
    model.fit_seconds = time.perf_counter() - t0
    return model


def _scaled(model: BinnModel, x) -> tuple[np.ndarray, bool]:
    """Scale inputs; a 0-D or 1-D ``x`` is one point, a 2-D ``x`` is a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim < 2
    x = x.reshape(1, -1) if single else x
    if x.shape[1] != model.dim:
        raise DatasetError(f"model expects {model.dim} inputs per point, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise DatasetError("prediction inputs must be finite")
    return model.scaler.transform(x), single


def _moments(model: BinnModel, u: np.ndarray):
    """Per-(point, mode) factor means and variances for each dimension."""
    means, variances = [], []
    for d, spec in enumerate(model.bases):
        phi = basis_matrix(spec, u[:, d])
        means.append(phi @ model.mode_means(d).T)
        variances.append(np.einsum("nj,mjk,nk->nm", phi, model.mode_blocks(d), phi))
    return means, variances


def predict(model: BinnModel, x, include_noise: bool = False):
    """Predictive mean and variance at one point (length-D vector) or n x D points.

    The variance treats every (dimension, mode) weight block as independent:

        Var = sum_m [ prod_d (Var f_dm + E[f_dm]^2) - prod_d E[f_dm]^2 ],

    accumulated through the recursion R <- E^2 R + Var P, P <- (E^2 + Var) P
    so that no cancellation between the two products occurs.
    """
    u, single = _scaled(model, x)
    means, variances = _moments(model, u)
    n = u.shape[0]
    prod_mean = np.ones((n, model.modes))
    second = np.ones((n, model.modes))
    excess = np.zeros((n, model.modes))
    for e, v in zip(means, variances):
        v = np.maximum(v, 0.0)
        e2 = e * e
        excess = e2 * excess + v * second
        second = (e2 + v) * second
        prod_mean = prod_mean * e
    mean = prod_mean.sum(axis=1)
    var = excess.sum(axis=1)
    if include_noise:
        var = var + model.config.noise_variance
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def predict_mean(model: BinnModel, x):
    return predict(model, x)[0]


def predict_variance(model: BinnModel, x, include_noise: bool = False):
    return predict(model, x, include_noise=include_noise)[1]


def predict_std(model: BinnModel, x, include_noise: bool = False):
    return np.sqrt(predict_variance(model, x, include_noise=include_noise))


def rmse(model: BinnModel, data: Dataset) -> float:
    if data.n == 0:
        raise DatasetError("RMSE of an empty dataset is undefined")
    pred = predict_mean(model, data.inputs)
    return float(np.sqrt(np.mean((pred - data.targets) ** 2)))


def _block_root(v: np.ndarray, d: int, m: int) -> np.ndarray:
    """Square root A with A A^T = v; exact zero for a zero block."""
    lam, q = np.linalg.eigh(0.5 * (v + v.T))
    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)
    if lam.size and lam.min() < -1e-8 * scale:
        raise SingularSystemError(f"covariance block (d={d}, m={m}) is not positive semidefinite", dimension=d)
    return q * np.sqrt(np.clip(lam, 0.0, None))


def sample_predictions(model: BinnModel, x, count: int, seed=None, chunk: int = 200_000) -> np.ndarray:
    """Draw ``count`` outputs at a single point from the blockwise weight posterior.

    Each (dimension, mode) block is sampled independently from
    ``N(m_d^(m), V_d^(m))``; cross-mode covariance is ignored, as in
    :func:`predict`.
    """
    if count < 1:
        raise BinnError("count must be >= 1")
    u, _ = _scaled(model, np.asarray(x, dtype=float).reshape(1, -1))
    phis = [basis_matrix(spec, u[:, d])[0] for d, spec in enumerate(model.bases)]
    roots = [
        [_block_root(b, d, m) for m, b in enumerate(model.mode_blocks(d))]
        for d in range(model.dim)
    ]
    rng = np.random.default_rng(seed)
    out = np.empty(count)
    for start in range(0, count, chunk):
        size = min(chunk, count - start)
        total = np.zeros(size)
        for m in range(model.modes):
            term = np.ones(size)
            for d in range(model.dim):
                mean = model.mode_means(d)[m]
                z = rng.standard_normal((size, mean.shape[0]))
                w = mean + z @ roots[d][m].T
                term *= w @ phis[d]
            total += term
        out[start:start + size] = total
    return out


def to_dict(model: BinnModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "input_names": list(model.input_names) if model.input_names else None,
        "target_name": model.target_name,
        "scaler": {"lower": model.scaler.lower.tolist(), "upper": model.scaler.upper.tolist()},
        "dimensions": [
            {
                "centers": b.centers.tolist(),
                "length_scale": b.length_scale,
                "posterior_mean": model.means[d].tolist(),
                "posterior_covariance": model.covs[d].tolist(),
            }
            for d, b in enumerate(model.bases)
        ],
    }


def from_dict(doc: dict) -> BinnModel:
    if doc.get("format") != FORMAT_NAME:
        raise BinnError(f"not a {FORMAT_NAME} document")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise BinnError(f"unsupported model format version {version!r}")
    config = ModelConfig.from_dict(doc["config"])
    scaler = Scaler(doc["scaler"]["lower"], doc["scaler"]["upper"])
    bases, means, covs = [], [], []
    for entry in doc["dimensions"]:
        b = BasisSpec(entry["centers"], entry["length_scale"])
        k = config.modes * b.size
        mean = np.asarray(entry["posterior_mean"], dtype=float)
        cov = np.asarray(entry["posterior_covariance"], dtype=float)
        if mean.shape != (k,) or cov.shape != (k, k):
            raise BinnError("posterior shapes do not match modes x centers")
        bases.append(b)
        means.append(mean)
        covs.append(cov)
    names = doc.get("input_names")
    return BinnModel(
        config,
        scaler,
        bases,
        means,
        covs,
        [np.zeros_like(m) for m in means],
        tuple(names) if names else None,
        doc.get("target_name"),
    )


def save_model(model: BinnModel, path) -> None:
    Path(path).write_text(json.dumps(to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> BinnModel:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
