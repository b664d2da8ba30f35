"""Uncertainty-driven active learning over a pool of parameter vectors.

Each candidate parameter is scored by the mean epistemic predictive standard
deviation of the current model over a fixed set of spatial acquisition
points; the highest-scoring candidate is labeled next (its full field is
added to the training set) and the model is refit with a warm start.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import model as binn
from .core import BinnError, Dataset, ModelConfig, Scaler, SingularSystemError
from .problems import HeatSpec, heat_field, poisson_grid, poisson_solution

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ParametricProblem:
    """A labeled-data source: fields over ``spatial_points`` indexed by a parameter."""

    spatial_points: np.ndarray
    pool: np.ndarray
    label: Callable[[np.ndarray], np.ndarray]
    input_names: tuple[str, ...] | None = None
    target_name: str | None = None

    def __post_init__(self):
        self.spatial_points = np.atleast_2d(np.asarray(self.spatial_points, dtype=float))
        pool = np.asarray(self.pool, dtype=float)
        self.pool = pool.reshape(-1, 1) if pool.ndim == 1 else pool

    @property
    def dim(self) -> int:
        return self.spatial_points.shape[1] + self.pool.shape[1]

    def inputs_for(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        s = self.spatial_points
        return np.column_stack([s, np.broadcast_to(theta, (s.shape[0], theta.size))])

    def dataset_for(self, theta) -> Dataset:
        return Dataset(self.inputs_for(theta), self.label(np.asarray(theta, dtype=float)),
                       self.input_names, self.target_name)

    def domain_scaler(self) -> Scaler:
        """Bounds over every spatial point and every candidate, fixed for a campaign."""
        lo = np.concatenate([self.spatial_points.min(0), self.pool.min(0)])
        hi = np.concatenate([self.spatial_points.max(0), self.pool.max(0)])
        return Scaler(lo, hi)


def poisson_problem(grid: int = 8, pool_size: int = 40) -> ParametricProblem:
    """Poisson fields on a grid^3 lattice; candidates are equispaced p in [0, 1]."""
    xs = poisson_grid(grid)
    return ParametricProblem(
        xs,
        np.linspace(0.0, 1.0, pool_size),
        lambda theta: poisson_solution(xs, float(theta[0])),
        ("x1", "x2", "x3", "p"),
        "u",
    )


def heat_problem(nx: int = 11, nt: int = 5, k_levels: int = 6, p_levels: int = 6, substeps: int = 4) -> ParametricProblem:
    """Heat fields over (x, y, t); candidates are a k x P lattice on [1,4] x [100,200]."""
    base = HeatSpec(nx=nx, ny=nx, nt=nt, substeps=substeps)
    xs, ys, times, _ = heat_field(HeatSpec(power=0.0, nx=nx, ny=nx, nt=nt, substeps=substeps))
    T, X, Y = np.meshgrid(times, xs, ys, indexing="ij")
    spatial = np.column_stack([X.ravel(), Y.ravel(), T.ravel()])
    ks = np.linspace(*HeatSpec.K_RANGE, k_levels)
    ps = np.linspace(*HeatSpec.P_RANGE, p_levels)
    kk, pp = np.meshgrid(ks, ps, indexing="ij")

    def label(theta):
        spec = HeatSpec(float(theta[0]), float(theta[1]), base.nx, base.ny, base.nt, base.substeps)
        return heat_field(spec)[3].ravel()

    return ParametricProblem(spatial, np.column_stack([kk.ravel(), pp.ravel()]), label,
                             ("x", "y", "t", "k", "P"), "u")


@dataclass
class AlConfig:
    rounds: int = 10
    init_size: int = 6
    validation_size: int = 2
    seed: int = 0
    acquisition_points: np.ndarray | None = None

    def validate(self, pool_size: int):
        if self.rounds < 0:
            raise BinnError("rounds must be >= 0")
        if self.init_size < 1 or self.validation_size < 1:
            raise BinnError("initial and validation sets need at least one parameter each")
        if pool_size < self.init_size + self.validation_size:
            raise BinnError(
                f"pool of {pool_size} cannot supply {self.init_size} initial and "
                f"{self.validation_size} validation parameters"
            )


@dataclass(eq=False)
class AcquisitionState:
    pool: np.ndarray
    pool_index: list[int]
    labeled_index: list[int]
    validation_index: list[int]
    labeled: Dataset
    validation: Dataset
    acquisition_points: np.ndarray
    round: int = 0
    rmse_history: list[float] = field(default_factory=list)


class Selection(NamedTuple):
    index: int
    theta: np.ndarray
    score: float


def _acq_inputs(model, thetas: np.ndarray, acq: np.ndarray) -> np.ndarray:
    thetas = np.atleast_2d(thetas)
    n_acq = acq.shape[0]
    rows = np.empty((thetas.shape[0] * n_acq, acq.shape[1] + thetas.shape[1]))
    rows[:, :acq.shape[1]] = np.tile(acq, (thetas.shape[0], 1))
    rows[:, acq.shape[1]:] = np.repeat(thetas, n_acq, axis=0)
    # only the parameter columns are clamped; spatial points are the caller's grid
    span = slice(acq.shape[1], None)
    lo, hi = model.scaler.lower[span], model.scaler.upper[span]
    outside = np.any((thetas < lo) | (thetas > hi), axis=1)
    if np.any(outside):
        warnings.warn(f"{int(outside.sum())} candidate(s) outside the model bounds were clamped", stacklevel=3)
        rows[:, span] = np.clip(rows[:, span], lo, hi)
    return rows


def score_pool(model: binn.BinnModel, pool, acquisition_points) -> np.ndarray:
    """Acquisition score of every candidate row of ``pool``."""
    acq = np.atleast_2d(np.asarray(acquisition_points, dtype=float))
    if acq.shape[0] == 0:
        raise BinnError("acquisition point set is empty")
    pool = np.asarray(pool, dtype=float)
    pool = pool.reshape(-1, model.dim - acq.shape[1])
    if pool.shape[0] == 0:
        return np.zeros(0)
    std = np.sqrt(binn.predict_variance(model, _acq_inputs(model, pool, acq)))
    return std.reshape(pool.shape[0], acq.shape[0]).mean(axis=1)


def score_candidate(model: binn.BinnModel, theta, acquisition_points) -> float:
    """Mean epistemic predictive std over the acquisition points at parameter ``theta``."""
    return float(score_pool(model, np.atleast_2d(np.asarray(theta, dtype=float)), acquisition_points)[0])


def select_next(model: binn.BinnModel, pool, acquisition_points) -> Selection:
    """Highest-scoring candidate; ties go to the lowest pool index."""
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise BinnError("candidate pool is empty")
    scores = score_pool(model, pool, acquisition_points)
    i = int(np.argmax(scores))  # first occurrence of the maximum
    return Selection(i, np.atleast_2d(pool.reshape(scores.shape[0], -1))[i], float(scores[i]))


@dataclass
class CampaignResult:
    models: list
    rmse_history: list[float]
    selections: list[dict]
    state: AcquisitionState

    @property
    def summary(self) -> dict:
        return campaign_summary(self.rmse_history, [s["fit_seconds"] for s in self.selections])


def campaign_summary(rmse_history, fit_seconds) -> dict:
    init, final = rmse_history[0], rmse_history[-1]
    return {
        "init_rmse": init,
        "best_rmse": min(rmse_history),
        "final_rmse": final,
        "pct_improvement": pct_improvement(init, final),
        "rounds_completed": len(rmse_history) - 1,
        "total_fit_seconds": float(sum(fit_seconds)),
    }


def pct_improvement(init: float, final: float) -> float:
    return 100.0 * (init - final) / init if init != 0 else 0.0


def _fit_tagged(round_index, **kwargs):
    try:
        return binn.fit(**kwargs)
    except SingularSystemError as exc:
        raise SingularSystemError(f"round {round_index}: {exc}", dimension=exc.dimension,
                                  round_index=round_index) from exc
    except BinnError as exc:
        raise BinnError(f"round {round_index}: {exc}") from exc


def run_campaign(
    problem: ParametricProblem,
    config: ModelConfig,
    al: AlConfig,
    log_file=None,
    keep_models: bool = True,
) -> CampaignResult:
    """Run the acquisition loop.

    The initial and validation parameter sets are drawn by seeded sampling
    without replacement, initial set first.  Each round scores the remaining
    pool with the previous model, labels the argmax, and refits from the
    previous posterior means.  Stops after ``al.rounds`` rounds or when the pool
    is empty.  ``log_file`` receives one JSON line per round, round 0 included.
    """
    pool = problem.pool
    al.validate(pool.shape[0])
    rng = np.random.default_rng(al.seed)
    order = rng.permutation(pool.shape[0])
    labeled_idx = [int(i) for i in order[:al.init_size]]
    val_idx = [int(i) for i in order[al.init_size:al.init_size + al.validation_size]]
    taken = set(labeled_idx) | set(val_idx)
    remaining = [i for i in range(pool.shape[0]) if i not in taken]

    acq = problem.spatial_points if al.acquisition_points is None else np.atleast_2d(al.acquisition_points)
    scaler = problem.domain_scaler()
    labeled = Dataset.concat([problem.dataset_for(pool[i]) for i in labeled_idx])
    validation = Dataset.concat([problem.dataset_for(pool[i]) for i in val_idx])
    state = AcquisitionState(pool, remaining, labeled_idx, val_idx, labeled, validation, acq)

    t0 = time.perf_counter()
    model = _fit_tagged(0, config=config, data=labeled, scaler=scaler)
    fit_s = time.perf_counter() - t0
    err = binn.rmse(model, validation)
    state.rmse_history.append(err)
    models = [model] if keep_models else []
    records = []

    def emit(rec):
        records.append(rec)
        if log_file is not None:
            log_file.write(json.dumps(rec) + "\n")
            log_file.flush()

    emit({"round": 0, "selected_parameter": None, "score": None, "pool_size": len(remaining),
          "train_size": labeled.n, "validation_rmse": err, "fit_seconds": fit_s})
    log.info("round 0: validation rmse %.6g", err)

    for t in range(1, al.rounds + 1):
        if not state.pool_index:
            log.info("candidate pool exhausted after %d rounds", t - 1)
            break
        sel = select_next(model, pool[state.pool_index], acq)
        chosen = state.pool_index.pop(sel.index)
        state.labeled_index.append(chosen)
        state.labeled = Dataset.concat([state.labeled, problem.dataset_for(pool[chosen])])
        t0 = time.perf_counter()
        model = _fit_tagged(t, config=config, data=state.labeled, warm_start=model)
        fit_s = time.perf_counter() - t0
        err = binn.rmse(model, validation)
        state.round = t
        state.rmse_history.append(err)
        if keep_models:
            models.append(model)
        emit({"round": t, "selected_parameter": pool[chosen].tolist(), "score": sel.score,
              "pool_size": len(state.pool_index), "train_size": state.labeled.n,
              "validation_rmse": err, "fit_seconds": fit_s})
        log.info("round %d: picked %s (score %.4g), validation rmse %.6g", t, pool[chosen], sel.score, err)

    if not keep_models:
        models = [model]
    return CampaignResult(models, list(state.rmse_history), records, state)
