"""Value types, input scaling, CSV handling and model configuration."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np


class BinnError(Exception):
    """Base class for errors raised by this package."""


class DatasetError(BinnError, ValueError):
    pass


class CsvFormatError(DatasetError):
    """Malformed CSV input. Carries the 1-based file row and column when known."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ConfigError(BinnError, ValueError):
    pass


class SingularSystemError(BinnError, np.linalg.LinAlgError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, message, dimension=None, round_index=None):
        self.dimension = dimension
        self.round_index = round_index
        super().__init__(message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """N rows of D-dimensional inputs with one scalar target per row."""

    inputs: np.ndarray
    targets: np.ndarray
    input_names: tuple[str, ...] | None = None
    target_name: str | None = None

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise DatasetError(f"inputs must be a 2-D matrix, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise DatasetError(
                f"inputs have {x.shape[0]} rows but targets have length {y.shape[0]}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DatasetError("dataset contains non-finite entries")
        if self.input_names is not None:
            names = tuple(self.input_names)
            if len(names) != x.shape[1]:
                raise DatasetError("input_names length does not match input columns")
            object.__setattr__(self, "input_names", names)
        object.__setattr__(self, "inputs", _frozen(x))
        object.__setattr__(self, "targets", _frozen(y))

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return self.n

    def subset(self, index) -> "Dataset":
        return Dataset(self.inputs[index], self.targets[index], self.input_names, self.target_name)

    @staticmethod
    def concat(parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise DatasetError("cannot concatenate zero datasets")
        return Dataset(
            np.vstack([p.inputs for p in parts]),
            np.concatenate([p.targets for p in parts]),
            parts[0].input_names,
            parts[0].target_name,
        )


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-dimension min-max map onto [0, 1].

    A constant dimension (max == min) maps every value to 0.5.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DatasetError("scaler bounds have mismatched lengths")
        if np.any(hi < lo):
            raise DatasetError("scaler upper bound below lower bound")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        span = self.span
        const = span == 0
        safe = np.where(const, 1.0, span)
        u = (x - self.lower) / safe
        return np.where(const, 0.5, u)

    def inverse(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        span = self.span
        x = self.lower + u * span
        # constant dimensions collapse back onto their single value
        return np.where(span == 0, self.lower, x)

    def contains(self, x, tol=1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        slack = tol * np.maximum(1.0, np.abs(self.span))
        return np.all((x >= self.lower - slack) & (x <= self.upper + slack), axis=-1)

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)


def fit_scaler(data: Dataset | np.ndarray) -> Scaler:
    x = data.inputs if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    if x.shape[0] == 0:
        raise DatasetError("cannot fit a scaler on an empty dataset")
    return Scaler(x.min(axis=0), x.max(axis=0))


class CenterPlacement(str, enum.Enum):
    EQUISPACED = "Equispaced"
    AT_TRAINING_POINTS = "AtTrainingPoints"


def _per_dim(value, name, cast):
    if value is None:
        return None
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(cast(v) for v in value)
    return cast(value)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of a B-INN fit.

    ``basis_counts`` and ``length_scales`` may be a scalar (broadcast to every
    input dimension) or a per-dimension sequence. Length scales are in
    normalized-input units, i.e. relative to a [0, 1] span per dimension.
    ``basis_counts`` is ignored for ``AtTrainingPoints`` placement, where the
    distinct training values set the count.
    """

    modes: int = 1
    basis_counts: int | tuple[int, ...] | None = 20
    length_scales: float | tuple[float, ...] = 0.25
    prior_variance: float = 1.0
    noise_variance: float = 0.04
    sweeps: int = 40
    seed: int = 0
    center_placement: CenterPlacement = CenterPlacement.EQUISPACED
    jitter: float = 1e-10
    patience: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "basis_counts", _per_dim(self.basis_counts, "basis_counts", int))
        object.__setattr__(self, "length_scales", _per_dim(self.length_scales, "length_scales", float))
        object.__setattr__(self, "center_placement", CenterPlacement(self.center_placement))
        self.validate()

    def validate(self):
        if not isinstance(self.modes, (int, np.integer)) or self.modes < 1:
            raise ConfigError(f"modes must be a positive integer, got {self.modes!r}")
        if not (self.prior_variance > 0 and math.isfinite(self.prior_variance)):
            raise ConfigError("prior_variance must be positive")
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise ConfigError("noise_variance must be positive")
        if self.sweeps < 1:
            raise ConfigError("sweeps must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.jitter < 0:
            raise ConfigError("jitter must be nonnegative")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be a positive integer when set")
        scales = self.length_scales if isinstance(self.length_scales, tuple) else (self.length_scales,)
        if any(not (s > 0 and math.isfinite(s)) for s in scales):
            raise ConfigError("length scales must be positive")
        if self.basis_counts is None:
            if self.center_placement is CenterPlacement.EQUISPACED:
                raise ConfigError("basis_counts is required for Equispaced placement")
        else:
            counts = self.basis_counts if isinstance(self.basis_counts, tuple) else (self.basis_counts,)
            if any(c < 1 for c in counts):
                raise ConfigError("basis counts must be >= 1")

    def counts_for(self, dim: int) -> tuple[int, ...]:
        return _broadcast(self.basis_counts, dim, "basis_counts")

    def scales_for(self, dim: int) -> tuple[float, ...]:
        return _broadcast(self.length_scales, dim, "length_scales")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            elif isinstance(v, CenterPlacement):
                v = v.value
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "ModelConfig":
        d = self.to_dict()
        d.update(changes)
        return ModelConfig.from_dict(d)


def _broadcast(value, dim, name):
    if value is None:
        return (None,) * dim
    if isinstance(value, tuple):
        if len(value) != dim:
            raise ConfigError(f"{name} has {len(value)} entries but data has {dim} input dimensions")
        return value
    return (value,) * dim


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a headered numeric CSV into (header, matrix). Rows are 1-based in errors."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: missing header row") from None
        header = [h.strip() for h in header]
        if not header or all(h == "" for h in header):
            raise CsvFormatError(f"{path}: missing header row", row=1)
        if all(_is_number(h) for h in header):
            raise CsvFormatError(f"{path}: missing header row (first row is numeric)", row=1)
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(c.strip() == "" for c in raw):
                continue
            if len(raw) != len(header):
                raise CsvFormatError(
                    f"{path}: ragged row with {len(raw)} cells, expected {len(header)}", row=lineno
                )
            vals = []
            for name, cell in zip(header, raw):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: non-numeric cell {cell!r}", row=lineno, column=name
                    ) from None
            rows.append(vals)
    mat = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, mat


def write_table(path, header: Sequence[str], matrix) -> None:
    matrix = np.asarray(matrix, dtype=float).reshape(-1, len(header))
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in matrix:
            # repr gives the shortest string that round-trips exactly
            w.writerow([repr(float(v)) for v in row])


def load_csv(path, target_column: str | int | None = None, exclude=()) -> Dataset:
    """Load a Dataset; the target defaults to the last column.

    Every remaining column not listed in ``exclude`` becomes an input.
    """
    header, mat = read_table(path)
    if len(header) < 2:
        raise CsvFormatError(f"{path}: need at least one input and one target column")
    if target_column is None:
        t = len(header) - 1
    elif isinstance(target_column, int):
        t = target_column % len(header)
    else:
        if target_column not in header:
            raise CsvFormatError(f"{path}: no column named {target_column!r}")
        t = header.index(target_column)
    drop = {t} | {header.index(c) for c in exclude if c in header}
    keep = [i for i in range(len(header)) if i not in drop]
    if not keep:
        raise CsvFormatError(f"{path}: no input columns left")
    try:
        return Dataset(mat[:, keep], mat[:, t], tuple(header[i] for i in keep), header[t])
    except DatasetError as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc


def save_csv(data: Dataset, path) -> None:
    names = list(data.input_names or (f"x{i + 1}" for i in range(data.dim)))
    header = names + [data.target_name or "y"]
    write_table(path, header, np.column_stack([data.inputs, data.targets]))


SEED_PURPOSES = ("data", "init", "al", "test")


def derive_seed(seed: int, purpose: str) -> int:
    """Independent 64-bit seed for one sub-purpose of a run seeded by ``seed``."""
    key = SEED_PURPOSES.index(purpose)
    ss = np.random.SeedSequence(int(seed), spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
