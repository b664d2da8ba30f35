"""Command-line interface: ``binn <command> [options]``.

Commands: gen, fit, predict, eval, compare-gp, scale, al.  Every command
writes its outputs plus one ``*.manifest.json`` with the resolved
configuration, seeds and wall-clock timings.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import model as binn
from .active import AlConfig, campaign_summary, heat_problem, poisson_problem, run_campaign
from .core import (
    BinnError,
    ConfigError,
    Dataset,
    DatasetError,
    ModelConfig,
    derive_seed,
    load_csv,
    read_table,
    save_csv,
    write_table,
)
from .gp import GP_MAX_POINTS, BinnProductKernel, RbfKernel, gp_fit_predict
from .problems import HeatSpec, heat_solve, poisson_dataset, synthetic_1d

log = logging.getLogger("binn")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(obj), encoding="utf-8")


def _manifest_path(out) -> Path:
    out = Path(out)
    if out.suffix == "" or out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


class Run:
    """Collects the manifest of one command invocation."""

    def __init__(self, args, command):
        self.t0 = time.perf_counter()
        self.master_seed = args.seed if args.seed is not None else 0
        self.doc = {
            "command": command,
            "argv": sys.argv[1:],
            "library_version": __version__,
            "seeds": {"master": self.master_seed},
            "inputs": {},
            "outputs": [],
            "timings": {},
        }

    def seed(self, purpose):
        s = derive_seed(self.master_seed, purpose)
        self.doc["seeds"][purpose] = s
        return s

    def output(self, path):
        self.doc["outputs"].append(str(path))

    def finish(self, out):
        self.doc["timings"]["total_seconds"] = time.perf_counter() - self.t0
        path = _manifest_path(out)
        self.doc["outputs"].append(str(path))
        _write_json(path, self.doc)


def _load_config(args, run: Run | None = None, needs_seed=True) -> ModelConfig:
    d = {}
    if getattr(args, "config", None):
        try:
            d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config JSON must be an object")
    cfg = ModelConfig.from_dict(d)
    if run is not None:
        if args.seed is None and "seed" in d:
            run.master_seed = int(d["seed"])
            run.doc["seeds"]["master"] = run.master_seed
        if needs_seed:
            cfg = cfg.replace(seed=run.seed("init"))
        run.doc["config"] = cfg.to_dict()
    return cfg


# -- gen ---------------------------------------------------------------------

def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def cmd_gen(args):
    run = Run(args, f"gen {args.problem}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.problem == "synthetic1d":
        data = synthetic_1d(args.n, seed=run.seed("data"), noise=not args.no_noise)
        run.doc["params"] = {"n": args.n, "noise": not args.no_noise}
    elif args.problem == "poisson":
        ps = _floats(args.p)
        if not ps:
            raise BinnError("--p needs at least one value")
        parts = poisson_dataset(args.grid, ps)
        data = Dataset.concat([parts[float(p)] for p in ps])
        run.doc["params"] = {"grid": args.grid, "p": ps}
    else:
        parts = []
        for k in _floats(args.k):
            for P in _floats(args.P):
                spec = HeatSpec(k, P, args.nx, args.ny, args.nt, args.substeps)
                parts.append(heat_solve(spec))
        data = Dataset.concat(parts)
        meta = HeatSpec(nx=args.nx, ny=args.ny, nt=args.nt, substeps=args.substeps).metadata()
        meta.update(conductivity=_floats(args.k), power=_floats(args.P))
        sidecar = out.with_name(out.name + ".meta.json")
        _write_json(sidecar, meta)
        run.output(sidecar)
        run.doc["params"] = meta
    save_csv(data, out)
    run.output(out)
    run.finish(out)
    log.info("wrote %d rows to %s", data.n, out)


# -- fit / predict / eval ------------------------------------------------------

def _target_columns(path, args):
    header, _ = read_table(path)
    k = getattr(args, "all_targets", None)
    if k:
        if not 1 <= k < len(header):
            raise DatasetError(f"--all-targets {k} leaves no input columns")
        return header[-k:], header[-k:]
    if args.target_column:
        return [args.target_column], []
    return [header[-1]], []


def cmd_fit(args):
    run = Run(args, "fit")
    cfg = _load_config(args, run)
    targets, others = _target_columns(args.train, args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    run.doc["inputs"]["train"] = str(args.train)
    for name in targets:
        data = load_csv(args.train, target_column=name, exclude=[o for o in others if o != name])
        model = binn.fit(cfg, data)
        path = out if len(targets) == 1 else out.with_name(f"{out.stem}.{name}{out.suffix or '.json'}")
        binn.save_model(model, path)
        run.output(path)
        run.doc["timings"][f"fit_seconds[{name}]"] = model.fit_seconds
        run.doc["timings"]["fit_seconds"] = model.fit_seconds
        run.doc.setdefault("train_rmse", {})[name] = model.train_rmse[-1]
        log.info("fit %s: %d rows, train rmse %.6g, %.3fs", name, data.n, model.train_rmse[-1], model.fit_seconds)
    run.finish(out)


def _inputs_for_model(model, header, mat, what):
    d = model.dim
    if mat.shape[1] == d:
        return mat
    if mat.shape[1] == d + 1 and model.target_name and header[-1] == model.target_name:
        return mat[:, :d]
    raise DatasetError(f"dimension mismatch: model has {d} inputs but {what} has {mat.shape[1]} columns")


def cmd_predict(args):
    run = Run(args, "predict")
    model = binn.load_model(args.model)
    header, mat = read_table(args.inputs)
    x = _inputs_for_model(model, header, mat, args.inputs)
    if x.shape[0]:
        mean, var = binn.predict(model, x)
    else:
        mean = var = np.zeros(0)
    names = list(header[: model.dim])
    out_mat = np.column_stack([x, mean, np.sqrt(var), np.sqrt(var + model.config.noise_variance)])
    write_table(args.out, names + ["mean", "std", "std_with_noise"], out_mat)
    run.doc["inputs"] = {"model": str(args.model), "inputs": str(args.inputs)}
    run.output(args.out)
    run.finish(args.out)


def _fit_seconds_of(model_path):
    p = _manifest_path(model_path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))["timings"].get("fit_seconds")
    except (OSError, ValueError, KeyError):
        return None


def cmd_eval(args):
    run = Run(args, "eval")
    model = binn.load_model(args.model)
    header, mat = read_table(args.test)
    if mat.shape[1] != model.dim + 1:
        raise DatasetError(
            f"dimension mismatch: model has {model.dim} inputs but {args.test} has "
            f"{mat.shape[1]} columns (expected {model.dim + 1} incl. target)"
        )
    if args.target_column:
        data = load_csv(args.test, target_column=args.target_column)
    else:
        data = Dataset(mat[:, :-1], mat[:, -1])
    if data.n == 0:
        raise DatasetError("test set is empty")
    mean, var = binn.predict(model, data.inputs)
    metrics = {
        "rmse": float(np.sqrt(np.mean((mean - data.targets) ** 2))),
        "mean_predictive_std": float(np.mean(np.sqrt(var))),
        "n": data.n,
        "fit_seconds": _fit_seconds_of(args.model),
    }
    run.doc["inputs"] = {"model": str(args.model), "test": str(args.test)}
    if args.out:
        _write_json(args.out, metrics)
        run.output(args.out)
        run.finish(args.out)
    if not (args.quiet and args.out):
        sys.stdout.write(_dump(metrics))


# -- compare-gp ----------------------------------------------------------------

def compare_gp(cfg, train: Dataset, test: Dataset, kernel="binn", signal_variance=1.0,
               rbf_length_scale=0.5, cap=GP_MAX_POINTS) -> dict:
    """Fit a B-INN and an exact GP on the same data and compare their predictions."""
    if test.n == 0:
        raise DatasetError("test set is empty")
    if train.n > cap:
        raise BinnError(f"GP cap exceeded: {train.n} training points > {cap}")
    t0 = time.perf_counter()
    model = binn.fit(cfg, train)
    t_binn = time.perf_counter() - t0
    mean_b, var_b = binn.predict(model, test.inputs)
    t0 = time.perf_counter()
    if kernel == "binn":
        k = BinnProductKernel(model.bases, cfg.prior_variance)
        gtrain = Dataset(model.scaler.transform(train.inputs), train.targets)
        mean_g, var_g = gp_fit_predict(k, gtrain, model.scaler.transform(test.inputs), cfg.noise_variance, jitter=cfg.jitter)
    elif kernel == "rbf":
        k = RbfKernel(signal_variance, rbf_length_scale)
        mean_g, var_g = gp_fit_predict(k, train, test.inputs, cfg.noise_variance, jitter=cfg.jitter)
    else:
        raise ConfigError(f"unknown kernel {kernel!r}")
    t_gp = time.perf_counter() - t0
    rmse_b = float(np.sqrt(np.mean((mean_b - test.targets) ** 2)))
    rmse_g = float(np.sqrt(np.mean((mean_g - test.targets) ** 2)))
    return {
        "kernel": kernel,
        "n_train": train.n,
        "n_test": test.n,
        "rmse_binn": rmse_b,
        "rmse_gp": rmse_g,
        "rmse_abs_diff": abs(rmse_b - rmse_g),
        "max_abs_mean_diff": float(np.max(np.abs(mean_b - mean_g))),
        "max_abs_std_diff": float(np.max(np.abs(np.sqrt(var_b) - np.sqrt(var_g)))),
        "_seconds": {"binn": t_binn, "gp": t_gp},
    }


def cmd_compare_gp(args):
    run = Run(args, "compare-gp")
    cfg = _load_config(args, run)
    train = load_csv(args.train, target_column=args.target_column)
    test = load_csv(args.test, target_column=args.target_column)
    if test.dim != train.dim:
        raise DatasetError("train and test CSVs have different input columns")
    res = compare_gp(cfg, train, test, args.kernel, args.signal_variance, args.rbf_length_scale, args.gp_cap)
    run.doc["timings"].update({f"{k}_seconds": v for k, v in res.pop("_seconds").items()})
    run.doc["inputs"] = {"train": str(args.train), "test": str(args.test)}
    _write_json(args.out, res)
    run.output(args.out)
    run.finish(args.out)
    if not args.quiet:
        sys.stdout.write(_dump(res))


# -- scale ----------------------------------------------------------------------

def scaling_rows(cfg, ns, test_n=200, seed=0, gp_cap=GP_MAX_POINTS, repeats=1,
                 signal_variance=1.0, rbf_length_scale=0.5):
    """Fit wall-clock and test RMSE per training size for the B-INN and, up to the cap, the GP."""
    test = synthetic_1d(test_n, seed=derive_seed(seed, "test"))
    rows = []
    for n in ns:
        train = synthetic_1d(n, seed=np.random.SeedSequence(derive_seed(seed, "data"), spawn_key=(n,)))
        best, model = np.inf, None
        for _ in range(repeats):
            t0 = time.perf_counter()
            model = binn.fit(cfg, train)
            best = min(best, time.perf_counter() - t0)
        rows.append(("binn", n, best, binn.rmse(model, test)))
        if n <= gp_cap:
            t0 = time.perf_counter()
            mean, _ = gp_fit_predict(RbfKernel(signal_variance, rbf_length_scale), train, test.inputs, cfg.noise_variance)
            rows.append(("gp", n, time.perf_counter() - t0, float(np.sqrt(np.mean((mean - test.targets) ** 2)))))
    return rows


def cmd_scale(args):
    run = Run(args, "scale")
    cfg = _load_config(args, run)
    ns = [int(v) for v in _floats(args.n)]
    if ns != sorted(ns):
        raise BinnError("--n values must be ascending")
    rows = scaling_rows(cfg, ns, args.test_n, run.master_seed, args.gp_cap, args.repeats,
                        args.signal_variance, args.rbf_length_scale)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        fh.write("model,n,seconds,rmse\n")
        for model_name, n, sec, err in rows:
            fh.write(f"{model_name},{n},{sec!r},{err!r}\n")
    run.output(out)
    run.finish(out)


# -- al ---------------------------------------------------------------------------

POISSON_AL_CONFIG = {
    "modes": 5,
    "basis_counts": [8, 8, 8, 6],
    "length_scales": [0.15, 0.15, 0.15, 1.0],
    "noise_variance": 1e-11,
}


def cmd_al(args):
    run = Run(args, f"al {args.problem}")
    if args.config:
        cfg = _load_config(args, run)
    elif args.problem == "poisson":
        d = dict(POISSON_AL_CONFIG)
        # more spatial bases than grid points leaves the block systems underdetermined
        d["basis_counts"] = [min(j, args.grid) for j in d["basis_counts"][:3]] + d["basis_counts"][3:]
        cfg = ModelConfig.from_dict(d)
        if args.seed is None:
            args.seed = 0
        cfg = cfg.replace(seed=run.seed("init"))
        run.doc["config"] = cfg.to_dict()
    else:
        cfg = ModelConfig(modes=4, basis_counts=(8, 8, 5, 4, 4), length_scales=(0.15, 0.15, 0.3, 1.0, 1.0),
                          noise_variance=1e-8)
        cfg = cfg.replace(seed=run.seed("init"))
        run.doc["config"] = cfg.to_dict()
    if args.problem == "poisson":
        problem = poisson_problem(args.grid, args.pool_size)
    else:
        problem = heat_problem(nx=args.grid, nt=args.nt)
    al = AlConfig(args.rounds, args.init_size, args.validation_size, seed=run.seed("al"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "rounds.jsonl"
    with log_path.open("w", encoding="utf-8") as fh:
        result = run_campaign(problem, cfg, al, log_file=fh, keep_models=False)
    run.output(log_path)
    model_path = out / "final_model.json"
    binn.save_model(result.models[-1], model_path)
    run.output(model_path)
    summary = campaign_summary(result.rmse_history, [r["fit_seconds"] for r in result.selections])
    _write_json(out / "summary.json", summary)
    run.output(out / "summary.json")
    run.doc["al"] = {"problem": args.problem, "rounds": args.rounds, "init_size": args.init_size,
                     "validation_size": args.validation_size, "grid": args.grid,
                     "pool_size": problem.pool.shape[0]}
    run.doc["timings"]["total_fit_seconds"] = summary["total_fit_seconds"]
    run.finish(out)
    if not args.quiet:
        sys.stdout.write(_dump(summary))


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (u64); split per purpose")
    common.add_argument("--config", help="model config JSON (ModelConfig fields)")
    common.add_argument("--out", help="output path")
    common.add_argument("--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="binn", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a benchmark CSV")
    g.add_argument("problem", choices=["synthetic1d", "poisson", "heat"])
    g.add_argument("--n", type=int, default=60)
    g.add_argument("--no-noise", action="store_true")
    g.add_argument("--grid", type=int, default=16)
    g.add_argument("--p", default="0.5", help="comma-separated Poisson parameters")
    g.add_argument("--k", default="1.0", help="comma-separated conductivities")
    g.add_argument("--P", default="100.0", help="comma-separated source powers")
    g.add_argument("--nx", type=int, default=51)
    g.add_argument("--ny", type=int, default=51)
    g.add_argument("--nt", type=int, default=13)
    g.add_argument("--substeps", type=int, default=4)
    g.set_defaults(func=cmd_gen, needs_out=True)

    f = sub.add_parser("fit", parents=[common], help="fit a B-INN to a CSV")
    f.add_argument("--train", required=True)
    f.add_argument("--target-column")
    f.add_argument("--all-targets", type=int, metavar="K", help="treat the last K columns as targets, fit each")
    f.set_defaults(func=cmd_fit, needs_out=True)

    pr = sub.add_parser("predict", parents=[common], help="predict mean and std")
    pr.add_argument("--model", required=True)
    pr.add_argument("--inputs", required=True)
    pr.set_defaults(func=cmd_predict, needs_out=True)

    e = sub.add_parser("eval", parents=[common], help="test-set metrics as JSON")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--target-column")
    e.set_defaults(func=cmd_eval, needs_out=False)

    c = sub.add_parser("compare-gp", parents=[common], help="B-INN vs exact GP")
    c.add_argument("--train", required=True)
    c.add_argument("--test", required=True)
    c.add_argument("--target-column")
    c.add_argument("--kernel", choices=["binn", "rbf"], default="binn")
    c.add_argument("--signal-variance", type=float, default=1.0)
    c.add_argument("--rbf-length-scale", type=float, default=0.5, help="in raw input units")
    c.add_argument("--gp-cap", type=int, default=GP_MAX_POINTS)
    c.set_defaults(func=cmd_compare_gp, needs_out=True)

    s = sub.add_parser("scale", parents=[common], help="fit time vs training size")
    s.add_argument("--problem", choices=["synthetic1d"], default="synthetic1d")
    s.add_argument("--n", required=True, help="comma-separated ascending training sizes")
    s.add_argument("--test-n", type=int, default=200)
    s.add_argument("--gp-cap", type=int, default=GP_MAX_POINTS)
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--signal-variance", type=float, default=1.0)
    s.add_argument("--rbf-length-scale", type=float, default=0.5)
    s.set_defaults(func=cmd_scale, needs_out=True)

    a = sub.add_parser("al", parents=[common], help="active-learning campaign")
    a.add_argument("--problem", choices=["poisson", "heat"], default="poisson")
    a.add_argument("--rounds", type=int, default=10)
    a.add_argument("--init-size", type=int, default=6)
    a.add_argument("--validation-size", type=int, default=2)
    a.add_argument("--pool-size", type=int, default=40)
    a.add_argument("--grid", type=int, default=8)
    a.add_argument("--nt", type=int, default=5, help="heat problem: saved time steps")
    a.set_defaults(func=cmd_al, needs_out=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.needs_out and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        args.func(args)
    except (BinnError, OSError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
