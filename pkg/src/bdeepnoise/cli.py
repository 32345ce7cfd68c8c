"""Command-line interface: generate, train, predict, evaluate and check.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

Checkpoint layout (one JSON document, floats written with ``repr`` so they
round-trip exactly)::

    {"format": "bdeepnoise-checkpoint", "version": 1,
     "shape": {...}, "prior": {...}, "config": {...},
     "standardization": {...} | null, "sweeps_done": int,
     "log_joint": [float, ...],
     "draws": {"count": M,
               "layers": [{"weights": M x K_l x K_{l-1}, "biases": M x K_l,
                           "preact_var": M x K_l, "postact_var": M x K_l | null,
                           "weight_var": M x K_l x K_{l-1}, "bias_var": M x K_l},
                          ...]}}

The sampler state needed to resume a chain sits next to it in
``<checkpoint>.state.npz``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import metrics, oracle
from .activation import builtin
from .distributions import RngStream
from .gibbs import GibbsConfig, SamplerState, fit
from .model import (LatentState, LayerParams, ModelParams, NetworkShape, PosteriorChain,
                    PredictiveEnsemble, PriorConfig, predict)

log = logging.getLogger("bdeepnoise")

FORMAT = "bdeepnoise-checkpoint"
VERSION = 1
_LAYER_FIELDS = ("weights", "biases", "preact_var", "postact_var", "weight_var", "bias_var")


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 2."""


# -- run configuration -------------------------------------------------------

DEFAULTS = {
    "hidden": [50, 50, 50, 50],
    "activation": "hard_tanh",
    "prior_a": 1e-3,
    "prior_b": 1e-3,
    "sweeps": 1000,
    "burn_in": 500,
    "thin": 1,
    "init": "pretrain",
    "pretrain_steps": 2000,
    "pretrain_lr": 1e-3,
    "seed": 0,
    "target": ["-1"],
    "standardize": True,
    "train_fraction": None,
    "replicate": 0,
}


@dataclass
class RunConfig:
    shape: NetworkShape
    prior: PriorConfig
    gibbs: GibbsConfig
    data: Path
    target: list[str]
    out: Path
    standardize: bool
    split: data_mod.SplitSpec | None
    raw: dict


def _parse_hidden(value) -> list[int]:
    if isinstance(value, str):
        value = [v for v in value.replace("x", ",").split(",") if v.strip()]
    try:
        hidden = [int(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid hidden layer spec {value!r}") from exc
    if any(k < 1 for k in hidden):
        raise UsageError("hidden widths must be positive")
    return hidden


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with Path(path).open() as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(cfg) - set(DEFAULTS) - {"data", "out"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def resolve_run_config(args) -> RunConfig:
    """Merge flags over the config file over the defaults, then validate."""
    merged = dict(DEFAULTS)
    merged.update(_load_config_file(getattr(args, "config", None)))
    for key in (*DEFAULTS, "data", "out"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if merged.get("data") is None or merged.get("out") is None:
        raise UsageError("both a data CSV and an output directory are required")
    merged["hidden"] = _parse_hidden(merged["hidden"])
    if isinstance(merged["target"], (str, int)):
        merged["target"] = [merged["target"]]
    merged["target"] = [str(t) for t in merged["target"]]
    try:
        act = builtin(merged["activation"])
        prior = PriorConfig.uniform(float(merged["prior_a"]), float(merged["prior_b"]))
        gibbs = GibbsConfig(sweeps=int(merged["sweeps"]), burn_in=int(merged["burn_in"]),
                            thin=int(merged["thin"]), init=merged["init"],
                            pretrain_steps=int(merged["pretrain_steps"]),
                            pretrain_lr=float(merged["pretrain_lr"]), seed=int(merged["seed"]))
        split = None
        if merged["train_fraction"] is not None:
            split = data_mod.SplitSpec(float(merged["train_fraction"]), int(merged["seed"]),
                                       int(merged["replicate"]))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if getattr(args, "resume", None) is None and gibbs.burn_in >= gibbs.sweeps:
        raise UsageError("burn-in must be shorter than the number of sweeps")
    # input/output widths are filled in once the data are read
    shape = NetworkShape(1, 1, tuple(merged["hidden"]), act)
    merged["data"], merged["out"] = str(merged["data"]), str(merged["out"])
    return RunConfig(shape, prior, gibbs, Path(merged["data"]), merged["target"],
                     Path(merged["out"]), bool(merged["standardize"]), split, merged)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(chain: PosteriorChain, path) -> None:
    layers = []
    for l in range(chain.shape.n_hidden + 1):
        entry = {}
        for name in _LAYER_FIELDS:
            vals = [getattr(d.layers[l], name) for d in chain.draws]
            entry[name] = None if vals and vals[0] is None else np.asarray(vals).tolist()
        layers.append(entry)
    std = chain.standardization
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "shape": chain.shape.to_dict(),
        "prior": chain.prior.to_dict(),
        "config": chain.config,
        "standardization": None if std is None else std.to_dict(),
        "sweeps_done": chain.sweeps_done,
        "log_joint": [float(v) for v in chain.log_joint],
        "draws": {"count": len(chain.draws), "layers": layers},
    }
    with Path(path).open("w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> PosteriorChain:
    try:
        with Path(path).open() as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a checkpoint file")
    shape = NetworkShape.from_dict(doc["shape"])
    prior = PriorConfig(**doc["prior"])
    M = int(doc["draws"]["count"])
    per_layer = []
    for l, entry in enumerate(doc["draws"]["layers"]):
        k_out, k_in = shape.layer_dims(l)
        arrays = {}
        for name in _LAYER_FIELDS:
            if entry[name] is None:
                arrays[name] = None
                continue
            arr = np.asarray(entry[name], dtype=float)
            arrays[name] = arr.reshape((M, k_out, k_in) if name in ("weights", "weight_var")
                                       else (M, k_out))
        per_layer.append(arrays)
    draws = []
    for m in range(M):
        layers = [LayerParams(**{k: (None if a is None else a[m].copy()) for k, a in arrays.items()})
                  for arrays in per_layer]
        draws.append(ModelParams(shape, layers))
    std = doc.get("standardization")
    return PosteriorChain(shape, prior, draws, log_joint=list(doc["log_joint"]),
                          sweeps_done=int(doc["sweeps_done"]), config=doc.get("config", {}),
                          standardization=None if std is None else data_mod.Standardization.from_dict(std))


def _state_path(ckpt) -> Path:
    return Path(str(ckpt) + ".state.npz")


def save_sampler_state(ss: SamplerState, path) -> None:
    arrays = {"sweeps_done": np.array(ss.sweeps_done)}
    for i, a in enumerate(ss.state.u):
        arrays[f"u{i}"] = a
    for i, a in enumerate(ss.state.v):
        arrays[f"v{i}"] = a
    for l, lp in enumerate(ss.params.layers):
        for name in _LAYER_FIELDS:
            val = getattr(lp, name)
            if val is not None:
                arrays[f"p{l}_{name}"] = val
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_sampler_state(path, shape: NetworkShape) -> SamplerState:
    with np.load(path) as z:
        L = shape.n_hidden
        u = [z[f"u{i}"] for i in range(L + 1)]
        v = [z[f"v{i}"] for i in range(L + 1)]
        layers = [LayerParams(**{name: (z[f"p{l}_{name}"] if f"p{l}_{name}" in z else None)
                                 for name in _LAYER_FIELDS}) for l in range(L + 1)]
        done = int(z["sweeps_done"])
    return SamplerState(LatentState(u, v), ModelParams(shape, layers), done)


# -- helpers -----------------------------------------------------------------

def _write_json(path, obj) -> None:
    with Path(path).open("w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_features(path, shape: NetworkShape, target) -> tuple[np.ndarray, np.ndarray | None]:
    """Features (and targets when present) from a CSV, checked against ``shape``."""
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ValueError(f"{path} is empty")
    P, Q = shape.input_dim, shape.output_dim
    if len(header) == P:
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2), None
    if len(header) == P + Q:
        ds = data_mod.load_csv(path, target_columns=target)
        return ds.X, ds.Y
    raise ValueError(f"{path} has {len(header)} columns; the checkpoint expects "
                     f"{P} features (plus {Q} targets)")


def _ensemble(chain: PosteriorChain, X, R: int, seed: int) -> PredictiveEnsemble:
    std = chain.standardization
    Xs = X if std is None else std.transform_x(X)
    ens = predict(chain, Xs, R, RngStream(seed, 7))
    return ens if std is None else ens.affine(std.y_mean, std.y_scale)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"invalid number list {text!r}") from exc


# -- commands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.kind not in data_mod.SYNTHETIC_KINDS:
        raise UsageError(f"unknown kind {args.kind!r}; choose from {data_mod.SYNTHETIC_KINDS}")
    if args.n < 1:
        raise UsageError("--n must be positive")
    ds = data_mod.gen_synthetic(args.kind, args.n, args.seed)
    out = Path(args.out)
    data_mod.save_csv(ds, out)
    manifest = Path(args.manifest) if args.manifest else out.with_suffix(".json")
    data_mod.write_manifest(manifest, kind=args.kind, n=args.n, seed=args.seed,
                            columns=ds.columns, target_columns=ds.target_columns)
    print(f"wrote {ds.n} rows to {out} and manifest {manifest}")
    return 0


def cmd_train(args) -> int:
    rc = resolve_run_config(args)
    ds = data_mod.load_csv(rc.data, target_columns=rc.target)
    out = rc.out
    out.mkdir(parents=True, exist_ok=True)
    if rc.split is not None:
        ds, test = data_mod.split(ds, rc.split)
        data_mod.save_csv(ds, out / "train.csv")
        data_mod.save_csv(test, out / "test.csv")
    shape = NetworkShape(ds.X.shape[1], ds.Y.shape[1], rc.shape.hidden, rc.shape.activation)
    ckpt = out / "checkpoint.json"
    resume = prev = None
    if args.resume is not None:
        prev = load_checkpoint(args.resume)
        if prev.shape.to_dict() != shape.to_dict():
            raise UsageError("resume checkpoint has a different network shape")
        resume = load_sampler_state(_state_path(args.resume), shape)
        std = prev.standardization
    else:
        std = data_mod.fit_standardization(ds) if rc.standardize else None
    X = ds.X if std is None else std.transform_x(ds.X)
    Y = ds.Y if std is None else std.transform_y(ds.Y)
    _write_json(out / "config.json", {**rc.raw, "input_dim": shape.input_dim,
                                      "output_dim": shape.output_dim})

    every = max(1, rc.gibbs.sweeps // 20)

    def progress(s, lj):
        if s % every == 0:
            log.info("sweep %d  log joint %.6g", s, lj)

    start = time.perf_counter()
    chain, ss = fit(X, Y, shape, rc.prior, rc.gibbs, resume=resume, progress=progress)
    wall = time.perf_counter() - start
    chain.standardization = std
    first = 1 if resume is None else resume.sweeps_done + 1
    log_path = out / "sweeps.csv"
    new_log = resume is None or not log_path.exists()
    with log_path.open("w" if new_log else "a", newline="") as fh:
        w = csv.writer(fh)
        if new_log:
            w.writerow(["sweep", "log_joint", "seconds_v", "seconds_u", "seconds_weights",
                        "seconds_variances"])
        for i, (lj, t) in enumerate(zip(chain.log_joint, chain.timings)):
            w.writerow([first + i, repr(lj), *(f"{t[k]:.6f}" for k in ("v", "u", "weights", "variances"))])
    if prev is not None:
        chain.draws = prev.draws + chain.draws
        chain.log_joint = prev.log_joint + chain.log_joint
    save_checkpoint(chain, ckpt)
    save_sampler_state(ss, _state_path(ckpt))
    print(f"retained {len(chain.draws)} draws after {chain.sweeps_done} sweeps "
          f"in {wall:.1f} s; checkpoint {ckpt}")
    return 0


def cmd_predict(args) -> int:
    if args.R < 1:
        raise UsageError("-R must be a positive integer")
    probs = sorted(set(_floats(args.quantiles)))
    if any(not 0 < p < 1 for p in probs):
        raise UsageError("quantile levels must lie in (0, 1)")
    chain = load_checkpoint(args.checkpoint)
    X, _ = _read_features(args.data, chain.shape, [str(t) for t in args.target])
    ens = _ensemble(chain, X, args.R, args.seed)
    Q = chain.shape.output_dim
    mean, sd = ens.mean(), ens.sd()
    # sorting guards monotonicity against interpolation round-off
    qs = np.sort(ens.quantiles(probs), axis=0)
    with Path(args.out).open("w", newline="") as fh:
        w = csv.writer(fh)
        head = []
        for q in range(Q):
            head += [f"mean_{q}", f"sd_{q}", *(f"q{p:g}_{q}" for p in probs)]
        w.writerow(head)
        for i in range(ens.n_points):
            row = []
            for q in range(Q):
                row += [repr(float(mean[i, q])), repr(float(sd[i, q])),
                        *(repr(float(qs[k, i, q])) for k in range(len(probs)))]
            w.writerow(row)
    if args.draws_out:
        with Path(args.draws_out).open("wb") as fh:
            np.savez(fh, draws=ens.draws, comp_mean=ens.comp_mean, comp_var=ens.comp_var)
    print(f"wrote predictions for {ens.n_points} points ({ens.n_components} draws each) to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = data_mod.read_manifest(args.manifest) if args.manifest else None
    kind = manifest.get("kind") if manifest else None
    if args.quantile_l1 and kind not in data_mod.SYNTHETIC_KINDS:
        raise UsageError("--quantile-l1 needs a synthetic manifest with ground truth")
    if (args.checkpoint is None) == (args.predictions is None):
        raise UsageError("give exactly one of --checkpoint or --predictions")
    chain = load_checkpoint(args.checkpoint) if args.checkpoint else None
    if chain is not None:
        X, Y = _read_features(args.data, chain.shape, [str(t) for t in args.target])
        ens = _ensemble(chain, X, args.R, args.seed)
    else:
        with np.load(args.predictions) as z:
            ens = PredictiveEnsemble(z["draws"], z["comp_mean"], z["comp_var"])
        Y = data_mod.load_csv(args.data, target_columns=[str(t) for t in args.target]).Y
    if Y is None:
        raise ValueError(f"{args.data} has no target column")
    report = metrics.evaluate(ens, Y)
    report.meta.update(dataset=str(args.data), split=args.split_label, method="b-deepnoise")
    if kind in data_mod.SYNTHETIC_KINDS and chain is not None:
        grid_ens = _ensemble(chain, metrics.X_GRID[:, None], args.R, args.seed)
        q = metrics.quantile_l1(grid_ens.draws,
                                lambda x, p: data_mod.synthetic_quantile(kind, x, p))
        report.quantile_l1 = q
        report.meta["quantile_l1_milli"] = 1000.0 * q
    elif args.quantile_l1:
        raise UsageError("quantile-L1 needs a checkpoint to predict on the input grid")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.append_csv(out / "report.csv")
    summary = {k: v for k, v in report.to_dict().items() if k != "coverage"}
    print(json.dumps(summary, indent=2))
    return 0


def run_checks(rounds: int, seed: int, fault: str | None = None, grid_configs: int = 50,
               quad_models: int = 20, quad_draws: int = 1_000_000) -> dict:
    """Run the oracle suites; ``rounds = 0`` produces an empty report."""
    if rounds <= 0:
        return {}
    from .gibbs import v_conditional_arrays
    from .model import forward_stochastic

    base = RngStream(seed, 99)
    report: dict = {"passed": True}
    gen = base.child(0).generator
    worst = 0.0
    for name in ("relu", "leaky_relu", "hard_tanh", "hard_sigmoid"):
        act = builtin(name)
        for _ in range(grid_configs):
            m, un = gen.normal(0, 2), gen.normal(0, 1.5)
            t2, s2 = np.exp(gen.uniform(np.log(0.05), np.log(4.0), 2))
            g = oracle.grid_conditional_v(act, m, t2, s2, un)
            lw, _, _ = v_conditional_arrays(act, m, un, t2, s2)
            worst = max(worst, float(np.max(np.abs(np.exp(lw) - g.masses))))
    report["grid"] = {"configs": 4 * grid_configs, "max_mass_error": worst,
                      "passed": worst < 1e-4}

    gen = base.child(1).generator
    ks_all = []
    for i in range(quad_models):
        act = builtin(("relu", "hard_tanh")[i % 2])
        params = oracle.sample_prior_params(NetworkShape(1, 1, (1, 1), act),
                                            PriorConfig.uniform(3.0, 2.0), gen)
        x = gen.uniform(-1, 1)
        y, _ = forward_stochastic(params, np.full((quad_draws, 1), x), gen)
        ks_all.append(ks_against_density(y[:, 0], lambda yy: oracle.predictive_density_numeric(params, x, yy)))
    worst_ks = max(ks_all, default=0.0)
    report["quadrature"] = {"models": quad_models, "max_ks": worst_ks,
                            "passed": worst_ks < max(0.01, 3.0 / math.sqrt(max(quad_draws, 1)))}

    report["geweke"] = {}
    for name in ("relu", "hard_tanh"):
        rep = oracle.geweke_compare(NetworkShape(1, 1, (2,), builtin(name)),
                                    PriorConfig.uniform(6.0, 5.0), rounds, base.child(2),
                                    fault=fault)
        report["geweke"][name] = rep.to_dict()
        if not rep.passed:
            report["geweke"][name]["failing"] = rep.failing()
    report["passed"] = (report["grid"]["passed"] and report["quadrature"]["passed"]
                        and all(g["passed"] for g in report["geweke"].values()))
    return report


def ks_against_density(samples, density, points: int = 20001) -> float:
    """Kolmogorov-Smirnov distance between a sample and a tabulated density."""
    y = np.sort(np.asarray(samples, float))
    span = y[-1] - y[0]
    grid = np.linspace(y[0] - 0.1 * span - 1e-9, y[-1] + 0.1 * span + 1e-9, points)
    d = density(grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(grid))])
    F = np.interp(y, grid, cdf)
    n = y.size
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))


def cmd_check(args) -> int:
    report = run_checks(args.rounds, args.seed, args.fault_inject, args.grid_configs,
                        args.quad_models, args.quad_draws)
    if args.out:
        oracle.write_report(report, args.out)
    print(json.dumps(report, indent=2, sort_keys=True))
    if report and not report["passed"]:
        for name, g in report.get("geweke", {}).items():
            for key, z in g.get("failing", {}).items():
                print(f"FAIL geweke[{name}] {key}: z = {z:.2f}", file=sys.stderr)
        return 1
    return 0


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdeepnoise", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset and its manifest")
    g.add_argument("--kind", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="CSV path")
    g.add_argument("--manifest", help="manifest path (default: CSV path with .json)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="run the Gibbs sampler and write a checkpoint")
    t.add_argument("--config", help="JSON file with run settings")
    t.add_argument("--data")
    t.add_argument("--out", help="output directory")
    t.add_argument("--target", nargs="+", help="target column names or indices")
    t.add_argument("--hidden", help="comma-separated hidden widths, e.g. 50,50,50,50")
    t.add_argument("--activation")
    t.add_argument("--prior-a", dest="prior_a", type=float)
    t.add_argument("--prior-b", dest="prior_b", type=float)
    t.add_argument("--sweeps", type=int)
    t.add_argument("--burnin", dest="burn_in", type=int)
    t.add_argument("--thin", type=int)
    t.add_argument("--init", choices=("pretrain", "random"))
    t.add_argument("--pretrain-steps", dest="pretrain_steps", type=int)
    t.add_argument("--pretrain-lr", dest="pretrain_lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--no-standardize", dest="standardize", action="store_const", const=False)
    t.add_argument("--train-fraction", dest="train_fraction", type=float,
                   help="hold out a random test split and write train.csv/test.csv")
    t.add_argument("--replicate", type=int)
    t.add_argument("--resume", help="checkpoint to continue")
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (("predict", cmd_predict, "predictive summaries for a CSV"),
                                 ("evaluate", cmd_evaluate, "RMSE, NLL, WEPI-95 and quantile-L1")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--data", required=True)
        c.add_argument("--target", nargs="+", default=["-1"])
        c.add_argument("-R", type=int, default=10, help="forward draws per retained draw")
        c.add_argument("--seed", type=int, default=0)
        c.set_defaults(func=func)
        if name == "predict":
            c.add_argument("--checkpoint", required=True)
            c.add_argument("--out", required=True, help="summary CSV path")
            c.add_argument("--quantiles", default="0.025,0.5,0.975",
                           help="comma-separated levels; columns come out in ascending order")
            c.add_argument("--draws-out", help="optional .npz with every draw")
        else:
            c.add_argument("--checkpoint")
            c.add_argument("--predictions", help=".npz written by predict --draws-out")
            c.add_argument("--out", required=True, help="output directory")
            c.add_argument("--manifest", help="synthetic manifest carrying the ground truth")
            c.add_argument("--quantile-l1", action="store_true")
            c.add_argument("--split-label", default="")

    k = sub.add_parser("check", help="run the oracle suites")
    k.add_argument("--rounds", type=int, default=10_000, help="Geweke rounds; 0 runs nothing")
    k.add_argument("--grid-configs", type=int, default=50)
    k.add_argument("--quad-models", type=int, default=20)
    k.add_argument("--quad-draws", type=int, default=1_000_000)
    k.add_argument("--fault-inject", choices=("tau-rate-half",))
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out", help="JSON report path")
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, FloatingPointError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
