"""Command line front end.

Exit codes: 0 success, 2 invalid input/config/missing file, 3 numerical
failure.
"""

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np

from . import io as tsio
from .covariance import oas_shrinkage, sample_covariance
from .dataset import CovarianceDataset
from .errors import ContractError, NumericalError
from .evaluation import MethodConfig, cross_validate, make_splits
from .linmodel import regularization_grid, sigmoid
from .patterns import estimate_num_sources, pipeline_patterns
from .pipelines import METHODS, decision_scores, fit_pipeline, pipeline_predict
from .simulation import (
    DEFAULT_GRIDS,
    DEFAULT_METHODS,
    SWEEP_COLUMNS,
    SimulationParams,
    gen_dataset,
    run_sweep,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ContractError):
    pass


_SIM_DEFAULTS = {
    "n_channels": 5, "n_sources": 1, "n_obs": 1000, "weights": [1.0],
    "bias": 0.0, "target_noise": 0.0, "pattern_noise": 0.0,
    "log_power_std": 1.0, "mixing": "random", "mixing_scale": 1.0,
    "mode": "covariance", "n_times": 200, "seed": 0,
}
_GRID_DEFAULTS = {"low": 1e-5, "high": 1e3, "n": 25}

DEFAULTS = {
    "simulate": dict(_SIM_DEFAULTS),
    "ingest": {"center": False, "shrinkage": "oas", "target_kind": "continuous"},
    "fit": {"method": "riemann", "components": None, "head": None,
            "grid": dict(_GRID_DEFAULTS), "seed": 0},
    "cv": {"method": "riemann", "components": None, "head": None,
           "grid": dict(_GRID_DEFAULTS), "scheme": "kfold", "folds": 10,
           "seed": 0},
    "patterns": {"shuffles": 0, "percentile": 95.0, "seed": 0},
    "sweep": {"axis": "target_noise",
              "grid": list(DEFAULT_GRIDS["target_noise"]),
              "methods": list(DEFAULT_METHODS), "folds": 10,
              "seeds": list(range(10)), "components": {},
              "simulation": dict(_SIM_DEFAULTS)},
}


def _merge(defaults, given, where):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(defaults[key], dict) and key != "components":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where}{key!r} must be a mapping")
            out[key] = _merge(defaults[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def load_config(command, path=None):
    """Defaults for ``command`` updated from a JSON file (unknown keys fail)."""
    config = copy.deepcopy(DEFAULTS[command])
    if path is None:
        return config
    try:
        with open(path, encoding="utf-8") as fh:
            given = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(given, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return _merge(config, given, "")


def _sim_params(cfg):
    cfg = dict(cfg)
    cfg["weights"] = tuple(cfg["weights"])
    try:
        return SimulationParams(**cfg)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _grid(cfg):
    g = cfg["grid"]
    return regularization_grid(int(g["n"]), float(g["low"]), float(g["high"]))


def _override(cfg, args, *names):
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    return cfg


# --- commands ---------------------------------------------------------------

def cmd_config(args):
    sys.stdout.write(json.dumps(DEFAULTS[args.command_name], indent=2,
                                sort_keys=True) + "\n")


def cmd_simulate(args):
    cfg = _override(load_config("simulate", args.config), args, "seed")
    ds = gen_dataset(_sim_params(cfg))
    tsio.save_dataset(ds, args.out)


def _read_targets(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["index", "target"] or header[2:] not in ([], ["group"]):
        raise ContractError(f"{path}: header must be index,target[,group]")
    body.sort(key=lambda r: int(r[0]))
    groups = tsio._parse_labels([r[2] for r in body]) if len(header) == 3 else None
    return [r[1] for r in body], groups


def cmd_ingest(args):
    cfg = load_config("ingest", args.config)
    if args.center:
        cfg["center"] = True
    windows = np.load(args.windows)
    if windows.ndim == 3:
        windows = windows[:, None]
    if windows.ndim != 4:
        raise ContractError("windows must be (N, [B,] P, T)")
    if cfg["center"]:
        windows = windows - windows.mean(axis=-1, keepdims=True)
    covs = sample_covariance(windows)
    if cfg["shrinkage"] == "oas":
        n_times = windows.shape[-1]
        covs = np.array([[oas_shrinkage(c, n_times) for c in obs] for obs in covs])
    elif cfg["shrinkage"] != "none":
        raise ConfigError("shrinkage must be 'oas' or 'none'")
    tokens, groups = _read_targets(args.targets)
    if cfg["target_kind"] == "continuous":
        targets = np.array([float(t) for t in tokens])
    else:
        targets = tsio._parse_labels(tokens)
    ds = CovarianceDataset(covs=covs, targets=targets,
                           target_kind=cfg["target_kind"], groups=groups)
    tsio.save_dataset(ds, args.out)


def _fit_cfg(command, args):
    cfg = _override(load_config(command, args.config), args, "seed", "method",
                    "components")
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    return cfg


def cmd_fit(args):
    cfg = _fit_cfg("fit", args)
    ds = tsio.load_dataset(args.data)
    pipeline = fit_pipeline(ds, cfg["method"], n_components=cfg["components"],
                            head_kind=cfg["head"], grid=_grid(cfg),
                            seed=cfg["seed"])
    tsio.save_model(pipeline, args.out)


def prediction_rows(pipeline, ds):
    pred = pipeline_predict(pipeline, ds)
    if pipeline.head.kind == "logistic":
        scores = decision_scores(pipeline, ds)
        prob = sigmoid(scores)
        header = ["index", "prediction", "probability"]
        rows = [[str(i), tsio._label_text(pred[i]), float(prob[i])]
                for i in range(ds.n_obs)]
    else:
        header = ["index", "prediction"]
        rows = [[str(i), float(pred[i])] for i in range(ds.n_obs)]
    return header, rows


def cmd_predict(args):
    pipeline = tsio.load_model(args.model)
    ds = tsio.load_dataset(args.data)
    header, rows = prediction_rows(pipeline, ds)
    tsio.write_csv(args.out, header, rows)


def cmd_patterns(args):
    cfg = _override(load_config("patterns", args.config), args, "seed")
    if args.shuffles is not None:
        cfg["shuffles"] = args.shuffles
    pipeline = tsio.load_model(args.model)
    if pipeline.method not in ("riemann", "spoc", "csp"):
        raise ContractError(f"{pipeline.method} models have no patterns")
    ds = tsio.load_dataset(args.data)
    pset = pipeline_patterns(pipeline, ds)
    k = pset[0].n_components
    pat_rows, eig_rows = [], []
    for b, band in enumerate(pset):
        for ch in range(band.patterns.shape[0]):
            pat_rows.append([str(b), str(ch)] + [float(v) for v in band.patterns[ch]])
        if band.log_eigenvalues is not None:
            with np.errstate(over="ignore"):
                crit = np.exp(np.abs(band.log_eigenvalues))
        else:
            crit = np.abs(band.eigenvalues)
        for r in range(band.n_components):
            eig_rows.append([str(b), str(r), str(int(band.order[r])),
                             float(band.eigenvalues[r]), float(crit[r])])
    os.makedirs(args.out, exist_ok=True)
    tsio.write_csv(os.path.join(args.out, "patterns.csv"),
                   ["band", "channel"] + [f"pattern_{j}" for j in range(k)],
                   pat_rows)
    tsio.write_csv(os.path.join(args.out, "eigenvalues.csv"),
                   ["band", "rank", "source", "eigenvalue", "criterion"], eig_rows)
    if cfg["shuffles"]:
        res = estimate_num_sources(pipeline, ds, n_shuffles=int(cfg["shuffles"]),
                                   percentile=float(cfg["percentile"]),
                                   seed=int(cfg["seed"]))
        tsio.write_csv(os.path.join(args.out, "significance.csv"),
                       ["band", "q_hat", "threshold"],
                       [[str(b), str(q), float(t)]
                        for b, (q, t) in enumerate(zip(res.q_hat, res.thresholds))])


def cmd_cv(args):
    cfg = _fit_cfg("cv", args)
    ds = tsio.load_dataset(args.data)
    if cfg["scheme"] == "group":
        plan = make_splits(ds.n_obs, "group", groups=ds.groups)
    else:
        plan = make_splits(ds.n_obs, "kfold", k=int(cfg["folds"]), seed=cfg["seed"])
    config = MethodConfig(method=cfg["method"], n_components=cfg["components"],
                          head_kind=cfg["head"], grid=_grid(cfg), seed=cfg["seed"])
    res = cross_validate(ds, config, plan, keep_models=False)
    keys = [k for k in res.rows[0] if k != "fold"]
    os.makedirs(args.out, exist_ok=True)
    tsio.write_csv(os.path.join(args.out, "folds.csv"), ["fold"] + keys,
                   [[str(r["fold"])] + [r[k] if isinstance(r[k], float) else str(r[k])
                                        for k in keys] for r in res.rows])
    tsio.write_csv(os.path.join(args.out, "predictions.csv"),
                   ["index", "fold", "prediction"],
                   [[str(i), str(int(plan.folds[i])), tsio._label_text(res.predictions[i])]
                    for i in range(ds.n_obs)])


def cmd_sweep(args):
    cfg = _override(load_config("sweep", args.config), args)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    if args.method is not None:
        cfg["methods"] = [args.method]
    base = _sim_params(cfg["simulation"])
    comps = dict(cfg["components"])
    if args.components is not None:
        comps = {m: args.components for m in cfg["methods"]}
    rows = run_sweep(cfg["axis"], grid=cfg["grid"], methods=cfg["methods"],
                     n_folds=int(cfg["folds"]), seeds=cfg["seeds"], base=base,
                     n_components=comps, n_jobs=args.threads or 1)
    out = [[r["method"], r["axis"], float(r["value"]), str(r["seed"]),
            str(r["fold"]), float(r["normalized_mae"]),
            float(r["pattern_distance"]), r["status"]] for r in rows]
    tsio.write_csv(args.out, list(SWEEP_COLUMNS), out)


# --- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="tspatterns",
        description="Tangent space decoding and pattern extraction on "
                    "covariance datasets.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help, method=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help=out_help)
        if method:
            p.add_argument("--method", choices=METHODS)
            p.add_argument("--components", type=int)
        p.add_argument("--threads", type=int, help="worker threads")

    p = sub.add_parser("config", help="print default configs")
    csub = p.add_subparsers(dest="action", required=True)
    d = csub.add_parser("dump", help="print the defaults of a command")
    d.add_argument("command_name", choices=sorted(DEFAULTS))
    d.set_defaults(func=cmd_config)

    p = sub.add_parser("simulate", help="write a simulated dataset")
    common(p, "dataset directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="covariances from raw windows (.npy)")
    common(p, "dataset directory")
    p.add_argument("--windows", required=True, help=".npy array (N, [B,] P, T)")
    p.add_argument("--targets", required=True, help="CSV index,target[,group]")
    p.add_argument("--center", action="store_true", help="remove window means")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit a pipeline")
    common(p, "model directory", method=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a fitted pipeline")
    common(p, "predictions CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("patterns", help="export patterns and eigenvalues")
    common(p, "output directory")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="training dataset")
    p.add_argument("--shuffles", type=int, help="permutations for q_hat")
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("cv", help="cross-validate a pipeline")
    common(p, "output directory", method=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="noise sweep on simulated data")
    common(p, "sweep CSV", method=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    # LinAlgError derives from ValueError, so numerical failures go first
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ContractError, FileNotFoundError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
