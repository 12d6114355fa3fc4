"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import data as data_mod
from .curves import make_curve_bundle
from .evaluation import c_index, describe_error
from .experiments import run_bmt, run_ringnorm, write_outputs
from .forest import ForestConfig, fit
from .kernels import KernelFeatureMap, KernelSpec, kernelize_dataset
from ._io import atomic_write
from .model import FittedModel, load_model, save_model
from .sim import SimConfig, make_ringnorm_survival
from .tree import TreeConfig

logger = logging.getLogger("kirsf")


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _add_forest_args(p, ntree_default):
    g = p.add_argument_group("forest")
    g.add_argument("--ntree", type=_positive_int, default=ntree_default, help="number of trees (default %(default)s)")
    g.add_argument("--mtry", type=_positive_int, default=None, help="features tried per split (default ceil(sqrt(p)))")
    g.add_argument("--min-node-events", type=_positive_int, default=3)
    g.add_argument("--min-node-size", type=_positive_int, default=3)
    g.add_argument("--max-depth", type=int, default=None)
    g.add_argument("--split-rule", choices=("logrank", "deviance"), default="logrank")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--n-jobs", type=int, default=1, help="parallel workers; results do not depend on it")


def _add_kernel_args(p, default):
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", choices=("none", "linear", "polynomial", "gaussian"), default=default)
    g.add_argument("--degree", type=_positive_int, default=2, help="polynomial degree")
    g.add_argument("--offset-c", type=float, default=1.0, help="polynomial offset c")
    g.add_argument("--sigma2", type=float, default=None, help="gaussian sigma^2 (default: standardized dimension)")
    g.add_argument("--no-standardize", action="store_true", help="skip per-feature standardization before the kernel")


def _add_schema_args(p, required=True):
    p.add_argument("--input", required=required, help="CSV file with a header row")
    p.add_argument("--time", required=required, help="time column")
    p.add_argument("--event", required=required, help="event indicator column (1 = event, 0 = censored)")
    p.add_argument("--features", default="", help="comma-separated feature columns (default: all other numeric columns)")
    p.add_argument("--ignore", default="", help="comma-separated columns to ignore, e.g. IDs")


def _split_names(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _forest_config(args) -> ForestConfig:
    tree = TreeConfig(
        mtry=args.mtry,
        min_node_events=args.min_node_events,
        min_node_size=args.min_node_size,
        split_rule=args.split_rule,
        max_depth=args.max_depth,
    )
    return ForestConfig(n_trees=args.ntree, tree=tree, seed=args.seed)


def _kernel_spec(args) -> KernelSpec | None:
    if args.kernel == "none":
        return None
    return KernelSpec(args.kernel, c=args.offset_c, degree=args.degree, sigma2=args.sigma2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kirsf", description="Kernel-induced random survival forests")
    parser.add_argument("--version", action="version", version=f"kirsf {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a ringnorm survival dataset")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--d", type=_positive_int, default=20)
    p.add_argument("--lambda1", type=float, default=0.1, help="rate for class 1 (centred, wide)")
    p.add_argument("--lambda2", type=float, default=0.5, help="rate for class 2")
    p.add_argument("--censor-low", type=float, default=5.0)
    p.add_argument("--censor-high", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV; metadata goes to <out>.meta.json")

    p = sub.add_parser("fit", help="fit a forest on a CSV file")
    _add_schema_args(p)
    _add_forest_args(p, 1000)
    _add_kernel_args(p, "none")
    p.add_argument("--model", default="model.kirsf", help="output model file")
    p.add_argument("--report", default=None, help="fit report JSON (default <model>.report.json)")

    p = sub.add_parser("predict", help="ensemble mortality (and optionally CHF curves) for new rows")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default="-", help="predictions CSV (default stdout)")
    p.add_argument("--curves", default=None, help="long CSV of per-row CHF and survival (row_id, t, H, S)")

    p = sub.add_parser("curves", help="per-subject, ensemble and Nelson-Aalen survival curves")
    p.add_argument("--model", required=True)
    _add_schema_args(p, required=False)
    p.add_argument("--metadata", default=None, help="simulation sidecar JSON (for true curves)")
    p.add_argument("--true-curves", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment-ringnorm", help="RSF vs Gaussian KIRSF on simulated ringnorm data")
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--d", type=_positive_int, default=20)
    p.add_argument("--n-train", type=_positive_int, default=100)
    p.add_argument("--lambda1", type=float, default=0.1)
    p.add_argument("--lambda2", type=float, default=0.5)
    p.add_argument("--censor-low", type=float, default=5.0)
    p.add_argument("--censor-high", type=float, default=10.0)
    _add_forest_args(p, 1000)
    _add_kernel_args(p, "gaussian")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--curves", action="store_true", help="write curve CSVs for the last realization")

    p = sub.add_parser("experiment-bmt", help="RSF vs linear KIRSF on the bone marrow transplant data")
    p.add_argument("--input", default=None, help="BMT CSV (default: bundled copy)")
    p.add_argument("--endpoint", default="primary", help=f"one of {', '.join(data_mod.BMT_ENDPOINTS)}")
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--train-fraction", type=float, default=0.9)
    _add_forest_args(p, 1000)
    _add_kernel_args(p, "linear")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--curves", action="store_true", help="write curve CSVs for the last realization")
    return parser


def _command_line(argv):
    return "kirsf " + " ".join(shlex.quote(a) for a in argv)


def cmd_simulate(args, argv):
    cfg = SimConfig(args.n, args.d, args.lambda1, args.lambda2, args.censor_low, args.censor_high, args.seed)
    sim = make_ringnorm_survival(cfg)
    out = Path(args.out)
    meta = sim.metadata()
    comments = [f"kirsf {__version__}", f"command: {_command_line(argv)}", "config: " + json.dumps(cfg.to_dict())]
    data_mod.write_csv(sim.dataset, out, comment_lines=comments)
    atomic_write(out.with_name(out.name + ".meta.json"), json.dumps({"kirsf": __version__, **meta}) + "\n")
    print(f"wrote {len(sim.dataset)} records ({sim.dataset.n_events} events) to {out}")


def _load_input(args):
    schema = data_mod.ColumnSchema(args.time, args.event, _split_names(args.features), _split_names(args.ignore))
    return data_mod.load_csv(args.input, schema)


def cmd_fit(args, argv):
    data = _load_input(args)
    cfg = _forest_config(args)
    spec = _kernel_spec(args)
    km = None
    train = data
    if spec is not None:
        km = KernelFeatureMap.fit(data.X, spec, standardize=not args.no_standardize, feature_names=data.feature_names)
        train = kernelize_dataset(data, km)
    forest = fit(train, cfg, n_jobs=args.n_jobs)
    model = FittedModel(forest, data.feature_names, km, args.time, args.event)
    save_model(model, args.model)

    oob = forest.oob_predicted_outcomes()
    ok = np.isfinite(oob)
    oob_error = c_index(data.times[ok], data.events[ok], oob[ok]).prediction_error
    report = {
        "kirsf": __version__,
        "command": _command_line(argv),
        "input": str(args.input),
        "n": len(data),
        "features": list(data.feature_names),
        "forest": cfg.to_dict(),
        "kernel": km.spec.to_dict() if km else None,
        "n_kernel_anchors": km.basis.n_anchors if km else 0,
        "oob_prediction_error": oob_error,
        "oob_records_scored": int(ok.sum()),
        "oob_outcome": "sum of OOB ensemble CHF over training event times",
        "training_mortality": forest.mortality(train.X).tolist(),
    }
    report_path = args.report or f"{args.model}.report.json"
    atomic_write(report_path, json.dumps(report, indent=1) + "\n")
    print(f"model written to {args.model}")
    print(f"OOB prediction error: {describe_error(oob_error)}")


def cmd_predict(args, argv):
    model = load_model(args.model)
    X = data_mod.load_covariates(args.input, model.input_feature_names)
    H = model.chf_matrix(X)
    mort = H @ model.forest._mortality_weights
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_id", "mortality"])
    for i, m in enumerate(mort):
        w.writerow([i, repr(float(m))])
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        atomic_write(args.out, buf.getvalue())
    if args.curves:
        grid = model.forest.event_time_grid
        cb = io.StringIO()
        w = csv.writer(cb, lineterminator="\n")
        w.writerow(["row_id", "t", "H", "S"])
        for i, row in enumerate(H):
            for t, h in zip(grid, row):
                w.writerow([i, repr(float(t)), repr(float(h)), repr(float(np.exp(-h)))])
        atomic_write(args.curves, cb.getvalue())


def cmd_curves(args, argv):
    model = load_model(args.model)
    forest = model.forest
    if args.input:
        if not (args.time and args.event):
            raise UsageError("--time and --event are required with --input")
        data = _load_input(args)
        X = model.features(data.X)
        times, events = data.times, data.events
    else:
        X, times, events = forest.training_X, forest.training_times, forest.training_events
    rates = None
    if args.true_curves:
        if not args.metadata:
            raise ValueError("--true-curves needs --metadata with the simulation sidecar")
        meta = json.loads(Path(args.metadata).read_text())
        if "class_rates" not in meta:
            raise ValueError(f"{args.metadata}: no simulation class rates in metadata")
        rates = {int(k): float(v) for k, v in meta["class_rates"].items()}
    bundle = make_curve_bundle(forest, X, times, events, rates)
    atomic_write(args.out, bundle.to_csv([f"kirsf {__version__}", f"command: {_command_line(argv)}"]))
    print(f"wrote curves for {bundle.subject.shape[0]} subjects to {args.out}")


def _report_experiment(result, out_dir, argv, started, n_jobs):
    run_info = {"n_jobs": n_jobs, "elapsed_seconds": round(time.time() - started, 2)}
    write_outputs(result, out_dir, _command_line(argv), run_info)
    for s in result.summaries.values():
        print(f"{s.method}\tmean error {100 * s.mean_error:.2f}%\tsd {100 * s.sample_sd:.2f}%\t(n={len(s.per_realization_errors)})")
    t = result.ttest
    print(f"pooled t-test (RSF vs KIRSF): t={t.t:.3f} df={t.df} p={t.p_value:.3g}")
    if result.failures:
        print(f"{len(result.failures)} realization(s) aborted; see {out_dir}/run.json")


def cmd_experiment_ringnorm(args, argv):
    spec = _kernel_spec(args)
    if spec is None:
        raise UsageError("experiment-ringnorm needs a kernel (--kernel none is not allowed)")
    sim = SimConfig(args.n, args.d, args.lambda1, args.lambda2, args.censor_low, args.censor_high)
    started = time.time()
    result = run_ringnorm(
        args.realizations, _forest_config(args), spec, sim, args.n_train, args.seed,
        not args.no_standardize, args.n_jobs, args.curves,
    )
    _report_experiment(result, args.out_dir, argv, started, args.n_jobs)


def cmd_experiment_bmt(args, argv):
    spec = _kernel_spec(args)
    if spec is None:
        raise UsageError("experiment-bmt needs a kernel (--kernel none is not allowed)")
    path = args.input or data_mod.bundled_bmt_path()
    data = data_mod.load_bmt(path, args.endpoint)
    started = time.time()
    result = run_bmt(
        data, args.realizations, _forest_config(args), spec, args.train_fraction, args.seed,
        not args.no_standardize, args.n_jobs, args.curves, source=f"{Path(path).name}:{args.endpoint}",
    )
    _report_experiment(result, args.out_dir, argv, started, args.n_jobs)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "curves": cmd_curves,
    "experiment-ringnorm": cmd_experiment_ringnorm,
    "experiment-bmt": cmd_experiment_bmt,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"kirsf: usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        logger.debug("failure", exc_info=True)
        print(f"kirsf: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
