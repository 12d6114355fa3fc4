"""Paired RSF vs KIRSF comparison experiments.

Within a realization both arms see the same train/test split and the same
forest seed; only the covariates differ (raw vs kernel-induced). Test error
is 1 - C with ensemble mortality on the held-out records as the predicted
outcome.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .curves import make_curve_bundle
from .data import SurvivalDataset, split_indices
from .evaluation import TTestResult, c_index, pooled_t_test
from .forest import ForestConfig, fit
from .kernels import KernelFeatureMap, KernelSpec, kernelize_dataset
from ._io import atomic_write
from .sim import SimConfig, make_ringnorm_survival

logger = logging.getLogger(__name__)

METHODS = ("RSF", "KIRSF")
TEST_OUTCOME = "ensemble mortality (sum of ensemble CHF over training times), full forest"
MIN_COMPLETED = 0.8


@dataclass(frozen=True)
class ExperimentSummary:
    method: str
    per_realization_errors: tuple
    mean_error: float
    sample_sd: float
    settings: dict = field(default_factory=dict)

    @classmethod
    def from_errors(cls, method, errors, settings=None):
        errors = tuple(float(e) for e in errors)
        arr = np.array(errors)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else math.nan
        return cls(method, errors, float(arr.mean()), sd, dict(settings or {}))


@dataclass(frozen=True)
class RealizationSeeds:
    data: int
    split: int
    forest: int


def realization_seeds(master_seed: int, r: int) -> RealizationSeeds:
    state = np.random.SeedSequence(master_seed % 2**64, spawn_key=(r,)).generate_state(3, dtype=np.uint64)
    # forest seeds kept below 2**63 so they survive signed 64-bit consumers
    return RealizationSeeds(int(state[0]), int(state[1]), int(state[2] >> np.uint64(1)))


@dataclass
class ExperimentResult:
    name: str
    summaries: dict
    ttest: TTestResult
    realizations: list
    failures: list
    settings: dict
    curves: dict = field(default_factory=dict)


def _paired_arms(train, test, forest_config, kernel_spec, standardize, want_curves, true_rates=None):
    errors, curves = {}, {}
    km = KernelFeatureMap.fit(train.X, kernel_spec, standardize=standardize, feature_names=train.feature_names)
    arms = {
        "RSF": (train, test.X),
        "KIRSF": (kernelize_dataset(train, km), km.transform(test.X)),
    }
    for method, (train_m, test_X) in arms.items():
        forest = fit(train_m, forest_config)
        errors[method] = c_index(test.times, test.events, forest.mortality(test_X)).prediction_error
        if want_curves:
            curves[method] = make_curve_bundle(forest, train_m.X, train_m.times, train_m.events, true_rates)
    return errors, curves, km.spec


def _ringnorm_realization(r, master_seed, sim_config, n_train, forest_config, kernel_spec, standardize, want_curves):
    seeds = realization_seeds(master_seed, r)
    sim = make_ringnorm_survival(replace(sim_config, seed=seeds.data))
    data = sim.dataset
    train_idx, test_idx = split_indices(data, n_train / len(data), np.random.default_rng(seeds.split))
    rates = {1: sim_config.lambda1, 2: sim_config.lambda2}
    errors, curves, spec = _paired_arms(
        data.subset(train_idx), data.subset(test_idx), replace(forest_config, seed=seeds.forest),
        kernel_spec, standardize, want_curves, rates,
    )
    return {"realization": r, "seeds": seeds, "errors": errors, "curves": curves, "kernel": spec.to_dict()}


def _bmt_realization(r, master_seed, data, train_fraction, forest_config, kernel_spec, standardize, want_curves):
    seeds = realization_seeds(master_seed, r)
    train_idx, test_idx = split_indices(data, train_fraction, np.random.default_rng(seeds.split))
    errors, curves, spec = _paired_arms(
        data.subset(train_idx), data.subset(test_idx), replace(forest_config, seed=seeds.forest),
        kernel_spec, standardize, want_curves,
    )
    return {"realization": r, "seeds": seeds, "errors": errors, "curves": curves, "kernel": spec.to_dict()}


def _guarded(fn, r, *args):
    try:
        return fn(r, *args)
    except Exception as exc:  # a failed realization is logged, not fatal
        return {"realization": r, "failed": f"{type(exc).__name__}: {exc}"}


def _run(name, fn, realizations, args, settings, n_jobs, want_curves):
    if realizations < 2:
        raise ValueError("need at least 2 realizations")
    last = realizations - 1
    jobs = [delayed(_guarded)(fn, r, *args, want_curves and r == last) for r in range(realizations)]
    if n_jobs == 1:
        outcomes = [j[0](*j[1], **j[2]) for j in jobs]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(jobs)
    done = [o for o in outcomes if "failed" not in o]
    failures = [o for o in outcomes if "failed" in o]
    for f in failures:
        logger.warning("realization %d aborted: %s", f["realization"], f["failed"])
    if len(done) < MIN_COMPLETED * realizations:
        raise RuntimeError(
            f"only {len(done)} of {realizations} realizations completed; "
            + "; ".join(f"#{f['realization']}: {f['failed']}" for f in failures[:5])
        )
    if done:
        settings = {**settings, "kernel": done[0]["kernel"]}
    summaries = {
        m: ExperimentSummary.from_errors(m, [o["errors"][m] for o in done], settings) for m in METHODS
    }
    ttest = pooled_t_test(summaries["RSF"].per_realization_errors, summaries["KIRSF"].per_realization_errors)
    curves = done[-1]["curves"] if done and done[-1]["realization"] == last else {}
    return ExperimentResult(name, summaries, ttest, done, failures, settings, curves)


def run_ringnorm(
    realizations: int = 50,
    forest_config: ForestConfig | None = None,
    kernel_spec: KernelSpec | None = None,
    sim_config: SimConfig | None = None,
    n_train: int = 100,
    master_seed: int = 0,
    standardize: bool = True,
    n_jobs: int = 1,
    curves: bool = False,
) -> ExperimentResult:
    forest_config = forest_config or ForestConfig()
    kernel_spec = kernel_spec or KernelSpec("gaussian")
    sim_config = sim_config or SimConfig()
    settings = {
        "experiment": "ringnorm",
        "realizations": realizations,
        "master_seed": master_seed,
        "forest": forest_config.to_dict(),
        "kernel_requested": kernel_spec.to_dict(),
        "standardize": standardize,
        "simulation": sim_config.to_dict(),
        "n_train": n_train,
        "test_outcome": TEST_OUTCOME,
    }
    args = (master_seed, sim_config, n_train, forest_config, kernel_spec, standardize)
    return _run("ringnorm", _ringnorm_realization, realizations, args, settings, n_jobs, curves)


def run_bmt(
    data: SurvivalDataset,
    realizations: int = 100,
    forest_config: ForestConfig | None = None,
    kernel_spec: KernelSpec | None = None,
    train_fraction: float = 0.9,
    master_seed: int = 0,
    standardize: bool = True,
    n_jobs: int = 1,
    curves: bool = False,
    source: str = "",
) -> ExperimentResult:
    forest_config = forest_config or ForestConfig()
    kernel_spec = kernel_spec or KernelSpec("linear")
    settings = {
        "experiment": "bmt",
        "realizations": realizations,
        "master_seed": master_seed,
        "forest": forest_config.to_dict(),
        "kernel_requested": kernel_spec.to_dict(),
        "standardize": standardize,
        "train_fraction": train_fraction,
        "data": {"source": source, "n": len(data), "features": list(data.feature_names)},
        "test_outcome": TEST_OUTCOME,
    }
    args = (master_seed, data, train_fraction, forest_config, kernel_spec, standardize)
    return _run("bmt", _bmt_realization, realizations, args, settings, n_jobs, curves)


# ---------------------------------------------------------------------------
# output files


def metadata_lines(settings: dict) -> list[str]:
    return [f"kirsf {__version__}", "settings: " + json.dumps(settings, sort_keys=True)]


def _table(rows, header, delimiter, comments) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def summary_tsv(result: ExperimentResult, comments=()) -> str:
    rows = [
        [s.method, repr(100 * s.mean_error), repr(100 * s.sample_sd), len(s.per_realization_errors)]
        for s in result.summaries.values()
    ]
    return _table(rows, ["method", "mean_error_pct", "sd_pct", "realizations"], "\t", comments)


def ttest_tsv(result: ExperimentResult, comments=()) -> str:
    t = result.ttest
    return _table([[repr(t.t), t.df, repr(t.p_value)]], ["t", "df", "p"], "\t", comments)


def errors_csv(result: ExperimentResult, comments=()) -> str:
    rows = [
        [o["realization"], o["seeds"].data, o["seeds"].split, o["seeds"].forest,
         repr(o["errors"]["RSF"]), repr(o["errors"]["KIRSF"])]
        for o in result.realizations
    ]
    header = ["realization", "data_seed", "split_seed", "forest_seed", "rsf_error", "kirsf_error"]
    return _table(rows, header, ",", comments)


def write_outputs(result: ExperimentResult, out_dir, command: str = "", run_info: dict | None = None):
    """Write summary.tsv, ttest.tsv, errors.csv, curve CSVs and run.json.

    Everything except run.json is a pure function of the settings, so
    repeated runs produce byte-identical files; the command line, worker
    count and timing go to run.json only.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = metadata_lines(result.settings)
    atomic_write(out / "summary.tsv", summary_tsv(result, meta))
    atomic_write(out / "ttest.tsv", ttest_tsv(result, meta))
    atomic_write(out / "errors.csv", errors_csv(result, meta))
    for method, bundle in result.curves.items():
        atomic_write(out / f"curves_{method.lower()}.csv", bundle.to_csv(meta))
    info = {
        "failures": result.failures,
        "completed": len(result.realizations),
        "command": command,
        **(run_info or {}),
    }
    atomic_write(out / "run.json", json.dumps(info, indent=2, sort_keys=True) + "\n")
    return out
