"""Command-line entry point: ``climcast <subcommand> --config cfg.json --run-dir DIR``.

Exit codes: 0 success, 1 data or runtime failure, 2 usage error, 3 invalid config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_override
from .errors import ArtifactIOError, ClimcastError
from .evaluation import metrics_with_ci, stratify_extremes
from .experiments import (
    prepare_split,
    recursive_forecast,
    run_generalizability_experiment,
    run_pipeline,
    run_robustness_experiment,
    score_test_set,
)
from .features import assemble, audit_provenance, split_sizes
from .ingest import MonthlySeries, assess_quality, descriptive_stats, parse_csv, write_csv
from .neural import ModelParams
from .report import dumps, emit_plot_series, emit_report, emit_standard_plots, read_text, write_text
from .stats import acf, adf_test, difference, seasonal_decompose_additive
from .synth import synth_generate
from .training import HyperParams, TrainConfig, random_search, train, trials_to_csv

log = logging.getLogger("climcast")

SUBCOMMANDS = ("quality", "preprocess", "features", "train", "tune", "evaluate", "forecast",
               "robustness", "generalize", "synth", "report")
REPORT_SOURCES = ("quality", "preprocess", "best_hyperparams", "metrics", "robustness", "generalize", "forecast")


class Run:
    """Resolved config plus the run directory every subcommand writes into."""

    def __init__(self, cfg: RunConfig, run_dir: Path, data_path: str | None):
        self.cfg = cfg
        self.dir = run_dir
        self.data_path = data_path

    def path(self, name: str) -> Path:
        return self.dir / name

    def write(self, name: str, text: str) -> Path:
        p = write_text(self.path(name), text)
        log.info("wrote %s", p)
        return p

    def plots(self) -> Path:
        return self.dir / "plots"

    def data_file(self) -> Path:
        return Path(self.data_path or self.cfg.data.path or self.path("data.csv"))

    def read_raw(self) -> MonthlySeries:
        d = self.cfg.data
        path = self.data_file()
        units = {d.variable: d.unit} if d.unit else None
        try:
            return parse_csv(read_text(path), d.schema_mapping(), units)[d.variable]
        except ClimcastError as exc:
            raise type(exc)(f"{path}: {exc}") from exc

    def load_series(self) -> MonthlySeries:
        d = self.cfg.data
        series = self.read_raw()
        if series.n_missing:
            _, series = assess_quality(series, d.outlier_k)
        return series

    def hyperparams(self, source: str) -> HyperParams:
        tuned = self.path("best_hyperparams.json")
        if source == "tuned" or (source == "auto" and tuned.exists()):
            return HyperParams(**json.loads(read_text(tuned))["hyperparams"])
        return self.cfg.hyperparams.to_hyperparams()

    def params(self) -> ModelParams:
        return ModelParams.from_json(read_text(self.path("params.json")))


def cmd_synth(run: Run, args) -> None:
    spec = run.cfg.synthetic.to_spec(run.cfg.seed)
    series = synth_generate(spec)
    var = run.cfg.data.variable
    series = MonthlySeries(var, spec.unit, series.records)
    out = Path(args.output) if args.output else run.path("data.csv")
    write_text(out, write_csv({var: series}, run.cfg.data.schema_mapping()))
    run.write("synth.json", dumps({"spec": spec.to_dict(), "path": str(out), "n_months": len(series)}))


def cmd_quality(run: Run, args) -> None:
    d = run.cfg.data
    series = run.read_raw()
    report, repaired = assess_quality(series, d.outlier_k)
    run.write("quality.json", report.to_json() + "\n")
    run.write("clean.csv", write_csv({d.variable: repaired}, d.schema_mapping()))


def cmd_preprocess(run: Run, args) -> None:
    series = run.load_series()
    x = series.values()
    raw_adf = adf_test(x, args.adf_lag)
    diff_adf = adf_test(difference(x), args.adf_lag)
    max_lag = min(args.max_lag, len(x) - 1)
    dec = seasonal_decompose_additive(series, run.cfg.features.period)
    resid = dec.residual[dec.defined]
    doc = {
        "variable": series.variable_name,
        "unit": series.unit,
        "n": len(series),
        "descriptive": descriptive_stats(series),
        "adf_raw": raw_adf.to_dict(),
        "adf_differenced": diff_adf.to_dict(),
        "acf": acf(x, max_lag).to_dict(),
        "decomposition": {
            "period": dec.period,
            "seasonal_profile": dec.seasonal[:dec.period].tolist(),
            "residual_std": float(np.std(resid, ddof=1)),
        },
    }
    run.write("preprocess.json", dumps(doc))
    emit_standard_plots(run.plots(), series=series, max_lag=max_lag)
    years = [t[0] for t in series.timestamps]
    months = [t[1] for t in series.timestamps]
    emit_plot_series("decomposition", {"year": years, "month": months, "value": x.tolist(),
                                       "trend": dec.trend.tolist(), "seasonal": dec.seasonal.tolist(),
                                       "residual": dec.residual.tolist()}, run.plots())


def cmd_features(run: Run, args) -> None:
    series = run.load_series()
    spec = run.cfg.features.to_spec()
    matrix = assemble(series, spec)
    split = prepare_split(series, spec, run.cfg.split.fractions)
    violations = audit_provenance(matrix)
    run.write("features.csv", matrix.to_csv())
    doc = split.train.sidecar()
    doc["split_sizes"] = dict(zip(("train", "validation", "test"), split_sizes(len(matrix), run.cfg.split.fractions)))
    doc["leakage_violations"] = len(violations)
    run.write("features.json", dumps(doc))
    if violations:
        raise ClimcastError(f"provenance audit found {len(violations)} leaking cells")


def cmd_tune(run: Run, args) -> None:
    cfg = run.cfg
    series = run.load_series()
    split = prepare_split(series, cfg.features.to_spec(), cfg.split.fractions)
    tcfg = TrainConfig(cfg.tuning.max_epochs, cfg.tuning.early_stopping_patience, cfg.seed)
    best, trials = random_search(cfg.variant, split, cfg.tuning.space(), cfg.tuning.n_trials, tcfg,
                                 cfg.seed, cfg.features.sequence_length)
    run.write("tuning.csv", trials_to_csv(trials))
    winner = min(trials, key=lambda r: (r.validation_mse, r.trial))
    run.write("best_hyperparams.json", dumps({"variant": cfg.variant, "trial": winner.trial,
                                              "validation_mse": winner.validation_mse,
                                              "hyperparams": best.to_dict()}))


def cmd_train(run: Run, args) -> None:
    cfg = run.cfg
    series = run.load_series()
    hp = run.hyperparams(args.hyperparams)
    split = prepare_split(series, cfg.features.to_spec(), cfg.split.fractions)
    params, history = train(cfg.variant, split, hp, cfg.training.to_train_config(cfg.seed),
                            cfg.features.sequence_length)
    run.write("params.json", params.to_json() + "\n")
    run.write("history.csv", history.to_csv())


def cmd_evaluate(run: Run, args) -> None:
    cfg = run.cfg
    series = run.load_series()
    params = run.params()
    split = prepare_split(series, cfg.features.to_spec(), cfg.split.fractions)
    _, pred, actual, stamps = score_test_set(params, split, cfg.features.sequence_length)
    ev = cfg.evaluation
    report = metrics_with_ci(pred, actual, ev.n_boot, ev.alpha, cfg.seed, split.target_params, series.unit)
    report.extreme_breakdown = stratify_extremes(pred, actual, ev.extreme_thresholds)
    report.label = params.variant
    doc = {"variant": params.variant, "variable": series.variable_name, "unit": series.unit,
           "seed": cfg.seed, "test_start": list(stamps[0]), "test_end": list(stamps[-1]),
           **report.to_dict()}
    run.write("metrics.json", dumps(doc))
    emit_standard_plots(run.plots(), pred=pred, actual=actual, timestamps=stamps)
    if run.path("history.csv").exists():
        write_text(run.plots() / "history.csv", read_text(run.path("history.csv")))


def cmd_forecast(run: Run, args) -> None:
    cfg = run.cfg
    series = run.load_series()
    params = run.params()
    spec = cfg.features.to_spec()
    split = prepare_split(series, spec, cfg.split.fractions)
    horizon = args.horizon or cfg.forecast.horizon
    rows = recursive_forecast(params, series, spec, split.train.normalization, horizon)
    emit_plot_series("forecast", {"year": [r[0] for r in rows], "month": [r[1] for r in rows],
                                  "forecast": [r[2] for r in rows]}, run.plots())
    run.write("forecast.json", dumps({"variant": params.variant, "horizon": horizon, "unit": series.unit,
                                      "forecast": [{"year": y, "month": m, "value": v} for y, m, v in rows]}))


def cmd_robustness(run: Run, args) -> None:
    cfg = run.cfg
    series = run.load_series()
    exp = cfg.experiment_config(run.hyperparams(args.hyperparams))
    res = run_robustness_experiment(series, exp, cfg.experiments.total_delta)
    results = [res["without_trend_feature"], res["with_trend_feature"]]
    if args.control:
        ctrl = run_robustness_experiment(series, exp, 0.0, res["baseline_mse"])
        results += [ctrl["without_trend_feature"], ctrl["with_trend_feature"]]
    run.write("robustness.json", dumps({"baseline_mse": res["baseline_mse"], "unit": f"{series.unit}^2",
                                        "total_delta": cfg.experiments.total_delta, "results": results}))


def cmd_generalize(run: Run, args) -> None:
    cfg = run.cfg
    series = run.load_series()
    exp = cfg.experiment_config(run.hyperparams(args.hyperparams))
    baseline = run_pipeline(series, exp, with_report=False).test_mse
    deltas = args.deltas if args.deltas is not None else cfg.experiments.shift_deltas
    results = [run_generalizability_experiment(series, d, exp, baseline) for d in deltas]
    run.write("generalize.json", dumps({"baseline_mse": baseline, "unit": f"{series.unit}^2",
                                        "results": results}))


def cmd_report(run: Run, args) -> None:
    results = []
    for name in REPORT_SOURCES:
        p = run.path(f"{name}.json")
        if p.exists():
            results.append({"artifact": name, "content": json.loads(read_text(p))})
    plots = sorted(q.name for q in run.plots().glob("*.csv")) if run.plots().exists() else []
    emit_report(results, run.path("report.json"), meta={"run_dir": run.dir.name, "plots": plots})


COMMANDS = {
    "quality": (cmd_quality, "flag missing months, repair gaps and mark IQR outliers"),
    "preprocess": (cmd_preprocess, "stationarity tests, autocorrelation and seasonal decomposition"),
    "features": (cmd_features, "build the feature matrix, audit leakage and report the split"),
    "train": (cmd_train, "train one model variant with early stopping"),
    "tune": (cmd_tune, "random hyperparameter search"),
    "evaluate": (cmd_evaluate, "test-set metrics with bootstrap intervals and plot series"),
    "forecast": (cmd_forecast, "recursive multi-month forecast past the end of the data"),
    "robustness": (cmd_robustness, "injected-warming experiment with and without a trend feature"),
    "generalize": (cmd_generalize, "train on shifted data, test on the original series"),
    "synth": (cmd_synth, "write a synthetic monthly series to data.csv"),
    "report": (cmd_report, "collect run artifacts into report.json"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    common.add_argument("--run-dir", default="run", help="output directory (default: ./run)")
    common.add_argument("--seed", type=int, help="master seed; overrides the config")
    common.add_argument("--data", help="input CSV; defaults to data.path, then RUN_DIR/data.csv")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. --set training.max_epochs=20")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="climcast", description="Attention-LSTM monthly climate forecasting.")
    parser.add_argument("--version", action="version", version=f"climcast {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True
    ps = {name: sub.add_parser(name, parents=[common], help=text, description=text)
          for name, (_, text) in COMMANDS.items()}

    ps["synth"].add_argument("--output", help="CSV path (default RUN_DIR/data.csv)")
    ps["preprocess"].add_argument("--adf-lag", type=int, default=12)
    ps["preprocess"].add_argument("--max-lag", type=int, default=36)
    for name in ("train", "robustness", "generalize"):
        ps[name].add_argument("--hyperparams", choices=("auto", "config", "tuned"), default="auto",
                              help="auto uses RUN_DIR/best_hyperparams.json when present")
    ps["forecast"].add_argument("--horizon", type=int, help="months to forecast (default forecast.horizon)")
    ps["robustness"].add_argument("--control", action="store_true", help="also run a zero-trend control")
    ps["generalize"].add_argument("--deltas", type=float, nargs="+", help="shift sizes (default experiments.shift_deltas)")
    return parser


def cli_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        overrides = dict(parse_override(o) for o in args.overrides)
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"climcast: {exc}", file=sys.stderr)
        if exc.keys:
            print("offending keys: " + ", ".join(exc.keys), file=sys.stderr)
        return 3
    run = Run(cfg, Path(args.run_dir), args.data)
    try:
        run.write("config.json", cfg.to_json())
        COMMANDS[args.command][0](run, args)
    except ArtifactIOError as exc:
        print(f"climcast: {exc}", file=sys.stderr)
        return 1
    except ClimcastError as exc:
        print(f"climcast {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
