"""Command-line front end: ``solve``, ``simulate``, ``fit``, ``report``, ``sweep``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import analytics, config as config_mod, storage
from .dp_solver import solve
from .errors import (
    CalibrationError,
    ConfigurationError,
    EvaluationError,
    FittingError,
    ModelDomainError,
    PartitionError,
    ScheduleError,
)
from .market_models import calibrate_mmm, read_index_csv
from .policy import ConstantMix, Tabulated, load_strategy, save_strategy
from .simulator import read_samples_csv, read_snapshots_csv, simulate, write_samples_csv, write_snapshots_csv

logger = logging.getLogger("decom_alm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def write_kv(path: Path, items: dict) -> None:
    lines = []
    for k, v in items.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}\n")
    path.write_text("".join(lines))


def _prepare_out(cfg: config_mod.RunConfig, out: Path | None = None) -> Path:
    out = out or cfg.out
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "resolved_config.yaml")
    return out


def _strategy(cfg: config_mod.RunConfig):
    s = cfg["strategy"]
    source = s["source"]
    if source == "constant-mix":
        try:
            return ConstantMix(float(s["weight"]))
        except ValueError as exc:
            raise ConfigurationError(f"strategy.weight: {exc}") from None
    if source in ("file", "solve"):
        if not s["path"]:
            raise ConfigurationError(f"strategy.path is required for strategy.source = {source}")
        path = Path(s["path"])
        if source == "solve":
            return Tabulated(storage.load_solve(path), source=str(path))
        return load_strategy(path, storage.load_solve)
    raise ConfigurationError(f"strategy.source must be constant-mix, file or solve; got {source!r}")


def _normalization(cfg: config_mod.RunConfig, econ=None) -> float | None:
    rep = cfg["report"]
    norm = rep["normalization"]
    if norm is None or norm == "none":
        return None
    if norm == "reference":
        return analytics.reference_normalization(
            cfg.schedule(), econ or cfg.econ(), int(rep["reference_paths"]), cfg.seed, cfg.dynamics(), cfg.workers
        )
    try:
        value = float(norm)
    except (TypeError, ValueError):
        raise ConfigurationError(f"report.normalization must be 'reference', 'none' or a number; got {norm!r}") from None
    if not value > 0:
        raise ConfigurationError("report.normalization must be positive")
    return value


def _write_report(cfg, samples: np.ndarray, out: Path, normalization: float | None, extra: dict | None = None):
    rep = cfg["report"]
    report = analytics.quantile_report(samples, [float(p) for p in rep["levels"]], normalization)
    analytics.write_report_csv(report, out / "quantiles.csv")
    values = samples if normalization is None else analytics.normalize(samples, normalization)
    analytics.write_histogram_csv(values, out / "histogram.csv", int(rep["hist_bins"]))
    summary = {
        "n_samples": report.n,
        "normalization": "none" if normalization is None else float(normalization),
        "mean": float(np.mean(samples)),
        "min": float(np.min(samples)),
        "max": float(np.max(samples)),
    }
    summary.update(extra or {})
    for p, raw, norm in report.rows():
        summary[f"q{p:g}.raw"] = float(raw)
        if norm is not None:
            summary[f"q{p:g}.normalized"] = float(norm)
    write_kv(out / "summary.txt", summary)
    return report


def cmd_solve(cfg: config_mod.RunConfig) -> int:
    model = cfg.model()
    schedule, econ = cfg.schedule(), cfg.econ()
    grid, obj, controls, dyn = cfg.grid(), cfg.objective(), cfg.controls(), cfg.dynamics()
    out = _prepare_out(cfg)
    res = solve(model, schedule, econ, grid, obj, controls, cfg.n_inner, cfg.seed, dyn, cfg.workers)
    storage.save_solve(res, out / "solve")
    write_kv(
        out / "summary.txt",
        {
            "model": model.kind,
            "L0": float(res.liability[0]),
            "initial_value": res.initial_value,
            "clamp_rate": float(res.diagnostics["clamp_rate"]),
            "warnings": " | ".join(res.diagnostics["warnings"]) or "none",
        },
    )
    logger.info("solve finished: J(0, L0, 0) = %.6g", res.initial_value)
    return EXIT_OK


def cmd_simulate(cfg: config_mod.RunConfig) -> int:
    model = cfg.model()
    schedule, econ, dyn = cfg.schedule(), cfg.econ(), cfg.dynamics()
    strategy = _strategy(cfg)
    sim_cfg = cfg["simulation"]
    out = _prepare_out(cfg)
    samples = simulate(
        model, schedule, econ, strategy, cfg.n_paths, cfg.seed, dyn,
        snapshots=bool(sim_cfg["snapshots"]), snapshot_cap=int(sim_cfg["snapshot_cap"]), workers=cfg.workers,
    )
    write_samples_csv(samples, out / "pt_samples.csv")
    if samples.snapshots is not None:
        write_snapshots_csv(samples.snapshots, out / "snapshots.csv")
    norm = _normalization(cfg)
    _write_report(cfg, samples.p_t, out, norm, {"model": model.kind, "strategy": strategy.kind, "L0": samples.metadata["L0"]})
    return EXIT_OK


def cmd_fit(cfg: config_mod.RunConfig) -> int:
    f = cfg["fit"]
    if not f["snapshots_csv"]:
        raise ConfigurationError("fit.snapshots_csv is required")
    snaps = read_snapshots_csv(f["snapshots_csv"])
    out = _prepare_out(cfg)
    result = analytics.fit_policy(analytics.snapshot_triples(snaps), f["form"])
    save_strategy(result.strategy, out / "strategy.txt", {"residual_rms": repr(result.residual_rms), "n_snapshots": result.n})
    return EXIT_OK


def cmd_report(cfg: config_mod.RunConfig) -> int:
    path = cfg["report"]["samples_csv"]
    if not path:
        raise ConfigurationError("report.samples_csv is required")
    samples = read_samples_csv(path)
    out = _prepare_out(cfg)
    _write_report(cfg, samples.p_t, out, _normalization(cfg))
    return EXIT_OK


def cmd_sweep(cfg: config_mod.RunConfig) -> int:
    sw = cfg["sweep"]
    rates = [float(r) for r in sw["a_L_optimize"]]
    if not rates:
        raise ConfigurationError("sweep.a_L_optimize is empty")
    evaluate = float(sw["a_L_evaluate"])
    model, schedule, dyn = cfg.model(), cfg.schedule(), cfg.dynamics()
    econ_eval = cfg.econ(evaluate)
    out = _prepare_out(cfg)
    norm = _normalization(cfg, econ_eval)
    levels = [float(p) for p in cfg["report"]["levels"]]
    result = analytics.robustness_sweep(
        rates, evaluate, model, schedule, cfg.econ(), cfg.grid(), cfg.objective(), cfg.controls(),
        cfg.n_inner, cfg.n_paths, cfg.seed, dyn, norm, levels, cfg.workers,
    )
    rows = []
    for rate, run in zip(rates, result.runs):
        sub = out / f"a_L_{rate:g}"
        sub.mkdir(exist_ok=True)
        cfg.dump(sub / "resolved_config.yaml")
        storage.save_solve(run.solve, sub / "solve")
        save_strategy(run.fit.strategy, sub / "strategy.txt", {"residual_rms": repr(run.fit.residual_rms), "n_snapshots": run.fit.n})
        write_snapshots_csv(run.optimal.snapshots, sub / "snapshots.csv")
        write_samples_csv(run.evaluated, sub / "pt_samples.csv")
        _write_report(cfg, run.evaluated.p_t, sub, norm, {"a_L_optimize": rate, "a_L_evaluate": evaluate})
        q = run.fit.coefficients
        rows.append([rate, q["a"], q["b"], q["c"], *run.report.raw, *(run.report.normalized if norm else [])])
    header = ["a_L_optimize", "a", "b", "c"] + [f"q{p:g}_raw" for p in levels]
    if norm:
        header += [f"q{p:g}_normalized" for p in levels]
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def cmd_calibrate(cfg: config_mod.RunConfig, index_csv: str, window: float) -> int:
    t, s = read_index_csv(index_csv)
    out = _prepare_out(cfg)
    res = calibrate_mmm(t, s, window)
    write_kv(
        out / "calibration.txt",
        {"alpha0": res.params.alpha0, "eta": res.params.eta, "s0": res.params.s0, "residual_rms": res.residual_rms},
    )
    return EXIT_OK


COMMANDS = ("solve", "simulate", "fit", "report", "sweep", "calibrate")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decom-alm", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a dotted config key")
    p.add_argument("--model", choices=("bs", "mmm"))
    p.add_argument("--objective", choices=("g1", "g2", "g3", "custom"))
    p.add_argument("--strategy", help="constant-mix, a strategy file, or a solve directory")
    p.add_argument("--snapshots", help="snapshot CSV for fit")
    p.add_argument("--form", choices=("quadratic", "linear-quadratic"))
    p.add_argument("--samples", help="P_T sample CSV for report")
    p.add_argument("--rates", help="comma-separated a_L values for sweep")
    p.add_argument("--index-csv", help="date_years,index_level series for calibrate")
    p.add_argument("--window", type=float, default=1.0, help="calibration window in years")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict:
    ov = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        ov[key.strip()] = yaml.safe_load(value)
    for flag, key in (("seed", "seed"), ("workers", "workers"), ("out", "out"), ("model", "model.kind"),
                      ("objective", "objective.preset"), ("snapshots", "fit.snapshots_csv"),
                      ("form", "fit.form"), ("samples", "report.samples_csv")):
        value = getattr(args, flag)
        if value is not None:
            ov[key] = value
    if args.rates:
        ov["sweep.a_L_optimize"] = [float(r) for r in args.rates.split(",")]
    if args.strategy:
        if args.strategy == "constant-mix":
            ov["strategy.source"] = "constant-mix"
        else:
            ov["strategy.source"] = "solve" if Path(args.strategy).is_dir() else "file"
            ov["strategy.path"] = args.strategy
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config, _overrides(args))
        if args.command == "calibrate":
            if not args.index_csv:
                raise ConfigurationError("calibrate needs --index-csv")
            return cmd_calibrate(cfg, args.index_csv, args.window)
        handler = {"solve": cmd_solve, "simulate": cmd_simulate, "fit": cmd_fit, "report": cmd_report, "sweep": cmd_sweep}
        return handler[args.command](cfg)
    except (PartitionError, FittingError, CalibrationError, EvaluationError, ModelDomainError, FloatingPointError) as exc:
        logger.error("numerical error: %s", exc)
        return EXIT_NUMERIC
    except (ConfigurationError, ScheduleError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
