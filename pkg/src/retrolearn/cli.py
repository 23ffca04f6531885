"""Command line front end.

Four subcommands: ``run`` trains once from a config file, ``sweep``
crosses temperature and snapshot-interval grids over seeds,
``robustness`` measures accuracy under increasing label corruption, and
``report`` re-aggregates previously written raw result rows. Every run
writes its raw row with full hyperparameter provenance, so any results
file can be re-aggregated later without re-running.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    RESULT_COLUMNS,
    ConfigError,
    ResolvedRun,
    apply_overrides,
    build_datasets,
    load_config,
    resolve_run,
    results_row,
    run_id_for,
    write_manifest,
)
from .metrics import compute_ece, reliability_export
from .trainer import TrainDivergedError, normalize_method, train, train_many

__all__ = ["main"]

EPOCH_COLUMNS = ["epoch", "train_loss", "train_acc", "test_acc", "alpha", "beta", "committed"]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _epoch_rows(report) -> list[list[str]]:
    rows = []
    for r in report.epochs:
        rows.append(
            [
                str(r.epoch),
                repr(r.train_loss),
                repr(r.train_acc),
                "" if r.test_acc is None else repr(r.test_acc),
                repr(r.alpha),
                repr(r.beta),
                "true" if r.committed else "false",
            ]
        )
    return rows


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines)


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _load_resolved(args) -> ResolvedRun:
    cfg = load_config(args.config)
    overrides = list(args.set or [])
    if getattr(args, "method", None):
        overrides.append(f"method.name={args.method}")
    cfg = apply_overrides(cfg, overrides)
    resolved = resolve_run(cfg, args.seed)
    for message in resolved.warnings:
        print(f"warning: {message}", file=sys.stderr)
    return resolved


def _ece_of(report) -> float:
    final = report.final_eval
    return compute_ece(final.confidences, final.correct).ece


def cmd_run(args) -> int:
    resolved = _load_resolved(args)
    config = resolved.train_config
    # build data before touching the output directory: a bad path must
    # leave nothing behind
    train_ds, test_ds, info = build_datasets(resolved.data, config.seed)
    rid = run_id_for(resolved)
    out = Path(args.out) if args.out else Path("runs") / rid
    out.mkdir(parents=True, exist_ok=True)

    captured = {}

    def keep_store(record, model, store):
        captured["store"] = store

    report = train(config, train_ds, test_ds, epoch_callback=keep_store)
    ece_report = compute_ece(report.final_eval.confidences, report.final_eval.correct)

    _write_csv(out / "epochs.csv", EPOCH_COLUMNS, _epoch_rows(report))
    reliability_export(ece_report, out / "reliability.csv")
    _write_csv(
        out / "results.csv", RESULT_COLUMNS, [results_row(resolved, report, ece_report.ece)]
    )
    outputs = ["epochs.csv", "reliability.csv", "results.csv", "manifest.json"]
    if args.dump_soft_labels:
        store = captured.get("store")
        if store is not None and store.active is not None:
            store.dump_csv(out / "soft_labels.csv")
            outputs.append("soft_labels.csv")
        else:
            print(
                "warning: no soft labels to dump "
                "(method has no snapshots or none were committed)",
                file=sys.stderr,
            )
    write_manifest(out / "manifest.json", resolved, info, extra={"outputs": outputs})
    print(
        f"run {rid} method={config.method} dataset={resolved.data.name} seed={config.seed} "
        f"last={_pct(report.last_acc)} best={_pct(report.best_acc)} "
        f"ece={ece_report.ece:.4f} ({report.wall_time_s:.1f}s)"
    )
    return 0


def _dedupe(values: list, what: str) -> list:
    unique = list(dict.fromkeys(values))
    if len(unique) != len(values):
        print(f"warning: duplicate {what} collapsed: {values}", file=sys.stderr)
    return unique


def cmd_sweep(args) -> int:
    resolved = _load_resolved(args)
    taus = _dedupe(_float_list(args.tau), "tau values")
    intervals = _dedupe(_int_list(args.k), "k values")
    seeds = _dedupe(_int_list(args.seeds), "seeds")
    train_ds, test_ds, info = build_datasets(resolved.data, resolved.train_config.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    raw_rows: list[list[str]] = []
    failure_rows: list[list[str]] = []
    agg_cells: dict[tuple[float, int], dict[str, list[float]]] = {}
    tasks = []
    grid = [(tau, k, seed) for tau in taus for k in intervals for seed in seeds]
    for tau, k, seed in grid:
        tasks.append((replace(resolved.train_config, tau=tau, interval=k, seed=seed),
                      train_ds, test_ds))
    outcomes = train_many(tasks, jobs=args.jobs)
    for (tau, k, seed), (config, _, _), (report, error) in zip(grid, tasks, outcomes):
        run_resolved = replace(resolved, train_config=config, warnings=())
        if report is None:
            failure_rows.append([repr(tau), str(k), str(seed), error or "unknown"])
            print(f"warning: run tau={tau} k={k} seed={seed} failed: {error}", file=sys.stderr)
            continue
        ece = _ece_of(report)
        raw_rows.append(results_row(run_resolved, report, ece))
        cell = agg_cells.setdefault((tau, k), {"last": [], "best": []})
        cell["last"].append(report.last_acc)
        cell["best"].append(report.best_acc)

    _write_csv(out / "results.csv", RESULT_COLUMNS, raw_rows)
    _write_csv(out / "failures.csv", ["tau", "k", "seed", "status"], failure_rows)
    agg_header = ["method", "dataset", "tau", "k", "noise_rate", "n",
                  "last_mean", "last_std", "best_mean", "best_std"]
    agg_rows = []
    table_rows = []
    for (tau, k), cell in sorted(agg_cells.items()):
        last_mean, last_std = _mean_std(cell["last"])
        best_mean, best_std = _mean_std(cell["best"])
        agg_rows.append(
            [resolved.train_config.method, resolved.data.name, repr(tau), str(k),
             repr(resolved.data.noise_rate), str(len(cell["last"])),
             repr(last_mean), repr(last_std), repr(best_mean), repr(best_std)]
        )
        table_rows.append(
            [repr(tau), str(k), str(len(cell["last"])),
             f"{_pct(last_mean)} ± {_pct(last_std)}",
             f"{_pct(best_mean)} ± {_pct(best_std)}"]
        )
    _write_csv(out / "aggregate.csv", agg_header, agg_rows)
    write_manifest(
        out / "manifest.json",
        resolved,
        info,
        extra={
            "grid": {"tau": taus, "k": intervals, "seeds": seeds},
            "num_failures": len(failure_rows),
            "outputs": ["results.csv", "aggregate.csv", "failures.csv", "manifest.json"],
        },
    )
    print(_format_table(["tau", "k", "n", "last(%)", "best(%)"], table_rows))
    return 0 if raw_rows else 1


def cmd_robustness(args) -> int:
    resolved = _load_resolved(args)
    methods = _dedupe([normalize_method(m) for m in args.methods.split(",") if m.strip()],
                      "methods")
    rates = _dedupe(_float_list(args.rates), "rates")
    seeds = _dedupe(_int_list(args.seeds), "seeds")
    out = Path(args.out)

    # one corrupted train set per (rate, seed); methods share it so the
    # comparison is paired
    datasets: dict[tuple[float, int], tuple] = {}
    for rate in rates:
        for seed in seeds:
            spec = replace(resolved.data, noise_rate=rate)
            datasets[(rate, seed)] = build_datasets(spec, seed)

    out.mkdir(parents=True, exist_ok=True)
    grid = [(m, r, s) for m in methods for r in rates for s in seeds]
    tasks = []
    for method, rate, seed in grid:
        train_ds, test_ds, _ = datasets[(rate, seed)]
        tasks.append((replace(resolved.train_config, method=method, seed=seed),
                      train_ds, test_ds))
    outcomes = train_many(tasks, jobs=args.jobs)

    raw_rows = []
    failure_rows = []
    cells: dict[tuple[str, float], dict[str, list[float]]] = {}
    for (method, rate, seed), (config, _, _), (report, error) in zip(grid, tasks, outcomes):
        if report is None:
            failure_rows.append([method, repr(rate), str(seed), error or "unknown"])
            print(f"warning: run method={method} rate={rate} seed={seed} failed: {error}",
                  file=sys.stderr)
            continue
        run_resolved = ResolvedRun(
            train_config=config,
            data=replace(resolved.data, noise_rate=rate),
            warnings=(),
        )
        raw_rows.append(results_row(run_resolved, report, _ece_of(report)))
        cell = cells.setdefault((method, rate), {"last": [], "best": []})
        cell["last"].append(report.last_acc)
        cell["best"].append(report.best_acc)

    _write_csv(out / "results.csv", RESULT_COLUMNS, raw_rows)
    _write_csv(out / "failures.csv", ["method", "rate", "seed", "status"], failure_rows)
    agg_header = ["method", "dataset", "rate", "n",
                  "last_mean", "last_std", "best_mean", "best_std"]
    agg_rows = []
    for (method, rate), cell in sorted(cells.items()):
        last_mean, last_std = _mean_std(cell["last"])
        best_mean, best_std = _mean_std(cell["best"])
        agg_rows.append([method, resolved.data.name, repr(rate), str(len(cell["last"])),
                         repr(last_mean), repr(last_std), repr(best_mean), repr(best_std)])
    _write_csv(out / "aggregate.csv", agg_header, agg_rows)

    headers = ["method", "metric"] + [f"rate={r:g}" for r in rates]
    table_rows = []
    for method in methods:
        for metric in ("last", "best"):
            row = [method, metric]
            for rate in rates:
                cell = cells.get((method, rate))
                if cell and cell[metric]:
                    m, s = _mean_std(cell[metric])
                    row.append(f"{_pct(m)} ± {_pct(s)}")
                else:
                    row.append("-")
            table_rows.append(row)
    write_manifest(
        out / "manifest.json",
        resolved,
        {"per_rate": {repr(rate): datasets[(rate, seeds[0])][2] for rate in rates}},
        extra={
            "grid": {"methods": methods, "rates": rates, "seeds": seeds},
            "num_failures": len(failure_rows),
            "outputs": ["results.csv", "aggregate.csv", "failures.csv", "manifest.json"],
        },
    )
    print(_format_table(headers, table_rows))
    return 0 if raw_rows else 1


def cmd_report(args) -> int:
    rows: list[dict] = []
    for path in args.results:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != RESULT_COLUMNS:
                raise ConfigError(f"{path}: unexpected results header {header}")
            for row in reader:
                rows.append(dict(zip(RESULT_COLUMNS, row)))
    if not rows:
        raise ConfigError("no raw result rows found")

    groups: dict[tuple, dict[str, list[float]]] = {}
    for row in rows:
        key = (row["method"], row["dataset"], row["tau"], row["k"], row["noise_rate"])
        cell = groups.setdefault(key, {"last": [], "best": [], "ece": []})
        cell["last"].append(float(row["last_acc"]))
        cell["best"].append(float(row["best_acc"]))
        cell["ece"].append(float(row["ece"]))

    agg_header = ["method", "dataset", "tau", "k", "noise_rate", "n",
                  "last_mean", "last_std", "best_mean", "best_std", "ece_mean"]
    agg_rows = []
    table_rows = []
    for key, cell in sorted(groups.items()):
        method, dataset, tau, k, noise = key
        last_mean, last_std = _mean_std(cell["last"])
        best_mean, best_std = _mean_std(cell["best"])
        ece_mean = float(np.mean(cell["ece"]))
        n = len(cell["last"])
        agg_rows.append([method, dataset, tau, k, noise, str(n),
                         repr(last_mean), repr(last_std),
                         repr(best_mean), repr(best_std), repr(ece_mean)])
        table_rows.append([method, dataset, tau or "-", k or "-", noise, str(n),
                           f"{_pct(last_mean)} ± {_pct(last_std)}",
                           f"{_pct(best_mean)} ± {_pct(best_std)}",
                           f"{ece_mean:.4f}"])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "aggregate.csv", agg_header, agg_rows)
    print(_format_table(
        ["method", "dataset", "tau", "k", "noise", "n", "last(%)", "best(%)", "ece"],
        table_rows,
    ))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrolearn",
        description="Train classifiers that retrospect their own earlier predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_method=False):
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="overrides run.seed")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any config value; repeatable")
        if with_method:
            p.add_argument("--method", default=None,
                           help="shorthand for --set method.name=...")

    p_run = sub.add_parser("run", help="train once and write epoch/result artifacts")
    add_common(p_run, with_method=True)
    p_run.add_argument("--out", default=None, help="output directory (default runs/<run_id>)")
    p_run.add_argument("--dump-soft-labels", action="store_true",
                       help="also write the committed soft-label table")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="cross tau and k grids over seeds")
    add_common(p_sweep)
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--tau", default="2,5,10", help="comma-separated temperatures")
    p_sweep.add_argument("--k", default="1,5", help="comma-separated snapshot intervals")
    p_sweep.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rob = sub.add_parser("robustness", help="accuracy under label corruption")
    add_common(p_rob)
    p_rob.add_argument("--out", required=True, help="output directory")
    p_rob.add_argument("--rates", default="0.2,0.4,0.6,0.8",
                       help="comma-separated corruption rates")
    p_rob.add_argument("--methods", default="std,lwr", help="comma-separated methods")
    p_rob.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p_rob.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_rob.set_defaults(func=cmd_robustness)

    p_rep = sub.add_parser("report", help="re-aggregate raw results files")
    p_rep.add_argument("results", nargs="+", help="raw results.csv files")
    p_rep.add_argument("--out", default=None, help="directory for aggregate.csv")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TrainDivergedError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
