"""Command surface: simulate, extract, train, evaluate, reproduce.

Every command is deterministic given its inputs and seeds. The default
output root is the FLIDS_OUT environment variable (falling back to the
current directory); --out overrides it per command.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .dataset import (
    extract_run,
    load_scaler,
    read_csv,
    save_scaler,
    split_windows,
    to_matrix,
    write_csv,
)
from .engine import run_scenario
from .evaluation import emit_comparison, metrics_from_counts
from .experiments import PRESETS, arch_for, build_clients, pooled, run_grid, summarize_grid
from .fed import (
    STRATEGIES,
    FedConfig,
    run_federation,
    train_cids,
    train_lids,
    write_round_reports,
)
from .nn import TrainConfig, confusion_counts, load_params, save_params


def _out_root(value: str | None) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get("FLIDS_OUT", "."))


def _metrics_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_metrics(path: Path, payload: dict) -> None:
    path.write_text(_metrics_json(payload))


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out) if args.out else _out_root(None) / ("run-%s" % cfg.scenario_id)
    run_scenario(cfg, out, keep_logs=True)
    print(out)
    return 0


def cmd_extract(args) -> int:
    run_dir = Path(args.run)
    if not (run_dir / "scenario.meta").exists():
        raise ValueError("not a run directory (no scenario.meta): %s" % run_dir)
    out = Path(args.out) if args.out else _out_root(None) / ("%s.csv" % run_dir.name)
    windows = extract_run(run_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(windows, out)
    print(out)
    return 0


def _train_flags_consistent(args) -> None:
    if args.variant != "fl":
        for flag, name in (
            (args.strategy, "--strategy"),
            (args.btsc, "--btsc"),
            (args.mu, "--mu"),
            (args.btsc_fraction, "--btsc-fraction"),
        ):
            if flag not in (None, False):
                raise ValueError("%s applies only to --variant fl" % name)


def cmd_train(args) -> int:
    _train_flags_consistent(args)
    windows = read_csv(args.data)
    seed = args.seed if args.seed is not None else 0
    clients, scaler = build_clients(windows, gbs_id=args.server_node, seed=seed)
    arch = arch_for(args.arch)
    tcfg = TrainConfig(local_epochs=args.local_epochs)
    out = Path(args.out) if args.out else _out_root(None) / ("train-%s" % args.variant)
    out.mkdir(parents=True, exist_ok=True)
    save_scaler(scaler, out / "scaler.txt")

    if args.variant == "c":
        Xtr, ytr, Xte, yte = pooled(clients)
        params, _ = train_cids(arch, Xtr, ytr, tcfg, args.global_epochs, seed)
        save_params(params, out / "model.txt")
        m = metrics_from_counts(confusion_counts(params, Xte, yte, tcfg.threshold))
        _write_metrics(out / "metrics.json", {"variant": "c", **m.as_dict()})
    elif args.variant == "l":
        models, report = train_lids(clients, arch, tcfg, args.global_epochs, seed)
        for nid, params in models.items():
            save_params(params, out / ("model_node_%03d.txt" % nid))
        _write_metrics(
            out / "metrics.json",
            {
                "variant": "l",
                "accuracy": report.mean_accuracy,
                "detection_rate": report.mean_detection_rate,
                "false_positive_rate": report.mean_false_positive_rate,
                "best_accuracy": report.best_accuracy,
                "worst_accuracy": report.worst_accuracy,
                "excluded": list(report.excluded),
                "single_class": list(report.single_class),
            },
        )
    else:
        fcfg = FedConfig(
            strategy=args.strategy or "fedavg",
            global_epochs=args.global_epochs,
            mu=args.mu if args.mu is not None else 0.01,
            btsc_fraction=(args.btsc_fraction or 0.2) if args.btsc else None,
            train=tcfg,
        )
        params, reports = run_federation(clients, arch, fcfg, seed)
        save_params(params, out / "model.txt")
        write_round_reports(out / "rounds.csv", reports)
        last = reports[-1] if reports else None
        _write_metrics(
            out / "metrics.json",
            {
                "variant": "fl",
                "strategy": fcfg.strategy,
                "btsc": args.btsc,
                "accuracy": last.accuracy if last else None,
                "detection_rate": last.detection_rate if last else None,
                "false_positive_rate": last.false_positive_rate if last else None,
                "bytes_up": sum(r.bytes_up for r in reports),
                "bytes_down": sum(r.bytes_down for r in reports),
            },
        )
    print(out)
    return 0


def cmd_evaluate(args) -> int:
    windows = read_csv(args.data)
    if args.split != "all":
        seed = args.seed if args.seed is not None else 0
        train, test = split_windows(windows, seed=seed)
        windows = train if args.split == "train" else test
    params = load_params(args.weights)
    scaler_path = Path(args.scaler) if args.scaler else Path(args.weights).parent / "scaler.txt"
    scaler = load_scaler(scaler_path)
    X, y = to_matrix(windows)
    m = metrics_from_counts(confusion_counts(params, scaler.transform(X), y))
    payload = {"windows": len(windows), **m.as_dict()}
    text = _metrics_json(payload)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_reproduce(args) -> int:
    if args.preset not in PRESETS:
        raise ValueError(
            "unknown preset %r (known: %s)" % (args.preset, ", ".join(sorted(PRESETS)))
        )
    preset = PRESETS[args.preset]
    if args.seed is not None:
        preset = replace(preset, seeds=tuple(args.seed + i for i in range(len(preset.seeds))))
    out = Path(args.out) if args.out else _out_root(None) / preset.name
    out.mkdir(parents=True, exist_ok=True)

    def progress(cell):
        tag = "failed" if "error" in cell else "done"
        print(
            "cell %s r=%d s=%d %s" % (cell["attack"], round(cell["ratio"] * 100), cell["seed"], tag),
            flush=True,
        )

    cells = run_grid(preset, jobs=args.jobs, curves=args.curves, out_root=out, progress=progress)
    (out / "cells.json").write_text(_metrics_json({"preset": preset.name, "cells": cells}))
    curve_files = {}
    if args.curves:
        for cell in cells:
            if "error" in cell or cell["seed"] != preset.seeds[0]:
                continue
            for variant, rows in cell.get("curves", {}).items():
                stem = "%s-r%02d-%s" % (cell["attack"], round(cell["ratio"] * 100), variant)
                curve_files[stem] = rows
    emit_comparison(out, summarize_grid(cells), curve_files)
    failed = [c for c in cells if "error" in c]
    for c in failed:
        print(
            "failed: %s ratio=%g seed=%d" % (c["attack"], c["ratio"], c["seed"]), file=sys.stderr
        )
    return 1 if failed else 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the relevant seed")
    p.add_argument("--out", default=None, help="output path (default under FLIDS_OUT)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers where supported")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flids",
        description="FANET intrusion-detection pipeline: simulate, learn, compare.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario from a config file")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="recompute the dataset from a run's logs")
    p.add_argument("--run", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one detector variant on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", required=True, choices=("c", "l", "fl"))
    p.add_argument("--arch", default="cnn", choices=("dnn", "cnn"))
    p.add_argument("--global-epochs", type=int, default=100, dest="global_epochs")
    p.add_argument("--local-epochs", type=int, default=1, dest="local_epochs")
    p.add_argument("--strategy", default=None, choices=STRATEGIES)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--btsc", action="store_true")
    p.add_argument("--btsc-fraction", type=float, default=None, dest="btsc_fraction")
    p.add_argument("--server-node", type=int, default=None, dest="server_node",
                   help="node id acting as server; its windows are not client data")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics of a weights file on a dataset")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scaler", default=None)
    p.add_argument("--split", default="all", choices=("all", "train", "test"))
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reproduce", help="run a full comparison preset")
    p.add_argument("--preset", default="desk")
    p.add_argument("--curves", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
