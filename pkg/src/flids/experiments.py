"""Experiment presets and the attack x ratio x seed comparison grid.

A grid cell = one simulated scenario plus the detector variants trained on
its windows. Variant names in tables: `c` (pooled), `l` (per-node mean),
`fl` (FedAvg), `fl-btsc`, `fl-fedprox`, `fl-fedsgd`. The ground station's
windows stay in the dataset but it never becomes a training client: it is
the aggregation/measurement point.
"""

from __future__ import annotations

import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import AttackType, ScenarioConfig
from .dataset import Scaler, split_windows, to_matrix, windows_from_result
from .engine import run_scenario
from .evaluation import mean_std, metrics_from_counts
from .fed import ClientHandle, FedConfig, run_federation, train_cids, train_lids
from .nn import ArchSpec, TrainConfig, confusion_counts

RATIO_GRID = (0.05, 0.10, 0.15, 0.20, 0.25)
ALL_ATTACKS = ("sinkhole", "blackhole", "flooding")
DESK_SEEDS = (11, 12, 13, 14, 15)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    attacks: tuple = ALL_ATTACKS
    ratios: tuple = RATIO_GRID
    seeds: tuple = DESK_SEEDS
    variants: tuple = ("c", "l", "fl")
    strategies: tuple = ("fedavg",)
    btsc: bool = False
    # selection only pays off when few clients see attack traffic, so the
    # btsc twin runs on the low-ratio cells rather than the whole grid
    btsc_ratios: tuple = (0.05,)
    btsc_fraction: float = 0.2
    arch_kind: str = "cnn"
    epochs: int = 100
    mu: float = 50.0
    scenario: dict = field(default_factory=dict)

    def cells(self) -> list:
        return [(a, r, s) for a in self.attacks for r in self.ratios for s in self.seeds]

    def scenario_config(self, attack: str, ratio: float, seed: int) -> ScenarioConfig:
        return ScenarioConfig(
            attack_type=AttackType(attack), attacker_ratio=ratio, seed=seed, **self.scenario
        )


_DESK_SCENARIO = dict(
    node_count=20,
    area=(1000.0, 1000.0, 130.0),
    sim_duration=300.0,
    mean_speed=25.0,
    gm_alpha=0.75,
    tx_range=250.0,
    traffic_pairs=7,
    packet_size=512,
    packet_rate=1.0,
    # a gentle nudge is enough to win route selection once a victim has any
    # baseline; a huge one would broadcast the attack to the whole network
    # through the sequence numbers carried in later RREQs
    seq_inflation=2,
    window_len=5.0,
    # a minute of settling keeps route-table fill-in out of the feature stream
    warmup=60.0,
)

_SMOKE_SCENARIO = dict(
    node_count=10,
    area=(500.0, 500.0, 100.0),
    sim_duration=60.0,
    mean_speed=20.0,
    gm_alpha=0.75,
    tx_range=250.0,
    traffic_pairs=3,
    packet_size=512,
    packet_rate=1.0,
    window_len=5.0,
    warmup=10.0,
)


def _desk(name: str, attacks: tuple, **kw) -> ExperimentPreset:
    return ExperimentPreset(
        name=name, attacks=attacks, btsc=True, scenario=dict(_DESK_SCENARIO), **kw
    )


PRESETS = {
    "desk": _desk("desk", ALL_ATTACKS),
    "desk-sinkhole": _desk("desk-sinkhole", ("sinkhole",)),
    "desk-blackhole": _desk("desk-blackhole", ("blackhole",)),
    "desk-flooding": _desk("desk-flooding", ("flooding",)),
    "desk-strategies": ExperimentPreset(
        name="desk-strategies",
        attacks=("blackhole",),
        ratios=(0.25,),
        variants=("fl",),
        strategies=("fedavg", "fedprox", "fedsgd"),
        scenario=dict(_DESK_SCENARIO),
    ),
    "smoke": ExperimentPreset(
        name="smoke",
        attacks=("blackhole",),
        ratios=(0.2,),
        seeds=(11,),
        epochs=5,
        scenario=dict(_SMOKE_SCENARIO),
    ),
}


def arch_for(kind: str) -> ArchSpec:
    return ArchSpec(kind=kind)


def build_clients(windows, gbs_id=None, train_frac=0.8, seed=0):
    """Split, fit the scaler on the pooled train side, and wrap per-node
    clients. The gbs_id node (the server) is excluded from clienthood."""
    usable = [w for w in windows if gbs_id is None or w.node_id != gbs_id]
    train, test = split_windows(usable, train_frac, seed)
    scaler = Scaler.fit(to_matrix(train)[0])
    by_node_train: dict = {}
    by_node_test: dict = {}
    for w in train:
        by_node_train.setdefault(w.node_id, []).append(w)
    for w in test:
        by_node_test.setdefault(w.node_id, []).append(w)
    clients = []
    for nid in sorted({w.node_id for w in usable}):
        Xtr, ytr = to_matrix(by_node_train.get(nid, []))
        Xte, yte = to_matrix(by_node_test.get(nid, []))
        clients.append(
            ClientHandle(nid, scaler.transform(Xtr), ytr, scaler.transform(Xte), yte)
        )
    return clients, scaler


def pooled(clients):
    """Client data concatenated in node-id order (clients come pre-sorted)."""
    Xtr = np.concatenate([c.X_train for c in clients])
    ytr = np.concatenate([c.y_train for c in clients])
    Xte = np.concatenate([c.X_test for c in clients])
    yte = np.concatenate([c.y_test for c in clients])
    return Xtr, ytr, Xte, yte


def _metrics_dict(m) -> dict:
    return {"acc": m.accuracy, "dr": m.detection_rate, "fpr": m.false_positive_rate}


def _fl_variant_name(strategy: str) -> str:
    return "fl" if strategy == "fedavg" else "fl-" + strategy


def run_cell(
    preset: ExperimentPreset,
    attack: str,
    ratio: float,
    seed: int,
    curves: bool = False,
    out_dir=None,
    keep_logs: bool = False,
) -> dict:
    """Simulate one scenario and train/evaluate the preset's variants on it."""
    cfg = preset.scenario_config(attack, ratio, seed)
    result = run_scenario(cfg, out_dir, keep_logs=keep_logs)
    windows = windows_from_result(result)
    clients, _ = build_clients(windows, gbs_id=cfg.gbs_id, seed=seed)
    arch = arch_for(preset.arch_kind)
    tcfg = TrainConfig()
    cell = {
        "attack": attack,
        "ratio": ratio,
        "seed": seed,
        "scenario_id": cfg.scenario_id,
        "sim": result.summary,
        "metrics": {},
        "curves": {},
    }

    if "c" in preset.variants:
        Xtr, ytr, Xte, yte = pooled(clients)
        params, curve = train_cids(
            arch, Xtr, ytr, tcfg, preset.epochs, seed,
            X_test=Xte if curves else None, y_test=yte if curves else None,
        )
        m = metrics_from_counts(confusion_counts(params, Xte, yte, tcfg.threshold))
        cell["metrics"]["c"] = _metrics_dict(m)
        if curves:
            cell["curves"]["c"] = curve

    if "l" in preset.variants:
        _, report = train_lids(clients, arch, tcfg, preset.epochs, seed)
        cell["metrics"]["l"] = {
            "acc": report.mean_accuracy,
            "dr": report.mean_detection_rate,
            "fpr": report.mean_false_positive_rate,
            "best_acc": report.best_accuracy,
            "worst_acc": report.worst_accuracy,
        }

    if "fl" in preset.variants:
        for strategy in preset.strategies:
            fcfg = FedConfig(
                strategy=strategy,
                global_epochs=preset.epochs,
                mu=preset.mu,
                train=tcfg,
            )
            _, reports = run_federation(clients, arch, fcfg, seed)
            last = reports[-1]
            name = _fl_variant_name(strategy)
            cell["metrics"][name] = {
                "acc": last.accuracy,
                "dr": last.detection_rate,
                "fpr": last.false_positive_rate,
                "bytes_up": sum(r.bytes_up for r in reports),
                "bytes_down": sum(r.bytes_down for r in reports),
            }
            if curves:
                cell["curves"][name] = [(r.epoch, r.accuracy) for r in reports]
        if preset.btsc and ratio in preset.btsc_ratios:
            fcfg = FedConfig(
                strategy="fedavg",
                global_epochs=preset.epochs,
                btsc_fraction=preset.btsc_fraction,
                train=tcfg,
            )
            _, reports = run_federation(clients, arch, fcfg, seed)
            last = reports[-1]
            cell["metrics"]["fl-btsc"] = {
                "acc": last.accuracy,
                "dr": last.detection_rate,
                "fpr": last.false_positive_rate,
                "bytes_up": sum(r.bytes_up for r in reports),
                "bytes_down": sum(r.bytes_down for r in reports),
            }
            if curves:
                cell["curves"]["fl-btsc"] = [(r.epoch, r.accuracy) for r in reports]

    if not curves:
        del cell["curves"]
    return cell


def _cell_task(args):
    preset, attack, ratio, seed, curves, out_dir = args
    try:
        return run_cell(preset, attack, ratio, seed, curves=curves, out_dir=out_dir)
    except Exception:
        return {
            "attack": attack,
            "ratio": ratio,
            "seed": seed,
            "error": traceback.format_exc(limit=8),
        }


def run_grid(
    preset: ExperimentPreset,
    jobs: int = 1,
    curves: bool = False,
    out_root=None,
    progress=None,
) -> list:
    """All cells of the preset; failed cells carry an `error` key instead of
    metrics so partial results survive. With out_root every cell writes its
    scenario artifacts (sans logs) under out_root/cells/<scenario_id>."""

    def cell_dir(a, r, s):
        if out_root is None:
            return None
        cfg = preset.scenario_config(a, r, s)
        return str(Path(out_root) / "cells" / cfg.scenario_id)

    tasks = [(preset, a, r, s, curves, cell_dir(a, r, s)) for a, r, s in preset.cells()]
    out = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for cell in pool.map(_cell_task, tasks):
                out.append(cell)
                if progress:
                    progress(cell)
    else:
        for task in tasks:
            cell = _cell_task(task)
            out.append(cell)
            if progress:
                progress(cell)
    return out


def summarize_grid(cells: list) -> list:
    """Mean over seeds -> one row per (attack, ratio, variant) with acc/dr/fpr;
    rows also carry acc_btsc when the btsc twin is present."""
    by_cell: dict = {}
    for cell in cells:
        if "error" in cell:
            continue
        key = (cell["attack"], cell["ratio"])
        by_cell.setdefault(key, []).append(cell)
    rows = []
    for (attack, ratio), group in sorted(by_cell.items()):
        variant_names = sorted({v for cell in group for v in cell["metrics"]})
        for variant in variant_names:
            if variant == "fl-btsc":
                continue
            row = {"attack": attack, "ratio": ratio, "variant": variant}
            for key in ("acc", "dr", "fpr"):
                vals = [
                    cell["metrics"][variant][key]
                    for cell in group
                    if variant in cell["metrics"] and cell["metrics"][variant][key] is not None
                ]
                row[key] = mean_std(vals)[0] if vals else None
            if variant == "fl" and any("fl-btsc" in cell["metrics"] for cell in group):
                vals = [
                    cell["metrics"]["fl-btsc"]["acc"]
                    for cell in group
                    if "fl-btsc" in cell["metrics"]
                    and cell["metrics"]["fl-btsc"]["acc"] is not None
                ]
                row["acc_btsc"] = mean_std(vals)[0] if vals else None
            rows.append(row)
    return rows
