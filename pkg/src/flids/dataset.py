"""Windowed detection dataset: labeling, CSV round-trip, split, scaling.

Rows are one node-window each: `scenario_id,node_id,window_start,f01..f31,label`
with features printed to 6 significant digits and labels 0 (normal) / 1
(attack). A window is labeled attack iff the scenario has attackers and the
window starts at or after the attack activation time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .engine import ScenarioResult
from .features import N_FEATURES, features_from_lines, parse_line

LABEL_NORMAL = 0
LABEL_ATTACK = 1

_HEADER = (
    "scenario_id,node_id,window_start,"
    + ",".join("f%02d" % (i + 1) for i in range(N_FEATURES))
    + ",label"
)


@dataclass(frozen=True)
class FeatureWindow:
    scenario_id: str
    node_id: int
    window_start: float
    features: np.ndarray
    label: int

    def __eq__(self, other):
        return (
            isinstance(other, FeatureWindow)
            and self.scenario_id == other.scenario_id
            and self.node_id == other.node_id
            and self.window_start == other.window_start
            and self.label == other.label
            and np.array_equal(self.features, other.features)
        )


def label_for(window_start: float, has_attackers: bool, active_from: float | None) -> int:
    if has_attackers and active_from is not None and window_start >= active_from:
        return LABEL_ATTACK
    return LABEL_NORMAL


def windows_from_result(result: ScenarioResult) -> list[FeatureWindow]:
    cfg = result.cfg
    has_attackers = bool(result.ground_truth)
    out = []
    for node_id in result.node_ids:
        for start, feats in result.windows[node_id]:
            out.append(
                FeatureWindow(
                    scenario_id=cfg.scenario_id,
                    node_id=node_id,
                    window_start=start,
                    features=feats,
                    label=label_for(start, has_attackers, cfg.active_from),
                )
            )
    return out


def write_csv(windows, path: str | Path) -> None:
    lines = [_HEADER]
    for w in windows:
        feats = ",".join("%.6g" % v for v in w.features)
        lines.append(
            "%s,%d,%.6g,%s,%d" % (w.scenario_id, w.node_id, w.window_start, feats, w.label)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> list[FeatureWindow]:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != _HEADER:
        raise ValueError("not a feature dataset file: %s" % path)
    out = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3 + N_FEATURES + 1:
            raise ValueError(
                "line %d: expected %d columns, got %d" % (lineno, 3 + N_FEATURES + 1, len(parts))
            )
        try:
            feats = np.array([float(v) for v in parts[3 : 3 + N_FEATURES]], dtype=np.float64)
            window = FeatureWindow(
                scenario_id=parts[0],
                node_id=int(parts[1]),
                window_start=float(parts[2]),
                features=feats,
                label=int(parts[-1]),
            )
        except ValueError as exc:
            raise ValueError("line %d: %s" % (lineno, exc)) from None
        out.append(window)
    return out


# ------------------------------------------------------- offline extraction


def read_meta(run_dir: str | Path) -> dict:
    meta = {}
    for line in (Path(run_dir) / "scenario.meta").read_text().splitlines():
        line = line.strip()
        if line and "=" in line:
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
    return meta


def extract_run(run_dir: str | Path) -> list[FeatureWindow]:
    """Recompute all feature windows of a persisted run from its node logs."""
    run_dir = Path(run_dir)
    meta = read_meta(run_dir)
    warmup = float(meta["warmup"])
    window_len = float(meta["window_len"])
    n_windows = int(meta["n_windows"])
    scenario_id = meta["scenario_id"]
    active_from = None if meta["active_from"] == "none" else float(meta["active_from"])
    has_attackers = bool((run_dir / "ground_truth.txt").read_text().strip())

    out = []
    for log_path in sorted(run_dir.glob("node_*.log")):
        node_id = int(log_path.stem.split("_")[1])
        buckets: list[list] = [[] for _ in range(n_windows)]
        for text in log_path.read_text().splitlines():
            if not text:
                continue
            try:
                line = parse_line(text)
            except ValueError as exc:
                raise ValueError("%s: %s" % (log_path.name, exc)) from None
            t = line[0]
            if t < warmup:
                continue
            k = int(math.floor((t - warmup) / window_len + 1e-9))
            if 0 <= k < n_windows:
                buckets[k].append(line)
        for k in range(n_windows):
            start = warmup + k * window_len
            out.append(
                FeatureWindow(
                    scenario_id=scenario_id,
                    node_id=node_id,
                    window_start=start,
                    features=features_from_lines(buckets[k]),
                    label=label_for(start, has_attackers, active_from),
                )
            )
    return out


# ----------------------------------------------------------- split / scale


def split_windows(windows, train_frac=0.8, seed=0, stratify=True):
    """Deterministic train/test split, preserving input order on both sides.

    stratify=True cuts each (node, label) group separately so every node
    keeps examples of each of its classes on both sides; a node with fewer
    than 5 windows contributes everything to train (with a warning).
    stratify=False is one global shuffle split."""
    if len(windows) < 5:
        raise ValueError("need at least 5 windows to split, got %d" % len(windows))
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    groups: dict = {}
    per_node: dict = {}
    for w in windows:
        key = (w.node_id, w.label) if stratify else 0
        groups.setdefault(key, []).append(w)
        per_node[w.node_id] = per_node.get(w.node_id, 0) + 1
    rng = rngmod.substream(seed, rngmod.SPLIT)
    small = {nid for nid, n in per_node.items() if n < 5} if stratify else set()
    for nid in sorted(small):
        warnings.warn("node %d has fewer than 5 windows; all assigned to train" % nid)
    train, test = [], []
    for key in sorted(groups):
        group = groups[key]
        n = len(group)
        perm = rng.permutation(n)
        if stratify and group[0].node_id in small:
            train.extend(group)
            continue
        n_train = int(round(train_frac * n))
        if n >= 2:
            n_train = min(max(n_train, 1), n - 1)
        chosen = set(int(i) for i in perm[:n_train])
        for i, w in enumerate(group):
            (train if i in chosen else test).append(w)
    return train, test


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        mean = X.mean(axis=0)
        std = np.maximum(X.std(axis=0), 1e-8)
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def save_scaler(scaler: Scaler, path: str | Path) -> None:
    lines = [
        "flids-scaler v1",
        ",".join(repr(float(v)) for v in scaler.mean),
        ",".join(repr(float(v)) for v in scaler.std),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_scaler(path: str | Path) -> Scaler:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or lines[0] != "flids-scaler v1":
        raise ValueError("not a scaler file: %s" % path)
    mean = np.array([float(v) for v in lines[1].split(",")])
    std = np.array([float(v) for v in lines[2].split(",")])
    return Scaler(mean=mean, std=std)


def to_matrix(windows) -> tuple[np.ndarray, np.ndarray]:
    if not windows:
        return np.zeros((0, N_FEATURES)), np.zeros(0)
    X = np.stack([w.features for w in windows]).astype(np.float64)
    y = np.array([w.label for w in windows], dtype=np.float64)
    return X, y
