"""The three detector architectures: pooled, per-node, and federated.

The federation server only ever sees parameter vectors, gradient vectors,
and aggregate metrics; raw windows never leave the ClientHandle. All
server-side reductions sort by node id first, so results are bitwise
independent of client ordering.

Strategies:

  fedavg   clients run local SGD epochs, server averages the weights
  fedprox  fedavg plus a proximal pull mu*(w - w_global) on every batch
  fedsgd   synchronous batch gradients, one server step per batch slot

Top-score client selection (btsc_fraction) ranks clients by their freshly
trained local model's accuracy on their own test split; after a warm-up
round only the top ceil(fraction * N) upload. Every client still trains
each round, selection saves uplink only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .evaluation import ConfusionCounts, metrics_from_counts
from .nn import (
    ArchSpec,
    ModelParams,
    TrainConfig,
    confusion_counts,
    init_params,
    loss_and_grad,
    make_dropout_mask,
    sgd_epoch,
)

BYTES_PER_WEIGHT = 4
STRATEGIES = ("fedavg", "fedprox", "fedsgd")


@dataclass
class ClientHandle:
    """One node's private data plus the local computations done on it."""

    node_id: int
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray

    def train_update(
        self, params: ModelParams, tcfg: TrainConfig, seed: int, epoch_base: int, mu: float = 0.0
    ) -> ModelParams:
        local = params.copy()
        anchor = params.w.copy() if mu else None
        for e in range(tcfg.local_epochs):
            rng = rngmod.substream(seed, rngmod.TRAIN, epoch_base + e)
            local = sgd_epoch(local, self.X_train, self.y_train, tcfg, rng, mu=mu, anchor=anchor)
        return local

    def begin_round(self, tcfg: TrainConfig, seed: int, epoch: int) -> list:
        """Shuffle and pre-cut this round's batches for synchronous SGD.

        Dropout masks are drawn lazily in batch_grad from the shared rng, so
        the stream sees the permutation first and then one mask per batch,
        exactly as local SGD over the same data would consume it."""
        rng = rngmod.substream(seed, rngmod.TRAIN, epoch)
        perm = rng.permutation(self.X_train.shape[0])
        out = []
        for s in range(0, len(perm), tcfg.batch_size):
            idx = perm[s : s + tcfg.batch_size]
            out.append((np.ascontiguousarray(self.X_train[idx]), self.y_train[idx], rng))
        return out

    def batch_grad(self, params: ModelParams, batch) -> np.ndarray:
        Xb, yb, rng = batch
        mask = make_dropout_mask(params.arch, Xb.shape[0], rng)
        _, grad = loss_and_grad(params, Xb, yb, mask)
        return grad

    def rank_accuracy(self, params: ModelParams) -> float:
        """Local-test accuracy used for client ranking; -1 when no test data."""
        if len(self.y_test) == 0:
            return -1.0
        m = metrics_from_counts(confusion_counts(params, self.X_test, self.y_test))
        return m.accuracy if m.accuracy is not None else -1.0

    def local_counts(self, params: ModelParams) -> ConfusionCounts:
        if len(self.y_test) == 0:
            return ConfusionCounts()
        return confusion_counts(params, self.X_test, self.y_test)


@dataclass(frozen=True)
class FedConfig:
    strategy: str = "fedavg"
    global_epochs: int = 100
    mu: float = 0.01
    btsc_fraction: float | None = None
    dropout_prob: float = 0.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError("strategy must be one of %s" % (STRATEGIES,))
        if self.global_epochs < 0:
            raise ValueError("global_epochs must be non-negative")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.btsc_fraction is not None and not 0.0 < self.btsc_fraction <= 1.0:
            raise ValueError("btsc_fraction must lie in (0, 1]")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must lie in [0, 1)")


@dataclass
class RoundReport:
    epoch: int
    strategy: str
    accuracy: float | None
    detection_rate: float | None
    false_positive_rate: float | None
    bytes_up: int
    bytes_down: int
    participants: tuple = ()
    client_accuracy: dict = field(default_factory=dict)


def write_round_reports(path: str | Path, reports: list) -> None:
    """One line per round: epoch,strategy,acc,dr,fpr,bytes_up,bytes_down."""
    lines = ["epoch,strategy,acc,dr,fpr,bytes_up,bytes_down"]
    for r in reports:
        lines.append(
            "%d,%s,%s,%s,%s,%d,%d"
            % (
                r.epoch,
                r.strategy,
                "absent" if r.accuracy is None else "%.6g" % r.accuracy,
                "absent" if r.detection_rate is None else "%.6g" % r.detection_rate,
                "absent" if r.false_positive_rate is None else "%.6g" % r.false_positive_rate,
                r.bytes_up,
                r.bytes_down,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def fedavg_aggregate(updates: list) -> np.ndarray:
    """Mean of (node_id, vector) updates, bitwise order-independent."""
    if not updates:
        raise ValueError("nothing to aggregate")
    ordered = sorted(updates, key=lambda u: u[0])
    stack = np.stack([w for _, w in ordered])
    if len({w.shape for _, w in ordered}) != 1:
        raise ValueError("update length mismatch")
    return np.mean(stack, axis=0)


def btsc_select(scores: dict, fraction: float) -> list:
    """Top ceil(fraction*N) node ids by score, best first, ties by lower id."""
    k = max(math.ceil(fraction * len(scores)), 1)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [nid for nid, _ in ranked[:k]]


def run_federation(clients: list, arch: ArchSpec, fcfg: FedConfig, seed: int):
    """Round-based federation; returns (global params, per-round reports)."""
    if not clients:
        raise ValueError("run_federation needs at least one client")
    clients = sorted(clients, key=lambda c: c.node_id)
    params = init_params(arch, seed)
    weight_bytes = params.w.size * BYTES_PER_WEIGHT
    n = len(clients)
    reports = []
    prev_scores = None
    need_rank = fcfg.btsc_fraction is not None
    part_rng = rngmod.substream(seed, rngmod.FED) if fcfg.dropout_prob else None
    for r in range(fcfg.global_epochs):
        alive = clients
        if part_rng is not None:
            alive = [c for c in clients if part_rng.random() >= fcfg.dropout_prob]
            if not alive:
                alive = clients
        if fcfg.btsc_fraction is not None and prev_scores is not None:
            chosen = set(btsc_select(prev_scores, fcfg.btsc_fraction))
        else:
            chosen = {c.node_id for c in clients}
        uploaders = [c for c in alive if c.node_id in chosen] or alive

        if fcfg.strategy in ("fedavg", "fedprox"):
            mu = fcfg.mu if fcfg.strategy == "fedprox" else 0.0
            epoch_base = r * fcfg.train.local_epochs
            locals_ = {
                c.node_id: c.train_update(params, fcfg.train, seed, epoch_base, mu)
                for c in alive
            }
            upload_ids = {c.node_id for c in uploaders}
            params = ModelParams(
                arch,
                fedavg_aggregate([(nid, p.w) for nid, p in locals_.items() if nid in upload_ids]),
            )
            bytes_up = len(upload_ids) * weight_bytes
            bytes_down = n * weight_bytes
            if need_rank:
                scores = {c.node_id: c.rank_accuracy(locals_[c.node_id]) for c in alive}
        else:
            plans = {c.node_id: c.begin_round(fcfg.train, seed, r) for c in uploaders}
            steps = max(len(p) for p in plans.values())
            bytes_up = 0
            bytes_down = 0
            for s in range(steps):
                grads = [
                    (c.node_id, c.batch_grad(params, plans[c.node_id][s]))
                    for c in uploaders
                    if s < len(plans[c.node_id])
                ]
                params = ModelParams(arch, params.w - fcfg.train.learning_rate * fedavg_aggregate(grads))
                bytes_up += len(grads) * weight_bytes
                bytes_down += n * weight_bytes
            if need_rank:
                scores = {c.node_id: c.rank_accuracy(params) for c in alive}

        if need_rank:
            if prev_scores is not None:
                # dropped clients keep their stale ranking
                scores = {**prev_scores, **scores}
            prev_scores = scores
        counts = ConfusionCounts()
        for c in clients:
            counts = counts + c.local_counts(params)
        m = metrics_from_counts(counts)
        reports.append(
            RoundReport(
                epoch=r + 1,
                strategy=fcfg.strategy,
                accuracy=m.accuracy,
                detection_rate=m.detection_rate,
                false_positive_rate=m.false_positive_rate,
                bytes_up=bytes_up,
                bytes_down=bytes_down,
                participants=tuple(sorted(c.node_id for c in uploaders)),
                client_accuracy=dict(sorted(scores.items())) if need_rank else {},
            )
        )
    return params, reports


# ------------------------------------------------- non-federated baselines


def train_cids(arch: ArchSpec, X, y, tcfg: TrainConfig, epochs: int, seed: int, X_test=None, y_test=None):
    """Single pooled-data model; optional per-epoch test-accuracy curve."""
    if X.shape[0] == 0:
        raise ValueError("pooled training set is empty")
    params = init_params(arch, seed)
    curve = []
    for e in range(epochs):
        rng = rngmod.substream(seed, rngmod.TRAIN, e)
        params = sgd_epoch(params, X, y, tcfg, rng)
        if X_test is not None and len(y_test):
            m = metrics_from_counts(confusion_counts(params, X_test, y_test, tcfg.threshold))
            curve.append((e + 1, m.accuracy))
    return params, curve


@dataclass
class LidsReport:
    client_metrics: dict
    mean_accuracy: float | None
    mean_detection_rate: float | None
    mean_false_positive_rate: float | None
    best_accuracy: float | None
    worst_accuracy: float | None
    excluded: tuple = ()
    single_class: tuple = ()

    @property
    def spread(self) -> float | None:
        if self.best_accuracy is None or self.worst_accuracy is None:
            return None
        return self.best_accuracy - self.worst_accuracy


def _mean_defined(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def train_lids(clients: list, arch: ArchSpec, tcfg: TrainConfig, epochs: int, seed: int):
    """Independent per-node models, identical init; headline metrics are the
    unweighted means over clients with local test data (best/worst kept)."""
    clients = sorted(clients, key=lambda c: c.node_id)
    models = {}
    per_client = {}
    excluded = []
    single_class = []
    for c in clients:
        if c.X_train.shape[0] == 0:
            raise ValueError("client %d has no training windows" % c.node_id)
        params = init_params(arch, seed)
        for e in range(epochs):
            rng = rngmod.substream(seed, rngmod.TRAIN, e)
            params = sgd_epoch(params, c.X_train, c.y_train, tcfg, rng)
        models[c.node_id] = params
        if len(set(np.asarray(c.y_train).tolist())) < 2:
            single_class.append(c.node_id)
        if len(c.y_test) == 0:
            excluded.append(c.node_id)
            continue
        per_client[c.node_id] = metrics_from_counts(
            confusion_counts(params, c.X_test, c.y_test, tcfg.threshold)
        )
    accs = [m.accuracy for m in per_client.values() if m.accuracy is not None]
    report = LidsReport(
        client_metrics=per_client,
        mean_accuracy=_mean_defined(accs),
        mean_detection_rate=_mean_defined([m.detection_rate for m in per_client.values()]),
        mean_false_positive_rate=_mean_defined(
            [m.false_positive_rate for m in per_client.values()]
        ),
        best_accuracy=max(accs) if accs else None,
        worst_accuracy=min(accs) if accs else None,
        excluded=tuple(excluded),
        single_class=tuple(single_class),
    )
    return models, report
