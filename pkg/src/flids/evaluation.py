"""Detection metrics and cost accounting for the centralized/federated comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path


@dataclass
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float | None
    detection_rate: float | None
    false_positive_rate: float | None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "detection_rate": self.detection_rate,
            "false_positive_rate": self.false_positive_rate,
        }


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics_from_counts(c: ConfusionCounts) -> Metrics:
    """Rates are None when their denominator class is absent, never 0/0."""
    return Metrics(
        accuracy=_ratio(c.tp + c.tn, c.total),
        detection_rate=_ratio(c.tp, c.tp + c.fn),
        false_positive_rate=_ratio(c.fp, c.fp + c.tn),
    )


# ------------------------------------------------------- cost model


def cost_central(
    node_count: int, feature_count: int, bytes_per_value: int, reporting_periods: int
) -> int:
    """Raw feature upload volume: every node ships every window to the server."""
    return node_count * feature_count * bytes_per_value * reporting_periods


def cost_federated(
    client_count: int, weight_count: int, bytes_per_value: int, rounds: int
) -> int:
    """Model exchange volume: one download plus one upload per client per round."""
    return 2 * client_count * weight_count * bytes_per_value * rounds


def comm_energy(
    weight_count: int, bytes_per_value: int, rounds: int, joules_per_byte: float
) -> float:
    """Per-client radio energy for `rounds` uploads of the weight vector."""
    return weight_count * bytes_per_value * rounds * joules_per_byte


def total_energy(train_energy: float, e_com: float) -> float:
    """Per-node energy budget: local training plus communication."""
    return train_energy + e_com


# ------------------------------------------------------- report emission


def _fmt(v) -> str:
    if v is None:
        return "absent"
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)


def emit_comparison(out_dir: str | Path, cells: list[dict], curves: dict | None = None) -> None:
    """Write the per-attack/ratio/variant table plus per-epoch curve files.

    cells: dicts with attack, ratio, variant, acc, dr, fpr (missing metrics
    render as `absent`, never as zero). Cells may also carry acc_btsc; when
    any do, a btsc_improvement.csv with the plain-vs-selected delta is
    emitted. curves maps a file stem to [(epoch, acc), ...] rows.
    Emission is a pure function of the inputs: re-emitting is byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(cells, key=lambda c: (c["attack"], c["ratio"], c["variant"]))
    lines = ["attack,ratio,variant,acc,dr,fpr"]
    for c in ordered:
        lines.append(
            "%s,%s,%s,%s,%s,%s"
            % (c["attack"], _fmt(c["ratio"]), c["variant"], _fmt(c.get("acc")), _fmt(c.get("dr")), _fmt(c.get("fpr")))
        )
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")

    btsc_rows = ["attack,ratio,acc,acc_btsc,delta"]
    for c in ordered:
        if "acc_btsc" not in c:
            continue
        delta = None
        if c.get("acc") is not None and c.get("acc_btsc") is not None:
            delta = c["acc_btsc"] - c["acc"]
        btsc_rows.append(
            "%s,%s,%s,%s,%s"
            % (c["attack"], _fmt(c["ratio"]), _fmt(c.get("acc")), _fmt(c.get("acc_btsc")), _fmt(delta))
        )
    if len(btsc_rows) > 1:
        (out / "btsc_improvement.csv").write_text("\n".join(btsc_rows) + "\n")

    for stem, rows in (curves or {}).items():
        body = ["epoch,acc"]
        body.extend("%d,%s" % (epoch, _fmt(acc)) for epoch, acc in rows)
        (out / ("curve_%s.csv" % stem)).write_text("\n".join(body) + "\n")


def mean_std(values: list[float]) -> tuple[float, float]:
    vals = [v for v in values if v is not None]
    if not vals:
        return float("nan"), float("nan")
    m = sum(vals) / len(vals)
    var = sum((v - m) ** 2 for v in vals) / len(vals)
    return m, math.sqrt(var)
