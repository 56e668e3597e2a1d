"""Scenario configuration and the flat key=value config file format."""

from __future__ import annotations

from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

ALLOWED_ATTACKER_RATIOS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25)

MOBILITY_TICK = 0.5
HOP_LATENCY = 0.002


class AttackType(Enum):
    NONE = "none"
    SINKHOLE = "sinkhole"
    BLACKHOLE = "blackhole"
    FLOODING = "flooding"


class Role(Enum):
    SOURCE = "source"
    DESTINATION = "destination"
    RELAY = "relay"
    ATTACKER = "attacker"
    GBS = "gbs"


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation run. Attack runs last 2x sim_duration: the first half is
    dormant (byte-identical to the same-seed benign run), attacks start at
    t = sim_duration."""

    node_count: int = 50
    area: tuple[float, float, float] = (12000.0, 12000.0, 300.0)
    sim_duration: float = 1800.0
    mean_speed: float = 100.0
    gm_alpha: float = 0.75
    tx_range: float = 250.0
    traffic_pairs: int = 10
    packet_size: int = 512
    packet_rate: float = 1.0
    attacker_ratio: float = 0.0
    attack_type: AttackType = AttackType.NONE
    seq_inflation: int = 100
    window_len: float = 5.0
    warmup: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.node_count) != self.node_count or self.node_count < 2:
            raise ValueError("node_count must be an integer >= 2")
        if len(self.area) != 3 or any(d <= 0 for d in self.area):
            raise ValueError("area dimensions must all be positive")
        if self.sim_duration <= 0:
            raise ValueError("sim_duration must be positive")
        if self.mean_speed < 0:
            raise ValueError("mean_speed must be >= 0")
        if not 0.0 <= self.gm_alpha <= 1.0:
            raise ValueError("gm_alpha must lie in [0, 1]")
        if self.tx_range <= 0:
            raise ValueError("tx_range must be positive")
        if self.traffic_pairs < 1:
            raise ValueError("traffic_pairs must be >= 1")
        if self.packet_size < 1:
            raise ValueError("packet_size must be >= 1")
        if self.packet_rate <= 0:
            raise ValueError("packet_rate must be positive")
        if not any(abs(self.attacker_ratio - r) < 1e-9 for r in ALLOWED_ATTACKER_RATIOS):
            raise ValueError(
                "attacker_ratio must be one of %s"
                % (", ".join("%.2f" % r for r in ALLOWED_ATTACKER_RATIOS))
            )
        if self.attack_type is AttackType.NONE and self.attacker_ratio > 0:
            raise ValueError("attacker_ratio must be 0 when attack_type is none")
        if self.attack_type is not AttackType.NONE:
            if self.attacker_ratio == 0:
                raise ValueError("attacker_ratio must be > 0 for attack scenarios")
            if self.attacker_count < 1:
                raise ValueError(
                    "attacker_ratio %.2f rounds to zero attackers for node_count %d"
                    % (self.attacker_ratio, self.node_count)
                )
        if self.seq_inflation < 1:
            raise ValueError("seq_inflation must be >= 1")
        if self.window_len <= 0:
            raise ValueError("window_len must be positive")
        if not 0 <= self.warmup < self.sim_duration:
            raise ValueError("warmup must lie in [0, sim_duration)")
        if self.node_count < 2 * self.traffic_pairs + self.attacker_count:
            raise ValueError(
                "node_count too small: need 2*traffic_pairs + attackers distinct nodes"
            )

    @property
    def attacker_count(self) -> int:
        return int(round(self.attacker_ratio * self.node_count))

    @property
    def gbs_id(self) -> int:
        # ground station is the extra (node_count+1)-th log source
        return self.node_count

    @property
    def active_from(self) -> float | None:
        if self.attack_type is AttackType.NONE:
            return None
        return self.sim_duration

    @property
    def total_duration(self) -> float:
        if self.attack_type is AttackType.NONE:
            return self.sim_duration
        return 2.0 * self.sim_duration

    @property
    def scenario_id(self) -> str:
        return "%s-r%02d-s%d" % (
            self.attack_type.value,
            int(round(self.attacker_ratio * 100)),
            self.seed,
        )


def _parse_value(name: str, typ: str, raw: str):
    raw = raw.strip()
    try:
        if name == "area":
            parts = [float(p) for p in raw.split(",")]
            return tuple(parts)
        if name == "attack_type":
            return AttackType(raw)
        if typ == "int":
            return int(raw)
        return float(raw)
    except (ValueError, KeyError) as exc:
        raise ValueError("bad value for config key %r: %r" % (name, raw)) from exc


_FIELD_TYPES = {
    "node_count": "int",
    "traffic_pairs": "int",
    "packet_size": "int",
    "seq_inflation": "int",
    "seed": "int",
}


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse the flat key=value scenario format. Unknown keys are rejected."""
    known = {f.name for f in fields(ScenarioConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError("line %d is not key=value: %r" % (lineno, line))
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError("unknown config key: %r" % key)
        values[key] = _parse_value(key, _FIELD_TYPES.get(key, "float"), raw)
    return ScenarioConfig(**values)


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config_text(Path(path).read_text())


def format_config(cfg: ScenarioConfig) -> str:
    lines = []
    for f in fields(ScenarioConfig):
        val = getattr(cfg, f.name)
        if f.name == "area":
            text = ",".join(repr(float(v)) for v in val)
        elif f.name == "attack_type":
            text = val.value
        else:
            text = repr(val)
        lines.append("%s=%s" % (f.name, text))
    return "\n".join(lines) + "\n"


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(format_config(cfg))
