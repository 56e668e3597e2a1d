"""3D Gauss-Markov mobility with reflecting boundaries.

Per tick and per component (speed, direction, pitch):

    v_n = alpha * v_{n-1} + (1 - alpha) * v_mean + sqrt(1 - alpha^2) * g

with g a standard Gaussian draw. alpha=1 keeps the previous value exactly
(used for static topologies), alpha=0 is memoryless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .config import MOBILITY_TICK, Role, ScenarioConfig


@dataclass(frozen=True)
class NodeState:
    node_id: int
    x: float
    y: float
    z: float
    speed: float
    direction: float
    pitch: float
    mean_direction: float
    role: Role = Role.RELAY
    mean_pitch: float = 0.0


def _fold(p: float, hi: float) -> tuple[float, bool]:
    # mirror back into [0, hi]; parity of reflections flips the heading
    flipped = False
    while p < 0.0 or p > hi:
        p = -p if p < 0.0 else 2.0 * hi - p
        flipped = not flipped
    return p, flipped


def gm_step(state: NodeState, cfg: ScenarioConfig, rng) -> NodeState:
    """Advance one mobility tick; returns the new state."""
    alpha = cfg.gm_alpha
    g = rng.standard_normal(3)
    noise = math.sqrt(max(0.0, 1.0 - alpha * alpha))
    speed = alpha * state.speed + (1.0 - alpha) * cfg.mean_speed + noise * g[0]
    direction = alpha * state.direction + (1.0 - alpha) * state.mean_direction + noise * g[1]
    pitch = alpha * state.pitch + (1.0 - alpha) * state.mean_pitch + noise * g[2]
    speed = max(speed, 0.0)

    horiz = speed * math.cos(pitch) * MOBILITY_TICK
    x = state.x + horiz * math.cos(direction)
    y = state.y + horiz * math.sin(direction)
    z = state.z + speed * math.sin(pitch) * MOBILITY_TICK

    ax, ay, az = cfg.area
    x, flip_x = _fold(x, ax)
    y, flip_y = _fold(y, ay)
    z, flip_z = _fold(z, az)
    mean_direction = state.mean_direction
    if flip_x:
        direction = math.pi - direction
        mean_direction = math.pi - mean_direction
    if flip_y:
        direction = -direction
        mean_direction = -mean_direction
    if flip_z:
        pitch = -pitch

    return replace(
        state,
        x=x,
        y=y,
        z=z,
        speed=speed,
        direction=direction,
        pitch=pitch,
        mean_direction=mean_direction,
    )
