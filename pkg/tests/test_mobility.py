import math

import numpy as np
import pytest

from flids.config import MOBILITY_TICK, ScenarioConfig
from flids.mobility import NodeState, _fold, gm_step


class StubRng:
    """Returns a fixed Gaussian triple so the update is hand-checkable."""

    def __init__(self, g):
        self.g = np.asarray(g, dtype=float)

    def standard_normal(self, n):
        assert n == 3
        return self.g


def make_state(**kw):
    base = dict(node_id=0, x=100.0, y=100.0, z=50.0, speed=10.0,
                direction=0.3, pitch=0.0, mean_direction=0.3)
    base.update(kw)
    return NodeState(**base)


def test_gm_update_matches_formula():
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, area=(1000.0, 1000.0, 200.0),
                         mean_speed=20.0, gm_alpha=0.75)
    st = make_state(speed=12.0, direction=0.4, pitch=0.1, mean_direction=0.9)
    g = (0.5, -0.25, 0.125)
    out = gm_step(st, cfg, StubRng(g))

    noise = math.sqrt(1.0 - 0.75 ** 2)
    speed = 0.75 * 12.0 + 0.25 * 20.0 + noise * 0.5
    direction = 0.75 * 0.4 + 0.25 * 0.9 + noise * -0.25
    pitch = 0.75 * 0.1 + 0.25 * 0.0 + noise * 0.125
    assert out.speed == pytest.approx(speed)
    assert out.direction == pytest.approx(direction)
    assert out.pitch == pytest.approx(pitch)
    assert out.x == pytest.approx(st.x + speed * math.cos(pitch) * math.cos(direction) * MOBILITY_TICK)
    assert out.y == pytest.approx(st.y + speed * math.cos(pitch) * math.sin(direction) * MOBILITY_TICK)
    assert out.z == pytest.approx(st.z + speed * math.sin(pitch) * MOBILITY_TICK)


def test_alpha_one_is_static():
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, mean_speed=0.0, gm_alpha=1.0)
    st = make_state(speed=0.0)
    out = st
    for _ in range(20):
        out = gm_step(out, cfg, StubRng((3.0, -2.0, 1.0)))
    assert (out.x, out.y, out.z) == (st.x, st.y, st.z)
    assert out.speed == 0.0


def test_speed_never_negative():
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, mean_speed=1.0, gm_alpha=0.0)
    out = gm_step(make_state(speed=2.0), cfg, StubRng((-50.0, 0.0, 0.0)))
    assert out.speed == 0.0


def test_fold_mirrors_and_reports_parity():
    assert _fold(-3.0, 10.0) == (3.0, True)
    assert _fold(13.0, 10.0) == (7.0, True)
    assert _fold(4.0, 10.0) == (4.0, False)
    # two reflections land back in range with even parity
    assert _fold(23.0, 10.0) == (3.0, False)


def test_x_reflection_flips_heading_and_mean():
    # alpha=1 keeps speed/heading, so the node walks straight +x into the wall
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, area=(200.0, 1000.0, 200.0),
                         mean_speed=20.0, gm_alpha=1.0)
    st = make_state(x=198.0, y=500.0, z=100.0, speed=20.0, direction=0.0,
                    mean_direction=0.0)
    out = gm_step(st, cfg, StubRng((0.0, 0.0, 0.0)))
    assert out.x == pytest.approx(192.0)  # 198 + 10 -> folds back off 200
    assert out.direction == pytest.approx(math.pi)
    assert out.mean_direction == pytest.approx(math.pi)


def test_y_reflection_negates_heading():
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, area=(1000.0, 200.0, 200.0),
                         mean_speed=20.0, gm_alpha=1.0)
    st = make_state(x=500.0, y=198.0, z=100.0, speed=20.0,
                    direction=math.pi / 2, mean_direction=math.pi / 2)
    out = gm_step(st, cfg, StubRng((0.0, 0.0, 0.0)))
    assert out.y == pytest.approx(192.0)
    assert out.direction == pytest.approx(-math.pi / 2)
    assert out.mean_direction == pytest.approx(-math.pi / 2)


def test_z_reflection_negates_pitch():
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, area=(1000.0, 1000.0, 100.0),
                         mean_speed=20.0, gm_alpha=1.0)
    st = make_state(x=500.0, y=500.0, z=99.0, speed=20.0, direction=0.0,
                    mean_direction=0.0, pitch=math.pi / 2)
    out = gm_step(st, cfg, StubRng((0.0, 0.0, 0.0)))
    assert out.z == pytest.approx(91.0)
    assert out.pitch == pytest.approx(-math.pi / 2)


def test_stays_in_box_under_long_walk():
    cfg = ScenarioConfig(node_count=10, traffic_pairs=3, area=(300.0, 300.0, 60.0),
                         mean_speed=40.0, gm_alpha=0.5)
    rng = np.random.default_rng(0)
    st = make_state(x=10.0, y=10.0, z=5.0, speed=40.0)
    for _ in range(500):
        st = gm_step(st, cfg, rng)
        assert 0.0 <= st.x <= 300.0
        assert 0.0 <= st.y <= 300.0
        assert 0.0 <= st.z <= 60.0
