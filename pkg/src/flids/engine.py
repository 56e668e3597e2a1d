"""Deterministic discrete-event FANET simulator.

One `Engine` runs one scenario: Gauss-Markov mobility on a tick grid, disc
radio adjacency, AODV routing with optional attackers, CBR traffic between
seeded pairs, and per-node feature windows. All randomness comes from named
substreams of the scenario seed (see flids.rng), so a run is reproducible
byte-for-byte and an attack run's dormant phase replays the same-seed benign
run exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .aodv import TTL, AodvNode
from .attacks import FLOOD_PERIOD, BlackholeNode, FloodingNode, SinkholeNode
from .config import HOP_LATENCY, MOBILITY_TICK, AttackType, Role, ScenarioConfig, format_config
from .events import (
    EV_APP_SEND,
    EV_ARRIVAL,
    EV_ATTACK,
    EV_MOBILITY,
    EV_TIMER,
    EV_WINDOW,
    EventQueue,
)
from .features import features_from_lines, format_line
from .mobility import NodeState, gm_step
from .net import neighbors


@dataclass
class ScenarioResult:
    cfg: ScenarioConfig
    windows: dict  # node_id -> list of (window_start, feature vector)
    summary: dict
    ground_truth: list  # (node_id, attack kind, active_from)
    meta: dict
    log_lines: dict | None = field(default=None, repr=False)

    @property
    def node_ids(self) -> list[int]:
        return list(range(self.cfg.node_count)) + [self.cfg.gbs_id]


def window_count(total_duration: float, warmup: float, window_len: float) -> int:
    return int(math.floor((total_duration - warmup) / window_len + 1e-9))


class Engine:
    def __init__(self, cfg: ScenarioConfig, *, positions=None, pairs=None, keep_logs=False):
        self.cfg = cfg
        self.end = cfg.total_duration
        self.active_from = cfg.active_from if cfg.active_from is not None else math.inf
        self.keep_logs = keep_logs
        self.packet_size = cfg.packet_size
        self.now = 0.0
        self.queue = EventQueue()

        n = cfg.node_count
        topo_rng = rngmod.substream(cfg.seed, rngmod.TOPOLOGY)
        self.mob_rng = rngmod.substream(cfg.seed, rngmod.MOBILITY)
        traffic_rng = rngmod.substream(cfg.seed, rngmod.TRAFFIC)

        if positions is None:
            pos = topo_rng.uniform(0.0, np.asarray(cfg.area, dtype=float), size=(n, 3))
        else:
            pos = np.asarray(positions, dtype=float)
            if pos.shape != (n, 3):
                raise ValueError("positions override must have shape (node_count, 3)")
        mean_dirs = topo_rng.uniform(0.0, 2.0 * math.pi, n)
        # AODV only ever compares sequence numbers per destination, so each
        # node's counter may start anywhere; random origins keep the absolute
        # magnitude a node observes uncorrelated with how long the run has
        # been going (the window features must reflect behaviour, not wall
        # time). The spread dwarfs the +1-per-discovery growth of a run.
        seq_bases = topo_rng.integers(0, 10000, size=n + 1)

        if pairs is None:
            draw = traffic_rng.choice(n, size=2 * cfg.traffic_pairs, replace=False)
            self.pairs = [(int(draw[2 * i]), int(draw[2 * i + 1])) for i in range(cfg.traffic_pairs)]
        else:
            self.pairs = [(int(s), int(d)) for s, d in pairs]
        endpoints = {s for s, _ in self.pairs} | {d for _, d in self.pairs}

        self.attacker_set: set[int] = set()
        self.attack_rng = None
        if cfg.attack_type is not AttackType.NONE:
            self.attack_rng = rngmod.substream(cfg.seed, rngmod.ATTACK)
            candidates = [i for i in range(n) if i not in endpoints]
            if len(candidates) < cfg.attacker_count:
                raise ValueError("not enough relay nodes to host the attackers")
            perm = self.attack_rng.permutation(len(candidates))
            self.attacker_set = {candidates[int(j)] for j in perm[: cfg.attacker_count]}

        roles = {}
        for i in range(n):
            if i in self.attacker_set:
                roles[i] = Role.ATTACKER
            elif i in {s for s, _ in self.pairs}:
                roles[i] = Role.SOURCE
            elif i in {d for _, d in self.pairs}:
                roles[i] = Role.DESTINATION
            else:
                roles[i] = Role.RELAY

        self.states: dict[int, NodeState] = {}
        for i in range(n):
            self.states[i] = NodeState(
                node_id=i,
                x=float(pos[i, 0]),
                y=float(pos[i, 1]),
                z=float(pos[i, 2]),
                speed=cfg.mean_speed,
                direction=float(mean_dirs[i]),
                pitch=0.0,
                mean_direction=float(mean_dirs[i]),
                role=roles[i],
            )
        ax, ay, az = cfg.area
        self.states[cfg.gbs_id] = NodeState(
            node_id=cfg.gbs_id,
            x=ax / 2.0,
            y=ay / 2.0,
            z=az / 2.0,
            speed=0.0,
            direction=0.0,
            pitch=0.0,
            mean_direction=0.0,
            role=Role.GBS,
        )
        self.all_ids = list(range(n)) + [cfg.gbs_id]

        if positions is None and cfg.mean_speed > 0:
            # walk the mobility process to its steady state before t=0; a raw
            # uniform draw needs a few area crossings to mix, which would make
            # early windows look different from late ones for no routing
            # reason. Explicit positions are taken literally.
            burnin = min(int(3.0 * max(cfg.area) / cfg.mean_speed / MOBILITY_TICK), 2000)
            for _ in range(burnin):
                for i in range(n):
                    self.states[i] = gm_step(self.states[i], cfg, self.mob_rng)

        self.nodes: dict[int, AodvNode] = {}
        for i in self.all_ids:
            if i in self.attacker_set:
                if cfg.attack_type is AttackType.SINKHOLE:
                    node = SinkholeNode(i, self, self.active_from, cfg.seq_inflation)
                elif cfg.attack_type is AttackType.BLACKHOLE:
                    node = BlackholeNode(i, self, self.active_from, cfg.seq_inflation)
                else:
                    node = FloodingNode(i, self, self.active_from)
            else:
                node = AodvNode(i, self)
            node.own_seq = int(seq_bases[min(i, n)])
            self.nodes[i] = node

        self._flood_pools = {
            a: [i for i in range(n) if i != a] for a in sorted(self.attacker_set)
        }

        self.windows: dict[int, list] = {i: [] for i in self.all_ids}
        self._replay_src: dict[int, list] = {}
        self.log_lines: dict[int, list] | None = (
            {i: [] for i in self.all_ids} if keep_logs else None
        )

        # run accounting (never fed back into node behaviour)
        self.stats = {
            "originated": 0,
            "originated_active": 0,
            "delivered": 0,
            "delivered_active": 0,
            "dropped": 0,
            "dropped_concealed": 0,
            "rreq_originated": 0,
            "rreq_originated_active": 0,
            "latency_sum": 0.0,
        }
        self._open_discoveries: dict = {}
        self._heard_by_attacker: set = set()
        self.disc_with_adjacent_attacker = 0
        self.disc_traversing_attacker = 0

        self.adj: list[set[int]] = [set() for _ in self.all_ids]
        self._recompute_adjacency(0.0)
        self._schedule_static_events()

    # ------------------------------------------------------------ schedule

    def _schedule_static_events(self):
        cfg = self.cfg
        n_ticks = int(round(self.end / MOBILITY_TICK))
        for k in range(1, n_ticks + 1):
            self.queue.push(k * MOBILITY_TICK, EV_MOBILITY, -1)
        self.queue.push(cfg.warmup, EV_WINDOW, -1, "reset")
        for k in range(window_count(self.end, cfg.warmup, cfg.window_len)):
            self.queue.push(cfg.warmup + (k + 1) * cfg.window_len, EV_WINDOW, -1, ("close", k))
        n_sends = int(math.floor(self.end * cfg.packet_rate + 1e-9))
        for src, dst in self.pairs:
            for j in range(1, n_sends + 1):
                self.queue.push(j / cfg.packet_rate, EV_APP_SEND, src, dst)
        if cfg.attack_type is AttackType.FLOODING:
            for a in sorted(self.attacker_set):
                t = self.active_from
                while t < self.end - 1e-9:
                    self.queue.push(t, EV_ATTACK, a)
                    t += FLOOD_PERIOD

    # ------------------------------------------------------------ transport

    def broadcast(self, sender, pkt):
        t = self.now + HOP_LATENCY
        for nb in sorted(self.adj[sender]):
            self.queue.push(t, EV_ARRIVAL, nb, (pkt, sender))

    def unicast(self, sender, to, pkt) -> bool:
        if to not in self.adj[sender]:
            return False
        self.queue.push(self.now + HOP_LATENCY, EV_ARRIVAL, to, (pkt, sender))
        return True

    def schedule_timer(self, t, node, payload):
        self.queue.push(t, EV_TIMER, node, payload)

    def neighbors_of(self, node) -> set:
        return self.adj[node]

    def draw_flood_target(self, attacker) -> int:
        pool = self._flood_pools[attacker]
        return pool[int(self.attack_rng.integers(len(pool)))]

    # ----------------------------------------------------------- accounting

    def count_originated(self, pkt, t):
        self.stats["originated"] += 1
        if t >= self.active_from:
            self.stats["originated_active"] += 1

    def note_delivery(self, pkt, t):
        self.stats["delivered"] += 1
        if pkt.created >= self.active_from:
            self.stats["delivered_active"] += 1
        self.stats["latency_sum"] += t - pkt.created

    def count_drop(self, pkt, t, reason, concealed=False):
        self.stats["dropped"] += 1
        if concealed:
            self.stats["dropped_concealed"] += 1

    def count_rreq_origin(self, t):
        self.stats["rreq_originated"] += 1
        if t >= self.active_from:
            self.stats["rreq_originated_active"] += 1

    def note_discovery(self, origin, rreq_id, dst, t):
        if t >= self.active_from and origin not in self.attacker_set:
            self._open_discoveries[(origin, rreq_id)] = dst

    def note_rreq_heard(self, node, origin, rreq_id, t):
        if node in self.attacker_set and t >= self.active_from:
            self._heard_by_attacker.add((origin, rreq_id))

    def note_discovery_done(self, origin, rreq_id, dst, t):
        key = (origin, rreq_id)
        if key not in self._open_discoveries:
            return
        del self._open_discoveries[key]
        if key in self._heard_by_attacker:
            self.disc_with_adjacent_attacker += 1
            if self._route_walk_hits_attacker(origin, dst):
                self.disc_traversing_attacker += 1

    def _route_walk_hits_attacker(self, origin, dst) -> bool:
        cur = origin
        for _ in range(TTL + 1):
            if cur == dst:
                return False
            if cur in self.attacker_set and cur != origin:
                return True
            entry = self.nodes[cur].routes.get(dst)
            if entry is None or not entry.active:
                return False
            cur = entry.next_hop
        return False

    # ------------------------------------------------------------- dynamics

    def _recompute_adjacency(self, t):
        pos = np.empty((len(self.all_ids), 3))
        for idx, i in enumerate(self.all_ids):
            s = self.states[i]
            pos[idx, 0] = s.x
            pos[idx, 1] = s.y
            pos[idx, 2] = s.z
        new_adj = neighbors(pos, self.cfg.tx_range)
        # positions row idx == node id because gbs_id == node_count
        for i in self.all_ids:
            old = self.adj[i]
            new = new_adj[i]
            for j in sorted(new - old):
                self.nodes[i].emit(t, "neigh_add", i, j)
            for j in sorted(old - new):
                self.nodes[i].emit(t, "neigh_del", i, j)
        self.adj = new_adj

    def _mobility_tick(self, t):
        for i in range(self.cfg.node_count):
            self.states[i] = gm_step(self.states[i], self.cfg, self.mob_rng)
        self._recompute_adjacency(t)

    def _flush_node(self, i):
        node = self.nodes[i]
        if self.log_lines is not None and node.buf:
            out = self.log_lines[i]
            for line in node.buf:
                out.append(format_line(line))
        node.buf.clear()

    def _window_event(self, t, payload):
        if payload == "reset":
            for i in self.all_ids:
                self._flush_node(i)
            return
        _, k = payload
        start = self.cfg.warmup + k * self.cfg.window_len
        active_from = self.cfg.active_from
        for i in self.all_ids:
            node = self.nodes[i]
            node.prune(t)
            replays = active_from is not None and getattr(node, "replay_telemetry", False)
            src = self._replay_src.get(i) if replays else None
            if replays and start >= active_from and src:
                # curated telemetry: cycle the node's own pre-attack windows,
                # shifted to the current window, in place of its real counters
                base = src[(k - len(src)) % len(src)]
                node.buf = [(start + e[0],) + e[1:] for e in base]
            else:
                active_routes, mean_hop = node.state_snapshot(t)
                node.emit(start, "wstate", i, -1, active_routes, len(self.adj[i]), "%.6g" % mean_hop)
                if replays:
                    archived = [(e[0] - start,) + e[1:] for e in node.buf]
                    self._replay_src.setdefault(i, []).append(archived)
            self.windows[i].append((start, features_from_lines(node.buf)))
            self._flush_node(i)

    # ------------------------------------------------------------------ run

    def run(self) -> ScenarioResult:
        queue = self.queue
        nodes = self.nodes
        while queue:
            t, rank, node_id, _seq, payload = queue.pop()
            if t > self.end:
                break
            self.now = t
            if rank == EV_ARRIVAL:
                pkt, sender = payload
                nodes[node_id].on_packet(t, pkt, sender)
            elif rank == EV_MOBILITY:
                self._mobility_tick(t)
            elif rank == EV_APP_SEND:
                nodes[node_id].on_app_send(t, payload)
            elif rank == EV_TIMER:
                nodes[node_id].on_timer(t, payload)
            elif rank == EV_ATTACK:
                nodes[node_id].on_attack_tick(t)
            else:
                self._window_event(t, payload)
        for i in self.all_ids:
            self._flush_node(i)
        return ScenarioResult(
            cfg=self.cfg,
            windows=self.windows,
            summary=self._summary(),
            ground_truth=self._ground_truth(),
            meta=self._meta(),
            log_lines=self.log_lines,
        )

    def _ground_truth(self):
        kind = self.cfg.attack_type.value
        return [(a, kind, self.cfg.active_from) for a in sorted(self.attacker_set)]

    def _meta(self):
        cfg = self.cfg
        return {
            "scenario_id": cfg.scenario_id,
            "attack_type": cfg.attack_type.value,
            "active_from": "none" if cfg.active_from is None else repr(cfg.active_from),
            "total_duration": repr(cfg.total_duration),
            "warmup": repr(cfg.warmup),
            "window_len": repr(cfg.window_len),
            "node_count": str(cfg.node_count),
            "gbs_id": str(cfg.gbs_id),
            "n_windows": str(window_count(self.end, cfg.warmup, cfg.window_len)),
        }

    def _summary(self):
        s = dict(self.stats)
        originated = s["originated"]
        s["pdr"] = s["delivered"] / originated if originated else 0.0
        if self.cfg.attack_type is not AttackType.NONE:
            oa = s["originated_active"]
            s["pdr_active"] = s["delivered_active"] / oa if oa else 0.0
        s["mean_latency"] = s.pop("latency_sum") / s["delivered"] if s["delivered"] else 0.0
        s["scenario_id"] = self.cfg.scenario_id
        s["seed"] = self.cfg.seed
        s["attack_type"] = self.cfg.attack_type.value
        s["attacker_ratio"] = self.cfg.attacker_ratio
        s["attackers"] = sorted(self.attacker_set)
        s["traffic_pairs"] = self.pairs
        s["disc_with_adjacent_attacker"] = self.disc_with_adjacent_attacker
        s["disc_traversing_attacker"] = self.disc_traversing_attacker
        s["private_drops"] = {
            str(a): getattr(self.nodes[a], "private_drops", 0) for a in sorted(self.attacker_set)
        }
        return s


def write_run(result: ScenarioResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta_text = format_config(result.cfg) + "".join(
        "%s=%s\n" % (k, v) for k, v in result.meta.items()
    )
    (out / "scenario.meta").write_text(meta_text)
    (out / "ground_truth.txt").write_text(
        "".join("%d %s %s\n" % (a, kind, "%g" % t) for a, kind, t in result.ground_truth)
    )
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    if result.log_lines is not None:
        for i, lines in result.log_lines.items():
            (out / ("node_%03d.log" % i)).write_text("\n".join(lines) + ("\n" if lines else ""))
    return out


def run_scenario(
    cfg: ScenarioConfig,
    out_dir: str | Path | None = None,
    *,
    positions=None,
    pairs=None,
    keep_logs: bool | None = None,
) -> ScenarioResult:
    """Run one scenario; optionally persist logs + metadata under out_dir.

    positions/pairs are testing hooks overriding the seeded draws."""
    if keep_logs is None:
        keep_logs = out_dir is not None
    engine = Engine(cfg, positions=positions, pairs=pairs, keep_logs=keep_logs)
    result = engine.run()
    if out_dir is not None:
        write_run(result, out_dir)
    return result
