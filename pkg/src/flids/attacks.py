"""Routing attack behaviours.

Attackers are regular AODV nodes until `active_from`; before that their runs
are byte-identical to the same-seed benign run. Once active:

- sinkhole: answers every RREQ with a forged RREP claiming a one-hop route
  and an inflated destination sequence number, and stops rebroadcasting
  RREQs, so traffic converges on the attacker;
- blackhole: sinkhole lure plus silent discarding of every data packet it
  attracts; it emits no RERRs and its drops appear only in the run summary;
- flooding: every `FLOOD_PERIOD` seconds injects a burst of `FLOOD_BURST`
  RREQs with fresh ids toward one seeded-random destination, so the whole
  network keeps flooding them.

Sinkhole and blackhole nodes also curate their telemetry: once active, the
windows they report replay their own pre-attack windows instead of the real
counters (`replay_telemetry`, applied by the engine at window boundaries).
A node that drops traffic covertly has no reason to hand the IDS a log of
it; victims still record everything they see. Flooding makes no attempt to
hide, so its telemetry stays honest.
"""

from __future__ import annotations

from .aodv import DUP_HORIZON, AodvNode, Rrep, Rreq

SEQ_INFLATION = 100
FLOOD_BURST = 10
FLOOD_PERIOD = 3.0


class SinkholeNode(AodvNode):
    replay_telemetry = True

    def __init__(self, node_id, engine, active_from, seq_inflation=SEQ_INFLATION):
        super().__init__(node_id, engine)
        self.active_from = active_from
        self.seq_inflation = seq_inflation
        self.private_drops = 0

    def _active(self, t) -> bool:
        return t >= self.active_from

    def _answer_rreq(self, t, rreq, from_node):
        if not self._active(t) or rreq.dst == self.node_id:
            super()._answer_rreq(t, rreq, from_node)
            return
        fake = Rrep(self.node_id, rreq.origin, rreq.dst, rreq.dest_seq + self.seq_inflation, 1)
        self._send_rrep(t, fake, originated=True)

    def _on_data(self, t, pkt, from_node):
        if not self._active(t) or pkt.dst == self.node_id:
            super()._on_data(t, pkt, from_node)
            return
        route = self._usable_route(t, pkt.dst)
        if route is not None:
            self._transmit_data(t, pkt, route)
        else:
            # keep the lure credible: try to find a real route, drop quietly
            # on failure instead of advertising the failure upstream
            self._queue_or_discover(t, pkt)

    def _drop_data(self, t, pkt, reason):
        if self._active(t):
            self.private_drops += 1
            self.engine.count_drop(pkt, t, reason, concealed=True)
        else:
            super()._drop_data(t, pkt, reason)


class BlackholeNode(SinkholeNode):
    def _on_data(self, t, pkt, from_node):
        if not self._active(t) or pkt.dst == self.node_id:
            AodvNode._on_data(self, t, pkt, from_node)
            return
        self.private_drops += 1
        self.engine.count_drop(pkt, t, "blackhole", concealed=True)

    def _rerr_allowed(self, t) -> bool:
        return not self._active(t)


class FloodingNode(AodvNode):
    def __init__(self, node_id, engine, active_from, burst=FLOOD_BURST):
        super().__init__(node_id, engine)
        self.active_from = active_from
        self.burst = burst

    def on_attack_tick(self, t):
        if t < self.active_from:
            return
        target = self.engine.draw_flood_target(self.node_id)
        entry = self.routes.get(target)
        known_seq = entry.dest_seq if entry is not None else 0
        for _ in range(self.burst):
            self.own_seq += 1
            rreq_id = self.next_rreq_id
            self.next_rreq_id += 1
            self.seen_rreq[(self.node_id, rreq_id)] = t + DUP_HORIZON
            self._send_rreq(t, Rreq(self.node_id, rreq_id, target, self.own_seq, known_seq, 0))
