"""AODV routing node.

On-demand discovery: sources flood RREQs, receivers install reverse routes,
the destination (or an intermediate node with a fresh enough route) answers
with a unicast RREP along the reverse path, breaks propagate as RERRs to
precursors. There are no hello messages; a link break is noticed at
forwarding time when the next hop is no longer in radio range.

Nodes write their own event log as tuples
(time, kind, origin, dst, hop_count, dest_seq, note); every dataset feature
is computable from one node's lines alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

TTL = 32
ROUTE_EXPIRY = 3.0
DUP_HORIZON = 5.0
DISCOVERY_TIMEOUT = 1.0
QUEUE_CAP = 64

RREQ_BYTES = 24
RREP_BYTES = 20
RERR_BYTES = 20


class Rreq:
    __slots__ = ("origin", "rreq_id", "dst", "origin_seq", "dest_seq", "hop_count")

    def __init__(self, origin, rreq_id, dst, origin_seq, dest_seq, hop_count):
        self.origin = origin
        self.rreq_id = rreq_id
        self.dst = dst
        self.origin_seq = origin_seq
        self.dest_seq = dest_seq
        self.hop_count = hop_count


class Rrep:
    __slots__ = ("responder", "origin", "dst", "dest_seq", "hop_count")

    def __init__(self, responder, origin, dst, dest_seq, hop_count):
        self.responder = responder
        self.origin = origin
        self.dst = dst
        self.dest_seq = dest_seq
        self.hop_count = hop_count


class Rerr:
    __slots__ = ("unreachable",)

    def __init__(self, unreachable):
        self.unreachable = unreachable  # tuple of (dst, dest_seq)


class Data:
    __slots__ = ("src", "dst", "pkt_id", "size", "created", "hops")

    def __init__(self, src, dst, pkt_id, size, created, hops=0):
        self.src = src
        self.dst = dst
        self.pkt_id = pkt_id
        self.size = size
        self.created = created
        self.hops = hops


@dataclass
class RouteEntry:
    dst: int
    next_hop: int
    hop_count: int
    dest_seq: int
    expires: float
    active: bool = True
    precursors: set = field(default_factory=set)


@dataclass(frozen=True)
class RouteCandidate:
    dest_seq: int
    hop_count: int
    order: int


def _fresher(seq_a, hops_a, seq_b, hops_b) -> bool:
    """True when (seq_a, hops_a) strictly beats (seq_b, hops_b)."""
    if seq_a != seq_b:
        return seq_a > seq_b
    return hops_a < hops_b


def select_route(candidates):
    """Pick the freshest candidate: highest dest_seq, then fewest hops, then
    earliest arrival order. Returns None for an empty pool."""
    best = None
    for cand in candidates:
        if best is None:
            best = cand
        elif _fresher(cand.dest_seq, cand.hop_count, best.dest_seq, best.hop_count):
            best = cand
        elif (
            cand.dest_seq == best.dest_seq
            and cand.hop_count == best.hop_count
            and cand.order < best.order
        ):
            best = cand
    return best


class _Pending:
    __slots__ = ("rreq_id", "queue")

    def __init__(self, rreq_id):
        self.rreq_id = rreq_id
        self.queue = []


class AodvNode:
    """One routing participant. The engine object provides time (`engine.now`),
    transport (`broadcast`/`unicast`), timers and run-level accounting."""

    def __init__(self, node_id: int, engine):
        self.node_id = node_id
        self.engine = engine
        self.own_seq = 0
        self.next_rreq_id = 0
        self.next_pkt_id = 0
        self.routes: dict[int, RouteEntry] = {}
        self.seen_rreq: dict[tuple[int, int], float] = {}
        self.pending: dict[int, _Pending] = {}
        self.buf: list = []  # current-window log lines

    # ------------------------------------------------------------- logging

    def emit(self, t, kind, origin=-1, dst=-1, hop=0, seq=0, note="-"):
        self.buf.append((t, kind, origin, dst, hop, seq, note))

    # ------------------------------------------------------ engine entries

    def on_app_send(self, t, dst):
        self.emit(t, "data_orig", self.node_id, dst)
        pkt = Data(self.node_id, dst, self.next_pkt_id, self.engine.packet_size, t)
        self.next_pkt_id += 1
        self.engine.count_originated(pkt, t)
        route = self._usable_route(t, dst)
        if route is not None:
            self._transmit_data(t, pkt, route)
        else:
            self._queue_or_discover(t, pkt)

    def on_packet(self, t, pkt, from_node):
        if isinstance(pkt, Rreq):
            self._on_rreq(t, pkt, from_node)
        elif isinstance(pkt, Rrep):
            self._on_rrep(t, pkt, from_node)
        elif isinstance(pkt, Rerr):
            self._on_rerr(t, pkt, from_node)
        else:
            self._on_data(t, pkt, from_node)

    def on_timer(self, t, payload):
        kind, dst, rreq_id = payload
        if kind != "disc":
            return
        pend = self.pending.get(dst)
        if pend is None or pend.rreq_id != rreq_id:
            return  # a fresher discovery superseded this one
        del self.pending[dst]
        if self._usable_route(t, dst) is not None:
            return
        for pkt in pend.queue:
            self._drop_data(t, pkt, "no_route")

    def on_attack_tick(self, t):  # only attacker subclasses act on these
        pass

    # ------------------------------------------------------------- routing

    def _usable_route(self, t, dst):
        entry = self.routes.get(dst)
        if entry is None or not entry.active:
            return None
        if entry.expires <= t:
            entry.active = False
            self.emit(t, "route_invalid", self.node_id, dst, entry.hop_count, entry.dest_seq, "expired")
            entry.precursors = set()
            return None
        return entry

    def _install_route(self, t, dst, next_hop, hop_count, dest_seq):
        if dst == self.node_id:
            return None
        entry = self.routes.get(dst)
        if entry is None:
            self.routes[dst] = RouteEntry(dst, next_hop, hop_count, dest_seq, t + ROUTE_EXPIRY)
            self.emit(t, "route_add", self.node_id, dst, hop_count, dest_seq)
            return self.routes[dst]
        stale = not entry.active or entry.expires <= t
        if stale or _fresher(dest_seq, hop_count, entry.dest_seq, entry.hop_count):
            entry.next_hop = next_hop
            entry.hop_count = hop_count
            entry.dest_seq = dest_seq
            entry.expires = t + ROUTE_EXPIRY
            was_active = entry.active
            entry.active = True
            kind = "route_update" if was_active and not stale else "route_add"
            self.emit(t, kind, self.node_id, dst, hop_count, dest_seq)
            return entry
        return None

    def _initiate_discovery(self, t, dst):
        self.own_seq += 1
        rreq_id = self.next_rreq_id
        self.next_rreq_id += 1
        entry = self.routes.get(dst)
        known_seq = entry.dest_seq if entry is not None else 0
        self.emit(t, "disc_init", self.node_id, dst, 0, known_seq)
        self.seen_rreq[(self.node_id, rreq_id)] = t + DUP_HORIZON
        self.pending[dst] = _Pending(rreq_id)
        self.engine.schedule_timer(t + DISCOVERY_TIMEOUT, self.node_id, ("disc", dst, rreq_id))
        self.engine.note_discovery(self.node_id, rreq_id, dst, t)
        self._send_rreq(t, Rreq(self.node_id, rreq_id, dst, self.own_seq, known_seq, 0))

    def _send_rreq(self, t, rreq):
        self.emit(t, "rreq_tx", rreq.origin, rreq.dst, rreq.hop_count, rreq.dest_seq)
        self.engine.count_rreq_origin(t)
        self.engine.broadcast(self.node_id, rreq)

    def _on_rreq(self, t, rreq, from_node):
        key = (rreq.origin, rreq.rreq_id)
        seen_until = self.seen_rreq.get(key)
        if seen_until is not None and seen_until > t:
            self.emit(t, "rreq_dup", rreq.origin, rreq.dst, rreq.hop_count, rreq.dest_seq)
            return
        self.emit(t, "rreq_rx", rreq.origin, rreq.dst, rreq.hop_count, rreq.dest_seq)
        self.seen_rreq[key] = t + DUP_HORIZON
        self.engine.note_rreq_heard(self.node_id, rreq.origin, rreq.rreq_id, t)
        self._install_route(t, rreq.origin, from_node, rreq.hop_count + 1, rreq.origin_seq)
        self._answer_rreq(t, rreq, from_node)

    def _answer_rreq(self, t, rreq, from_node):
        """Reply if this node can, else keep flooding. Attackers override."""
        if rreq.dst == self.node_id:
            self.own_seq = max(self.own_seq, rreq.dest_seq) + 1
            self._send_rrep(t, Rrep(self.node_id, rreq.origin, self.node_id, self.own_seq, 0), originated=True)
            return
        route = self._usable_route(t, rreq.dst)
        if route is not None and route.dest_seq >= rreq.dest_seq:
            self._send_rrep(
                t, Rrep(self.node_id, rreq.origin, rreq.dst, route.dest_seq, route.hop_count), originated=True
            )
            return
        if rreq.hop_count + 1 <= TTL:
            fwd = Rreq(rreq.origin, rreq.rreq_id, rreq.dst, rreq.origin_seq, rreq.dest_seq, rreq.hop_count + 1)
            self.emit(t, "rreq_fwd", rreq.origin, rreq.dst, fwd.hop_count, rreq.origin_seq)
            self.engine.broadcast(self.node_id, fwd)

    def _send_rrep(self, t, rrep, originated):
        back = self._usable_route(t, rrep.origin)
        if back is None:
            return
        if rrep.origin != self.node_id and rrep.dst != self.node_id:
            fwd_entry = self.routes.get(rrep.dst)
            if fwd_entry is not None and fwd_entry.active:
                fwd_entry.precursors.add(back.next_hop)
        if self.engine.unicast(self.node_id, back.next_hop, rrep):
            back.expires = t + ROUTE_EXPIRY
            kind = "rrep_tx" if originated else "rrep_fwd"
            self.emit(t, kind, rrep.origin, rrep.dst, rrep.hop_count, rrep.dest_seq)

    def _on_rrep(self, t, rrep, from_node):
        entry = self.routes.get(rrep.dst)
        # freshness jump over what this node already knew; a first contact
        # has no baseline so its delta is 0 by definition
        delta = rrep.dest_seq - entry.dest_seq if entry is not None else 0
        self.emit(t, "rrep_rx", rrep.origin, rrep.dst, rrep.hop_count, rrep.dest_seq, "d=%d" % delta)
        installed = self._install_route(t, rrep.dst, from_node, rrep.hop_count + 1, rrep.dest_seq)
        if rrep.origin == self.node_id:
            pend = self.pending.pop(rrep.dst, None)
            if pend is not None:
                self.engine.note_discovery_done(self.node_id, pend.rreq_id, rrep.dst, t)
                route = self._usable_route(t, rrep.dst)
                for pkt in pend.queue:
                    if route is not None:
                        self._transmit_data(t, pkt, route)
                    else:
                        self._drop_data(t, pkt, "no_route")
            return
        back = self._usable_route(t, rrep.origin)
        if back is None:
            return  # reverse path evaporated; the reply dies here
        if installed is not None:
            installed.precursors.add(back.next_hop)
        back_entry = self.routes.get(rrep.origin)
        if back_entry is not None:
            back_entry.precursors.add(from_node)
        fwd = Rrep(rrep.responder, rrep.origin, rrep.dst, rrep.dest_seq, rrep.hop_count + 1)
        self._send_rrep(t, fwd, originated=False)

    # ---------------------------------------------------------------- data

    def _queue_or_discover(self, t, pkt):
        pend = self.pending.get(pkt.dst)
        if pend is None:
            self._initiate_discovery(t, pkt.dst)
            pend = self.pending[pkt.dst]
        if len(pend.queue) >= QUEUE_CAP:
            self._drop_data(t, pkt, "queue_full")
        else:
            pend.queue.append(pkt)

    def _transmit_data(self, t, pkt, route):
        if pkt.hops + 1 > TTL:
            self._drop_data(t, pkt, "ttl")
            return
        next_hop = route.next_hop
        pkt.hops += 1
        if self.engine.unicast(self.node_id, next_hop, pkt):
            route.expires = t + ROUTE_EXPIRY
            if self.node_id != pkt.src:
                self.emit(t, "data_fwd", pkt.src, pkt.dst, pkt.hops, 0)
            return
        pkt.hops -= 1
        self._handle_link_break(t, next_hop)
        self._drop_data(t, pkt, "link_break")

    def _on_data(self, t, pkt, from_node):
        if pkt.dst == self.node_id:
            self.emit(t, "data_rx", pkt.src, pkt.dst, pkt.hops, 0)
            self.engine.note_delivery(pkt, t)
            return
        route = self._usable_route(t, pkt.dst)
        if route is not None:
            self._transmit_data(t, pkt, route)
            return
        self._drop_data(t, pkt, "no_route")
        entry = self.routes.get(pkt.dst)
        seq = entry.dest_seq + 1 if entry is not None else 1
        self._send_rerr(t, ((pkt.dst, seq),), (from_node,), forwarded=False)

    def _drop_data(self, t, pkt, reason):
        self.emit(t, "data_drop", pkt.src, pkt.dst, pkt.hops, 0, reason)
        self.engine.count_drop(pkt, t, reason)

    # ------------------------------------------------------------- failure

    def _handle_link_break(self, t, dead):
        self.emit(t, "link_break", self.node_id, dead)
        affected = []
        targets: set[int] = set()
        for dst in sorted(self.routes):
            entry = self.routes[dst]
            if entry.active and entry.next_hop == dead:
                entry.active = False
                entry.dest_seq += 1  # losses advertise a fresher sequence
                self.emit(t, "route_invalid", self.node_id, dst, entry.hop_count, entry.dest_seq, "link")
                affected.append((dst, entry.dest_seq))
                targets.update(entry.precursors)
                entry.precursors = set()
        targets.discard(dead)
        if affected and targets and self._rerr_allowed(t):
            self._send_rerr(t, tuple(affected), sorted(targets), forwarded=False)

    def _rerr_allowed(self, t) -> bool:
        return True

    def _send_rerr(self, t, unreachable, targets, forwarded):
        if not self._rerr_allowed(t):
            return
        kind = "rerr_fwd" if forwarded else "rerr_tx"
        pkt = Rerr(tuple(unreachable))
        head_dst, head_seq = unreachable[0]
        for nb in targets:
            if self.engine.unicast(self.node_id, nb, pkt):
                self.emit(t, kind, head_dst, nb, 0, head_seq, "n=%d" % len(unreachable))

    def _on_rerr(self, t, rerr, from_node):
        head_dst, head_seq = rerr.unreachable[0]
        self.emit(t, "rerr_rx", head_dst, from_node, 0, head_seq, "n=%d" % len(rerr.unreachable))
        affected = []
        targets: set[int] = set()
        for dst, seq in rerr.unreachable:
            entry = self.routes.get(dst)
            if entry is not None and entry.active and entry.next_hop == from_node:
                entry.active = False
                entry.dest_seq = max(entry.dest_seq, seq)
                self.emit(t, "route_invalid", self.node_id, dst, entry.hop_count, entry.dest_seq, "rerr")
                affected.append((dst, entry.dest_seq))
                targets.update(entry.precursors)
                entry.precursors = set()
        targets.discard(from_node)
        if affected and targets and self._rerr_allowed(t):
            self._send_rerr(t, tuple(affected), sorted(targets), forwarded=True)

    # ------------------------------------------------------------ snapshot

    def state_snapshot(self, t):
        """(active_routes, mean_hop_count, ) over unexpired active entries."""
        count = 0
        hops = 0
        for entry in self.routes.values():
            if entry.active and entry.expires > t:
                count += 1
                hops += entry.hop_count
        mean_hop = hops / count if count else 0.0
        return count, mean_hop

    def prune(self, t):
        stale = [k for k, until in self.seen_rreq.items() if until <= t]
        for k in stale:
            del self.seen_rreq[k]
