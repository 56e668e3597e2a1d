"""Per-window feature vectors computed from one node's own log lines.

The schema is fixed at 31 features. Every value is derived from the node's
local event lines for the window (including the `wstate` snapshot line the
node writes at each window close), so recomputing a node's windows from its
log file alone reproduces the dataset rows exactly.
"""

from __future__ import annotations

import numpy as np

from .aodv import RERR_BYTES, RREP_BYTES, RREQ_BYTES

FEATURE_NAMES = (
    "rreq_sent",
    "rreq_received",
    "rreq_forwarded",
    "duplicate_rreq_received",
    "rrep_sent",
    "rrep_received",
    "rrep_forwarded",
    "rerr_sent",
    "rerr_received",
    "rerr_forwarded",
    "data_originated",
    "data_received_as_dst",
    "data_forwarded",
    "data_dropped_no_route",
    "discovery_initiated",
    "routes_added",
    "routes_invalidated",
    "routes_updated",
    "active_routes",
    "mean_hop_count_active",
    "max_dest_seq_seen",
    "mean_rrep_seq_delta",
    "neighbor_count",
    "neighbors_added",
    "neighbors_removed",
    "link_breaks_detected",
    "control_pkts_received_total",
    "control_bytes_received_total",
    "distinct_rreq_origins",
    "rreq_rate_per_neighbor",
    "delivery_ratio_local",
)

N_FEATURES = len(FEATURE_NAMES)

_IDX = {name: i for i, name in enumerate(FEATURE_NAMES)}

# log kinds whose dest_seq column counts as an observed sequence number
_SEQ_KINDS = frozenset(("rreq_rx", "rreq_dup", "rreq_fwd", "rrep_rx", "rrep_fwd"))

_COUNT_KINDS = {
    "rreq_tx": "rreq_sent",
    "rreq_fwd": "rreq_forwarded",
    "rreq_dup": "duplicate_rreq_received",
    "rrep_tx": "rrep_sent",
    "rrep_rx": "rrep_received",
    "rrep_fwd": "rrep_forwarded",
    "rerr_tx": "rerr_sent",
    "rerr_rx": "rerr_received",
    "rerr_fwd": "rerr_forwarded",
    "data_orig": "data_originated",
    "data_rx": "data_received_as_dst",
    "data_fwd": "data_forwarded",
    "disc_init": "discovery_initiated",
    "route_add": "routes_added",
    "route_invalid": "routes_invalidated",
    "route_update": "routes_updated",
    "neigh_add": "neighbors_added",
    "neigh_del": "neighbors_removed",
    "link_break": "link_breaks_detected",
}


def features_from_lines(lines) -> np.ndarray:
    """31-vector for one node window given its (t, kind, origin, dst, hop,
    seq, note) tuples. Order of lines within the window does not matter."""
    f = np.zeros(N_FEATURES, dtype=np.float64)
    rreq_rx_fresh = 0
    max_seq = 0
    rrep_deltas_sum = 0
    rrep_deltas_n = 0
    origins: set[int] = set()
    drops = 0
    for _t, kind, origin, _dst, hop, seq, note in lines:
        slot = _COUNT_KINDS.get(kind)
        if slot is not None:
            f[_IDX[slot]] += 1.0
        if kind == "rreq_rx":
            rreq_rx_fresh += 1
            origins.add(origin)
        elif kind == "rreq_dup":
            origins.add(origin)
        elif kind == "rrep_rx":
            rrep_deltas_sum += int(note[2:])  # note is d=<int>
            rrep_deltas_n += 1
        elif kind == "data_drop":
            drops += 1
            if note == "no_route":
                f[_IDX["data_dropped_no_route"]] += 1.0
        elif kind == "wstate":
            f[_IDX["active_routes"]] = hop
            f[_IDX["neighbor_count"]] = seq
            f[_IDX["mean_hop_count_active"]] = float(note)
        if kind in _SEQ_KINDS and seq > max_seq:
            max_seq = seq

    rreq_received = rreq_rx_fresh + f[_IDX["duplicate_rreq_received"]]
    f[_IDX["rreq_received"]] = rreq_received
    f[_IDX["max_dest_seq_seen"]] = max_seq
    if rrep_deltas_n:
        f[_IDX["mean_rrep_seq_delta"]] = rrep_deltas_sum / rrep_deltas_n
    ctrl_rx = rreq_received + f[_IDX["rrep_received"]] + f[_IDX["rerr_received"]]
    f[_IDX["control_pkts_received_total"]] = ctrl_rx
    f[_IDX["control_bytes_received_total"]] = (
        RREQ_BYTES * rreq_received
        + RREP_BYTES * f[_IDX["rrep_received"]]
        + RERR_BYTES * f[_IDX["rerr_received"]]
    )
    f[_IDX["distinct_rreq_origins"]] = len(origins)
    f[_IDX["rreq_rate_per_neighbor"]] = rreq_received / max(f[_IDX["neighbor_count"]], 1.0)
    handled = f[_IDX["data_received_as_dst"]] + f[_IDX["data_forwarded"]] + drops
    f[_IDX["delivery_ratio_local"]] = (
        (f[_IDX["data_received_as_dst"]] + f[_IDX["data_forwarded"]]) / handled if handled else 1.0
    )
    return f


def format_line(line) -> str:
    t, kind, origin, dst, hop, seq, note = line
    return "%.3f %s %d %d %d %d %s" % (t, kind, origin, dst, hop, seq, note or "-")


def parse_line(text: str):
    parts = text.split()
    if len(parts) != 7:
        raise ValueError("malformed log line: %r" % text)
    return (
        float(parts[0]),
        parts[1],
        int(parts[2]),
        int(parts[3]),
        int(parts[4]),
        int(parts[5]),
        parts[6],
    )
