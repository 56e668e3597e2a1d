import numpy as np
import pytest

from flids.features import (
    FEATURE_NAMES,
    N_FEATURES,
    features_from_lines,
    format_line,
    parse_line,
)

IDX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def test_schema_is_31_wide():
    assert N_FEATURES == 31
    assert len(set(FEATURE_NAMES)) == 31


def test_empty_window():
    f = features_from_lines([])
    assert f.shape == (31,)
    # all-zero except the vacuous delivery ratio
    assert f[IDX["delivery_ratio_local"]] == 1.0
    assert f.sum() == 1.0


def test_hand_built_window():
    lines = [
        (1.0, "rreq_tx", 3, 9, 0, 5, "-"),
        (1.1, "rreq_rx", 4, 9, 1, 7, "-"),
        (1.2, "rreq_rx", 6, 9, 2, 3, "-"),
        (1.3, "rreq_dup", 4, 9, 2, 7, "-"),
        (1.4, "rreq_fwd", 4, 9, 2, 7, "-"),
        (1.5, "rrep_tx", 3, 9, 0, 12, "-"),
        (1.6, "rrep_rx", 3, 9, 1, 12, "d=5"),
        (1.7, "rrep_rx", 3, 9, 2, 30, "d=101"),
        (1.8, "rrep_fwd", 3, 9, 2, 30, "-"),
        (2.0, "rerr_tx", 3, 9, 0, 0, "-"),
        (2.1, "rerr_rx", 5, 9, 0, 0, "-"),
        (2.2, "rerr_fwd", 5, 9, 0, 0, "-"),
        (2.3, "data_orig", 3, 9, 0, 0, "-"),
        (2.4, "data_rx", 4, 3, 2, 0, "-"),
        (2.5, "data_fwd", 4, 9, 1, 0, "-"),
        (2.6, "data_fwd", 4, 9, 1, 0, "-"),
        (2.7, "data_drop", 3, 9, 0, 0, "no_route"),
        (2.8, "data_drop", 3, 9, 0, 0, "link_lost"),
        (2.9, "disc_init", 3, 9, 0, 4, "-"),
        (3.0, "route_add", 3, 9, 2, 12, "-"),
        (3.1, "route_invalid", 3, 9, 0, 0, "-"),
        (3.2, "route_update", 3, 9, 1, 13, "-"),
        (3.3, "neigh_add", 5, 0, 0, 0, "-"),
        (3.4, "neigh_del", 6, 0, 0, 0, "-"),
        (3.5, "link_break", 6, 0, 0, 0, "-"),
        (4.9, "wstate", 0, 0, 3, 4, "1.5"),
    ]
    f = features_from_lines(lines)

    assert f[IDX["rreq_sent"]] == 1
    assert f[IDX["rreq_received"]] == 3  # 2 fresh + 1 dup
    assert f[IDX["rreq_forwarded"]] == 1
    assert f[IDX["duplicate_rreq_received"]] == 1
    assert f[IDX["rrep_sent"]] == 1
    assert f[IDX["rrep_received"]] == 2
    assert f[IDX["rrep_forwarded"]] == 1
    assert f[IDX["rerr_sent"]] == 1
    assert f[IDX["rerr_received"]] == 1
    assert f[IDX["rerr_forwarded"]] == 1
    assert f[IDX["data_originated"]] == 1
    assert f[IDX["data_received_as_dst"]] == 1
    assert f[IDX["data_forwarded"]] == 2
    assert f[IDX["data_dropped_no_route"]] == 1
    assert f[IDX["discovery_initiated"]] == 1
    assert f[IDX["routes_added"]] == 1
    assert f[IDX["routes_invalidated"]] == 1
    assert f[IDX["routes_updated"]] == 1
    assert f[IDX["active_routes"]] == 3
    assert f[IDX["mean_hop_count_active"]] == 1.5
    assert f[IDX["max_dest_seq_seen"]] == 30
    assert f[IDX["mean_rrep_seq_delta"]] == 53.0  # (5 + 101) / 2
    assert f[IDX["neighbor_count"]] == 4
    assert f[IDX["neighbors_added"]] == 1
    assert f[IDX["neighbors_removed"]] == 1
    assert f[IDX["link_breaks_detected"]] == 1
    assert f[IDX["control_pkts_received_total"]] == 6  # 3 rreq + 2 rrep + 1 rerr
    assert f[IDX["control_bytes_received_total"]] == 3 * 24 + 2 * 20 + 1 * 20
    assert f[IDX["distinct_rreq_origins"]] == 2  # nodes 4 and 6
    assert f[IDX["rreq_rate_per_neighbor"]] == pytest.approx(3 / 4)
    # (1 rx + 2 fwd) / (1 rx + 2 fwd + 2 drops)
    assert f[IDX["delivery_ratio_local"]] == pytest.approx(3 / 5)


def test_line_order_does_not_matter():
    lines = [
        (1.0, "rreq_rx", 4, 9, 1, 7, "-"),
        (1.5, "rrep_rx", 3, 9, 1, 12, "d=5"),
        (2.0, "data_fwd", 4, 9, 1, 0, "-"),
        (4.9, "wstate", 0, 0, 2, 3, "1.0"),
    ]
    np.testing.assert_array_equal(
        features_from_lines(lines), features_from_lines(lines[::-1])
    )


def test_seq_tracking_only_on_routing_rx_kinds():
    # tx kinds and data lines must not contribute to max_dest_seq_seen
    f = features_from_lines([
        (1.0, "rreq_tx", 0, 9, 0, 999, "-"),
        (1.1, "rrep_tx", 0, 9, 0, 888, "-"),
        (1.2, "disc_init", 0, 9, 0, 777, "-"),
        (1.3, "rreq_rx", 4, 9, 1, 7, "-"),
    ])
    assert f[IDX["max_dest_seq_seen"]] == 7


def test_seq_horizon_of_each_rx_kind():
    for kind in ("rreq_rx", "rreq_dup", "rreq_fwd", "rrep_rx", "rrep_fwd"):
        note = "d=0" if kind == "rrep_rx" else "-"
        f = features_from_lines([(1.0, kind, 4, 9, 1, 55, note)])
        assert f[IDX["max_dest_seq_seen"]] == 55, kind


def test_rate_per_neighbor_guards_zero_neighbors():
    f = features_from_lines([
        (1.0, "rreq_rx", 4, 9, 1, 7, "-"),
        (4.9, "wstate", 0, 0, 0, 0, "0.0"),
    ])
    assert f[IDX["rreq_rate_per_neighbor"]] == 1.0


def test_format_parse_round_trip():
    line = (12.345, "rrep_rx", 3, 9, 2, 101, "d=100")
    assert parse_line(format_line(line)) == line
    bare = (0.5, "neigh_add", 7, 0, 0, 0, None)
    assert parse_line(format_line(bare)) == (0.5, "neigh_add", 7, 0, 0, 0, "-")


def test_parse_rejects_malformed():
    with pytest.raises(ValueError, match="malformed log line"):
        parse_line("1.0 rreq_rx 4 9 1")
    with pytest.raises(ValueError):
        parse_line("1.0 rreq_rx 4 9 one 7 -")
