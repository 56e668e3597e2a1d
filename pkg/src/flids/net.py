"""Disc radio adjacency."""

from __future__ import annotations

import numpy as np


def neighbors(positions: np.ndarray, tx_range: float) -> list[set[int]]:
    """Symmetric adjacency sets for an (N, 3) position matrix.

    Two nodes are neighbors iff their distance is <= tx_range (boundary
    inclusive). A node is never its own neighbor.
    """
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    adj = d2 <= tx_range * tx_range
    np.fill_diagonal(adj, False)
    return [set(map(int, np.nonzero(row)[0])) for row in adj]
