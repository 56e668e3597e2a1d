"""Discrete event queue with a fixed total order.

Events sort by (time, kind rank, node id, insertion sequence); the insertion
sequence makes the order total, so a run is reproducible regardless of how
ties arise. Window closes rank first at a shared timestamp so a closing
window never absorbs state churn happening exactly on its boundary.
"""

from __future__ import annotations

import heapq

EV_WINDOW = 0
EV_MOBILITY = 1
EV_ATTACK = 2
EV_APP_SEND = 3
EV_ARRIVAL = 4
EV_TIMER = 5


class EventQueue:
    def __init__(self) -> None:
        self._heap: list = []
        self._seq = 0

    def push(self, time: float, rank: int, node: int, payload=None) -> None:
        heapq.heappush(self._heap, (time, rank, node, self._seq, payload))
        self._seq += 1

    def pop(self):
        return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)
