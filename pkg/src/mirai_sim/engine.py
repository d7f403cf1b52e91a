"""Discrete-event loop with deterministic (fire_time, sequence) ordering."""

from __future__ import annotations

import heapq
from typing import Callable, NamedTuple

from .errors import HorizonExceeded

US_PER_S = 1_000_000
US_PER_MS = 1_000


class EventEntry(NamedTuple):
    fire_time: int
    sequence: int
    action: Callable
    args: tuple


class EventLoop:
    """Single-threaded scheduler. Times are integer microseconds.

    ``schedule`` refuses events past the horizon; ``schedule_clipped`` is for
    data-plane events (packet arrivals, protocol timers) that may legitimately
    fall past the end of the run and are then discarded and counted.
    """

    def __init__(self, horizon: int):
        self.horizon = horizon
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self.processed = 0
        self.clipped = 0

    def schedule(self, at: int, action: Callable, *args) -> None:
        if at > self.horizon:
            raise HorizonExceeded(f"event at {at} us is beyond horizon {self.horizon} us")
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        heapq.heappush(self._heap, (at, self._seq, action, args))
        self._seq += 1

    def schedule_clipped(self, at: int, action: Callable, *args) -> bool:
        if at > self.horizon:
            self.clipped += 1
            return False
        heapq.heappush(self._heap, (at, self._seq, action, args))
        self._seq += 1
        return True

    def __len__(self) -> int:
        return len(self._heap)

    def pop(self) -> EventEntry:
        return EventEntry(*heapq.heappop(self._heap))

    def run(self) -> int:
        heap = self._heap
        pop = heapq.heappop
        n = 0
        while heap:
            at, _, action, args = pop(heap)
            self.now = at
            action(*args)
            n += 1
        self.processed += n
        return n
