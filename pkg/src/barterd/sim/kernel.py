from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class EventKind(str, Enum):
    PUBLISH = "Publish"
    REQUEST = "Request"
    QUOTE = "Quote"
    DECIDE = "Decide"
    WAKE = "Wake"
    EXPIRE = "Expire"
    FEEDBACK = "Feedback"
    SERVICE = "Service"


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: EventKind
    payload: Any = field(default=None, compare=False)


class EventQueue:
    """Min-heap of events ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = itertools.count()
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, event: SimEvent) -> None:
        if event.time < self.now:
            raise ValueError(f"cannot schedule {event.kind.value} at {event.time} < now {self.now}")
        heapq.heappush(self._heap, (event.time, next(self._seq), event))

    def push(self, time: int, kind: EventKind, payload: Any = None) -> None:
        self.schedule(SimEvent(time, kind, payload))

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop_batch(self) -> list[SimEvent]:
        """Pop every event due at the earliest pending time and advance the clock."""
        if not self._heap:
            return []
        t = self._heap[0][0]
        self.now = t
        batch = []
        while self._heap and self._heap[0][0] == t:
            batch.append(heapq.heappop(self._heap)[2])
        return batch
