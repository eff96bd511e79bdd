"""Stride-detecting stream identifier over the recent miss stream, and a
bounded prefetch buffer whose entries leave only by promotion into the cache.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class StreamIdentifier:
    """Tracks the last ``history_len`` miss pages; a stride is detected when
    the last three entries have equal, non-zero successive differences."""

    history_len: int = 4
    history: list[int] = field(default_factory=list)
    detected_stride: Optional[int] = None

    def __post_init__(self):
        if self.history_len < 3:
            raise ValueError("history_len must be >= 3")

    def observe_miss(self, page: int) -> None:
        self.history.append(page)
        if len(self.history) > self.history_len:
            self.history.pop(0)
        self.detected_stride = None
        if len(self.history) >= 3:
            a, b, c = self.history[-3:]
            d = c - b
            if d != 0 and b - a == d:
                self.detected_stride = d


class PrefetchBuffer:
    """Bounded set of prefetched pages. A full buffer blocks new prefetches;
    entries leave only when promoted to the cache."""

    def __init__(self, width: int):
        if width < 0:
            raise ValueError("width must be >= 0")
        self.width = width
        self.entries: set[int] = set()
        self.in_flight: set[int] = set()
        self.hits = 0
        self.issued = 0

    def __contains__(self, page: int) -> bool:
        return page in self.entries

    @property
    def free_slots(self) -> int:
        return self.width - len(self.entries) - len(self.in_flight)

    def reserve(self, page: int) -> None:
        """Mark a prefetch as issued; the slot is held until arrival."""
        self.in_flight.add(page)
        self.issued += 1

    def insert(self, page: int) -> None:
        self.in_flight.discard(page)
        if len(self.entries) < self.width:
            self.entries.add(page)

    def promote(self, page: int) -> None:
        self.entries.remove(page)
        self.hits += 1


def propose_prefetches(sid: StreamIdentifier, buffer: PrefetchBuffer,
                       cache) -> list[int]:
    """Next pages along the detected stride, limited to the buffer's free
    slots and excluding pages already resident, buffered, or in flight."""
    d = sid.detected_stride
    if d is None or not sid.history:
        return []
    room = buffer.free_slots
    if room <= 0:
        return []
    # Candidate window is last+d .. last+room*d; resident/buffered pages are
    # dropped rather than skipped over.
    out: list[int] = []
    last = sid.history[-1]
    for i in range(1, room + 1):
        page = last + i * d
        if page < 0:
            break
        if page in cache or page in buffer.entries or page in buffer.in_flight:
            continue
        out.append(page)
    return out
