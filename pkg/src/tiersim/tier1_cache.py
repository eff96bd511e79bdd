"""Per-process fully-associative write-back page cache with valid/dirty bits,
per-line timestamps and frequency counters, and the four page-to-process
mapping policies (round-robin, random hash, block, block-cyclic).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .workload import ConfigError, RequestKind

FREQ_MAX = 2**64 - 1


class MappingPolicy(enum.Enum):
    ROUND_ROBIN = "round-robin"
    RANDOM = "random"
    BLOCK = "block"
    BLOCK_CYCLIC = "block-cyclic"


class Outcome(enum.Enum):
    HIT = "hit"
    MISS = "miss"
    PREFETCH_HIT = "prefetch-hit"


@dataclass(frozen=True)
class CacheConfig:
    n_lines: int
    line_size: int = 8192
    n_processes: int = 1
    mapping: MappingPolicy = MappingPolicy.ROUND_ROBIN
    block_size: int = 1              # block-cyclic only
    total_pages: Optional[int] = None  # required for block mapping

    def validate(self) -> None:
        if self.n_lines < 0:
            raise ConfigError("n_lines must be >= 0")
        if self.line_size < 512 or self.line_size & (self.line_size - 1):
            raise ConfigError("line_size must be a power of two >= 512")
        if self.n_processes < 1:
            raise ConfigError("n_processes must be >= 1")
        if self.mapping is MappingPolicy.BLOCK_CYCLIC and self.block_size < 1:
            raise ConfigError("block_size must be >= 1 for block-cyclic")
        if self.mapping is MappingPolicy.BLOCK and not self.total_pages:
            raise ConfigError("block mapping requires total_pages")


@dataclass(frozen=True)
class AccessResult:
    outcome: Outcome
    owner: int
    page: int


def page_of(offset: int, line_size: int) -> int:
    if line_size <= 0:
        raise ConfigError("line_size must be > 0")
    return offset // line_size


def _mix64(x: int) -> int:
    """splitmix64 finalizer; fixed so owner assignment is reproducible."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def map_page(page: int, config: CacheConfig) -> int:
    """Deterministic owner process for a page."""
    p = config.n_processes
    if config.mapping is MappingPolicy.ROUND_ROBIN:
        return page % p
    if config.mapping is MappingPolicy.RANDOM:
        return _mix64(page) % p
    if config.mapping is MappingPolicy.BLOCK:
        if not config.total_pages:
            raise ConfigError("block mapping requires total_pages")
        block = math.ceil(config.total_pages / p)
        return min(page // block, p - 1)
    if config.mapping is MappingPolicy.BLOCK_CYCLIC:
        return (page // config.block_size) % p
    raise ConfigError(f"unknown mapping {config.mapping}")


class Tier1Cache:
    """Single-owner cache for one process. Lines are parallel lists; caches
    are small (tens to hundreds of lines) so victim scans stay linear."""

    def __init__(self, config: CacheConfig, process_id: int = 0):
        config.validate()
        self.config = config
        self.process_id = process_id
        n = config.n_lines
        self.page = [-1] * n
        self.valid = [False] * n
        self.dirty = [False] * n
        self.last_access = [0] * n
        self.freq = [0] * n
        self._slot_of: dict[int, int] = {}
        self._free: list[int] = list(range(n - 1, -1, -1))

    # -- queries ----------------------------------------------------------

    def __contains__(self, page: int) -> bool:
        return page in self._slot_of

    @property
    def n_valid(self) -> int:
        return len(self._slot_of)

    @property
    def is_full(self) -> bool:
        return len(self._slot_of) == self.config.n_lines

    def resident_pages(self):
        return self._slot_of.keys()

    # -- state machine -----------------------------------------------------

    def access(self, page: int, kind: RequestKind, now: int,
               prefetch_buffer=None,
               victim_selector: Optional[Callable[["Tier1Cache"], int]] = None,
               ) -> tuple[AccessResult, Optional[tuple[int, bool]]]:
        """One cache lookup. Returns (result, evicted) where evicted is a
        (page, dirty) pair when a prefetch-hit promotion forced an eviction.

        Misses are results, not errors; the caller forwards them to the miss
        queue and later calls fill().
        """
        slot = self._slot_of.get(page)
        if slot is not None:
            self.freq[slot] = min(self.freq[slot] + 1, FREQ_MAX)
            self.last_access[slot] = now
            if kind is RequestKind.WRITE:
                self.dirty[slot] = True
            return AccessResult(Outcome.HIT, self.process_id, page), None
        if prefetch_buffer is not None and page in prefetch_buffer:
            prefetch_buffer.promote(page)
            evicted = self.fill(page, victim_selector)
            slot = self._slot_of[page]
            self.last_access[slot] = now
            if kind is RequestKind.WRITE:
                self.dirty[slot] = True
            return (AccessResult(Outcome.PREFETCH_HIT, self.process_id, page),
                    evicted)
        return AccessResult(Outcome.MISS, self.process_id, page), None

    def touch(self, page: int, kind: RequestKind, now: int) -> None:
        """Stamp a freshly filled line for the demand access that fetched it
        (write-allocate: a write miss dirties the line after the fill)."""
        slot = self._slot_of[page]
        self.last_access[slot] = now
        if kind is RequestKind.WRITE:
            self.dirty[slot] = True

    def fill(self, page: int,
             victim_selector: Optional[Callable[["Tier1Cache"], int]] = None,
             ) -> Optional[tuple[int, bool]]:
        """Install a non-resident page; returns (evicted_page, dirty) when a
        victim had to be evicted (dirty evictions cost a tier-2 write)."""
        if page in self._slot_of:
            raise ValueError(f"fill of already-resident page {page}")
        evicted = None
        if self._free:
            slot = self._free.pop()
        else:
            if victim_selector is None:
                raise ValueError("cache full and no victim selector given")
            victim = victim_selector(self)
            vslot = self._slot_of.get(victim)
            if vslot is None:
                raise RuntimeError(
                    f"victim selector returned non-resident page {victim}")
            evicted = (victim, self.dirty[vslot])
            del self._slot_of[victim]
            slot = vslot
        self.page[slot] = page
        self.valid[slot] = True
        self.dirty[slot] = False
        self.freq[slot] = 1
        self.last_access[slot] = 0
        self._slot_of[page] = slot
        return evicted

    def invalidate(self, page: int) -> None:
        slot = self._slot_of.pop(page)
        self.valid[slot] = False
        self.page[slot] = -1
        self.dirty[slot] = False
        self.freq[slot] = 0
        self._free.append(slot)
