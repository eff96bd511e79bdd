"""Synthetic request-stream generators (Poisson temporal-locality model and
IRM/Zipf popularity model) plus trace CSV load/save.

All generators are pure functions of a TrafficSpec: the same spec (including
seed) always yields the same stream.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels


class ConfigError(ValueError):
    """A TrafficSpec (or other config object) field is invalid."""


class TraceError(ValueError):
    """A trace file is malformed or violates request invariants."""


class RequestKind(enum.Enum):
    READ = "R"
    WRITE = "W"


class TrafficModel(enum.Enum):
    POISSON = "poisson"
    IRM = "irm"
    TRACE = "trace"


@dataclass(frozen=True, slots=True)
class Request:
    """One read or write access."""

    arrival_time: float
    file_id: int
    offset: int
    size: int
    kind: RequestKind

    def page(self, page_size: int) -> int:
        return self.offset // page_size


@dataclass(frozen=True)
class TrafficSpec:
    model: TrafficModel
    n_requests: int
    page_size: int = 8192
    n_pages: int = 256
    arrival_rate: float = 100.0
    read_fraction: float = 1.0
    request_size: int = 512
    zipf_exponent: float = 1.0        # IRM only
    mean_lifetime: float = 1.0        # Poisson only
    popularity_cap: int = 10**18      # IRM only
    shuffle_pages: bool = False       # IRM only: decorrelate id from rank
    rng_seed: int = 0

    def validate(self) -> None:
        if self.n_requests < 0:
            raise ConfigError("n_requests must be >= 0")
        if self.n_pages < 1:
            raise ConfigError("n_pages must be >= 1")
        if self.arrival_rate <= 0:
            raise ConfigError("arrival_rate must be > 0")
        if not 0.0 <= self.read_fraction <= 1.0:
            raise ConfigError("read_fraction must be in [0, 1]")
        if self.page_size < 1:
            raise ConfigError("page_size must be >= 1")
        if not 1 <= self.request_size <= self.page_size:
            raise ConfigError("request_size must be in [1, page_size]")
        if self.model is TrafficModel.POISSON and self.mean_lifetime <= 0:
            raise ConfigError("mean_lifetime must be > 0")
        if self.model is TrafficModel.IRM:
            if self.zipf_exponent <= 0:
                raise ConfigError("zipf_exponent must be > 0")
            if self.popularity_cap < 1:
                raise ConfigError("popularity_cap must be >= 1")


def zipf_probabilities(n_pages: int, exponent: float) -> np.ndarray:
    """P(page i) proportional to (i+1)^-exponent, normalized."""
    ranks = np.arange(1, n_pages + 1, dtype=np.float64)
    w = ranks ** (-exponent)
    return w / w.sum()


def _assemble(spec: TrafficSpec, arrivals: np.ndarray, pages: np.ndarray,
              rng: np.random.Generator) -> list[Request]:
    """Draw kinds and in-page offsets, build Request objects.

    Offsets are request_size-aligned so offset + size stays inside the page.
    """
    n = len(pages)
    n_slots = spec.page_size // spec.request_size
    sub = rng.integers(0, n_slots, size=n) * spec.request_size
    is_read = rng.random(n) < spec.read_fraction
    out = []
    for j in range(n):
        out.append(Request(
            arrival_time=float(arrivals[j]),
            file_id=0,
            offset=int(pages[j]) * spec.page_size + int(sub[j]),
            size=spec.request_size,
            kind=RequestKind.READ if is_read[j] else RequestKind.WRITE,
        ))
    return out


def generate_poisson(spec: TrafficSpec) -> list[Request]:
    """Poisson traffic: exponential inter-arrivals at ``arrival_rate``; a
    page's selection probability decays exponentially with its age, over a
    population introduced progressively (one new page every
    n_requests/n_pages requests), keeping the working set slow-evolving.
    """
    if spec.model is not TrafficModel.POISSON:
        raise ConfigError("spec.model must be POISSON")
    spec.validate()
    if spec.n_requests == 0:
        return []
    rng = np.random.default_rng(spec.rng_seed)
    arrivals = np.cumsum(rng.exponential(1.0 / spec.arrival_rate,
                                         size=spec.n_requests))
    intro_interval = max(1, spec.n_requests // spec.n_pages)
    intro_idx = np.minimum(np.arange(spec.n_pages) * intro_interval,
                           spec.n_requests - 1)
    intro_times = arrivals[intro_idx]
    u_page = rng.random(spec.n_requests)
    pages = kernels.poisson_select_pages(arrivals, u_page, intro_times,
                                         intro_interval, spec.mean_lifetime)
    return _assemble(spec, arrivals, pages, rng)


def generate_irm(spec: TrafficSpec) -> list[Request]:
    """IRM traffic: each request targets one of ``n_pages`` popularity slots
    drawn from a Zipf law; a page that has received ``popularity_cap``
    requests expires and its slot is taken over by a fresh page id."""
    if spec.model is not TrafficModel.IRM:
        raise ConfigError("spec.model must be IRM")
    spec.validate()
    if spec.n_requests == 0:
        return []
    rng = np.random.default_rng(spec.rng_seed)
    arrivals = np.cumsum(rng.exponential(1.0 / spec.arrival_rate,
                                         size=spec.n_requests))
    cdf = np.cumsum(zipf_probabilities(spec.n_pages, spec.zipf_exponent))
    slots = np.searchsorted(cdf, rng.random(spec.n_requests), side="right")
    slots = np.minimum(slots, spec.n_pages - 1).astype(np.int64)
    pages = kernels.irm_select_pages(slots, spec.popularity_cap, spec.n_pages)
    if spec.shuffle_pages:
        # Break the page-id / popularity-rank correlation (only the initial
        # population is affected; replacement ids are fresh anyway).
        perm = np.random.default_rng(spec.rng_seed + 1).permutation(
            spec.n_pages).astype(np.int64)
        initial = pages < spec.n_pages
        pages[initial] = perm[pages[initial]]
    return _assemble(spec, arrivals, pages, rng)


def generate(spec: TrafficSpec) -> list[Request]:
    if spec.model is TrafficModel.POISSON:
        return generate_poisson(spec)
    if spec.model is TrafficModel.IRM:
        return generate_irm(spec)
    raise ConfigError(f"cannot generate for model {spec.model}")


TRACE_HEADER = ["arrival_time", "file_id", "offset", "size", "kind"]


def save_trace(requests: Iterable[Request], path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in requests:
            w.writerow([repr(r.arrival_time), r.file_id, r.offset, r.size,
                        r.kind.value])


def load_trace(path) -> list[Request]:
    """Parse a trace CSV (header ``arrival_time,file_id,offset,size,kind``,
    kind R or W). Raises TraceError with the offending line number."""
    out: list[Request] = []
    last_t = -math.inf
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"{path}: empty file, expected header") from None
        if header != TRACE_HEADER:
            raise TraceError(f"{path}:1: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[0])
                file_id = int(row[1])
                offset = int(row[2])
                size = int(row[3])
                kind = RequestKind(row[4])
            except (IndexError, ValueError, KeyError) as exc:
                raise TraceError(f"{path}:{lineno}: malformed row: {exc}") from None
            if size < 1:
                raise TraceError(f"{path}:{lineno}: size must be >= 1")
            if offset < 0 or t < 0:
                raise TraceError(f"{path}:{lineno}: negative offset or time")
            if t < last_t:
                raise TraceError(f"{path}:{lineno}: arrival times not "
                                 f"non-decreasing ({t} < {last_t})")
            last_t = t
            out.append(Request(t, file_id, offset, size, kind))
    return out
