"""Deterministic discrete-event simulator wiring a request stream through
per-process tier-1 caches, FIFO miss queues and tier-2 service.

Two execution paths share the same cache state machine:

* ``replay`` advances cache state synchronously (no timing) and is the fast
  path for policy comparisons and miss-rate sweeps;
* ``run`` is the event-driven engine with exponential tier-1 service across
  ``k`` servers per process and a single tier-2 server per miss queue.

Cache contents are updated at miss time (the slot is reserved immediately)
while the missing request's completion waits for tier-2 service; this keeps
miss counts identical between the two paths and preserves the LRU inclusion
property exactly.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import queueing
from .eviction import Expert, ExpertEnsemble, WeightMode, expert_victim
from .prefetch import PrefetchBuffer, StreamIdentifier, propose_prefetches
from .tier1_cache import (AccessResult, CacheConfig, Outcome, Tier1Cache,
                          map_page)
from .workload import ConfigError, Request, TrafficSpec, generate

POLICIES = ("lru", "lfu", "random", "ws")


@dataclass(frozen=True)
class EnsembleParams:
    alpha: float = 0.5
    beta: float = 0.5
    epoch_width: int = 4
    threshold: float = 0.25
    mode: str = "corrected"


@dataclass(frozen=True)
class SimConfig:
    traffic: TrafficSpec
    cache: CacheConfig
    policy: str = "lru"
    ensemble: EnsembleParams = EnsembleParams()
    prefetch_enabled: bool = False
    prefetch_width: int = 4
    mu1: float = 1000.0               # tier-1 hit service rate, req/s
    mu2: float = 33.0                 # tier-2 service rate, req/s
    k_service_threads: int = 1
    coalesce_misses: bool = True
    shared_tier2: bool = False
    tier2_servers: int = 1
    prewarm: bool = False
    force_miss: bool = False          # bypass the cache (pure-miss M/M/1)
    warmup_fraction: float = 0.1
    horizon_requests: Optional[int] = None
    horizon_seconds: Optional[float] = None
    collect_timeseries: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if self.mu1 <= 0 or self.mu2 <= 0:
            raise ConfigError("mu1 and mu2 must be > 0")
        if self.k_service_threads < 1:
            raise ConfigError("k_service_threads must be >= 1")
        if self.tier2_servers < 1:
            raise ConfigError("tier2_servers must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.horizon_requests is not None and self.horizon_requests <= 0:
            raise ConfigError("horizon_requests must be > 0")
        if self.horizon_seconds is not None and self.horizon_seconds <= 0:
            raise ConfigError("horizon_seconds must be > 0")
        self.traffic.validate()
        self.cache.validate()
        if self.ensemble.mode not in ("corrected", "literal"):
            raise ConfigError("ensemble mode must be corrected or literal")


@dataclass
class ProcessMetrics:
    requests: int = 0
    hits: int = 0
    misses: int = 0
    prefetch_hits: int = 0
    evictions: int = 0
    dirty_writebacks: int = 0
    prefetches_issued: int = 0
    completed: int = 0
    resp_samples: int = 0        # post-warm-up completions
    wait_samples: int = 0        # post-warm-up miss-queue waits
    mean_response: float = 0.0
    max_response: float = 0.0
    mean_miss_wait: float = 0.0
    time_avg_miss_queue_len: float = 0.0
    observed_makespan: float = 0.0
    t_h_bound: float = 0.0
    t_m_bound: float = 0.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in sorted(self.__dict__)}


@dataclass
class SimMetrics:
    per_process: list[ProcessMetrics]
    aggregate: ProcessMetrics
    measured_miss_rate: float
    throughput: float
    t_bound: float
    simulated_time: float
    n_requests: int
    miss_queue_timeseries: list[tuple[float, int, int]] = field(
        default_factory=list)  # (t, process, waiting demand-queue length)

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate.to_dict(),
            "measured_miss_rate": self.measured_miss_rate,
            "n_requests": self.n_requests,
            "per_process": [p.to_dict() for p in self.per_process],
            "simulated_time": self.simulated_time,
            "t_bound": self.t_bound,
            "throughput": self.throughput,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def timeseries_csv(self) -> str:
        lines = ["t,process,metric,value"]
        for t, proc, qlen in self.miss_queue_timeseries:
            lines.append(f"{t!r},{proc},miss_queue_len,{qlen}")
        return "\n".join(lines) + "\n"


def _victim_selector(policy: str, ensemble: Optional[ExpertEnsemble],
                     rng: np.random.Generator):
    if policy == "ws":
        return ensemble.victim_selector()
    expert = {"lru": Expert.LRU, "lfu": Expert.LFU,
              "random": Expert.RANDOM}[policy]
    return lambda cache: expert_victim(expert, cache, rng)


def _make_ensembles(config: SimConfig) -> list[Optional[ExpertEnsemble]]:
    if config.policy != "ws":
        return [None] * config.cache.n_processes
    e = config.ensemble
    return [ExpertEnsemble(alpha=e.alpha, beta=e.beta,
                           epoch_width=e.epoch_width, threshold=e.threshold,
                           mode=WeightMode(e.mode),
                           seed=config.seed * 1009 + 17 * pid)
            for pid in range(config.cache.n_processes)]


def _admitted(config: SimConfig,
              requests: Sequence[Request]) -> list[Request]:
    out = list(requests)
    if config.horizon_requests is not None:
        out = out[:config.horizon_requests]
    if config.horizon_seconds is not None:
        out = [r for r in out if r.arrival_time <= config.horizon_seconds]
    return out


def _prewarm(caches: list[Tier1Cache], requests: Sequence[Request],
             cache_config: CacheConfig) -> None:
    """Pre-load each cache with the first pages it would see, up to capacity,
    without counting misses."""
    for r in requests:
        page = r.offset // cache_config.line_size
        owner = map_page(page, cache_config)
        cache = caches[owner]
        if page not in cache and not cache.is_full:
            cache.fill(page)


@dataclass(frozen=True)
class StepResult:
    owner: int
    result: AccessResult
    evictions: int
    writebacks: tuple[int, ...]       # evicted dirty pages
    prefetch_proposals: tuple[int, ...]


class _Replay:
    """Synchronous cache-state advance for one request stream; shared by
    replay() and the event-driven engine."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        cc = config.cache
        self.caches = [Tier1Cache(cc, pid) for pid in range(cc.n_processes)]
        self.ensembles = _make_ensembles(config)
        self.rngs = [np.random.default_rng(
            np.random.SeedSequence(entropy=(config.seed, 2, pid)))
            for pid in range(cc.n_processes)]
        self.selectors = [
            _victim_selector(config.policy, self.ensembles[pid],
                             self.rngs[pid])
            for pid in range(cc.n_processes)]
        self.buffers = [PrefetchBuffer(config.prefetch_width
                                       if config.prefetch_enabled else 0)
                        for _ in range(cc.n_processes)]
        self.sids = [StreamIdentifier() for _ in range(cc.n_processes)]
        self.now = 0

    def step(self, request: Request) -> StepResult:
        cfg = self.config
        page = request.offset // cfg.cache.line_size
        owner = map_page(page, cfg.cache)
        cache = self.caches[owner]
        self.now += 1

        if cfg.force_miss or cfg.cache.n_lines == 0:
            return StepResult(owner, AccessResult(Outcome.MISS, owner, page),
                              0, (), ())

        writebacks: list[int] = []
        evictions = 0
        result, promoted_evict = cache.access(
            page, request.kind, self.now,
            prefetch_buffer=self.buffers[owner],
            victim_selector=self.selectors[owner])
        if promoted_evict is not None:
            evictions += 1
            if promoted_evict[1]:
                writebacks.append(promoted_evict[0])

        prefetches: tuple[int, ...] = ()
        ensemble = self.ensembles[owner]
        if result.outcome is Outcome.MISS:
            # Misprediction accounting sees the miss before this miss's own
            # eviction adds new predictions.
            if ensemble is not None:
                ensemble.record_misses_and_adjust({page})
            evicted = cache.fill(page, self.selectors[owner])
            cache.touch(page, request.kind, self.now)
            if evicted is not None:
                evictions += 1
                if evicted[1]:
                    writebacks.append(evicted[0])
            if cfg.prefetch_enabled:
                sid = self.sids[owner]
                sid.observe_miss(page)
                prefetches = tuple(propose_prefetches(
                    sid, self.buffers[owner], cache))
        elif ensemble is not None:
            ensemble.record_misses_and_adjust(set())
        return StepResult(owner, result, evictions, tuple(writebacks),
                          prefetches)


def _count(m: ProcessMetrics, step: StepResult) -> None:
    m.requests += 1
    if step.result.outcome is Outcome.HIT:
        m.hits += 1
    elif step.result.outcome is Outcome.PREFETCH_HIT:
        m.prefetch_hits += 1
    else:
        m.misses += 1
    m.evictions += step.evictions
    m.dirty_writebacks += len(step.writebacks)


def _finalize(config: SimConfig, requests: Sequence[Request],
              per: list[ProcessMetrics], simulated_time: float,
              timeseries) -> SimMetrics:
    agg = ProcessMetrics()
    for m in per:
        served = m.hits + m.prefetch_hits
        m.t_h_bound = served / config.mu1
        m.t_m_bound = m.misses / config.mu2
        for name in ("requests", "hits", "misses", "prefetch_hits",
                     "evictions", "dirty_writebacks", "prefetches_issued",
                     "completed", "resp_samples", "wait_samples"):
            setattr(agg, name, getattr(agg, name) + getattr(m, name))
        agg.max_response = max(agg.max_response, m.max_response)
        agg.observed_makespan = max(agg.observed_makespan,
                                    m.observed_makespan)
    if agg.resp_samples:
        agg.mean_response = sum(m.mean_response * m.resp_samples
                                for m in per) / agg.resp_samples
    if agg.wait_samples:
        agg.mean_miss_wait = sum(m.mean_miss_wait * m.wait_samples
                                 for m in per) / agg.wait_samples
    agg.time_avg_miss_queue_len = sum(m.time_avg_miss_queue_len for m in per)
    agg.t_h_bound = max((m.t_h_bound for m in per), default=0.0)
    agg.t_m_bound = max((m.t_m_bound for m in per), default=0.0)
    t_bound = max((max(m.t_h_bound, m.t_m_bound) for m in per), default=0.0)

    n = len(requests)
    miss_rate = agg.misses / n if n else 0.0
    throughput = agg.completed / simulated_time if simulated_time > 0 else 0.0
    return SimMetrics(per_process=per, aggregate=agg,
                      measured_miss_rate=miss_rate, throughput=throughput,
                      t_bound=t_bound, simulated_time=simulated_time,
                      n_requests=n, miss_queue_timeseries=timeseries)


def replay(config: SimConfig,
           requests: Optional[Sequence[Request]] = None) -> SimMetrics:
    """Trace-driven pass with no service timing: counts hits, misses,
    prefetch hits, evictions and write-backs. Prefetch proposals land in the
    buffer instantly."""
    config.validate()
    if requests is None:
        requests = generate(config.traffic)
    requests = _admitted(config, requests)
    engine = _Replay(config)
    if config.prewarm:
        _prewarm(engine.caches, requests, config.cache)
    per = [ProcessMetrics() for _ in range(config.cache.n_processes)]
    for r in requests:
        step = engine.step(r)
        m = per[step.owner]
        _count(m, step)
        for page in step.prefetch_proposals:
            buf = engine.buffers[step.owner]
            buf.reserve(page)
            buf.insert(page)
            m.prefetches_issued += 1
        m.completed += 1
    return _finalize(config, requests, per, simulated_time=0.0,
                     timeseries=[])


# -- Event-driven engine ------------------------------------------------------

_ARRIVAL, _T2_DONE, _T1_DONE = 0, 1, 2


class _Tier2Station:
    """FIFO miss queue with a fixed server pool; demand items (fills and
    write-backs) are served before prefetches."""

    def __init__(self, servers: int):
        self.servers = servers
        self.busy = 0
        self.demand: deque = deque()
        self.prefetch: deque = deque()

    def pop_next(self):
        if self.demand:
            return self.demand.popleft()
        if self.prefetch:
            return self.prefetch.popleft()
        return None


def run(config: SimConfig,
        requests: Optional[Sequence[Request]] = None) -> SimMetrics:
    """Event-driven execution; fully deterministic for a fixed config+seed.

    Flow per request: arrival -> tier-1 lookup; hits enter the k-server
    tier-1 station; misses reserve their cache slot, then wait in the owner's
    miss queue for exponential tier-2 service, and re-enter tier 1 before
    completing. Dirty evictions enqueue tier-2 write-backs. Non-equilibrium
    configs run to completion of all admitted requests and show up as large
    queue lengths, never as errors.
    """
    config.validate()
    if requests is None:
        requests = generate(config.traffic)
    requests = _admitted(config, requests)
    engine = _Replay(config)
    if config.prewarm:
        _prewarm(engine.caches, requests, config.cache)

    n = len(requests)
    n_proc = config.cache.n_processes
    per = [ProcessMetrics() for _ in range(n_proc)]
    if n == 0:
        return _finalize(config, requests, per, 0.0, [])

    svc_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=(config.seed, 1)))

    warm_idx = int(config.warmup_fraction * n)
    warm_time = requests[warm_idx].arrival_time if warm_idx < n else 0.0

    t1_busy = [0] * n_proc
    t1_wait: list[deque] = [deque() for _ in range(n_proc)]
    if config.shared_tier2:
        stations = [_Tier2Station(config.tier2_servers)]
        station_of = [0] * n_proc
    else:
        stations = [_Tier2Station(1) for _ in range(n_proc)]
        station_of = list(range(n_proc))

    pending_fetch: dict[tuple[int, int], list[int]] = {}
    completion = [0.0] * n
    enqueued_at = [0.0] * n
    miss_wait = [0.0] * n
    was_miss = [False] * n
    owner_of = [0] * n

    # Time-average length of the waiting demand queue, integrated past the
    # warm-up time only.
    q_area = [0.0] * n_proc
    q_last_t = [warm_time] * n_proc
    q_len = [0] * n_proc
    timeseries: list[tuple[float, int, int]] = []

    def note_qlen(proc: int, t: float, delta: int) -> None:
        lo = max(q_last_t[proc], warm_time)
        if t > lo:
            q_area[proc] += q_len[proc] * (t - lo)
        q_last_t[proc] = max(t, q_last_t[proc])
        q_len[proc] += delta
        if config.collect_timeseries:
            timeseries.append((t, proc, q_len[proc]))

    events: list = []
    seq = 0
    for i, r in enumerate(requests):
        heapq.heappush(events, (r.arrival_time, seq, _ARRIVAL, i))
        seq += 1

    def t1_enter(proc: int, req_idx: int, t: float) -> None:
        nonlocal seq
        if t1_busy[proc] < config.k_service_threads:
            t1_busy[proc] += 1
            dt = svc_rng.exponential(1.0 / config.mu1)
            heapq.heappush(events, (t + dt, seq, _T1_DONE, (proc, req_idx)))
            seq += 1
        else:
            t1_wait[proc].append(req_idx)

    def t2_start(st_idx: int, t: float) -> None:
        nonlocal seq
        st = stations[st_idx]
        while st.busy < st.servers:
            item = st.pop_next()
            if item is None:
                return
            st.busy += 1
            kind, proc, page = item[:3]
            if kind == "fill":
                note_qlen(proc, t, -1)
                # Requests joining after service starts keep a zero queue
                # wait: their fetch was already underway when they arrived.
                for ri in item[3]:
                    miss_wait[ri] = t - enqueued_at[ri]
            dt = svc_rng.exponential(1.0 / config.mu2)
            heapq.heappush(events, (t + dt, seq, _T2_DONE, (st_idx, item)))
            seq += 1

    last_t = 0.0
    while events:
        t, _, tag, payload = heapq.heappop(events)
        last_t = t
        if tag == _ARRIVAL:
            i = payload
            step = engine.step(requests[i])
            owner = step.owner
            owner_of[i] = owner
            st_idx = station_of[owner]
            st = stations[st_idx]
            m = per[owner]
            _count(m, step)
            for page in step.writebacks:
                st.demand.append(("wb", owner, page))
            if step.result.outcome is Outcome.MISS:
                was_miss[i] = True
                enqueued_at[i] = t
                page = step.result.page
                key = (owner, page)
                if config.coalesce_misses and key in pending_fetch:
                    pending_fetch[key].append(i)
                else:
                    waiters = [i]
                    if config.coalesce_misses:
                        pending_fetch[key] = waiters
                    st.demand.append(("fill", owner, page, waiters))
                    note_qlen(owner, t, +1)
            else:
                t1_enter(owner, i, t)
            for page in step.prefetch_proposals:
                engine.buffers[owner].reserve(page)
                m.prefetches_issued += 1
                st.prefetch.append(("pf", owner, page))
            t2_start(st_idx, t)
        elif tag == _T2_DONE:
            st_idx, item = payload
            st = stations[st_idx]
            st.busy -= 1
            kind, proc, page = item[:3]
            if kind == "fill":
                waiters = item[3]
                if pending_fetch.get((proc, page)) is waiters:
                    del pending_fetch[(proc, page)]
                for ri in waiters:
                    t1_enter(proc, ri, t)
            elif kind == "pf":
                engine.buffers[proc].insert(page)
            t2_start(st_idx, t)
        else:  # _T1_DONE
            proc, i = payload
            completion[i] = t
            per[proc].completed += 1
            t1_busy[proc] -= 1
            if t1_wait[proc]:
                nxt = t1_wait[proc].popleft()
                t1_busy[proc] += 1
                dt = svc_rng.exponential(1.0 / config.mu1)
                heapq.heappush(events, (t + dt, seq, _T1_DONE, (proc, nxt)))
                seq += 1

    for proc in range(n_proc):
        lo = max(q_last_t[proc], warm_time)
        if last_t > lo:
            q_area[proc] += q_len[proc] * (last_t - lo)

    resp_sum = [0.0] * n_proc
    wait_sum = [0.0] * n_proc
    for i in range(warm_idx, n):
        owner = owner_of[i]
        m = per[owner]
        resp = completion[i] - requests[i].arrival_time
        resp_sum[owner] += resp
        m.resp_samples += 1
        m.max_response = max(m.max_response, resp)
        if was_miss[i]:
            wait_sum[owner] += miss_wait[i]
            m.wait_samples += 1
    for proc, m in enumerate(per):
        if m.resp_samples:
            m.mean_response = resp_sum[proc] / m.resp_samples
        if m.wait_samples:
            m.mean_miss_wait = wait_sum[proc] / m.wait_samples
        span = last_t - warm_time
        if span > 0:
            m.time_avg_miss_queue_len = q_area[proc] / span
        m.observed_makespan = last_t - requests[0].arrival_time

    return _finalize(config, requests, per, simulated_time=last_t,
                     timeseries=timeseries)


def sweep_cache_size(config: SimConfig,
                     sizes: Sequence[int]) -> list[tuple[int, float]]:
    """One replay per cache size over the identical trace (same seed);
    returns (n_lines, miss_rate) pairs."""
    sizes = list(sizes)
    if sizes != sorted(set(sizes)):
        raise ConfigError("sizes must be strictly increasing")
    requests = generate(config.traffic)
    out = []
    for size in sizes:
        cfg = replace(config, cache=replace(config.cache, n_lines=size))
        metrics = replay(cfg, requests)
        out.append((size, metrics.measured_miss_rate))
    return out


def compare_to_analytic(metrics: SimMetrics,
                        params: queueing.QueueNetworkParams) -> dict:
    """Relative error between simulated and analytic L2/W2 and mean response,
    using the measured miss rate. Non-equilibrium runs fall back to the
    service-time bounds."""
    if metrics.n_requests == 0:
        return {"n_requests": 0, "comparison": {}}
    p12 = metrics.measured_miss_rate
    params = replace(params, miss_rate=p12)
    report = queueing.analyze_separate_queues(params)

    def rel(sim: float, ana: Optional[float]) -> Optional[float]:
        if ana is None or ana == 0:
            return None
        return abs(sim - ana) / abs(ana)

    out: dict = {
        "n_requests": metrics.n_requests,
        "measured_miss_rate": p12,
        "analytic": report.to_dict(),
    }
    if report.in_equilibrium:
        agg = metrics.aggregate
        out["comparison"] = {
            "l2_sim": agg.time_avg_miss_queue_len,
            "l2_analytic": report.l2,
            "l2_rel_error": rel(agg.time_avg_miss_queue_len, report.l2),
            "w2_sim": agg.mean_miss_wait,
            "w2_analytic": report.w2,
            "w2_rel_error": rel(agg.mean_miss_wait, report.w2),
            "mean_response_sim": agg.mean_response,
        }
    else:
        out["comparison"] = {
            "t_bound": metrics.t_bound,
            "observed_makespan": metrics.aggregate.observed_makespan,
            "note": "non-equilibrium: bounds comparison only",
        }
    return out
