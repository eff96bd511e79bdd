"""Closed-form queueing analysis of the two-tier system.

The tier-1 hit path is a k-server queue fed by hits plus fills returning from
tier 2; the miss path is a single-server FIFO queue. Service-time lower
bounds, the merged single-queue service time, utilizations, expected queue
lengths and waiting times, and an equilibrium flag are all computed in one
report.

Note on the published worked example: its effective arrival rate is printed
as 0.8*100 + 0.2*33 = 86.6 req/s, which disagrees with the stated formula
(1-p12)*lambda + mu2 = 113 req/s. ``analyze_separate_queues`` computes from
the formula; ``example_walkthrough`` additionally reports the printed
86.6-based values, labeled, for fidelity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Optional, Sequence


@dataclass(frozen=True)
class QueueNetworkParams:
    arrival_rate: float                 # lambda, req/s
    hit_service_rate: float             # mu1, req/s
    miss_service_rate: float            # mu2, req/s
    miss_rate: float                    # p12 in [0, 1]
    servers: int = 1                    # k
    n_processes: int = 1
    hit_read_rate: Optional[float] = None   # mu1_r; defaults to mu1
    hit_write_rate: Optional[float] = None  # mu1_w; defaults to mu1
    n_reads: Optional[Sequence[float]] = None    # per-process counts
    n_writes: Optional[Sequence[float]] = None
    n_misses: Optional[Sequence[float]] = None

    def bounds(self):
        """Service-time lower bounds from the per-process counts."""
        if self.n_reads is None or self.n_writes is None \
                or self.n_misses is None:
            raise ValueError("per-process counts (n_reads, n_writes, "
                             "n_misses) are required for bounds")
        return service_time_bounds(
            self.n_reads, self.n_writes, self.n_misses,
            self.hit_read_rate or self.hit_service_rate,
            self.hit_write_rate or self.hit_service_rate,
            self.miss_service_rate)

    def validate(self) -> None:
        if self.arrival_rate <= 0 or self.hit_service_rate <= 0 \
                or self.miss_service_rate <= 0:
            raise ValueError("all rates must be > 0")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must be in [0, 1]")
        if self.servers < 1:
            raise ValueError("servers must be >= 1")
        if self.n_processes < 1:
            raise ValueError("n_processes must be >= 1")


@dataclass(frozen=True)
class QueueNetworkReport:
    effective_arrival: float
    rho1: float
    rho2: float
    l1: Optional[float]
    w1: Optional[float]
    l2: Optional[float]
    w2: Optional[float]
    l1_classic: Optional[float]   # Erlang-C cross-check (same closed form)
    in_equilibrium: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        rows = [
            ("effective arrival (req/s)", self.effective_arrival),
            ("rho1 (k-server queue)", self.rho1),
            ("rho2 (miss queue)", self.rho2),
            ("L1 (requests)", self.l1),
            ("W1 (s)", self.w1),
            ("L2 (requests)", self.l2),
            ("W2 (s)", self.w2),
            ("in equilibrium", self.in_equilibrium),
        ]
        width = max(len(k) for k, _ in rows)
        lines = []
        for k, v in rows:
            sval = "n/a" if v is None else (str(v) if isinstance(v, bool)
                                            else f"{v:.6g}")
            lines.append(f"{k:<{width}}  {sval}")
        return "\n".join(lines)


def service_time_bounds(n_reads: Sequence[float] | float,
                        n_writes: Sequence[float] | float,
                        n_misses: Sequence[float] | float,
                        mu1_read: float, mu1_write: float, mu2: float,
                        ) -> tuple[list[float], list[float], list[float], float]:
    """Lower bounds on completion time from per-process request counts.

    Returns (T_h per process, T_m per process, T_i per process, T) where
    T_h = n_r/mu1_r + n_w/mu1_w, T_m = n_m/mu2, T_i = max(T_h, T_m) and
    T = max over processes.
    """
    if mu1_read <= 0 or mu1_write <= 0 or mu2 <= 0:
        raise ValueError("service rates must be > 0")

    def as_list(v):
        return list(v) if isinstance(v, (list, tuple)) else [float(v)]

    nr, nw, nm = as_list(n_reads), as_list(n_writes), as_list(n_misses)
    if not len(nr) == len(nw) == len(nm):
        raise ValueError("per-process count vectors must share a length")
    t_h = [r / mu1_read + w / mu1_write for r, w in zip(nr, nw)]
    t_m = [m / mu2 for m in nm]
    t_i = [max(h, m) for h, m in zip(t_h, t_m)]
    return t_h, t_m, t_i, max(t_i)


def merged_service_time(p12: float, mu1: float, mu2: float) -> float:
    """Expected service time when hits and misses share one queue:
    (1-p12)/mu1 + p12/mu2."""
    if mu1 <= 0 or mu2 <= 0:
        raise ValueError("service rates must be > 0")
    if not 0.0 <= p12 <= 1.0:
        raise ValueError("p12 must be in [0, 1]")
    return (1.0 - p12) / mu1 + p12 / mu2


def mmk_empty_probability(offered_load: float, k: int) -> float:
    """P0 for an M/M/k queue with offered load a = lambda/mu (requires
    a < k)."""
    if offered_load >= k:
        raise ValueError("offered load must be < k for a stable M/M/k queue")
    acc = sum(offered_load ** n / math.factorial(n) for n in range(k))
    acc += offered_load ** k / (math.factorial(k) * (1.0 - offered_load / k))
    return 1.0 / acc


def mmk_queue_length(offered_load: float, k: int) -> float:
    """Expected number waiting: P0 * a^(k+1) / ((k-1)! * (k-a)^2)."""
    p0 = mmk_empty_probability(offered_load, k)
    return (p0 * offered_load ** (k + 1)
            / (math.factorial(k - 1) * (k - offered_load) ** 2))


def erlang_c(offered_load: float, k: int) -> float:
    """Probability an arrival waits (Erlang-C)."""
    p0 = mmk_empty_probability(offered_load, k)
    return (offered_load ** k / math.factorial(k)
            * (1.0 / (1.0 - offered_load / k)) * p0)


def mmk_queue_length_classic(offered_load: float, k: int) -> float:
    """Lq via Erlang-C: C(k, a) * rho / (1 - rho) with rho = a/k."""
    rho = offered_load / k
    return erlang_c(offered_load, k) * rho / (1.0 - rho)


def mm1_queue_length(rho: float) -> float:
    if rho >= 1.0:
        raise ValueError("rho must be < 1")
    return rho * rho / (1.0 - rho)


def ggk_wait_approx(arrival_rate: float, service_rate: float, k: int,
                    ca2: float, cs2: float) -> float:
    """Approximate G/G/k mean wait (Allen-Cunneen style): the M/M/k wait
    scaled by (ca^2 + cs^2)/2. Explicitly an approximation."""
    a = arrival_rate / service_rate
    wq_mmk = mmk_queue_length(a, k) / arrival_rate
    return wq_mmk * (ca2 + cs2) / 2.0


def analyze_separate_queues(params: QueueNetworkParams) -> QueueNetworkReport:
    """Hit path as an M/M/k queue fed by hits plus fills from tier 2; miss
    path as an M/M/1 queue. Non-equilibrium inputs are reported with the
    unstable queue's length/wait omitted, never raised."""
    params.validate()
    lam, p12 = params.arrival_rate, params.miss_rate
    mu1, mu2, k = params.hit_service_rate, params.miss_service_rate, \
        params.servers
    lam_eff = (1.0 - p12) * lam + mu2
    rho1 = lam_eff / mu1
    rho2 = p12 * lam / mu2

    l1 = w1 = l1_classic = None
    if rho1 < k:
        l1 = mmk_queue_length(rho1, k)
        l1_classic = mmk_queue_length_classic(rho1, k)
        w1 = l1 / lam_eff
    l2 = w2 = None
    if rho2 < 1.0:
        l2 = mm1_queue_length(rho2)
        lam_miss = lam * p12
        w2 = l2 / lam_miss if lam_miss > 0 else 0.0
    return QueueNetworkReport(
        effective_arrival=lam_eff,
        rho1=rho1,
        rho2=rho2,
        l1=l1, w1=w1, l2=l2, w2=w2,
        l1_classic=l1_classic,
        in_equilibrium=rho1 < 1.0 and rho2 < 1.0,
    )


def example_walkthrough() -> dict:
    """The published worked example: lambda=100, p12=0.2, mu1=1000, mu2=33,
    2500 requests per process (500 misses). Returns both the printed
    86.6-based numbers and the formula-based report."""
    lam, p12, mu1, mu2 = 100.0, 0.2, 1000.0, 33.0
    n_per_process, n_miss = 2500.0, 500.0
    printed_effective = (1.0 - p12) * lam + p12 * mu2  # 86.6 as printed
    rho1_printed = printed_effective / mu1             # 0.0866
    rho2 = p12 * lam / mu2                             # 20/33
    arrival_duration = n_per_process / printed_effective  # ~28.87 s
    response_per_process = n_per_process / mu1             # 2.5 s
    l2 = mm1_queue_length(rho2)
    w2 = l2 / (lam * p12)
    params = QueueNetworkParams(lam, mu1, mu2, p12)
    return {
        "printed": {
            "effective_arrival": printed_effective,
            "rho1": rho1_printed,
            "rho2": rho2,
            "arrival_duration_s": arrival_duration,
            "per_process_response_s": response_per_process,
            "l2": l2,
            "w2": w2,
            "in_equilibrium": rho1_printed < 1.0 and rho2 < 1.0,
        },
        "formula": analyze_separate_queues(params).to_dict(),
        "note": ("'printed' uses the published effective arrival "
                 "(1-p12)*lambda + p12*mu2 = 86.6 req/s; 'formula' uses "
                 "(1-p12)*lambda + mu2 = 113 req/s."),
    }
