"""Weight-sharing online-learning victim selection over LRU, LFU and Random
experts, with epoch-based misprediction accounting.

Two weight-update modes are provided. ``corrected`` (the default) exempts
experts whose misprediction count stays below threshold * epoch_miss_count
and multiplies the rest by beta**mispredictions; this is the classic
multiplicative-weights penalty. ``literal`` applies w -= w * beta**l to every
expert, which penalizes experts *more* for *fewer* mispredictions (l = 0
zeroes the weight); it is kept for fidelity with the published pseudocode.
In both modes the mean lost weight is shared back: every expert gains
alpha * mean(weight lost).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tier1_cache import Tier1Cache


class Expert(enum.Enum):
    LRU = 0
    LFU = 1
    RANDOM = 2


class WeightMode(enum.Enum):
    CORRECTED = "corrected"
    LITERAL = "literal"


@dataclass(frozen=True)
class EvictionDecision:
    victim: int
    chosen_expert: int
    per_expert_choices: tuple[int, ...]


def expert_victim(expert: Expert, cache: Tier1Cache,
                  rng: np.random.Generator | None = None) -> int:
    """One expert's eviction choice. Ties break toward the lowest page
    number; the Random expert draws from the supplied generator."""
    if cache.n_valid == 0:
        raise ValueError("cannot pick a victim from an empty cache")
    if expert is Expert.RANDOM:
        if rng is None:
            raise ValueError("Random expert needs an RNG")
        pages = sorted(cache.resident_pages())
        return pages[int(rng.integers(0, len(pages)))]
    best_page = -1
    best_key = None
    for slot, page in enumerate(cache.page):
        if not cache.valid[slot]:
            continue
        key = (cache.last_access[slot] if expert is Expert.LRU
               else cache.freq[slot])
        if best_key is None or key < best_key or (key == best_key
                                                  and page < best_page):
            best_key = key
            best_page = page
    return best_page


@dataclass
class ExpertEnsemble:
    """Weights, probabilities and per-epoch prediction logs for the expert
    pool. One instance per process; all randomness flows from ``seed``."""

    alpha: float = 0.5
    beta: float = 0.5
    epoch_width: int = 4
    threshold: float = 0.25
    mode: WeightMode = WeightMode.CORRECTED
    seed: int = 0
    experts: tuple[Expert, ...] = (Expert.LRU, Expert.LFU, Expert.RANDOM)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.epoch_width < 1:
            raise ValueError("epoch_width must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        n = len(self.experts)
        self.n_experts = n
        self.weights = np.full(n, 1.0 / n)
        self.probs = np.full(n, 1.0 / n)
        self.predictions: list[set[int]] = [set() for _ in range(n)]
        self.mispred = np.zeros(n, dtype=np.int64)
        self.epoch_miss_count = 0
        self.iter = 0
        self.rng = np.random.default_rng(self.seed)

    # -- Victim selection ---------------------------------------------------

    def get_victim(self, cache: Tier1Cache) -> EvictionDecision:
        """Query every expert, log each choice into its prediction set, and
        return the choice of the highest-probability expert (ties go to the
        lowest expert index)."""
        choices = tuple(expert_victim(e, cache, self.rng)
                        for e in self.experts)
        for i, page in enumerate(choices):
            self.predictions[i].add(page)
        chosen = int(np.argmax(self.probs))  # argmax takes the first maximum
        return EvictionDecision(choices[chosen], chosen, choices)

    def victim_selector(self):
        return lambda cache: self.get_victim(cache).victim

    # -- Weight adjustment ---------------------------------------------------

    def record_misses_and_adjust(self, misses: set[int]) -> None:
        """One polling iteration: accumulate mispredictions (a miss on a page
        an expert evicted this epoch), then adjust weights at epoch
        boundaries."""
        self.epoch_miss_count += len(misses)
        for i in range(self.n_experts):
            pred = self.predictions[i]
            self.mispred[i] += sum(1 for p in misses if p in pred)
        self.iter += 1
        if self.iter % self.epoch_width != 0:
            return
        self._adjust()
        self.predictions = [set() for _ in range(self.n_experts)]
        self.mispred[:] = 0
        self.epoch_miss_count = 0

    def _adjust(self) -> None:
        prev = self.weights.copy()
        cutoff = self.threshold * self.epoch_miss_count
        for i in range(self.n_experts):
            l = int(self.mispred[i])
            if self.mode is WeightMode.LITERAL:
                self.weights[i] -= self.weights[i] * self.beta ** l
            else:
                if l < cutoff:
                    continue  # below threshold: ignored
                self.weights[i] *= self.beta ** l
        # Share back the mean lost weight, averaged over all experts.
        s = float(np.mean(prev - self.weights))
        self.weights += self.alpha * s
        den = float(self.weights.sum())
        if den > 0:
            self.probs = self.weights / den
