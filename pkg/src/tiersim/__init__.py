"""Two-tiered storage toolkit: workload generators, a tier-1 cache model with
online-learning eviction, stride prefetching, device performance models, a
queueing-network analyzer, and a deterministic discrete-event simulator."""

__version__ = "0.1.0"
