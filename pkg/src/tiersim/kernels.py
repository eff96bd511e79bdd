"""Hot inner loops for workload generation.

Each kernel exists twice: a numba ``@njit`` version and a numpy/Python
fallback. The active implementation is chosen at import time; set
``TIERSIM_NUMBA=0`` to force the fallback (useful for debugging and for the
benchmark in ``benchmarks/bench_kernels.py``).

Both paths consume pre-drawn uniform variates so all randomness stays in the
caller's single seeded generator.
"""

import os

import numpy as np


def numba_enabled() -> bool:
    return os.environ.get("TIERSIM_NUMBA", "1").lower() not in ("0", "false", "no")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and numba_enabled()


def _irm_select_pages_py(slots, popularity_cap, n_slots):
    """Map slot draws to live page ids, retiring a page once it has served
    ``popularity_cap`` requests and replacing it with a fresh page id."""
    n = slots.shape[0]
    pages = np.empty(n, dtype=np.int64)
    live = np.arange(n_slots, dtype=np.int64)
    counts = np.zeros(n_slots, dtype=np.int64)
    next_id = np.int64(n_slots)
    for j in range(n):
        s = slots[j]
        pages[j] = live[s]
        counts[s] += 1
        if counts[s] >= popularity_cap:
            live[s] = next_id
            next_id += 1
            counts[s] = 0
    return pages


def _poisson_select_pages_py(arrivals, u_page, intro_times, intro_interval,
                             mean_lifetime):
    """Pick one page per request with probability proportional to
    exp(-(age)/mean_lifetime) over the pages introduced so far.

    Page p becomes active at request index p * intro_interval; its age at
    time t is t - intro_times[p].
    """
    n = arrivals.shape[0]
    n_pages = intro_times.shape[0]
    pages = np.empty(n, dtype=np.int64)
    for j in range(n):
        n_active = min(n_pages, j // intro_interval + 1)
        w = np.exp(-(arrivals[j] - intro_times[:n_active]) / mean_lifetime)
        c = np.cumsum(w)
        pages[j] = np.searchsorted(c, u_page[j] * c[-1], side="right")
        if pages[j] >= n_active:  # guard the u==1 edge
            pages[j] = n_active - 1
    return pages


if HAVE_NUMBA:

    @njit(cache=False)
    def _irm_select_pages_nb(slots, popularity_cap, n_slots):
        n = slots.shape[0]
        pages = np.empty(n, dtype=np.int64)
        live = np.arange(n_slots).astype(np.int64)
        counts = np.zeros(n_slots, dtype=np.int64)
        next_id = np.int64(n_slots)
        for j in range(n):
            s = slots[j]
            pages[j] = live[s]
            counts[s] += 1
            if counts[s] >= popularity_cap:
                live[s] = next_id
                next_id += 1
                counts[s] = 0
        return pages

    @njit(cache=False)
    def _poisson_select_pages_nb(arrivals, u_page, intro_times, intro_interval,
                                 mean_lifetime):
        n = arrivals.shape[0]
        n_pages = intro_times.shape[0]
        pages = np.empty(n, dtype=np.int64)
        w = np.empty(n_pages)
        for j in range(n):
            n_active = min(n_pages, j // intro_interval + 1)
            total = 0.0
            for p in range(n_active):
                w[p] = np.exp(-(arrivals[j] - intro_times[p]) / mean_lifetime)
                total += w[p]
            target = u_page[j] * total
            acc = 0.0
            chosen = n_active - 1
            for p in range(n_active):
                acc += w[p]
                if acc > target:
                    chosen = p
                    break
            pages[j] = chosen
        return pages

if USE_NUMBA:
    irm_select_pages = _irm_select_pages_nb
    poisson_select_pages = _poisson_select_pages_nb
else:
    irm_select_pages = _irm_select_pages_py
    poisson_select_pages = _poisson_select_pages_py
