"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
Criteria and tolerances:

1. Worked-example fidelity (rho1 exact, rho2 to 1e-6, duration within 0.5%
   of the published 28.8 s, per-process response exactly 2.5 s; < 1 s).
2. M/M/1 queue length matches a brute-force geometric summation to 1e-9.
3. The k-server queue-length formula at k=1 equals the M/M/1 closed form
   for 20 random utilizations, to 1e-9.
4. Pure-miss simulation at utilization 0.5 over 1e5 requests: time-average
   queue length within 10% of 0.5 and mean wait within 10% of analytic
   (< 30 s).
5. Weight-sharing parity: 64 lines x 8192 B, one process, corrected mode,
   5 seeds; WS misses <= 1.10 x min(LRU, LFU) on every trace, LRU < LFU on
   Poisson and LFU < LRU on IRM aggregates in >= 4 of 5 seeds (< 60 s).
6. LRU miss-rate curve over {8,...,256} lines is non-increasing and reaches
   the cold-miss floor once capacity covers the working set.
7. OLS recovers noiseless synthetic coefficients to 1e-6 relative for both
   term families; residuals orthogonal to the design to 1e-6.
8. Published-coefficient predictions match an independent term-sum oracle
   to 1e-12 relative on 10 random in-range inputs per model.
9. Byte-identical metrics for repeated runs with the same seed.
"""

import json
import random
import time

import numpy as np
import pytest

from tiersim import sim
from tiersim.cli import main
from tiersim.device_models import FAMILY_TERMS, Device, TrainingSample, fit, \
    load_paper_model
from tiersim.queueing import (QueueNetworkParams, analyze_separate_queues,
                              example_walkthrough, mm1_queue_length,
                              mmk_queue_length)
from tiersim.tier1_cache import CacheConfig
from tiersim.workload import TrafficModel, TrafficSpec, generate

from test_device_models import (IN_RANGE, oracle_predict, scaled_true_coeffs,
                                synth_samples)
from test_queueing import mm1_lq_brute_force


def report(criterion: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {criterion}] {status}: {name}{suffix}")
    assert ok, f"criterion {criterion} failed: {name} {suffix}"


def test_criterion_1_worked_example_fidelity():
    t0 = time.perf_counter()
    printed = example_walkthrough()["printed"]
    elapsed = time.perf_counter() - t0
    ok = (printed["rho1"] == 0.0866
          and abs(printed["rho2"] - 20 / 33) < 1e-6
          and abs(printed["arrival_duration_s"] - 28.8) / 28.8 < 0.005
          and printed["per_process_response_s"] == 2.5
          and elapsed < 1.0)
    report(1, "worked-example fidelity", ok,
           f"rho1={printed['rho1']}, T={printed['arrival_duration_s']:.4f}s, "
           f"{elapsed * 1e3:.1f}ms")


def test_criterion_2_mm1_brute_force_oracle():
    worst = max(abs(mm1_queue_length(r) - mm1_lq_brute_force(r))
                for r in (0.1, 0.3, 0.5, 0.606, 0.9))
    report(2, "queue length vs geometric-summation oracle", worst < 1e-9,
           f"max abs err {worst:.2e}")


def test_criterion_3_k1_reduction():
    rnd = random.Random(123)
    worst = 0.0
    for _ in range(20):
        rho = rnd.uniform(1e-3, 0.999)
        worst = max(worst, abs(mmk_queue_length(rho, 1)
                               - mm1_queue_length(rho)))
    report(3, "k=1 reduction to the single-server closed form",
           worst < 1e-9, f"max abs err {worst:.2e}")


def test_criterion_4_simulation_vs_analytic():
    t0 = time.perf_counter()
    mu2, lam = 200.0, 100.0     # utilization 0.5
    spec = TrafficSpec(model=TrafficModel.POISSON, n_requests=100_000,
                       arrival_rate=lam, n_pages=64, rng_seed=0)
    cfg = sim.SimConfig(traffic=spec, cache=CacheConfig(n_lines=8),
                        force_miss=True, coalesce_misses=False, mu2=mu2,
                        warmup_fraction=0.1)
    metrics = sim.run(cfg)
    elapsed = time.perf_counter() - t0
    analytic = analyze_separate_queues(
        QueueNetworkParams(lam, 1000.0, mu2, 1.0))
    l2_sim = metrics.aggregate.time_avg_miss_queue_len
    w2_sim = metrics.aggregate.mean_miss_wait
    l2_err = abs(l2_sim - 0.5) / 0.5
    w2_err = abs(w2_sim - analytic.w2) / analytic.w2
    ok = l2_err < 0.10 and w2_err < 0.10 and elapsed < 30.0
    report(4, "pure-miss queue vs analytic", ok,
           f"L2 {l2_sim:.4f} (err {l2_err:.1%}), "
           f"W2 {w2_sim:.5f} vs {analytic.w2:.5f} (err {w2_err:.1%}), "
           f"{elapsed:.1f}s")


def test_criterion_5_online_learning_parity():
    t0 = time.perf_counter()
    cache = CacheConfig(n_lines=64, line_size=8192, n_processes=1)
    ensemble = sim.EnsembleParams(mode="corrected", epoch_width=4, beta=0.1)

    def misses(spec, policy, reqs):
        cfg = sim.SimConfig(traffic=spec, cache=cache, policy=policy,
                            ensemble=ensemble)
        return sim.replay(cfg, reqs).aggregate.misses

    worst_ratio = 0.0
    poisson_lru_wins = irm_lfu_wins = 0
    for seed in range(5):
        totals = {"poisson": {"lru": 0, "lfu": 0},
                  "irm": {"lru": 0, "lfu": 0}}
        workloads = (
            [("poisson", TrafficSpec(model=TrafficModel.POISSON,
                                     n_requests=n, n_pages=max(200, n // 5),
                                     arrival_rate=100.0, mean_lifetime=2.0,
                                     rng_seed=seed))
             for n in (500, 2000, 10000)]
            + [("irm", TrafficSpec(model=TrafficModel.IRM, n_requests=n,
                                   n_pages=1024, zipf_exponent=0.8,
                                   shuffle_pages=True, rng_seed=seed))
               for n in (500, 2000, 5000, 20000)])
        for kind, spec in workloads:
            reqs = generate(spec)
            lru = misses(spec, "lru", reqs)
            lfu = misses(spec, "lfu", reqs)
            ws = misses(spec, "ws", reqs)
            worst_ratio = max(worst_ratio, ws / min(lru, lfu))
            totals[kind]["lru"] += lru
            totals[kind]["lfu"] += lfu
        if totals["poisson"]["lru"] < totals["poisson"]["lfu"]:
            poisson_lru_wins += 1
        if totals["irm"]["lfu"] < totals["irm"]["lru"]:
            irm_lfu_wins += 1
    elapsed = time.perf_counter() - t0
    ok = (worst_ratio <= 1.10 and poisson_lru_wins >= 4
          and irm_lfu_wins >= 4 and elapsed < 60.0)
    report(5, "weight-sharing parity and directional pattern", ok,
           f"worst WS/min ratio {worst_ratio:.3f}, "
           f"LRU<LFU on Poisson {poisson_lru_wins}/5, "
           f"LFU<LRU on IRM {irm_lfu_wins}/5, {elapsed:.1f}s")


def test_criterion_6_miss_rate_curve():
    spec = TrafficSpec(model=TrafficModel.IRM, n_requests=20000, n_pages=200,
                       zipf_exponent=0.5, rng_seed=0)
    cfg = sim.SimConfig(traffic=spec, cache=CacheConfig(n_lines=8),
                        policy="lru")
    points = sim.sweep_cache_size(cfg, [8, 16, 32, 64, 128, 256])
    rates = [r for _, r in points]
    reqs = generate(spec)
    floor = len({r.page(spec.page_size) for r in reqs}) / len(reqs)
    monotone = all(a >= b for a, b in zip(rates, rates[1:]))
    at_floor = rates[-1] == pytest.approx(floor)
    report(6, "miss-rate curve monotone with cold-miss floor",
           monotone and at_floor,
           f"rates {['%.4f' % r for r in rates]}, floor {floor:.4f}")


def test_criterion_7_ols_machinery():
    worst_coef = worst_orth = 0.0
    for device in (Device.NVME_WRITE, Device.HDD_READ):
        rng = np.random.default_rng(17)
        true = scaled_true_coeffs(device, rng)
        noiseless = synth_samples(device, true, n=400, seed=17)
        model = fit(device, noiseless)
        rel = np.abs(np.asarray(model.coefficients) - true) / np.abs(true)
        worst_coef = max(worst_coef, float(rel.max()))
        # Orthogonality needs a non-degenerate residual, so add noise.
        noisy = synth_samples(device, true, n=400, noise=0.1, seed=18)
        model = fit(device, noisy)
        x = np.array([s.predictors for s in noisy])
        y = np.array([s.observed_time for s in noisy])
        design = model.term_set.design_matrix(x)
        resid = y - design @ np.asarray(model.coefficients)
        denom = np.linalg.norm(design, axis=0) * np.linalg.norm(resid)
        worst_orth = max(worst_orth,
                         float(np.abs(design.T @ resid / denom).max()))
    ok = worst_coef < 1e-6 and worst_orth < 1e-6
    report(7, "noiseless OLS recovery and residual orthogonality", ok,
           f"max coef rel err {worst_coef:.2e}, "
           f"max orthogonality defect {worst_orth:.2e}")


def test_criterion_8_paper_coefficient_models():
    rng = np.random.default_rng(29)
    worst = 0.0
    for device in Device:
        model = load_paper_model(device)
        for _ in range(10):
            x = [rng.uniform(lo, hi) for lo, hi in IN_RANGE[device]]
            want = oracle_predict(device, x)
            got = model.predict(x)
            worst = max(worst, abs(got - want) / abs(want))
    report(8, "published models vs independent term-sum oracle",
           worst < 1e-12, f"max rel err {worst:.2e}")


def test_criterion_9_determinism(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text(
        "schema_version: 1\n"
        "traffic: {model: irm, n_requests: 2000, n_pages: 256}\n"
        "cache: {n_lines: 32}\n"
        "policy: ws\n")
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--config", str(config), "--seed", "7",
                     "--out-dir", str(out)]) == 0
        blobs.append((out / "metrics.json").read_bytes())
    report(9, "byte-identical metrics under a fixed seed",
           blobs[0] == blobs[1], f"{len(blobs[0])} bytes")
