"""Request-stream generators and trace round-tripping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiersim.workload import (ConfigError, Request, RequestKind, TraceError,
                              TrafficModel, TrafficSpec, generate,
                              generate_irm, generate_poisson, load_trace,
                              save_trace, zipf_probabilities)


def poisson_spec(**kw):
    base = dict(model=TrafficModel.POISSON, n_requests=1000)
    base.update(kw)
    return TrafficSpec(**base)


def irm_spec(**kw):
    base = dict(model=TrafficModel.IRM, n_requests=1000)
    base.update(kw)
    return TrafficSpec(**base)


class TestPoisson:
    def test_zero_requests_empty(self):
        assert generate_poisson(poisson_spec(n_requests=0)) == []

    def test_fixed_seed_identical(self):
        a = generate_poisson(poisson_spec(n_requests=500, rng_seed=7))
        b = generate_poisson(poisson_spec(n_requests=500, rng_seed=7))
        assert a == b

    def test_mean_interarrival_matches_rate(self):
        reqs = generate_poisson(poisson_spec(n_requests=10000,
                                             arrival_rate=100.0))
        times = np.array([r.arrival_time for r in reqs])
        gaps = np.diff(np.concatenate([[0.0], times]))
        assert abs(gaps.mean() - 0.01) / 0.01 < 0.05

    def test_arrivals_strictly_increasing(self):
        reqs = generate_poisson(poisson_spec(n_requests=2000))
        times = [r.arrival_time for r in reqs]
        assert all(a < b for a, b in zip(times, times[1:]))

    def test_pages_within_population(self):
        spec = poisson_spec(n_requests=5000, n_pages=64)
        pages = {r.page(spec.page_size) for r in generate_poisson(spec)}
        assert pages <= set(range(64))

    def test_read_fraction_zero_all_writes(self):
        reqs = generate_poisson(poisson_spec(n_requests=300,
                                             read_fraction=0.0))
        assert all(r.kind is RequestKind.WRITE for r in reqs)

    def test_offsets_stay_inside_page(self):
        spec = poisson_spec(n_requests=2000, request_size=512)
        for r in generate_poisson(spec):
            assert r.offset % spec.page_size + r.size <= spec.page_size

    def test_model_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            generate_poisson(irm_spec())


class TestIrm:
    def test_zipf_probabilities_harmonic(self):
        # n_pages=4, exponent=1: weights 1, 1/2, 1/3, 1/4 over H4 = 25/12.
        p = zipf_probabilities(4, 1.0)
        assert np.allclose(p, [0.48, 0.24, 0.16, 0.12])

    def test_single_page_degenerate(self):
        spec = irm_spec(n_pages=1, n_requests=200)
        assert all(r.page(spec.page_size) == 0 for r in generate_irm(spec))

    def test_popularity_cap_one_every_page_once(self):
        n = 64
        spec = irm_spec(n_pages=n, n_requests=n, popularity_cap=1)
        pages = [r.page(spec.page_size) for r in generate_irm(spec)]
        assert len(set(pages)) == n

    def test_fixed_seed_identical(self):
        a = generate_irm(irm_spec(rng_seed=3))
        b = generate_irm(irm_spec(rng_seed=3))
        assert a == b

    def test_rank_frequencies_decrease(self):
        spec = irm_spec(n_requests=50000, n_pages=8, zipf_exponent=1.0)
        pages = [r.page(spec.page_size) for r in generate_irm(spec)]
        counts = [pages.count(i) for i in range(8)]
        assert counts == sorted(counts, reverse=True)

    def test_shuffle_pages_permutes_population(self):
        plain = irm_spec(n_requests=5000, n_pages=32)
        shuffled = irm_spec(n_requests=5000, n_pages=32, shuffle_pages=True)
        a = [r.page(8192) for r in generate_irm(plain)]
        b = [r.page(8192) for r in generate_irm(shuffled)]
        assert set(a) == set(b)       # same population
        assert a != b                 # but different id assignment

    def test_generate_dispatch(self):
        assert generate(irm_spec(n_requests=10)) \
            == generate_irm(irm_spec(n_requests=10))


class TestValidation:
    @pytest.mark.parametrize("kw", [
        dict(n_requests=-1),
        dict(n_pages=0),
        dict(arrival_rate=0.0),
        dict(read_fraction=1.5),
        dict(request_size=0),
        dict(request_size=9000),
    ])
    def test_bad_fields_rejected(self, kw):
        with pytest.raises(ConfigError):
            poisson_spec(**kw).validate()

    def test_bad_zipf_exponent(self):
        with pytest.raises(ConfigError):
            irm_spec(zipf_exponent=0.0).validate()

    def test_bad_mean_lifetime(self):
        with pytest.raises(ConfigError):
            poisson_spec(mean_lifetime=0.0).validate()


class TestTraceIO:
    def test_round_trip(self, tmp_path):
        reqs = generate_poisson(poisson_spec(n_requests=200,
                                             read_fraction=0.5))
        path = tmp_path / "trace.csv"
        save_trace(reqs, path)
        assert load_trace(path) == reqs

    def test_header_only_empty(self, tmp_path):
        path = tmp_path / "t.csv"
        save_trace([], path)
        assert load_trace(path) == []

    def test_three_row_identity(self, tmp_path):
        reqs = [Request(0.5, 0, 8192, 512, RequestKind.READ),
                Request(0.75, 1, 0, 512, RequestKind.WRITE),
                Request(1.0, 0, 16384, 256, RequestKind.READ)]
        path = tmp_path / "t.csv"
        save_trace(reqs, path)
        assert load_trace(path) == reqs

    def test_zero_size_rejected_with_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("arrival_time,file_id,offset,size,kind\n"
                        "0.1,0,0,0,R\n")
        with pytest.raises(TraceError, match=":2"):
            load_trace(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(TraceError):
            load_trace(path)

    def test_decreasing_times_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("arrival_time,file_id,offset,size,kind\n"
                        "1.0,0,0,512,R\n0.5,0,0,512,R\n")
        with pytest.raises(TraceError, match="not non-decreasing"):
            load_trace(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("")
        with pytest.raises(TraceError):
            load_trace(path)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 300), seed=st.integers(0, 2**31),
       model=st.sampled_from([TrafficModel.POISSON, TrafficModel.IRM]))
def test_generate_round_trips_through_csv(tmp_path_factory, n, seed, model):
    spec = TrafficSpec(model=model, n_requests=n, rng_seed=seed,
                       read_fraction=0.5)
    reqs = generate(spec)
    assert len(reqs) == n
    path = tmp_path_factory.mktemp("prop") / "t.csv"
    save_trace(reqs, path)
    assert load_trace(path) == reqs


@given(offset=st.integers(0, 2**40), page_size=st.sampled_from([4096, 8192]))
def test_request_page_is_floor_division(offset, page_size):
    r = Request(0.0, 0, offset, 1, RequestKind.READ)
    assert r.page(page_size) == offset // page_size
