"""Command-line entry point.

Subcommands: ``simulate``, ``analyze``, ``fit``, ``gen-trace``.
Exit codes: 0 success, 2 configuration/validation error, 3 runtime or
numerical error.

Simulation configs are YAML with a versioned schema (``schema_version: 1``);
unknown keys are rejected. Any key can be overridden on the command line
with ``--set dotted.key=value``; flags win over the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import yaml

from . import __version__, device_models, queueing, sim, workload
from .tier1_cache import CacheConfig, MappingPolicy
from .workload import ConfigError, TrafficModel, TrafficSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "traffic", "cache", "policy", "ensemble", "prefetch",
    "mu1", "mu2", "k_service_threads", "coalesce_misses", "shared_tier2",
    "tier2_servers", "prewarm", "force_miss", "warmup_fraction",
    "horizon_requests", "horizon_seconds", "collect_timeseries", "seed",
}
_TRAFFIC_KEYS = {"model", "n_requests", "page_size", "n_pages",
                 "arrival_rate", "read_fraction", "request_size",
                 "zipf_exponent", "mean_lifetime", "popularity_cap",
                 "shuffle_pages", "rng_seed"}
_CACHE_KEYS = {"n_lines", "line_size", "n_processes", "mapping",
               "block_size", "total_pages"}
_ENSEMBLE_KEYS = {"alpha", "beta", "epoch_width", "threshold", "mode"}
_PREFETCH_KEYS = {"enabled", "width"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: "
                          f"{', '.join(sorted(unknown))}")


def config_from_dict(raw: dict) -> sim.SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "top level")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")

    traffic_raw = dict(raw.get("traffic") or {})
    _reject_unknown(traffic_raw, _TRAFFIC_KEYS, "traffic")
    if "model" not in traffic_raw:
        raise ConfigError("traffic.model is required")
    traffic_raw["model"] = TrafficModel(traffic_raw["model"])
    traffic = TrafficSpec(**traffic_raw)

    cache_raw = dict(raw.get("cache") or {})
    _reject_unknown(cache_raw, _CACHE_KEYS, "cache")
    if "n_lines" not in cache_raw:
        raise ConfigError("cache.n_lines is required")
    if "mapping" in cache_raw:
        cache_raw["mapping"] = MappingPolicy(cache_raw["mapping"])
    cache = CacheConfig(**cache_raw)

    ensemble_raw = dict(raw.get("ensemble") or {})
    _reject_unknown(ensemble_raw, _ENSEMBLE_KEYS, "ensemble")
    ensemble = sim.EnsembleParams(**ensemble_raw)

    prefetch_raw = dict(raw.get("prefetch") or {})
    _reject_unknown(prefetch_raw, _PREFETCH_KEYS, "prefetch")

    kwargs = {k: raw[k] for k in
              ("policy", "mu1", "mu2", "k_service_threads", "coalesce_misses",
               "shared_tier2", "tier2_servers", "prewarm", "force_miss",
               "warmup_fraction", "horizon_requests", "horizon_seconds",
               "collect_timeseries", "seed") if k in raw}
    config = sim.SimConfig(
        traffic=traffic, cache=cache, ensemble=ensemble,
        prefetch_enabled=bool(prefetch_raw.get("enabled", False)),
        prefetch_width=int(prefetch_raw.get("width", 4)),
        **kwargs)
    config.validate()
    return config


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects dotted.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        keys = dotted.split(".")
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {dotted!r} crosses a scalar")
        node[keys[-1]] = yaml.safe_load(value)
    return raw


def load_config(path: str, overrides: list[str]) -> sim.SimConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(p, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return config_from_dict(_apply_overrides(raw, overrides))


def _config_snapshot(config: sim.SimConfig) -> dict:
    def clean(obj):
        if dataclasses.is_dataclass(obj):
            return {k: clean(v) for k, v in dataclasses.asdict(obj).items()}
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if hasattr(obj, "value"):
            return obj.value
        return obj
    return clean(config)


def _atomic_write(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir: Path, config_snapshot: dict, seed: int,
                   started: float, outputs: list[str]) -> None:
    manifest = {
        "config": config_snapshot,
        "seed": seed,
        "tool_version": __version__,
        "start_time": started,
        "end_time": time.time(),
        "outputs": outputs,
    }
    _atomic_write(out_dir / "manifest.json",
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.time()
    config = load_config(args.config, args.set or [])
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.sweep:
        sizes = [int(s) for s in args.sweep.split(",")]
        points = sim.sweep_cache_size(config, sizes)
        if args.format == "csv":
            text = "n_lines,miss_rate\n" + "".join(
                f"{s},{r!r}\n" for s, r in points)
            path = out_dir / "sweep.csv"
        else:
            text = json.dumps([{"n_lines": s, "miss_rate": r}
                               for s, r in points], indent=2) + "\n"
            path = out_dir / "sweep.json"
        _atomic_write(path, text)
        outputs.append(path.name)
        print(text, end="")
    else:
        metrics = sim.run(config)
        path = out_dir / "metrics.json"
        _atomic_write(path, metrics.to_json())
        outputs.append(path.name)
        if config.collect_timeseries:
            ts_path = out_dir / "timeseries.csv"
            _atomic_write(ts_path, metrics.timeseries_csv())
            outputs.append(ts_path.name)
        if args.format == "table":
            for key, val in sorted(metrics.aggregate.to_dict().items()):
                print(f"{key:<28} {val}")
        else:
            print(metrics.to_json(), end="")
    write_manifest(out_dir, _config_snapshot(config), config.seed, started,
                   outputs)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.paper_example:
        result = queueing.example_walkthrough()
        if args.format == "json":
            print(json.dumps(result, indent=2, sort_keys=True))
        else:
            printed = result["printed"]
            print("worked example (printed arithmetic):")
            print(f"  effective arrival   {printed['effective_arrival']:.6g} req/s")
            print(f"  rho1                {printed['rho1']:.6g}")
            print(f"  rho2                {printed['rho2']:.6g}")
            print(f"  arrival duration T  {printed['arrival_duration_s']:.6g} s")
            print(f"  per-process response {printed['per_process_response_s']:.6g} s")
            print(f"  L2 / W2             {printed['l2']:.6g} / {printed['w2']:.6g} s")
            print(f"  in equilibrium      {printed['in_equilibrium']}")
            print(result["note"])
        return EXIT_OK
    for name in ("lam", "mu1", "mu2", "p12"):
        if getattr(args, name) is None:
            print(f"error: --{name} is required (or use --paper-example)",
                  file=sys.stderr)
            return EXIT_CONFIG
    params = queueing.QueueNetworkParams(
        arrival_rate=args.lam, hit_service_rate=args.mu1,
        miss_service_rate=args.mu2, miss_rate=args.p12, servers=args.k)
    params.validate()
    report = queueing.analyze_separate_queues(params)
    if not report.in_equilibrium:
        print("warning: system not in equilibrium (some utilization >= 1)",
              file=sys.stderr)
    if args.format == "json":
        print(report.to_json())
    else:
        print(report.format_table())
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.paper_coefficients:
        device = device_models.Device(args.paper_coefficients)
        model = device_models.load_paper_model(device)
    else:
        if not args.training or not args.family:
            print("error: --training and --family are required "
                  "(or use --paper-coefficients)", file=sys.stderr)
            return EXIT_CONFIG
        device = device_models.Device(args.family)
        samples = device_models.load_training_csv(args.training)
        model = device_models.fit(device, samples)
    if args.out:
        model.save(args.out)
    print(json.dumps(model.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    spec = TrafficSpec(
        model=TrafficModel(args.model),
        n_requests=args.n,
        page_size=args.page_size,
        n_pages=args.n_pages,
        arrival_rate=args.arrival_rate,
        read_fraction=args.read_fraction,
        request_size=args.request_size,
        zipf_exponent=args.zipf_exponent,
        mean_lifetime=args.mean_lifetime,
        popularity_cap=args.popularity_cap,
        shuffle_pages=args.shuffle_pages,
        rng_seed=args.seed,
    )
    spec.validate()
    requests = workload.generate(spec)
    workload.save_trace(requests, args.out)
    print(f"wrote {len(requests)} requests to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiersim",
        description="Two-tiered storage simulator and analytic toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the discrete-event simulator")
    p.add_argument("--config", required=True, help="YAML config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override config seed")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--format", choices=("json", "csv", "table"),
                   default="json")
    p.add_argument("--sweep", default=None,
                   help="comma-separated cache sizes (n_lines) to sweep")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (dotted path)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form queueing analysis")
    p.add_argument("--lam", type=float, default=None,
                   help="arrival rate (req/s)")
    p.add_argument("--mu1", type=float, default=None,
                   help="tier-1 service rate (req/s)")
    p.add_argument("--mu2", type=float, default=None,
                   help="tier-2 service rate (req/s)")
    p.add_argument("--p12", type=float, default=None, help="miss rate")
    p.add_argument("--k", type=int, default=1, help="tier-1 servers")
    p.add_argument("--paper-example", action="store_true",
                   help="print the published worked example")
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit or dump a device performance model")
    p.add_argument("--training", default=None,
                   help="training CSV (x1..x5,y_seconds)")
    p.add_argument("--family", default=None,
                   choices=[d.value for d in device_models.Device])
    p.add_argument("--paper-coefficients", default=None,
                   choices=[d.value for d in device_models.Device],
                   help="dump the published model without fitting")
    p.add_argument("--out", default=None, help="write fitted-model JSON here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gen-trace", help="generate a trace CSV")
    p.add_argument("--model", required=True, choices=("poisson", "irm"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--page-size", type=int, default=8192)
    p.add_argument("--n-pages", type=int, default=256)
    p.add_argument("--arrival-rate", type=float, default=100.0)
    p.add_argument("--read-fraction", type=float, default=1.0)
    p.add_argument("--request-size", type=int, default=512)
    p.add_argument("--zipf-exponent", type=float, default=1.0)
    p.add_argument("--mean-lifetime", type=float, default=1.0)
    p.add_argument("--popularity-cap", type=int, default=10**18)
    p.add_argument("--shuffle-pages", action="store_true",
                   help="decorrelate page ids from popularity ranks")
    p.set_defaults(func=cmd_gen_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, workload.TraceError, ValueError) as exc:
        if isinstance(exc, device_models.RankDeficientError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
