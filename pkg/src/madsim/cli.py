"""Command-line experiment driver.

Wires allocators, adversary workloads, detection, and metrics into
reproducible scenario runs. Every run is single-threaded and fully
determined by (scenario parameters, seed); repetitions use seeds
seed_base..seed_base+reps-1 and may execute in a worker pool.

Artifacts per invocation, all under the output directory:
  runs.jsonl       one JSON object per run
  summary.csv      scenario-level aggregate table
  unique_*.csv     unique-block time series (sparse-compare)
  recycle_*.json   five-number recycle summaries (sparse-compare)
  frames_*/        heat-map grid frames (sparse-compare with --frames)
  manifest.json    parameter echo plus sha256 of every artifact

Exit codes: 0 ok, 1 check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import random
import statistics
import sys

from .buddy import BuddyAllocator
from .mad import Mad, MadConfig, DiversityRng
from .monitor import SnapshotMonitor
from .metrics import (RunRecord, attrition_rate, recycle_stats, heatmap_frames,
                      write_unique_series_csv, write_recycle_summary_json,
                      write_heatmap_frames_csv)
from .adversary import (sparse_massage, exhaustive_massage, spray_massage,
                        worst_case_experiment)
from .errors import ConfigError, MadSimError, RoundBudgetExhausted

SCENARIOS = ("sparse-compare", "exhaustive-detect", "spray", "worst-case", "sweep")

# Offset so the adversary's stream never collides with the layer's seed.
ADV_SEED_OFFSET = 10_000
MONITOR_SEED_OFFSET = 20_000


@dataclasses.dataclass
class ExperimentSpec:
    scenario: str
    allocator: str
    mad_config: MadConfig
    total_blocks: int
    n_allocs: int
    repetitions: int
    seed_base: int
    output_dir: str
    interval: int
    check: bool = False
    workers: int = 1
    frames: bool = False
    lb: int | None = None
    ub: int | None = None
    fraction: float = 0.125
    budget: int = 500_000
    capacities: tuple[int, ...] = ()
    thresholds: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mad_config"] = self.mad_config.to_dict()
        return d


def _build_allocator(strategy: str, seed: int, spec: ExperimentSpec,
                     config: MadConfig | None = None):
    backend = BuddyAllocator(spec.total_blocks)
    if strategy == "buddy":
        return backend, None
    cfg = config if config is not None else spec.mad_config
    cfg = MadConfig.from_dict({**cfg.to_dict(),
                               "total_blocks": spec.total_blocks,
                               "seed": seed})
    mad = Mad(backend, cfg, DiversityRng(seed))
    monitor = SnapshotMonitor(mad, seed + MONITOR_SEED_OFFSET)
    monitor.attach()
    return mad, monitor


def _run_sparse(strategy: str, seed: int, spec: ExperimentSpec) -> dict:
    allocator, monitor = _build_allocator(strategy, seed, spec)
    stride = max(1, spec.n_allocs // 16) if spec.frames else None
    rec = RunRecord(spec.total_blocks, spec.interval, frame_stride=stride)
    sparse_massage(allocator, spec.n_allocs,
                   random.Random(seed + ADV_SEED_OFFSET), record=rec)
    tag = f"{strategy}_seed{seed}"
    write_unique_series_csv(rec, os.path.join(spec.output_dir, f"unique_{tag}.csv"))
    write_recycle_summary_json(recycle_stats(rec),
                               os.path.join(spec.output_dir, f"recycle_{tag}.json"))
    if spec.frames:
        frames = heatmap_frames(rec)
        write_heatmap_frames_csv(frames,
                                 os.path.join(spec.output_dir, f"frames_{tag}"))
    stats = recycle_stats(rec)
    return {
        "scenario": "sparse-compare", "strategy": strategy, "seed": seed,
        "allocs": spec.n_allocs, "unique_blocks": rec.unique_series[-1],
        "attrition_rate": attrition_rate(rec), "max_recycle": stats["max"],
        "detected": monitor.alarmed if monitor else None,
        "required_allocs": None,
    }


def _run_exhaustive(strategy: str, seed: int, spec: ExperimentSpec) -> dict:
    allocator, monitor = _build_allocator(strategy, seed, spec)
    rec = RunRecord(spec.total_blocks, spec.interval)
    result = exhaustive_massage(allocator, random.Random(seed + ADV_SEED_OFFSET),
                                record=rec)
    return {
        "scenario": "exhaustive-detect", "strategy": strategy, "seed": seed,
        "allocs": result.allocs, "unique_blocks": rec.unique_series[-1],
        "landed": result.landed,
        "detected": monitor.alarmed if monitor else None,
        "required_allocs": result.allocs,
    }


def _run_spray(strategy: str, seed: int, spec: ExperimentSpec) -> dict:
    allocator, monitor = _build_allocator(strategy, seed, spec)
    rec = RunRecord(spec.total_blocks, spec.interval)
    try:
        result = spray_massage(allocator, spec.fraction,
                               random.Random(seed + ADV_SEED_OFFSET),
                               record=rec, intervention_monitor=monitor)
        rounds, hit = result.rounds, result.hit
    except RoundBudgetExhausted:
        rounds, hit = 64, False
    per_round = max(1, int(spec.fraction * spec.total_blocks))
    return {
        "scenario": "spray", "strategy": strategy, "seed": seed,
        "allocs": rounds * per_round,
        "unique_blocks": rec.unique_series[-1], "rounds": rounds,
        "hit": hit,
        "detected": monitor.alarmed if monitor else None,
        "required_allocs": rounds * per_round,
    }


def _run_worst_case(strategy: str, seed: int, spec: ExperimentSpec) -> dict:
    if strategy != "mad":
        raise ConfigError("worst-case scenario runs against the mad allocator only")
    mad, monitor = _build_allocator("mad", seed, spec)
    result = worst_case_experiment(mad, spec.lb, spec.ub,
                                   random.Random(seed + ADV_SEED_OFFSET),
                                   monitor=monitor, budget=spec.budget)
    return {
        "scenario": "worst-case", "strategy": "mad", "seed": seed,
        "allocs": result.required_allocs, "unique_blocks": None,
        "lb": spec.lb, "ub": spec.ub,
        "detected": result.detected, "timed_out": result.timed_out,
        "placement_success": result.placement_success,
        "required_allocs": result.required_allocs,
    }


_RUNNERS = {
    "sparse-compare": _run_sparse,
    "exhaustive-detect": _run_exhaustive,
    "spray": _run_spray,
    "worst-case": _run_worst_case,
}


def _one_run(args):
    strategy, seed, spec = args
    return _RUNNERS[spec.scenario](strategy, seed, spec)


def _execute(tasks, workers: int) -> list[dict]:
    if workers <= 1 or len(tasks) <= 1:
        return [_one_run(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_run, tasks))


def _write_jsonl(records: list[dict], path: str) -> None:
    records = sorted(records, key=lambda r: (r["strategy"], r["seed"]))
    with open(path, "w", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _write_summary_csv(rows: list[dict], path: str) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _summarize(spec: ExperimentSpec, records: list[dict]) -> list[dict]:
    if spec.scenario == "sparse-compare":
        rows = []
        for strategy in sorted({r["strategy"] for r in records}):
            group = [r for r in records if r["strategy"] == strategy]
            rows.append({
                "strategy": strategy,
                "runs": len(group),
                "mean_attrition_rate": statistics.fmean(r["attrition_rate"] for r in group),
                "mean_unique_blocks": statistics.fmean(r["unique_blocks"] for r in group),
                "max_recycle": max(r["max_recycle"] for r in group),
            })
        return rows
    if spec.scenario == "worst-case":
        counts = [r["required_allocs"] for r in records]
        return [{
            "lb": spec.lb, "ub": spec.ub, "runs": len(records),
            "avg_required_allocs": statistics.fmean(counts),
            "median_required_allocs": statistics.median(counts),
            "detection_rate": statistics.fmean(r["detected"] for r in records),
            "placement_success_rate":
                statistics.fmean(r["placement_success"] for r in records),
        }]
    # exhaustive-detect and spray share a shape.
    rows = []
    for strategy in sorted({r["strategy"] for r in records}):
        group = [r for r in records if r["strategy"] == strategy]
        row = {"strategy": strategy, "runs": len(group),
               "mean_allocs": statistics.fmean(r["allocs"] for r in group)}
        flags = [r["detected"] for r in group if r["detected"] is not None]
        row["detection_rate"] = statistics.fmean(flags) if flags else ""
        rows.append(row)
    return rows


def _check(spec: ExperimentSpec, records: list[dict]) -> list[str]:
    """Scenario-level assertions enabled by --check. Returns failure messages."""
    failures = []
    if spec.scenario == "sparse-compare":
        by = {s: [r for r in records if r["strategy"] == s]
              for s in ("buddy", "mad")}
        if by["buddy"] and by["mad"]:
            b = statistics.fmean(r["attrition_rate"] for r in by["buddy"])
            m = statistics.fmean(r["attrition_rate"] for r in by["mad"])
            ratio = b / m if m else float("inf")
            if ratio < 3.0:
                failures.append(f"attrition ratio {ratio:.2f} < 3.0")
        for r in by["mad"]:
            if r["detected"]:
                failures.append(f"benign sparse run seed {r['seed']} raised an alarm")
    elif spec.scenario == "exhaustive-detect":
        for r in records:
            if r["detected"] is False:
                failures.append(f"exhaustion undetected at seed {r['seed']}")
    elif spec.scenario == "worst-case":
        flags = [r["detected"] for r in records]
        rate = statistics.fmean(flags)
        if rate < 0.95:
            failures.append(f"worst-case detection rate {rate:.2f} < 0.95")
        placements = statistics.fmean(r["placement_success"] for r in records)
        if placements > 0.005:
            failures.append(f"placement success rate {placements:.4f} > 0.005")
    return failures


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(spec: ExperimentSpec) -> None:
    out = spec.output_dir
    artifacts = {}
    for root, _dirs, files in os.walk(out):
        for name in sorted(files):
            if name == "manifest.json":
                continue
            path = os.path.join(root, name)
            artifacts[os.path.relpath(path, out)] = _sha256(path)
    manifest = {"spec": spec.to_dict(), "artifacts": artifacts}
    with open(os.path.join(out, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_sweep(spec: ExperimentSpec) -> tuple[list[dict], list[dict]]:
    if not spec.capacities or not spec.thresholds:
        raise ConfigError("sweep requires --capacities and --thresholds")
    records, rows = [], []
    for capacity in spec.capacities:
        for lower_range, upper_range in spec.thresholds:
            params = {"cache_capacity": capacity,
                      "threshold_lower_range": lower_range,
                      "threshold_upper_range": upper_range}
            try:
                config = MadConfig.from_dict({**spec.mad_config.to_dict(), **params})
                point = dataclasses.replace(spec, scenario="sparse-compare",
                                            mad_config=config, frames=False)
                tasks = [(s, spec.seed_base + i, point)
                         for s in ("buddy", "mad")
                         for i in range(spec.repetitions)]
                point_records = _execute(tasks, spec.workers)
                detect = dataclasses.replace(point, scenario="exhaustive-detect")
                detect_records = _execute(
                    [("mad", spec.seed_base + i, detect)
                     for i in range(spec.repetitions)], spec.workers)
                records += point_records + detect_records
                b = statistics.fmean(r["attrition_rate"] for r in point_records
                                     if r["strategy"] == "buddy")
                m = statistics.fmean(r["attrition_rate"] for r in point_records
                                     if r["strategy"] == "mad")
                rows.append({
                    "cache_capacity": capacity,
                    "threshold_lower_range": f"{lower_range[0]}:{lower_range[1]}",
                    "threshold_upper_range": f"{upper_range[0]}:{upper_range[1]}",
                    "buddy_attrition_rate": b,
                    "mad_attrition_rate": m,
                    "max_recycle": max(r["max_recycle"] for r in point_records
                                       if r["strategy"] == "mad"),
                    "detection_rate":
                        statistics.fmean(r["detected"] for r in detect_records),
                    "error": "",
                })
            except MadSimError as exc:
                # A bad grid point is recorded, not fatal.
                rows.append({"cache_capacity": capacity,
                             "threshold_lower_range": f"{lower_range[0]}:{lower_range[1]}",
                             "threshold_upper_range": f"{upper_range[0]}:{upper_range[1]}",
                             "buddy_attrition_rate": "", "mad_attrition_rate": "",
                             "max_recycle": "", "detection_rate": "",
                             "error": str(exc)})
    return records, rows


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="madsim",
        description="Run allocator-diversity experiments and write CSV/JSON artifacts.")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--allocator", choices=("mad", "buddy", "both"), default="both")
    p.add_argument("--total-blocks", type=int, default=65_536)
    p.add_argument("--allocs", type=int, default=10_000_000)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed+i")
    p.add_argument("--out", default=None,
                   help="output directory (default: $MAD_OUTPUT_DIR)")
    p.add_argument("--config", default=None, help="JSON file of MadConfig overrides")
    p.add_argument("--check", action="store_true",
                   help="assert scenario-level acceptance properties; exit 1 on failure")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--interval", type=int, default=None,
                   help="unique-series sampling interval (default allocs/40000)")
    p.add_argument("--frames", action="store_true",
                   help="also write heat-map grid frames (sparse-compare)")
    p.add_argument("--lb", type=int, default=None, help="worst-case: min request size")
    p.add_argument("--ub", type=int, default=None, help="worst-case: max request size")
    p.add_argument("--fraction", type=float, default=0.125,
                   help="spray: fraction of memory allocated per round")
    p.add_argument("--budget", type=int, default=500_000,
                   help="worst-case: request budget before timing out")
    p.add_argument("--capacities", default=None,
                   help="sweep: comma-separated cache capacities, e.g. 32,64")
    p.add_argument("--thresholds", default=None,
                   help="sweep: comma-separated lo:hi/lo:hi lower/upper range pairs, "
                        "e.g. 8:16/32:64,4:8/16:24")
    return p


def _spec_from_args(args) -> ExperimentSpec:
    out = args.out or os.environ.get("MAD_OUTPUT_DIR")
    if not out:
        raise ConfigError("no output directory: pass --out or set MAD_OUTPUT_DIR")
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    if args.scenario == "worst-case":
        if args.lb is None or args.ub is None:
            raise ConfigError("worst-case requires --lb and --ub")
        if not 0 < args.lb <= args.ub:
            raise ConfigError(f"need 0 < lb <= ub, got {args.lb}, {args.ub}")
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise ConfigError("config document must be a JSON object")
    mad_config = MadConfig.from_dict({
        **MadConfig().to_dict(), **overrides, "total_blocks": args.total_blocks})
    capacities = tuple(int(c) for c in args.capacities.split(",")) \
        if args.capacities else ()
    thresholds = ()
    if args.thresholds:
        pairs = []
        for item in args.thresholds.split(","):
            lower_text, _, upper_text = item.partition("/")
            pairs.append((_parse_range(lower_text), _parse_range(upper_text)))
        thresholds = tuple(pairs)
    interval = args.interval or max(1, args.allocs // 40_000)
    return ExperimentSpec(
        scenario=args.scenario, allocator=args.allocator, mad_config=mad_config,
        total_blocks=args.total_blocks, n_allocs=args.allocs,
        repetitions=args.reps, seed_base=args.seed, output_dir=out,
        interval=interval, check=args.check, workers=args.workers,
        frames=args.frames, lb=args.lb, ub=args.ub, fraction=args.fraction,
        budget=args.budget, capacities=capacities, thresholds=thresholds)


def run(spec: ExperimentSpec) -> int:
    os.makedirs(spec.output_dir, exist_ok=True)
    if spec.scenario == "sweep":
        records, rows = _run_sweep(spec)
    else:
        if spec.scenario == "worst-case":
            strategies = ("mad",)
        elif spec.allocator == "both":
            strategies = ("buddy", "mad")
        else:
            strategies = (spec.allocator,)
        tasks = [(s, spec.seed_base + i, spec)
                 for s in strategies for i in range(spec.repetitions)]
        records = _execute(tasks, spec.workers)
        rows = _summarize(spec, records)
    _write_jsonl(records, os.path.join(spec.output_dir, "runs.jsonl"))
    _write_summary_csv(rows, os.path.join(spec.output_dir, "summary.csv"))
    _write_manifest(spec)
    if spec.check and spec.scenario != "sweep":
        failures = _check(spec, records)
        if failures:
            for msg in failures:
                print(f"check failed: {msg}", file=sys.stderr)
            return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
        return run(spec)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MadSimError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
