"""Per-run statistics: unique-block time series, attrition, recycling counts.

Unique counting always happens at order-0 granularity: a block of order o
marks all 2^o covered page indices as observed and bumps their recycle
counters.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .buddy import BlockId
from .errors import InsufficientSamples, ZeroRate

DEFAULT_SAMPLE_INTERVAL = 25_000


class RunRecord:
    """Time series of allocation events for one run.

    ``interval`` is the sampling stride in allocations; the cumulative unique
    order-0 block count is appended to ``unique_series`` at every stride
    boundary. With ``frame_stride`` set, full copies of the per-block recycle
    counters are kept for heat-map rendering.
    """

    def __init__(self, total_blocks: int, interval: int,
                 frame_stride: int | None = None):
        if interval < 1:
            raise ValueError("interval must be >= 1")
        self.total_blocks = total_blocks
        self.interval = interval
        self.frame_stride = frame_stride
        self.recycle_counts = [0] * total_blocks
        self.unique_series: list[int] = []
        self.total_allocs = 0
        self._unique = 0
        self.frames: list[list[int]] = []

    @property
    def unique_blocks(self) -> int:
        return self._unique

    def record_alloc(self, b: BlockId) -> None:
        counts = self.recycle_counts
        number, order = b
        if order:
            for i in range(number, number + (1 << order)):
                if not counts[i]:
                    self._unique += 1
                counts[i] += 1
        else:
            if not counts[number]:
                self._unique += 1
            counts[number] += 1
        self.total_allocs += 1
        if not self.total_allocs % self.interval:
            self.unique_series.append(self._unique)
        if self.frame_stride and not self.total_allocs % self.frame_stride:
            self.frames.append(counts.copy())

    def as_hook(self):
        record = self.record_alloc

        def hook(kind, block):
            if kind == "alloc":
                record(block)
        return hook


def attrition_rate(record: RunRecord) -> float:
    """Mean growth of the unique-block series, in blocks per interval."""
    series = record.unique_series
    if len(series) < 2:
        raise InsufficientSamples(f"need >= 2 samples, have {len(series)}")
    return (series[-1] - series[0]) / (len(series) - 1)


def recycle_stats(record: RunRecord) -> dict:
    """Five-number summary over all order-0 recycle counters."""
    arr = np.asarray(record.recycle_counts)
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return {"min": int(arr.min()), "q1": float(q1), "median": float(median),
            "q3": float(q3), "max": int(arr.max())}


def extrapolate_enumeration(rate: float, total_blocks: int,
                            interval: int = DEFAULT_SAMPLE_INTERVAL) -> float:
    """Projected allocations to enumerate all memory at the given rate."""
    if rate <= 0:
        raise ZeroRate("attrition rate must be positive to extrapolate")
    return total_blocks / rate * interval


def heatmap_frames(record: RunRecord, frame_stride: int | None = None,
                   width: int | None = None) -> list[list[list[int]]]:
    """Recycle-counter snapshots reshaped row-major into 2D grids."""
    if record.frame_stride is None:
        raise ValueError("record was not configured with a frame_stride")
    stride = frame_stride if frame_stride is not None else record.frame_stride
    if stride % record.frame_stride:
        raise ValueError(
            f"frame_stride {stride} is not a multiple of the recorded stride "
            f"{record.frame_stride}")
    step = stride // record.frame_stride
    flats = record.frames[step - 1::step]
    if record.total_allocs % stride:
        flats = flats + [record.recycle_counts]
    if width is None:
        width = 1 << math.ceil(math.log2(math.sqrt(record.total_blocks)))
    height = -(-record.total_blocks // width)
    grids = []
    for flat in flats:
        padded = flat + [0] * (width * height - len(flat))
        grids.append([padded[r * width:(r + 1) * width] for r in range(height)])
    return grids


# -- on-disk artifact formats -------------------------------------------------

def write_unique_series_csv(record: RunRecord, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alloc_index", "unique_blocks"])
        for i, unique in enumerate(record.unique_series, start=1):
            writer.writerow([i * record.interval, unique])


def write_recycle_summary_json(stats: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_heatmap_frames_csv(frames: list[list[list[int]]], out_dir: str,
                             prefix: str = "frame") -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    pad = max(4, len(str(len(frames))))
    paths = []
    for i, grid in enumerate(frames):
        path = os.path.join(out_dir, f"{prefix}_{i:0{pad}d}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in grid:
                writer.writerow(row)
        paths.append(path)
    return paths
