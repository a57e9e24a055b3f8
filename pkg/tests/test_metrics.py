"""Unit tests for run metrics and artifact writers."""

import csv
import json

import pytest

from madsim import (BlockId, InsufficientSamples, RunRecord, ZeroRate,
                    attrition_rate, extrapolate_enumeration, heatmap_frames,
                    recycle_stats)
from madsim.metrics import (write_heatmap_frames_csv,
                            write_recycle_summary_json,
                            write_unique_series_csv)


def test_record_alloc_unique_and_recycle():
    r = RunRecord(total_blocks=16, interval=1)
    r.record_alloc(BlockId(5, 0))
    assert r.unique_blocks == 1
    r.record_alloc(BlockId(5, 0))
    assert r.unique_blocks == 1
    assert r.recycle_counts[5] == 2


def test_record_alloc_span_semantics():
    r = RunRecord(total_blocks=16, interval=1)
    r.record_alloc(BlockId(0, 2))
    assert r.unique_blocks == 4
    assert r.recycle_counts[:5] == [1, 1, 1, 1, 0]


def test_unique_series_sampling():
    r = RunRecord(total_blocks=16, interval=2)
    for i in range(6):
        r.record_alloc(BlockId(i, 0))
    assert r.unique_series == [2, 4, 6]
    assert all(a <= b for a, b in zip(r.unique_series, r.unique_series[1:]))


def test_interval_validation():
    with pytest.raises(ValueError):
        RunRecord(total_blocks=16, interval=0)


def test_conservation_unique_equals_touched():
    r = RunRecord(total_blocks=32, interval=4)
    for i in (0, 3, 3, 9, 9, 9):
        r.record_alloc(BlockId(i, 0))
    assert r.unique_blocks == sum(1 for c in r.recycle_counts if c)
    assert sum(r.recycle_counts) == r.total_allocs


def test_attrition_rate_arithmetic():
    r = RunRecord(total_blocks=64, interval=1)
    r.unique_series = [0, 10, 20]
    assert attrition_rate(r) == 10
    r.unique_series = [7, 7, 7]
    assert attrition_rate(r) == 0


def test_attrition_rate_needs_samples():
    r = RunRecord(total_blocks=64, interval=1)
    r.unique_series = [3]
    with pytest.raises(InsufficientSamples):
        attrition_rate(r)


def test_recycle_stats_all_zero():
    r = RunRecord(total_blocks=8, interval=1)
    s = recycle_stats(r)
    assert s == {"min": 0, "q1": 0.0, "median": 0.0, "q3": 0.0, "max": 0}


def test_recycle_stats_summary():
    r = RunRecord(total_blocks=4, interval=1)
    for i, n in enumerate((0, 1, 2, 7)):
        for _ in range(n):
            r.record_alloc(BlockId(i, 0))
    s = recycle_stats(r)
    assert (s["min"], s["max"]) == (0, 7)
    assert s["median"] == 1.5


def test_extrapolate_enumeration():
    # rate of 1 block per 1-allocation interval covers memory in
    # total_blocks allocations.
    assert extrapolate_enumeration(1.0, 4096, interval=1) == 4096
    # At the published full-scale rates the projection lands near 7.07e10
    # and 2.94e11 respectively.
    lo = extrapolate_enumeration(1.4832, 4_194_304)
    hi = extrapolate_enumeration(0.3563, 4_194_304)
    assert abs(lo - 7.07e10) / 7.07e10 < 0.01
    assert abs(hi - 2.94e11) / 2.94e11 < 0.01
    with pytest.raises(ZeroRate):
        extrapolate_enumeration(0.0, 64)


def test_heatmap_frames_shape_and_conservation():
    r = RunRecord(total_blocks=16, interval=1, frame_stride=4)
    for i in range(12):
        r.record_alloc(BlockId(i % 8, 0))
    frames = heatmap_frames(r, width=4)
    assert len(frames) == 3
    for grid in frames:
        assert len(grid) == 4 and all(len(row) == 4 for row in grid)
    assert sum(v for row in frames[-1] for v in row) == sum(r.recycle_counts)


def test_heatmap_frames_partial_tail_included():
    r = RunRecord(total_blocks=16, interval=1, frame_stride=5)
    for i in range(7):
        r.record_alloc(BlockId(i, 0))
    frames = heatmap_frames(r, width=4)
    assert len(frames) == 2  # one full stride plus the tail snapshot
    assert sum(v for row in frames[-1] for v in row) == 7


def test_heatmap_frames_requires_recorded_stride():
    r = RunRecord(total_blocks=16, interval=1)
    with pytest.raises(ValueError):
        heatmap_frames(r)


def test_unique_series_csv(tmp_path):
    r = RunRecord(total_blocks=16, interval=2)
    for i in range(4):
        r.record_alloc(BlockId(i, 0))
    path = tmp_path / "unique.csv"
    write_unique_series_csv(r, str(path))
    rows = list(csv.reader(path.open()))
    assert rows == [["alloc_index", "unique_blocks"], ["2", "2"], ["4", "4"]]


def test_recycle_summary_json(tmp_path):
    path = tmp_path / "summary.json"
    write_recycle_summary_json({"max": 3, "min": 0}, str(path))
    assert json.loads(path.read_text()) == {"max": 3, "min": 0}


def test_heatmap_frames_csv(tmp_path):
    frames = [[[1, 2], [3, 4]], [[5, 6], [7, 8]]]
    paths = write_heatmap_frames_csv(frames, str(tmp_path / "frames"))
    assert len(paths) == 2
    assert paths[0].endswith("frame_0000.csv")
    rows = list(csv.reader(open(paths[1])))
    assert rows == [["5", "6"], ["7", "8"]]
