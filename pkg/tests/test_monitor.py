"""Unit tests for the snapshot detector."""

import random

import pytest

from madsim import (Alarm, BuddyAllocator, DiversityRng, Mad, MadConfig,
                    OutOfMemory, Snapshot, SnapshotMonitor, classify_snapshot,
                    detection_rate)
from madsim.monitor import (ASYMPTOMATIC_EXHAUST, ASYMPTOMATIC_RELEASE,
                            INTERVAL_RANGE, SYMPTOMATIC)

SMALL = dict(total_blocks=4096, max_order=4, cache_capacity=16,
             threshold_lower_range=(2, 4), threshold_upper_range=(8, 12))


def make_mad(seed=0):
    cfg = MadConfig(seed=seed, **SMALL)
    return Mad(BuddyAllocator(cfg.total_blocks, 10), cfg, DiversityRng(seed))


def snap(alloc_occ, shadow_occ, shadow_full=False, refills=0, drains=0):
    return Snapshot(alloc_occupancies=tuple(alloc_occ),
                    shadow_occupancies=tuple(shadow_occ),
                    shadow_full=shadow_full, refills=refills, drains=drains,
                    alloc_index=0)


def test_classify_exhaust_on_all_empty():
    assert classify_snapshot(snap([0, 0], [0, 0])) == ASYMPTOMATIC_EXHAUST


def test_classify_exhaust_on_refills():
    assert classify_snapshot(snap([3, 2], [1, 0], refills=1)) == ASYMPTOMATIC_EXHAUST


def test_classify_release_on_drains_or_full_shadow():
    assert classify_snapshot(snap([3, 2], [1, 0], drains=2)) == ASYMPTOMATIC_RELEASE
    assert classify_snapshot(snap([3, 2], [9, 0], shadow_full=True)) == ASYMPTOMATIC_RELEASE


def test_classify_symptomatic_otherwise():
    assert classify_snapshot(snap([3, 2], [1, 4])) == SYMPTOMATIC


def test_intervals_within_bounds():
    m = make_mad(seed=1)
    mon = SnapshotMonitor(m, seed=42).attach()
    rng = random.Random(0)
    held = []
    for _ in range(50_000):
        if held and rng.random() < 0.5:
            m.free(held.pop(rng.randrange(len(held))))
        else:
            held.append(m.alloc(rng.randint(0, 2)))
    lo, hi = INTERVAL_RANGE
    assert mon.intervals_drawn, "no intervals drawn"
    assert all(lo <= n <= hi for n in mon.intervals_drawn)


def test_monitor_counts_only_allocations():
    m = make_mad(seed=2)
    mon = SnapshotMonitor(m, seed=0).attach()
    b = m.alloc(0)
    idx = mon.alloc_index
    m.free(b)
    assert mon.alloc_index == idx  # frees do not advance the clock


def test_exhaustion_alarms_before_out_of_memory():
    # The toy instance only yields ~4k allocation events, so sample densely
    # enough for the sliding window to fill before memory runs out.
    m = make_mad(seed=3)
    mon = SnapshotMonitor(m, seed=303, window=16,
                          interval_range=(13, 97)).attach()
    held = []
    alarm_index = None
    try:
        while True:
            held.append(m.alloc(0))
            if mon.alarmed and alarm_index is None:
                alarm_index = mon.alloc_index
    except OutOfMemory:
        pass
    assert mon.alarmed, "exhaustion went undetected"
    assert alarm_index is not None and alarm_index <= mon.alloc_index


def test_benign_workload_never_alarms():
    """A live set bounded strictly below the caches' lower thresholds stays
    silent: every allocation is served from recycled stock, so the monitor
    has nothing to flag."""
    for seed in range(5):
        cfg = MadConfig(seed=seed)
        m = Mad(BuddyAllocator(cfg.total_blocks), cfg, DiversityRng(seed))
        mon = SnapshotMonitor(m, seed=seed + 100).attach()
        rng = random.Random(seed)
        held = {o: [] for o in range(m.max_order + 1)}
        for _ in range(100_000):
            o = rng.randrange(m.max_order + 1)
            h = held[o]
            if h and (rng.random() < 0.5 or len(h) >= 4):
                m.free(h.pop(rng.randrange(len(h))))
            else:
                h.append(m.alloc(o))
        assert m.refill_count == 0, f"backend refill under benign load, seed {seed}"
        assert not mon.alarmed, f"false alarm at seed {seed}: {mon.alarms[:3]}"


def test_alarm_event_shape():
    a = Alarm(alloc_index=10, window_fraction=0.75, classification=ASYMPTOMATIC_EXHAUST)
    ev = a.as_event()
    assert ev["event"] == "alarm"
    assert ev["alloc_index"] == 10
    assert ev["window_fraction"] == 0.75


def test_detection_rate():
    assert detection_rate([True, True, False, True]) == 0.75
    with pytest.raises(ValueError):
        detection_rate([])


def test_monitor_determinism():
    def alarms(seed):
        m = make_mad(seed=9)
        mon = SnapshotMonitor(m, seed=seed, window=16,
                              interval_range=(13, 97)).attach()
        held = []
        try:
            while True:
                held.append(m.alloc(0))
        except OutOfMemory:
            pass
        return [a.alloc_index for a in mon.alarms]

    assert alarms(5) == alarms(5)
