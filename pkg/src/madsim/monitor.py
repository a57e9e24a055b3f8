"""Snapshot-based detector of exhaustive-allocation massaging.

Samples the diversified layer's cache configuration at randomized intervals
and classifies each snapshot. Configurations that force backend traffic
(everything empty and refilling, or shadow caches full and draining) are the
"asymptomatic" attack signal; a high asymptomatic fraction over a sliding
window raises an alarm.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .mad import Mad

SYMPTOMATIC = "symptomatic"
ASYMPTOMATIC_EXHAUST = "asymptomatic-exhaust"
ASYMPTOMATIC_RELEASE = "asymptomatic-release"

INTERVAL_RANGE = (13, 997)


@dataclass(frozen=True)
class Snapshot:
    alloc_occupancies: tuple[int, ...]
    shadow_occupancies: tuple[int, ...]
    shadow_full: bool
    refills: int          # backend refills since the previous snapshot
    drains: int           # backend drains since the previous snapshot
    alloc_index: int


@dataclass(frozen=True)
class Alarm:
    alloc_index: int
    window_fraction: float
    classification: str

    def as_event(self) -> dict:
        return {"event": "alarm", "alloc_index": self.alloc_index,
                "window_fraction": self.window_fraction, "class": self.classification}


def classify_snapshot(snap: Snapshot) -> str:
    if snap.refills or (not any(snap.alloc_occupancies)
                        and not any(snap.shadow_occupancies)):
        return ASYMPTOMATIC_EXHAUST
    if snap.drains or snap.shadow_full:
        return ASYMPTOMATIC_RELEASE
    return SYMPTOMATIC


class SnapshotMonitor:
    """Randomized-interval sampler attached to a layer's event hooks."""

    def __init__(self, mad: Mad, seed: int, window: int = 32,
                 alarm_threshold: float = 0.5,
                 interval_range: tuple[int, int] = INTERVAL_RANGE):
        self.mad = mad
        self._rand = random.Random(seed)
        self.window = deque(maxlen=window)
        self.alarm_threshold = alarm_threshold
        self.interval_range = interval_range
        self.asymptomatic_count = 0
        self.total_count = 0
        self.alloc_index = 0
        self.alarms: list[Alarm] = []
        self.intervals_drawn: list[int] = []
        self._last_refills = mad.refill_count
        self._last_drains = mad.drain_count
        self.next_interval = self._draw_interval()
        self._countdown = self.next_interval

    def _draw_interval(self) -> int:
        n = self._rand.randint(*self.interval_range)
        self.intervals_drawn.append(n)
        return n

    def attach(self) -> "SnapshotMonitor":
        self.mad.hooks.append(self.on_event)
        return self

    def on_event(self, kind: str, block) -> Alarm | None:
        if kind != "alloc":
            return None
        self.alloc_index += 1
        self._countdown -= 1
        if self._countdown:
            return None
        self.next_interval = self._draw_interval()
        self._countdown = self.next_interval
        return self._sample()

    def take_snapshot(self) -> Snapshot:
        mad = self.mad
        snap = Snapshot(
            alloc_occupancies=tuple(len(c.slots) for c in mad.alloc_caches),
            shadow_occupancies=tuple(len(c.slots) for c in mad.shadow_caches),
            shadow_full=any(len(c.slots) >= c.upper_bound for c in mad.shadow_caches),
            refills=mad.refill_count - self._last_refills,
            drains=mad.drain_count - self._last_drains,
            alloc_index=self.alloc_index,
        )
        self._last_refills = mad.refill_count
        self._last_drains = mad.drain_count
        return snap

    def _sample(self) -> Alarm | None:
        snap = self.take_snapshot()
        cls = classify_snapshot(snap)
        asym = cls != SYMPTOMATIC
        self.window.append(1 if asym else 0)
        self.total_count += 1
        self.asymptomatic_count += asym
        if len(self.window) == self.window.maxlen:
            fraction = sum(self.window) / len(self.window)
            if fraction > self.alarm_threshold:
                alarm = Alarm(self.alloc_index, fraction, cls)
                self.alarms.append(alarm)
                return alarm
        return None

    @property
    def alarmed(self) -> bool:
        return bool(self.alarms)


def detection_rate(detected_flags) -> float:
    """Fraction of runs in which an alarm fired before attack success."""
    flags = list(detected_flags)
    if not flags:
        raise ValueError("detection_rate of zero runs is undefined")
    return sum(bool(f) for f in flags) / len(flags)
