"""Deterministic simulation suite for diversified memory allocation.

Provides a textbook buddy allocator, a randomized cache layer hardened
against memory-massaging attacks, adversary harnesses, a snapshot-based
attack detector, and run metrics, all seedable and reproducible.
"""

from .buddy import BlockId, BuddyAllocator, buddy_of
from .errors import (ConfigError, DoubleFree, InitFailure, InsufficientSamples,
                     MadSimError, OutOfMemory, RoundBudgetExhausted,
                     SplitSourceEmpty, ZeroRate)
from .mad import Cache, DiversityRng, Mad, MadConfig, mad_init
from .metrics import (RunRecord, attrition_rate, extrapolate_enumeration,
                      heatmap_frames, recycle_stats)
from .monitor import (Alarm, Snapshot, SnapshotMonitor, classify_snapshot,
                      detection_rate)

__all__ = [
    "BlockId", "BuddyAllocator", "buddy_of",
    "Cache", "DiversityRng", "Mad", "MadConfig", "mad_init",
    "RunRecord", "attrition_rate", "extrapolate_enumeration",
    "heatmap_frames", "recycle_stats",
    "Alarm", "Snapshot", "SnapshotMonitor", "classify_snapshot",
    "detection_rate",
    "MadSimError", "OutOfMemory", "DoubleFree", "SplitSourceEmpty",
    "InitFailure", "ConfigError", "InsufficientSamples", "ZeroRate",
    "RoundBudgetExhausted",
]

__version__ = "0.1.0"
