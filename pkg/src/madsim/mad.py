"""Diversified per-order allocation and shadow caches on top of a buddy backend.

The layer owns a randomized working set of blocks per order. Allocations draw
a uniformly random slot from the order's allocation cache; frees land at a
uniformly random index of the order's shadow cache. Empty allocation caches
are restocked in a strict three-tier fallback: same-order shadow cache first,
then a split of a random higher-order cached block, and only then the backend.
Full shadow caches are drained back to the backend down to a randomized target.
All counts, thresholds, and positions are drawn from one seeded stream, so the
full event trace is a pure function of (seed, operation sequence).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .buddy import BlockId, BuddyAllocator
from .errors import ConfigError, DoubleFree, InitFailure, OutOfMemory, SplitSourceEmpty

ALLOCATION = "allocation"
SHADOW = "shadow"


class DiversityRng:
    """Seeded pseudo-random stream backing every randomized decision.

    The stream is private to the layer: adversary code never observes or
    influences it, only the block numbers of blocks it holds.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.stream = random.Random(seed)


@dataclass
class MadConfig:
    total_blocks: int = 65_536
    max_order: int = 7
    cache_capacity: int = 64
    threshold_lower_range: tuple[int, int] = (8, 16)
    threshold_upper_range: tuple[int, int] = (32, 64)
    seed: int = 0

    _KEYS = ("total_blocks", "max_order", "cache_capacity",
             "threshold_lower_range", "threshold_upper_range", "seed")

    def __post_init__(self):
        self.threshold_lower_range = tuple(self.threshold_lower_range)
        self.threshold_upper_range = tuple(self.threshold_upper_range)
        if self.total_blocks <= 0 or self.total_blocks & (self.total_blocks - 1):
            raise ConfigError(f"total_blocks must be a power of two, got {self.total_blocks}")
        if self.max_order < 0 or (1 << self.max_order) > self.total_blocks:
            raise ConfigError(f"max_order {self.max_order} out of range")
        lo, hi = self.threshold_lower_range
        ulo, uhi = self.threshold_upper_range
        if not (0 < lo <= hi < ulo <= uhi <= self.cache_capacity):
            raise ConfigError(
                "threshold ranges must satisfy 0 < lower_min <= lower_max < "
                f"upper_min <= upper_max <= capacity, got {self.threshold_lower_range} "
                f"{self.threshold_upper_range} capacity {self.cache_capacity}")

    @classmethod
    def from_dict(cls, data: dict) -> "MadConfig":
        unknown = set(data) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "MadConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}


class Cache:
    """Indexable block pool with O(1) random-index insert and remove.

    Removal is swap-remove, insertion is append-then-swap; since both ends of
    every transfer are themselves uniformly randomized, slot ordering carries
    no information.
    """

    __slots__ = ("order", "kind", "slots", "lower_bound", "upper_bound", "capacity")

    def __init__(self, order: int, kind: str, lower_bound: int, upper_bound: int,
                 capacity: int):
        if not 0 <= lower_bound < upper_bound <= capacity:
            raise ConfigError(
                f"cache bounds must satisfy 0 <= lower < upper <= capacity, "
                f"got ({lower_bound}, {upper_bound}, {capacity})")
        self.order = order
        self.kind = kind
        self.slots: list[BlockId] = []
        self.lower_bound = lower_bound
        self.upper_bound = upper_bound
        self.capacity = capacity

    def __len__(self) -> int:
        return len(self.slots)

    def pop_random(self, rand: random.Random) -> BlockId:
        slots = self.slots
        i = rand.randrange(len(slots))
        last = slots.pop()
        if i == len(slots):
            return last
        b = slots[i]
        slots[i] = last
        return b

    def insert_random(self, b: BlockId, rand: random.Random) -> None:
        slots = self.slots
        slots.append(b)
        j = rand.randrange(len(slots))
        slots[-1] = slots[j]
        slots[j] = b


class Mad:
    """Diversified allocation layer interposed between clients and a backend.

    Event hooks are callables ``hook(kind, block)`` invoked synchronously for
    ``"alloc"`` and ``"free"`` events; backend traffic is exposed through the
    ``refill_count``/``drain_count`` counters instead so observers stay off the
    hot path.
    """

    def __init__(self, backend: BuddyAllocator, config: MadConfig,
                 rng: DiversityRng, debug: bool = False, deep_check_every: int = 1,
                 merge_policy: str = "lower"):
        if backend.max_order < config.max_order:
            raise ConfigError("backend max_order smaller than cache max_order")
        if merge_policy not in ("lower", "bounded", "relief", "eager"):
            raise ConfigError(f"unknown merge_policy {merge_policy!r}")
        self.merge_policy = merge_policy
        self.backend = backend
        self.config = config
        self.rng = rng
        self._rand = rng.stream
        self.max_order = config.max_order
        self.alloc_caches: list[Cache] = []
        self.shadow_caches: list[Cache] = []
        self.client_held: set[BlockId] = set()
        self.hooks = []
        self.refill_count = 0
        self.refill_block_count = 0
        self.drain_count = 0
        self.drain_block_count = 0
        self.debug = debug
        self.deep_check_every = deep_check_every
        self._op_count = 0
        self._init_caches()

    @property
    def total_blocks(self) -> int:
        return self.backend.total_blocks

    def _draw_cache(self, order: int, kind: str) -> Cache:
        rand = self._rand
        cfg = self.config
        lower = rand.randint(*cfg.threshold_lower_range)
        upper = rand.randint(*cfg.threshold_upper_range)
        return Cache(order, kind, lower, upper, cfg.cache_capacity)

    def _init_caches(self) -> None:
        rand = self._rand
        for order in range(self.max_order + 1):
            self.alloc_caches.append(self._draw_cache(order, ALLOCATION))
            self.shadow_caches.append(self._draw_cache(order, SHADOW))
        # Fill high orders first so the fresh backend is carved predictably
        # from whole max-order regions before fragmentation sets in.
        for order in range(self.max_order, -1, -1):
            cache = self.alloc_caches[order]
            count = rand.randint(cache.lower_bound, cache.upper_bound)
            for _ in range(count):
                try:
                    block = self.backend.alloc(order)
                except OutOfMemory as exc:
                    raise InitFailure(
                        f"backend cannot supply {count} blocks of order {order}") from exc
                cache.insert_random(block, rand)
        # Backend traffic during boot is not an attack signal.
        self.refill_count = 0
        self.refill_block_count = 0

    # -- client interface --------------------------------------------------

    def alloc(self, order: int) -> BlockId:
        if order > self.max_order:
            raise ValueError(f"order {order} exceeds max_order {self.max_order}")
        cache = self.alloc_caches[order]
        if not cache.slots:
            self._restock(order)
        b = cache.pop_random(self._rand)
        self.client_held.add(b)
        for hook in self.hooks:
            hook("alloc", b)
        if self.debug:
            self._debug_check()
        return b

    def free(self, b: BlockId) -> None:
        b = BlockId(*b)
        if b not in self.client_held:
            raise DoubleFree(f"block {b} was not handed out (or already freed)")
        self.client_held.remove(b)
        order = b.order
        shadow = self.shadow_caches[order]
        if len(shadow.slots) >= shadow.upper_bound:
            if self.merge_policy == "relief":
                # Merging is itself a pressure valve: reunited pairs move up
                # a cache level instead of leaving the layer.
                self.vertical_merge(order)
            if len(shadow.slots) >= shadow.upper_bound:
                self.drain_to_backend(order)
        shadow.insert_random(b, self._rand)
        if self.merge_policy == "eager" or (
                self.merge_policy == "lower"
                and len(shadow.slots) > shadow.lower_bound):
            self.vertical_merge(order)
        elif self.merge_policy == "bounded":
            excess = len(shadow.slots) - shadow.lower_bound
            if excess > 0:
                headroom = (self.shadow_caches[order + 1].upper_bound
                            - len(self.shadow_caches[order + 1].slots)
                            if order < self.max_order else 0)
                self.vertical_merge(order, min((excess + 1) // 2, headroom))
        for hook in self.hooks:
            hook("free", b)
        if self.debug:
            self._debug_check()

    # -- diversification machinery -----------------------------------------

    def _restock(self, order: int) -> None:
        """Three-tier refill: shadow cache, inverse split, then the backend."""
        cache = self.alloc_caches[order]
        self.horizontal_refill(order)
        if cache.slots:
            return
        try:
            self.inverse_vertical_split(order)
        except SplitSourceEmpty:
            self.backend_refill(order)

    def horizontal_refill(self, order: int) -> int:
        """Move blocks shadow -> allocation cache up to its lower bound."""
        rand = self._rand
        ac = self.alloc_caches[order]
        sc = self.shadow_caches[order]
        moved = 0
        while sc.slots and len(ac.slots) < ac.lower_bound:
            ac.insert_random(sc.pop_random(rand), rand)
            moved += 1
        return moved

    def vertical_merge(self, order: int, max_pairs: int | None = None) -> int:
        """Merge every buddy pair in the shadow cache into the next order up.

        ``max_pairs`` optionally caps the number of pairs merged.
        """
        if order >= self.max_order or max_pairs is not None and max_pairs <= 0:
            return 0
        sc = self.shadow_caches[order]
        slots = sc.slots
        numbers = {b.number for b in slots}
        half = 1 << order
        merged_numbers = []
        for number in numbers:
            if number & half:
                continue
            if number + half in numbers:
                merged_numbers.append(number)
                if max_pairs is not None and len(merged_numbers) == max_pairs:
                    break
        if not merged_numbers:
            return 0
        consumed = set()
        for number in merged_numbers:
            consumed.add(number)
            consumed.add(number + half)
        slots[:] = [b for b in slots if b.number not in consumed]
        rand = self._rand
        upper = self.shadow_caches[order + 1]
        for number in merged_numbers:
            parent = self.backend.merge_allocated(BlockId(number, order))
            if len(upper.slots) >= upper.upper_bound:
                self.drain_to_backend(order + 1)
            upper.insert_random(parent, rand)
        # Newly formed pairs may cascade upward, under the same trigger rule.
        if len(upper.slots) > upper.lower_bound:
            self.vertical_merge(order + 1, max_pairs)
        return len(merged_numbers)

    def inverse_vertical_split(self, order: int) -> None:
        """Split a random higher-order cached block down into this order."""
        if order >= self.max_order:
            raise SplitSourceEmpty("no higher order exists")
        k = order + 1
        while k <= self.max_order and not self.alloc_caches[k].slots:
            k += 1
        if k > self.max_order:
            raise SplitSourceEmpty(f"all allocation caches above order {order} are empty")
        rand = self._rand
        while k > order:
            b = self.alloc_caches[k].pop_random(rand)
            lo, hi = self.backend.split_allocated(b)
            dst = self.alloc_caches[k - 1]
            dst.insert_random(lo, rand)
            dst.insert_random(hi, rand)
            k -= 1

    def backend_refill(self, order: int) -> int:
        """Pull a freshly randomized count of blocks from the backend."""
        rand = self._rand
        cache = self.alloc_caches[order]
        count = rand.randint(cache.lower_bound, cache.upper_bound)
        count = min(count, cache.capacity - len(cache.slots))
        got = 0
        for _ in range(count):
            try:
                block = self.backend.alloc(order)
            except OutOfMemory:
                break
            cache.insert_random(block, rand)
            got += 1
        if got == 0:
            raise OutOfMemory(f"backend exhausted refilling order {order}")
        self.refill_count += 1
        self.refill_block_count += got
        return got

    def drain_to_backend(self, order: int) -> int:
        """Free random shadow blocks down to a randomized occupancy target."""
        sc = self.shadow_caches[order]
        if len(sc.slots) < sc.upper_bound:
            return 0
        rand = self._rand
        target = rand.randint(sc.lower_bound, sc.upper_bound - 1)
        drained = 0
        while len(sc.slots) > target:
            self.backend.free(sc.pop_random(rand))
            drained += 1
        self.drain_count += 1
        self.drain_block_count += drained
        return drained

    # -- debug invariants ----------------------------------------------------

    def _debug_check(self) -> None:
        self._op_count += 1
        owned_span = sum(b.span for b in self.client_held)
        for cache in self.alloc_caches:
            owned_span += sum(b.span for b in cache.slots)
        for cache in self.shadow_caches:
            owned_span += sum(b.span for b in cache.slots)
        if owned_span != self.backend.allocated_span:
            raise AssertionError(
                f"span leak: layer owns {owned_span}, backend allocated "
                f"{self.backend.allocated_span}")
        if self.backend.allocated_span + self.backend.free_span != self.total_blocks:
            raise AssertionError("backend span totals do not tile memory")
        if self._op_count % self.deep_check_every == 0:
            self.check_full_tiling()

    def check_full_tiling(self) -> None:
        """Caches + client blocks exactly match the backend's allocated set."""
        owned: set[BlockId] = set(self.client_held)
        count = len(self.client_held)
        for cache in self.alloc_caches + self.shadow_caches:
            for b in cache.slots:
                if b.order != cache.order:
                    raise AssertionError(f"order mismatch: {b} in order-{cache.order} cache")
            owned.update(cache.slots)
            count += len(cache.slots)
        if count != len(owned):
            raise AssertionError("duplicate block across caches/clients")
        if owned != self.backend.allocated_set:
            raise AssertionError("cache + client blocks differ from backend allocated set")
        self.backend.assert_tiling()
        self.backend.assert_merge_maximality()


def mad_init(backend: BuddyAllocator, config: MadConfig, rng: DiversityRng,
             **kwargs) -> Mad:
    return Mad(backend, config, rng, **kwargs)
