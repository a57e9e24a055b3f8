"""Memory-massaging strategies driven through the public alloc/free interface.

Adversary code sees only the block numbers of blocks it holds; it never reads
allocator internals. Every strategy takes its own seeded ``random.Random``
stream, independent of the defender's, so (defender seed, adversary seed)
fully determine a trace.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .buddy import BlockId
from .errors import OutOfMemory, RoundBudgetExhausted
from .metrics import RunRecord

VULNERABLE_ORDER = 6


@dataclass
class AdversaryView:
    held_blocks: set[BlockId] = field(default_factory=set)
    observed_blocks: set[int] = field(default_factory=set)

    def observe(self, b: BlockId) -> None:
        number, order = b
        if order:
            self.observed_blocks.update(range(number, number + (1 << order)))
        else:
            self.observed_blocks.add(number)


@dataclass
class ExhaustiveResult:
    allocs: int
    freed_target: BlockId
    victim_block: BlockId
    landed: bool
    view: AdversaryView


@dataclass
class SprayResult:
    rounds: int
    hit: bool
    view: AdversaryView


@dataclass
class WorstCaseResult:
    required_allocs: int
    detected: bool
    timed_out: bool
    placement_success: bool
    target: BlockId


def sparse_massage(allocator, n_allocs: int, adv_rng: random.Random,
                   record: RunRecord | None = None,
                   working_set: int = 1024,
                   burst_probability: float = 0.01,
                   burst_order_range: tuple[int, int] = (7, 7),
                   burst_count_range: tuple[int, int] = (8, 16),
                   probe_probability: float = 0.02,
                   probe_order_range: tuple[int, int] = (1, 6),
                   probe_count_range: tuple[int, int] = (1, 2),
                   hold_policy: str = "chase") -> AdversaryView:
    """Allocate broadly while holding as little memory as necessary.

    The default policy is a memory chase: keep a bounded working set of
    order-0 pages and, once it is full, pair every new allocation with the
    release of one uniformly random held page. Two kinds of transient
    traffic are mixed in, both allocated and released immediately:

    * bursts — groups of top-order blocks large enough to cover whole
      maximal regions. On a predictable backend the freed regions coalesce
      and rotate to the back of the free queue, so every burst is served
      from memory the adversary has not seen yet and steadily enumerates
      the machine. A caching layer retains region fragments, which blocks
      the coalescing and leaves the same traffic recycling its own stock.
    * probes — one or two mid-order blocks, small enough to be served from
      whatever is already free. They add breadth to the trace without
      creating allocation pressure.

    ``hold_policy="hold1"`` instead holds exactly one order-0 block across
    each allocation and issues no bursts (the minimal live set, with far
    weaker enumeration pressure).
    """
    if hold_policy not in ("chase", "hold1"):
        raise ValueError(f"unknown hold_policy {hold_policy!r}")
    view = AdversaryView()
    observe = view.observe
    alloc = allocator.alloc
    free = allocator.free
    rec = record.record_alloc if record is not None else None
    held: list[BlockId] = []
    limit = 1 if hold_policy == "hold1" else working_set
    randrange = adv_rng.randrange
    randint = adv_rng.randint
    rand01 = adv_rng.random
    burst = hold_policy == "chase" and burst_probability > 0
    probe = hold_policy == "chase" and probe_probability > 0
    top = allocator.max_order
    burst_order_range = (min(burst_order_range[0], top),
                         min(burst_order_range[1], top))
    probe_order_range = (min(probe_order_range[0], top),
                         min(probe_order_range[1], top))
    issued = 0
    while issued < n_allocs:
        full = len(held) >= limit
        # Transients wait for the working set to settle; otherwise they
        # steal the fragments the working set is growing into and scatter
        # it across high-order blocks, pinning those blocks forever.
        transient = None
        if full:
            if burst and rand01() < burst_probability:
                transient = (burst_order_range, burst_count_range)
            elif probe and rand01() < probe_probability:
                transient = (probe_order_range, probe_count_range)
        if transient:
            order_range, count_range = transient
            order = randint(*order_range)
            k = min(randint(*count_range), n_allocs - issued)
            batch = []
            for _ in range(k):
                b = alloc(order)
                observe(b)
                if rec:
                    rec(b)
                batch.append(b)
            issued += k
            for b in batch:
                free(b)
            continue
        if full and hold_policy == "chase":
            # Release a random victim first so the replacement allocation
            # can be served from recycled memory instead of forcing a
            # split of fresh memory while the set is momentarily over
            # budget.
            i = randrange(len(held))
            victim = held[i]
            free(victim)
            b = alloc(0)
            issued += 1
            observe(b)
            if rec:
                rec(b)
            held[i] = b
            continue
        b = alloc(0)
        issued += 1
        observe(b)
        if rec:
            rec(b)
        if full:
            # Swap-remove a random victim so the hold set stays bounded.
            i = randrange(len(held))
            victim = held[i]
            held[i] = b
            free(victim)
        else:
            held.append(b)
    for b in held:
        free(b)
    return view


def exhaustive_massage(allocator, adv_rng: random.Random,
                       record: RunRecord | None = None) -> ExhaustiveResult:
    """Allocate and hold all memory, then retake a freed target block."""
    view = AdversaryView()
    blocks: list[BlockId] = []
    while True:
        try:
            b = allocator.alloc(0)
        except OutOfMemory:
            break
        blocks.append(b)
        view.observe(b)
        if record is not None:
            record.record_alloc(b)
    target = blocks[adv_rng.randrange(len(blocks))]
    allocator.free(target)
    victim = allocator.alloc(0)
    view.held_blocks = set(blocks) - {target} | {victim}
    return ExhaustiveResult(allocs=len(blocks), freed_target=target,
                            victim_block=victim, landed=victim == target,
                            view=view)


def spray_massage(allocator, fraction: float, adv_rng: random.Random,
                  target_index: int | None = None, round_budget: int = 64,
                  record: RunRecord | None = None, predicate=None,
                  intervention_monitor=None) -> SprayResult:
    """Allocate a large memory partition per round, release, and retry.

    The hunt succeeds when the held partition satisfies ``predicate`` (a
    function of the set of held block numbers); by default the predicate is
    simply holding ``target_index``. If ``intervention_monitor`` is given,
    any round during which the monitor raises an alarm counts as a failed
    attempt: the system has noticed the pressure and intervenes before the
    attacker can exploit the partition.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    total = allocator.total_blocks
    if predicate is None:
        if target_index is None:
            target_index = adv_rng.randrange(total)
        predicate = lambda nums, t=target_index: t in nums
    per_round = max(1, int(fraction * total))
    view = AdversaryView()
    for rounds in range(1, round_budget + 1):
        alarms_before = (len(intervention_monitor.alarms)
                         if intervention_monitor is not None else 0)
        held = []
        numbers = set()
        for _ in range(per_round):
            try:
                b = allocator.alloc(0)
            except OutOfMemory:
                break
            held.append(b)
            numbers.add(b.number)
            view.observe(b)
            if record is not None:
                record.record_alloc(b)
        intervened = (intervention_monitor is not None
                      and len(intervention_monitor.alarms) > alarms_before)
        hit = not intervened and predicate(numbers)
        for b in held:
            allocator.free(b)
        if hit:
            return SprayResult(rounds=rounds, hit=True, view=view)
    raise RoundBudgetExhausted(
        f"spray predicate not satisfied within {round_budget} rounds")


def decompose_request(size: int, max_order: int) -> list[int]:
    """Greedy split of a block-count request into buddy orders, largest first."""
    orders = []
    remaining = size
    while remaining:
        order = min(remaining.bit_length() - 1, max_order)
        orders.append(order)
        remaining -= 1 << order
    return orders


def designate_vulnerable_block(mad, rng: random.Random) -> BlockId:
    """Pick a random order-6-aligned block inside the layer's cached stock.

    Models the worst-case assumption that the victim page already sits in
    the diversity layer: the experiment harness (not the adversary, which
    sees only alloc/free) draws an aligned range fully covered by cache
    inventory. Falls back to a uniformly random aligned block when no range
    is fully cached.
    """
    span = 1 << VULNERABLE_ORDER
    pages = set()
    for cache in mad.alloc_caches + mad.shadow_caches:
        for b in cache.slots:
            pages.update(range(b.number, b.number + b.span))
    slots = [n for n in range(0, mad.total_blocks - span + 1, span)
             if all(p in pages for p in range(n, n + span))]
    if not slots:
        return BlockId(rng.randrange(1, mad.total_blocks // span - 1) * span,
                       VULNERABLE_ORDER)
    return BlockId(slots[rng.randrange(len(slots))], VULNERABLE_ORDER)


def worst_case_experiment(mad, lb: int, ub: int, adv_rng: random.Random,
                          monitor=None, budget: int = 500_000,
                          target: BlockId | None = None,
                          hold_window: int = 64) -> WorstCaseResult:
    """Count allocation requests until a vulnerable configuration is held.

    A random aligned block of order 6 is designated vulnerable; its logical
    neighbors are the adjacent order-6-aligned ranges by block number. The
    adversary draws request sizes uniformly from [lb, ub] order-0 blocks,
    keeps any block overlapping the three ranges, and releases everything
    else once `hold_window` later requests have been served. Holding a
    sliding window of recent requests (rather than only the latest one) is
    what keeps the hunt moving: the attacker's transient footprint must
    exceed the per-order cache stock, otherwise its own frees restock the
    caches and it only ever sees the same blocks again.
    """
    total = mad.total_blocks
    span = 1 << VULNERABLE_ORDER
    if target is None:
        target = designate_vulnerable_block(mad, adv_rng)
    region_lo = target.number - span
    region_hi = target.number + 2 * span
    need = region_hi - region_lo
    covered = bytearray(need)
    covered_count = 0
    max_order = mad.max_order
    kept: list[BlockId] = []
    window: deque[list[BlockId]] = deque()
    requests = 0
    success_at = None
    while requests < budget:
        size = adv_rng.randint(lb, ub)
        requests += 1
        batch = []
        try:
            for order in decompose_request(size, max_order):
                batch.append(mad.alloc(order))
        except OutOfMemory:
            for b in batch:
                mad.free(b)
            break
        if len(window) >= hold_window:
            for b in window.popleft():
                mad.free(b)
        held_batch: list[BlockId] = []
        for b in batch:
            lo = b.number
            hi = lo + b.span
            if lo < region_hi and hi > region_lo:
                kept.append(b)
                for i in range(max(lo, region_lo), min(hi, region_hi)):
                    if not covered[i - region_lo]:
                        covered[i - region_lo] = 1
                        covered_count += 1
            else:
                held_batch.append(b)
        window.append(held_batch)
        if covered_count == need:
            success_at = requests
            break
    timed_out = success_at is None
    placement = False
    if not timed_out:
        placement = _attempt_predictable_placement(mad, target, kept,
                                                   window)
    # The full attack chain ends with an exhaustive phase: with the hunted
    # blocks pinned, the attacker drains the rest of memory to starve the
    # caches and force predictable placement. That drain is the loud part
    # of the attack, so detection is judged after it runs. Skipped when no
    # monitor is attached, since its only observable effect is detection.
    detected = False
    if monitor is not None:
        drained: list[BlockId] = []
        try:
            while True:
                drained.append(mad.alloc(0))
        except OutOfMemory:
            pass
        for b in drained:
            mad.free(b)
        detected = monitor.alarmed
    # Release everything still held so the layer ends in a clean state.
    for batch in window:
        for b in batch:
            mad.free(b)
    for b in kept:
        mad.free(b)
    return WorstCaseResult(required_allocs=requests, detected=detected,
                           timed_out=timed_out, placement_success=placement,
                           target=target)


def _attempt_predictable_placement(mad, target: BlockId, kept: list[BlockId],
                                   window) -> bool:
    """Free the blocks covering the vulnerable range, release the rest of
    the attacker's working set (its massaging processes exit), then check
    whether the victim's next page allocation lands exactly on the
    vulnerable page — the step the attack needs to force sensitive data
    into the location it prepared for hammering."""
    t_lo, t_hi = target.number, target.number + target.span
    victims = [b for b in kept if b.number < t_hi and b.number + b.span > t_lo]
    if not victims:
        return False
    for b in victims:
        mad.free(b)
    kept[:] = [b for b in kept if b not in victims]
    while window:
        for b in window.popleft():
            mad.free(b)
    try:
        victim_alloc = mad.alloc(0)
    except OutOfMemory:
        return False
    kept.append(victim_alloc)
    return victim_alloc.number == target.number


def success_probability(success_flags) -> float:
    """Fraction of runs achieving predictable placement."""
    flags = list(success_flags)
    if not flags:
        raise ValueError("success_probability of zero runs is undefined")
    return sum(bool(f) for f in flags) / len(flags)
