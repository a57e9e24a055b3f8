"""Textbook buddy allocator over a fixed range of order-0 blocks.

All sizes are measured in order-0 blocks (one 4 KB page each), never bytes.
A block of order o covers 2^o contiguous order-0 blocks and its buddy is
found by XOR-ing the block number with 2^o.
"""

from __future__ import annotations

from typing import Iterator, NamedTuple

from .errors import DoubleFree, OutOfMemory

DEFAULT_MAX_ORDER = 10


class BlockId(NamedTuple):
    number: int
    order: int

    @property
    def span(self) -> int:
        """Number of order-0 blocks covered."""
        return 1 << self.order


def buddy_of(b: BlockId) -> BlockId:
    """Same-order neighbor that merges with ``b`` into the next order."""
    return BlockId(b.number ^ (1 << b.order), b.order)


class BuddyAllocator:
    """Per-order free lists with eager merging on free.

    Two allocation policies are supported:

    * ``"fifo"`` (default): freed and split-remnant blocks are appended at
      the tail of their order's free list and allocation takes the head.
      Under massaging workloads this rotates through physical memory, which
      is the enumerable baseline behavior the adversary experiments rely on.
    * ``"lowest"``: allocation always takes the lowest-numbered free block.

    Single-threaded; instances share no state.
    """

    def __init__(self, total_blocks: int, max_order: int = DEFAULT_MAX_ORDER,
                 policy: str = "fifo"):
        if total_blocks <= 0 or total_blocks & (total_blocks - 1):
            raise ValueError(f"total_blocks must be a power of two, got {total_blocks}")
        if max_order < 0 or (1 << max_order) > total_blocks:
            raise ValueError(f"max_order {max_order} exceeds total_blocks {total_blocks}")
        if policy not in ("fifo", "lowest"):
            raise ValueError(f"unknown policy {policy!r}")
        self.total_blocks = total_blocks
        self.max_order = max_order
        self.policy = policy
        # Insertion-ordered dicts double as FIFO queues with O(1) membership.
        self.free_lists: list[dict[int, None]] = [{} for _ in range(max_order + 1)]
        self.allocated_set: set[BlockId] = set()
        self.allocated_span = 0
        top = 1 << max_order
        for n in range(0, total_blocks, top):
            self.free_lists[max_order][n] = None

    def alloc(self, order: int) -> BlockId:
        if order > self.max_order:
            raise ValueError(f"order {order} exceeds max_order {self.max_order}")
        free_lists = self.free_lists
        o = order
        while o <= self.max_order and not free_lists[o]:
            o += 1
        if o > self.max_order:
            raise OutOfMemory(f"no free block of order >= {order}")
        fl = free_lists[o]
        if self.policy == "fifo":
            number = next(iter(fl))
        else:
            number = min(fl)
        del fl[number]
        # Split downward: keep the lower half, release the upper half.
        while o > order:
            o -= 1
            free_lists[o][number + (1 << o)] = None
        block = BlockId(number, order)
        self.allocated_set.add(block)
        self.allocated_span += 1 << order
        return block

    def free(self, b: BlockId) -> None:
        block = BlockId(*b)
        if block not in self.allocated_set:
            raise DoubleFree(f"block {block} is not allocated")
        self.allocated_set.remove(block)
        self.allocated_span -= block.span
        number, order = block
        free_lists = self.free_lists
        while order < self.max_order:
            bud = number ^ (1 << order)
            fl = free_lists[order]
            if bud not in fl:
                break
            del fl[bud]
            number &= ~(1 << order)
            order += 1
        free_lists[order][number] = None

    # -- ownership bookkeeping for layers that merge/split held blocks --

    def merge_allocated(self, b: BlockId) -> BlockId:
        """Replace an allocated block and its allocated buddy by their parent.

        Pure ownership bookkeeping: total coverage is unchanged, the caller
        simply holds one order+1 block instead of the two halves.
        """
        block = BlockId(*b)
        bud = buddy_of(block)
        if block.order >= self.max_order:
            raise ValueError(f"cannot merge above max_order {self.max_order}")
        if block not in self.allocated_set or bud not in self.allocated_set:
            raise DoubleFree(f"merge requires both {block} and {bud} allocated")
        self.allocated_set.remove(block)
        self.allocated_set.remove(bud)
        parent = BlockId(min(block.number, bud.number), block.order + 1)
        self.allocated_set.add(parent)
        return parent

    def split_allocated(self, b: BlockId) -> tuple[BlockId, BlockId]:
        """Replace an allocated block by its two allocated halves."""
        block = BlockId(*b)
        if block.order == 0:
            raise ValueError("cannot split an order-0 block")
        if block not in self.allocated_set:
            raise DoubleFree(f"block {block} is not allocated")
        self.allocated_set.remove(block)
        half = 1 << (block.order - 1)
        lo = BlockId(block.number, block.order - 1)
        hi = BlockId(block.number + half, block.order - 1)
        self.allocated_set.add(lo)
        self.allocated_set.add(hi)
        return lo, hi

    # -- introspection helpers (used by the diversified layer and tests) --

    def free_blocks(self) -> Iterator[BlockId]:
        for order, fl in enumerate(self.free_lists):
            for number in fl:
                yield BlockId(number, order)

    @property
    def free_span(self) -> int:
        return sum(len(fl) << o for o, fl in enumerate(self.free_lists))

    def assert_tiling(self) -> None:
        """Every order-0 index is covered by exactly one free or allocated block."""
        spans = sorted(
            [(b.number, b.number + b.span) for b in self.allocated_set]
            + [(b.number, b.number + b.span) for b in self.free_blocks()]
        )
        edge = 0
        for lo, hi in spans:
            if lo != edge:
                raise AssertionError(f"coverage gap/overlap at block {edge} (next span {lo})")
            edge = hi
        if edge != self.total_blocks:
            raise AssertionError(f"coverage ends at {edge}, expected {self.total_blocks}")

    def assert_merge_maximality(self) -> None:
        """No free block coexists with its free buddy of the same order."""
        for o in range(self.max_order):
            fl = self.free_lists[o]
            for number in fl:
                if number ^ (1 << o) in fl:
                    raise AssertionError(f"unmerged buddy pair at order {o}: {number}")
