"""Collective allocator: one facade over cooperating sub-allocators.

The collective allocator owns a :class:`~farloc.farmem.Space` and routes
allocations to one of three sub-allocator kinds: the singleton purely-local
sub-allocator (bounded, never swapped), the singleton swappable plain
sub-allocator (unbounded, first-fit across the pages it owns), and per-page
sub-allocators that each own exactly one fresh page.  Every swappable page
is owned by exactly one sub-allocator, so a handle identifies its
sub-allocator and placement code can steer an allocation next to an
existing object by asking for that object's sub-allocator.

:class:`HintAllocator` is the separate baseline allocator whose only
placement control is an optional hint handle.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .farmem import (
    CapacityExhausted,
    Handle,
    PageId,
    Space,
    UsageError,
)


class Kind(Enum):
    PURELY_LOCAL = "purely_local"
    SWAPPABLE_PLAIN = "swappable_plain"
    NEW_PER_PAGE = "new_per_page"


@dataclass(frozen=True)
class SubAllocatorRef:
    """Identity of one sub-allocator: kind plus instance id."""

    kind: Kind
    id: int

    def __post_init__(self):
        # refs key the per-sub-allocator byte ledgers on every allocation,
        # so the hash is paid once here instead of per lookup
        object.__setattr__(self, "_hash", hash((self.kind, self.id)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class ObjectLayout:
    size_bytes: int
    align: int = 8

    def validate(self) -> None:
        if self.size_bytes <= 0:
            raise UsageError(f"object size must be positive, got {self.size_bytes}")
        if self.align <= 0 or self.align & (self.align - 1):
            raise UsageError(f"alignment must be a power of two, got {self.align}")


class _PagePool:
    """First-fit allocation across an ordered set of owned pages.

    Requests go to the oldest owned page whose largest free extent fits; a
    new empty page is opened only when no owned page can serve the request.
    Pages are never retired, so a fully freed page stays owned and is
    reused.

    A flat max-segment tree over per-page largest extents replaces the
    linear creation-order scan with an O(log n) leftmost-fit descent; every
    carve or free refreshes one leaf-to-root path.  Hinted carves bypass
    ``allocate`` entirely, so their callers report them via ``note_carve``
    to keep the affected leaf exact.
    """

    __slots__ = ("_space", "_pages", "_pos", "_cap", "_tree", "_on_new_page")

    def __init__(self, space: Space, on_new_page=None):
        self._space = space
        self._pages: list[PageId] = []
        self._pos: dict[PageId, int] = {}
        self._cap = 1
        self._tree = [0, 0]         # 1-based heap layout, leaves at _cap.._cap*2-1
        self._on_new_page = on_new_page

    @property
    def pages(self) -> tuple[PageId, ...]:
        return tuple(self._pages)

    def _set(self, pos: int, room: int) -> None:
        t = self._tree
        i = self._cap + pos
        t[i] = room
        i >>= 1
        while i:
            left = t[2 * i]
            right = t[2 * i + 1]
            m = left if left >= right else right
            if t[i] == m:
                break
            t[i] = m
            i >>= 1

    def _grow(self) -> None:
        cap = self._cap * 2
        self._cap = cap
        t = [0] * (2 * cap)
        free = self._space.page_max_free
        for pos, page in enumerate(self._pages):
            t[cap + pos] = free(page)
        for i in range(cap - 1, 0, -1):
            left = t[2 * i]
            right = t[2 * i + 1]
            t[i] = left if left >= right else right
        self._tree = t

    def _resync(self, page: PageId) -> None:
        self._set(self._pos[page], self._space.page_max_free(page))

    def note_free(self, page: PageId) -> None:
        self._resync(page)

    def note_carve(self, page: PageId) -> None:
        if page in self._pos:
            self._resync(page)

    def allocate(self, size: int, align: int) -> Handle:
        space = self._space
        t = self._tree
        if t[1] >= size:
            cap = self._cap
            i = 1
            while i < cap:
                i *= 2
                if t[i] < size:
                    i += 1
            pos = i - cap
            page = self._pages[pos]
            try:
                h = space.carve_in_page(page, size, align)
            except CapacityExhausted:
                # a large-enough extent can still lose to alignment
                # padding; fall back to a plain scan past this page
                return self._allocate_scan(size, align, pos + 1)
            self._set(pos, space.page_max_free(page))
            return h
        return self._open_page(size, align)

    def _allocate_scan(self, size: int, align: int, start_pos: int) -> Handle:
        space = self._space
        for pos in range(start_pos, len(self._pages)):
            page = self._pages[pos]
            try:
                h = space.carve_in_page(page, size, align)
            except CapacityExhausted:
                continue
            self._set(pos, space.page_max_free(page))
            return h
        return self._open_page(size, align)

    def _open_page(self, size: int, align: int) -> Handle:
        page = self._space.create_page()
        pos = len(self._pages)
        self._pos[page] = pos
        self._pages.append(page)
        if pos == self._cap:
            self._grow()
        if self._on_new_page is not None:
            self._on_new_page(page)
        h = self._space.carve_in_page(page, size, align)
        self._set(pos, self._space.page_max_free(page))
        return h


class CollectiveAllocator:
    def __init__(self, space: Space):
        self._space = space
        self._purely_local = SubAllocatorRef(Kind.PURELY_LOCAL, 0)
        self._plain = SubAllocatorRef(Kind.SWAPPABLE_PLAIN, 0)
        self._page_owner: dict[PageId, SubAllocatorRef] = {}
        self._ref_page: dict[SubAllocatorRef, PageId] = {}
        self._allocated: dict[SubAllocatorRef, int] = {
            self._purely_local: 0,
            self._plain: 0,
        }
        self._next_page_id = 1
        self._plain_pool = _PagePool(space, self._claim_for_plain)

    def _claim_for_plain(self, page: PageId) -> None:
        self._page_owner[page] = self._plain

    @property
    def space(self) -> Space:
        return self._space

    @property
    def purely_local(self) -> SubAllocatorRef:
        return self._purely_local

    @property
    def swappable_plain(self) -> SubAllocatorRef:
        return self._plain

    # -- sub-allocator lookup -------------------------------------------

    def get_suballocator_by_kind(self, kind: Kind) -> SubAllocatorRef:
        if kind is Kind.PURELY_LOCAL:
            return self._purely_local
        if kind is Kind.SWAPPABLE_PLAIN:
            return self._plain
        if kind is Kind.NEW_PER_PAGE:
            page = self._space.create_page()
            ref = SubAllocatorRef(Kind.NEW_PER_PAGE, self._next_page_id)
            self._next_page_id += 1
            self._page_owner[page] = ref
            self._ref_page[ref] = page
            self._allocated[ref] = 0
            return ref
        raise UsageError(f"unknown sub-allocator kind: {kind!r}")

    def get_suballocator_by_handle(self, handle: Handle) -> SubAllocatorRef:
        page = self._space.page_of(handle)   # validates the handle
        if page is None:
            return self._purely_local
        owner = self._page_owner.get(page)
        if owner is None:
            raise UsageError(f"handle {handle:#x} is not managed by this allocator")
        return owner

    def if_suballocator_contains(self, ref: SubAllocatorRef, handle: Handle) -> bool:
        return self.get_suballocator_by_handle(handle) == ref

    def suballocator_page(self, ref: SubAllocatorRef) -> PageId:
        try:
            return self._ref_page[ref]
        except KeyError:
            raise UsageError(f"{ref} does not own a single page") from None

    # -- occupancy -------------------------------------------------------

    def allocated_bytes(self, ref: SubAllocatorRef) -> int:
        self._known(ref)
        return self._allocated[ref]

    def occupancy(self, ref: SubAllocatorRef) -> float:
        self._known(ref)
        if ref.kind is Kind.SWAPPABLE_PLAIN:
            return 0.0   # unbounded: occupancy is defined as zero
        if ref.kind is Kind.PURELY_LOCAL:
            cap = self._space.cfg.purely_local_capacity_bytes
            if cap == 0:
                return 1.0
            return self._allocated[ref] / cap
        return self._allocated[ref] / self._space.cfg.page_size_bytes

    def is_occupancy_under(self, ref: SubAllocatorRef, ratio: float) -> bool:
        if not 0.0 <= ratio <= 1.0:
            raise UsageError(f"occupancy ratio must be in [0, 1], got {ratio}")
        return self.occupancy(ref) < ratio

    def _known(self, ref: SubAllocatorRef) -> None:
        if ref not in self._allocated:
            raise UsageError(f"unknown sub-allocator {ref}")

    # -- allocation ------------------------------------------------------

    def sub_allocate(self, ref: SubAllocatorRef, count: int, layout: ObjectLayout) -> Handle:
        self._known(ref)
        layout.validate()
        if count < 1:
            raise UsageError(f"count must be >= 1, got {count}")
        total = count * layout.size_bytes
        if ref.kind is Kind.PURELY_LOCAL:
            h = self._space.carve_purely_local(total, layout.align)
        elif ref.kind is Kind.SWAPPABLE_PLAIN:
            if total > self._space.cfg.page_size_bytes:
                raise UsageError(f"swappable block of {total} bytes cannot fit one page")
            h = self._plain_pool.allocate(total, layout.align)
        else:
            if total > self._space.cfg.page_size_bytes:
                raise UsageError(f"swappable block of {total} bytes cannot fit one page")
            h = self._space.carve_in_page(self._ref_page[ref], total, layout.align)
        self._allocated[ref] += total
        return h

    def deallocate(self, handle: Handle, count: int, layout: ObjectLayout) -> None:
        """Free a block previously returned by any of this allocator's
        sub-allocators; the owning sub-allocator is derived from the handle."""
        ref = self.get_suballocator_by_handle(handle)
        layout.validate()
        if count < 1:
            raise UsageError(f"count must be >= 1, got {count}")
        expected = count * layout.size_bytes
        actual = self._space.block_size(handle)
        if actual != expected:
            raise UsageError(
                f"deallocate of {expected} bytes but block holds {actual} bytes")
        page = self._space.page_of(handle)
        self._space.free(handle)
        self._allocated[ref] -= expected
        if ref.kind is Kind.SWAPPABLE_PLAIN:
            self._plain_pool.note_free(page)

    def pages_of(self, ref: SubAllocatorRef) -> tuple[PageId, ...]:
        """Pages owned by a sub-allocator (empty for purely-local)."""
        self._known(ref)
        if ref.kind is Kind.SWAPPABLE_PLAIN:
            return self._plain_pool.pages
        if ref.kind is Kind.NEW_PER_PAGE:
            return (self._ref_page[ref],)
        return ()

    def page_owner_map(self) -> dict[PageId, SubAllocatorRef]:
        return dict(self._page_owner)


class HintAllocator:
    """Baseline allocator whose only placement control is a hint handle.

    With a hint it tries the hinted object's page first; without one, or when
    that page is full, it falls back to first-fit over the pages in use and
    opens a new empty page only when none can fit the request.
    """

    def __init__(self, space: Space):
        self._space = space
        self._pool = _PagePool(space)

    @property
    def space(self) -> Space:
        return self._space

    def allocate(self, count: int, layout: ObjectLayout, hint: Handle | None = None) -> Handle:
        layout.validate()
        if count < 1:
            raise UsageError(f"count must be >= 1, got {count}")
        total = count * layout.size_bytes
        if total > self._space.cfg.page_size_bytes:
            raise UsageError(f"swappable block of {total} bytes cannot fit one page")
        if hint:
            page = self._space.page_of(hint)
            if page is not None:
                try:
                    h = self._space.carve_in_page(page, total, layout.align)
                except CapacityExhausted:
                    pass
                else:
                    self._pool.note_carve(page)
                    return h
        return self._pool.allocate(total, layout.align)

    def deallocate(self, handle: Handle, count: int, layout: ObjectLayout) -> None:
        layout.validate()
        expected = count * layout.size_bytes
        actual = self._space.block_size(handle)
        if actual != expected:
            raise UsageError(
                f"deallocate of {expected} bytes but block holds {actual} bytes")
        page = self._space.page_of(handle)
        self._space.free(handle)
        if page is not None:
            self._pool.note_free(page)

    @property
    def pages(self) -> tuple[PageId, ...]:
        return self._pool.pages
