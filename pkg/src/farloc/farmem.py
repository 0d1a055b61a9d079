"""Simulated far-memory address space with page-granular swap accounting.

The address space has two regions.  A bounded purely-local region is never
swapped and never counted in swap statistics.  The swappable region is a
sequence of fixed-size pages backed by a bounded resident cache with strict
LRU eviction; every access to a swappable byte range is mediated by
:meth:`Space.touch`, which performs the fault / swap-in / write-back
accounting a far-memory runtime would do.

Handles are plain integer offsets into the address space (0 is the null
handle); region membership is derivable from the offset alone.  Blocks are
carved out of either region with first-fit free lists and never straddle a
page boundary.
"""
from __future__ import annotations

from bisect import bisect_right
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

Handle = int
PageId = int

NULL_HANDLE: Handle = 0

# Purely-local blocks live in [LOCAL_BASE, LOCAL_BASE + capacity); page i of the
# swappable region starts at SWAP_BASE + i * page_size.  Offset 0 stays invalid
# so the null handle is unambiguous.
LOCAL_BASE = 1 << 12
SWAP_BASE = 1 << 40


class FarlocError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FarlocError):
    """Invalid configuration value."""


class CapacityExhausted(FarlocError):
    """A bounded allocator has no free slot large enough for the request."""


class UsageError(FarlocError):
    """An operation violated its contract (bad handle, bad argument, ...)."""


@dataclass(frozen=True)
class SpaceConfig:
    page_size_bytes: int = 4096
    purely_local_capacity_bytes: int = 0
    cache_capacity_pages: int = 0

    def validate(self) -> None:
        p = self.page_size_bytes
        if p < 256 or p & (p - 1):
            raise ConfigError(f"page size must be a power of two >= 256, got {p}")
        if self.purely_local_capacity_bytes < 0:
            raise ConfigError("purely-local capacity must be >= 0")
        if self.purely_local_capacity_bytes > SWAP_BASE - LOCAL_BASE:
            raise ConfigError("purely-local capacity too large for the address layout")
        if self.cache_capacity_pages < 0:
            raise ConfigError("cache capacity must be >= 0")


@dataclass(frozen=True)
class SwapStats:
    swap_ins: int = 0
    write_backs: int = 0
    faults: int = 0


class FreeList:
    """First-fit free list over one contiguous range, coalescing on free.

    The largest extent size is cached so that a hopeless allocation fails in
    O(1); carving from the largest extent marks the cache stale and the next
    query recomputes it.
    """

    __slots__ = ("_starts", "_sizes", "_max", "_stale")

    def __init__(self, start: int, size: int):
        self._starts: list[int] = [start] if size else []
        self._sizes: list[int] = [size] if size else []
        self._max = size
        self._stale = False

    def allocate(self, size: int, align: int) -> int | None:
        if self._stale:
            self._max = max(self._sizes, default=0)
            self._stale = False
        if size > self._max:
            return None
        starts, sizes = self._starts, self._sizes
        mask = align - 1
        for i, s in enumerate(starts):
            astart = (s + mask) & ~mask
            pad = astart - s
            avail = sizes[i]
            if pad + size <= avail:
                tail = avail - pad - size
                if pad:
                    sizes[i] = pad
                    if tail:
                        starts.insert(i + 1, astart + size)
                        sizes.insert(i + 1, tail)
                elif tail:
                    starts[i] = astart + size
                    sizes[i] = tail
                else:
                    del starts[i]
                    del sizes[i]
                if avail == self._max:
                    self._stale = True
                return astart
        return None

    def free(self, start: int, size: int) -> None:
        starts, sizes = self._starts, self._sizes
        i = bisect_right(starts, start)
        # coalesce with the previous segment when adjacent
        if i and starts[i - 1] + sizes[i - 1] == start:
            sizes[i - 1] += size
            if i < len(starts) and starts[i] == start + size:
                sizes[i - 1] += sizes[i]
                del starts[i]
                del sizes[i]
            merged = sizes[i - 1]
        elif i < len(starts) and starts[i] == start + size:
            starts[i] = start
            sizes[i] += size
            merged = sizes[i]
        else:
            starts.insert(i, start)
            sizes.insert(i, size)
            merged = size
        if not self._stale and merged > self._max:
            self._max = merged

    def max_free(self) -> int:
        if self._stale:
            self._max = max(self._sizes, default=0)
            self._stale = False
        return self._max


class _ArrayFreeList:
    """Address-ordered first-fit free list on numpy arrays.

    Same discipline and observable behavior as :class:`FreeList`; the fit
    scan runs as one vectorized predicate instead of a Python loop.  A
    long-lived region fragments into thousands of extents once small
    residues accumulate, and the per-extent interpreter cost of the list
    variant dominates there.  Pages stay on :class:`FreeList`: their extent
    counts are tiny and numpy dispatch would only slow them down.
    """

    __slots__ = ("_starts", "_sizes", "_n", "_max", "_stale")

    def __init__(self, start: int, size: int):
        self._starts = np.empty(16, dtype=np.int64)
        self._sizes = np.empty(16, dtype=np.int64)
        self._n = 0
        if size:
            self._starts[0] = start
            self._sizes[0] = size
            self._n = 1
        self._max = size
        self._stale = False

    def _shift_in(self, i: int, start: int, size: int) -> None:
        n = self._n
        if n == len(self._starts):
            grown = np.empty(2 * n, dtype=np.int64)
            grown[:n] = self._starts
            self._starts = grown
            grown = np.empty(2 * n, dtype=np.int64)
            grown[:n] = self._sizes
            self._sizes = grown
        self._starts[i + 1:n + 1] = self._starts[i:n]
        self._sizes[i + 1:n + 1] = self._sizes[i:n]
        self._starts[i] = start
        self._sizes[i] = size
        self._n = n + 1

    def _shift_out(self, i: int) -> None:
        n = self._n
        self._starts[i:n - 1] = self._starts[i + 1:n]
        self._sizes[i:n - 1] = self._sizes[i + 1:n]
        self._n = n - 1

    def allocate(self, size: int, align: int) -> int | None:
        n = self._n
        if self._stale:
            self._max = int(self._sizes[:n].max()) if n else 0
            self._stale = False
        if size > self._max:
            return None
        starts = self._starts[:n]
        sizes = self._sizes[:n]
        fits = ((-starts) & (align - 1)) + size <= sizes
        i = int(np.argmax(fits))
        if not fits[i]:
            return None
        s = int(starts[i])
        avail = int(sizes[i])
        astart = (s + align - 1) & ~(align - 1)
        pad = astart - s
        tail = avail - pad - size
        if pad:
            self._sizes[i] = pad
            if tail:
                self._shift_in(i + 1, astart + size, tail)
        elif tail:
            self._starts[i] = astart + size
            self._sizes[i] = tail
        else:
            self._shift_out(i)
        if avail == self._max:
            self._stale = True
        return astart

    def free(self, start: int, size: int) -> None:
        n = self._n
        starts = self._starts
        sizes = self._sizes
        i = int(np.searchsorted(starts[:n], start, side="right"))
        if i and int(starts[i - 1]) + int(sizes[i - 1]) == start:
            sizes[i - 1] += size
            if i < n and int(starts[i]) == start + size:
                sizes[i - 1] += sizes[i]
                self._shift_out(i)
            merged = int(sizes[i - 1])
        elif i < n and int(starts[i]) == start + size:
            starts[i] = start
            sizes[i] += size
            merged = int(sizes[i])
        else:
            self._shift_in(i, start, size)
            merged = size
        if not self._stale and merged > self._max:
            self._max = merged

    def max_free(self) -> int:
        if self._stale:
            n = self._n
            self._max = int(self._sizes[:n].max()) if n else 0
            self._stale = False
        return self._max


class _Page:
    __slots__ = ("free", "allocated", "buf")

    def __init__(self, base: int, size: int):
        self.free = FreeList(base, size)
        self.allocated = 0
        self.buf: bytearray | None = None   # zero-filled, materialized lazily


class Space:
    """One simulated address space: regions, blocks, residency, statistics."""

    def __init__(self, cfg: SpaceConfig):
        cfg.validate()
        self.cfg = cfg
        self._page_size = cfg.page_size_bytes
        self._page_shift = cfg.page_size_bytes.bit_length() - 1
        self._cache_cap = cfg.cache_capacity_pages
        self._blocks: dict[int, int] = {}            # handle -> block size
        self._local_free = _ArrayFreeList(LOCAL_BASE, cfg.purely_local_capacity_bytes)
        self._local_allocated = 0
        self._local_buf = bytearray(cfg.purely_local_capacity_bytes)
        self._pages: list[_Page] = []
        self._resident: OrderedDict[int, bool] = OrderedDict()   # page -> dirty
        self._swap_ins = 0
        self._write_backs = 0
        self._faults = 0
        self._trace: list[tuple[int, bool]] | None = None

    # -- carving ---------------------------------------------------------

    def carve_purely_local(self, size: int, align: int = 8) -> Handle:
        self._check_carve(size, align)
        h = self._local_free.allocate(size, align)
        if h is None:
            raise CapacityExhausted(f"purely-local region cannot fit {size} bytes")
        self._blocks[h] = size
        self._local_allocated += size
        return h

    def create_page(self) -> PageId:
        idx = len(self._pages)
        self._pages.append(_Page(SWAP_BASE + idx * self._page_size, self._page_size))
        return idx

    def carve_in_page(self, page: PageId, size: int, align: int = 8) -> Handle:
        self._check_carve(size, align)
        if size > self._page_size:
            raise UsageError(f"block of {size} bytes cannot fit one page")
        try:
            rec = self._pages[page]
        except IndexError:
            raise UsageError(f"no such page: {page}") from None
        h = rec.free.allocate(size, align)
        if h is None:
            raise CapacityExhausted(f"page {page} cannot fit {size} bytes")
        self._blocks[h] = size
        rec.allocated += size
        return h

    @staticmethod
    def _check_carve(size: int, align: int) -> None:
        if size <= 0:
            raise UsageError(f"block size must be positive, got {size}")
        if align <= 0 or align & (align - 1):
            raise UsageError(f"alignment must be a power of two, got {align}")

    def free(self, handle: Handle) -> int:
        """Return a carved block to its free list.  Gives back the block size."""
        size = self._blocks.pop(handle, None)
        if size is None:
            raise UsageError(f"free of unknown or already-freed handle {handle:#x}")
        if handle < SWAP_BASE:
            self._local_free.free(handle, size)
            self._local_allocated -= size
        else:
            rec = self._pages[(handle - SWAP_BASE) >> self._page_shift]
            rec.free.free(handle, size)
            rec.allocated -= size
        return size

    # -- access and residency -------------------------------------------

    def touch(self, handle: Handle, length: int, is_write: bool = False) -> None:
        """Account one access to ``length`` bytes starting at ``handle``.

        Purely-local handles are exempt from all statistics.  Swappable
        touches fault each non-resident page in ascending address order,
        evicting the LRU page first when the cache is full.
        """
        size = self._blocks.get(handle)
        if size is None:
            raise UsageError(f"touch of unknown handle {handle:#x}")
        if length < 0 or length > size:
            raise UsageError(f"touch of {length} bytes outside a {size}-byte block")
        if handle < SWAP_BASE or length == 0:
            return
        first = (handle - SWAP_BASE) >> self._page_shift
        last = (handle + length - 1 - SWAP_BASE) >> self._page_shift
        if self._trace is not None:
            for idx in range(first, last + 1):
                self._trace.append((idx, is_write))
        res = self._resident
        for idx in range(first, last + 1):
            if idx in res:
                res.move_to_end(idx)
                if is_write:
                    res[idx] = True
                continue
            self._faults += 1
            self._swap_ins += 1
            cap = self._cache_cap
            if cap == 0:
                # degenerate cache: the page is fetched, used, written
                # straight back; it can never stay resident
                if is_write:
                    self._write_backs += 1
                continue
            if len(res) >= cap:
                _, dirty = res.popitem(last=False)
                if dirty:
                    self._write_backs += 1
            res[idx] = is_write

    def read_bytes(self, handle: Handle, offset: int, length: int) -> bytes:
        self._check_range(handle, offset, length)
        self.touch(handle, offset + length, False)
        buf, off = self._backing(handle)
        if buf is None:
            return bytes(length)
        return bytes(buf[off + offset:off + offset + length])

    def write_bytes(self, handle: Handle, offset: int, data: bytes) -> None:
        self._check_range(handle, offset, len(data))
        self.touch(handle, offset + len(data), True)
        buf, off = self._backing(handle, materialize=True)
        buf[off + offset:off + offset + len(data)] = data

    def _check_range(self, handle: Handle, offset: int, length: int) -> None:
        size = self._blocks.get(handle)
        if size is None:
            raise UsageError(f"access through unknown handle {handle:#x}")
        if offset < 0 or length < 0 or offset + length > size:
            raise UsageError("byte range outside the block")

    def _backing(self, handle: Handle, materialize: bool = False):
        if handle < SWAP_BASE:
            return self._local_buf, handle - LOCAL_BASE
        idx = (handle - SWAP_BASE) >> self._page_shift
        rec = self._pages[idx]
        if rec.buf is None and materialize:
            rec.buf = bytearray(self._page_size)
        return rec.buf, (handle - SWAP_BASE) & (self._page_size - 1)

    def evict_all(self) -> None:
        res = self._resident
        while res:
            _, dirty = res.popitem(last=False)
            if dirty:
                self._write_backs += 1

    # -- queries ---------------------------------------------------------

    def page_of(self, handle: Handle) -> PageId | None:
        if handle not in self._blocks:
            raise UsageError(f"page_of on unknown handle {handle:#x}")
        if handle < SWAP_BASE:
            return None
        return (handle - SWAP_BASE) >> self._page_shift

    def is_purely_local(self, handle: Handle) -> bool:
        return LOCAL_BASE <= handle < SWAP_BASE

    def block_size(self, handle: Handle) -> int:
        size = self._blocks.get(handle)
        if size is None:
            raise UsageError(f"unknown handle {handle:#x}")
        return size

    def stats(self) -> SwapStats:
        return SwapStats(self._swap_ins, self._write_backs, self._faults)

    def reset_stats(self) -> None:
        self._swap_ins = self._write_backs = self._faults = 0

    def residency(self) -> tuple[tuple[int, ...], frozenset[int]]:
        """Resident pages in LRU-to-MRU order plus the dirty subset."""
        res = self._resident
        return tuple(res.keys()), frozenset(p for p, d in res.items() if d)

    def set_trace(self, sink: list[tuple[int, bool]] | None) -> None:
        """Record every swappable page touch as ``(page, is_write)`` into sink."""
        self._trace = sink

    @property
    def num_pages(self) -> int:
        return len(self._pages)

    @property
    def purely_local_free_bytes(self) -> int:
        return self.cfg.purely_local_capacity_bytes - self._local_allocated

    @property
    def purely_local_allocated_bytes(self) -> int:
        return self._local_allocated

    def page_allocated_bytes(self, page: PageId) -> int:
        return self._pages[page].allocated

    def page_max_free(self, page: PageId) -> int:
        return self._pages[page].free.max_free()
