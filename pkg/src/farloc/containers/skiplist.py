"""Skip list with pluggable node-placement policies.

Placement mirrors the B-tree variants, adapted to a structure without parent
links:

* ``plain``      -- swappable plain sub-allocator
* ``hint``       -- hint allocator, key-order predecessor as the hint
* ``local``      -- probe the sub-allocator owning the new node's
                    priority-list predecessor, evicting from the back of the
                    purely-local prefix on exhaustion
* ``page``       -- same probe without the purely-local region; batch
                    rearrangement sweeps nodes in key order into per-page
                    sub-allocators
* ``local+page`` -- page plus the purely-local region and eviction policy

The priority list orders nodes by non-increasing level, so taller towers
(touched by more searches) sit at the front; the purely-local nodes form a
prefix of it.  The head tower is plain interpreter state outside the
simulated space: it is pinned bookkeeping, not a data block, so it never
faults and never appears in link statistics.

Node blocks are sized by level (one size class per level), which keeps page
occupancy arithmetic exact.  Unlike the B-tree's uniform blocks, one evicted
block may be too small for the incoming one, so the eviction step loops until
the purely-local region fits the new block or the prefix is exhausted.
"""
from __future__ import annotations

import random
from enum import Enum

from ..collective import CollectiveAllocator, HintAllocator, Kind, ObjectLayout
from ..farmem import CapacityExhausted, ConfigError, Handle, UsageError
from .btree import OCCUPANCY_LIMIT


class SkipListVariant(Enum):
    PLAIN = "plain"
    HINT = "hint"
    LOCAL = "local"
    PAGE = "page"
    LOCAL_PAGE = "local+page"


_LOCAL_VARIANTS = frozenset({SkipListVariant.LOCAL, SkipListVariant.LOCAL_PAGE})


class _SkipNode:
    __slots__ = ("key", "val", "level", "forwards", "prev", "next")

    def __init__(self, key, val, level, forwards, prev, nxt):
        self.key = key
        self.val = val
        self.level = level
        self.forwards = forwards
        self.prev = prev
        self.next = nxt


class SkipList:
    """Geometric-level skip list; duplicate-key inserts are no-ops."""

    def __init__(self, allocator, variant: SkipListVariant, *,
                 max_level: int = 20, p: float = 0.5,
                 value_slot: int = 152, level_seed: int = 0):
        if max_level < 1:
            raise ConfigError(f"max_level must be >= 1, got {max_level}")
        if not 0.0 < p < 1.0:
            raise ConfigError(f"level probability must be in (0, 1), got {p}")
        if value_slot < 1:
            raise ConfigError(f"value slot must be positive, got {value_slot}")
        self._variant = variant
        if variant is SkipListVariant.HINT:
            if not isinstance(allocator, HintAllocator):
                raise ConfigError("hint variant needs a HintAllocator")
            self._halloc = allocator
            self._alloc = None
        else:
            if not isinstance(allocator, CollectiveAllocator):
                raise ConfigError(f"{variant.value} variant needs a CollectiveAllocator")
            self._alloc = allocator
            self._halloc = None
        self._space = allocator.space
        self._max_level = max_level
        self._p = p
        self._value_slot = value_slot
        # key + value slot + level word + priority prev/next, then one word
        # per forward pointer
        self._base = 8 + value_slot + 8 + 16
        self._layouts = [None] + [
            ObjectLayout(self._base + 8 * lvl, 8) for lvl in range(1, max_level + 1)]
        self._rng = random.Random(level_seed)
        self._uses_local = variant in _LOCAL_VARIANTS
        self._nodes: dict[Handle, _SkipNode] = {}
        self._head: list[Handle] = [0] * max_level
        self._levels = 0
        self._size = 0
        self._prio_head: Handle = 0
        self._prio_tail: Handle = 0
        self._least_priority: Handle = 0
        # _tails[lvl] = last priority-list node of level >= lvl, the splice
        # point for a new node of that level
        self._tails: list[Handle] = [0] * (max_level + 1)

    # -- basic properties ------------------------------------------------

    @property
    def space(self):
        return self._space

    @property
    def variant(self) -> SkipListVariant:
        return self._variant

    @property
    def has_rearrangement(self) -> bool:
        return self._variant not in (SkipListVariant.PLAIN, SkipListVariant.LOCAL)

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    def block_bytes(self, level: int) -> int:
        return self._base + 8 * level

    @property
    def max_block_bytes(self) -> int:
        return self._base + 8 * self._max_level

    def __len__(self) -> int:
        return self._size

    def _check_value(self, value: bytes) -> None:
        if len(value) > self._value_slot:
            raise UsageError(
                f"value of {len(value)} bytes exceeds the {self._value_slot}-byte slot")

    def _draw_level(self) -> int:
        lvl = 1
        while lvl < self._max_level and self._rng.random() < self._p:
            lvl += 1
        return lvl

    # -- search plumbing -------------------------------------------------

    def _touch(self, h: Handle, node: _SkipNode, is_write: bool) -> None:
        self._space.touch(h, self._base + 8 * node.level, is_write)

    def _find_slot(self, key: int):
        """Predecessor handles per level (0 = head tower) and the handle of
        the first node with key >= the target, already touched."""
        nodes = self._nodes
        touch = self._space.touch
        base = self._base
        update = [0] * self._max_level
        cur = 0
        for lvl in reversed(range(self._levels)):
            nxt = self._head[lvl] if not cur else nodes[cur].forwards[lvl]
            while nxt:
                n = nodes[nxt]
                touch(nxt, base + 8 * n.level, False)
                if n.key < key:
                    cur = nxt
                    nxt = n.forwards[lvl]
                else:
                    break
            update[lvl] = cur
        cand = self._head[0] if not cur else nodes[cur].forwards[0]
        return update, cand

    def _find_predecessors(self, key: int) -> list[Handle]:
        update, _ = self._find_slot(key)
        return update

    # -- queries ---------------------------------------------------------

    def search(self, key: int) -> bytes | None:
        _, cand = self._find_slot(key)
        if cand:
            n = self._nodes[cand]
            if n.key == key:
                return n.val
        return None

    def update(self, key: int, value: bytes) -> bool:
        self._check_value(value)
        _, cand = self._find_slot(key)
        if cand:
            n = self._nodes[cand]
            if n.key == key:
                n.val = value
                self._touch(cand, n, True)
                return True
        return False

    def scan(self, key: int, length: int) -> list[tuple[int, bytes]]:
        """Up to ``length`` pairs in ascending key order along the level-0
        chain, starting at ``key`` or its successor."""
        if length < 1:
            raise UsageError(f"scan length must be >= 1, got {length}")
        _, h = self._find_slot(key)
        out: list[tuple[int, bytes]] = []
        nodes = self._nodes
        touch = self._space.touch
        base = self._base
        while h and len(out) < length:
            n = nodes[h]
            touch(h, base + 8 * n.level, False)
            out.append((n.key, n.val))
            h = n.forwards[0]
        return out

    # -- insertion -------------------------------------------------------

    def insert(self, key: int, value: bytes) -> bool:
        self._check_value(value)
        update, cand = self._find_slot(key)
        if cand and self._nodes[cand].key == key:
            return False
        level = self._draw_level()
        h = self._place(level, update)
        node = _SkipNode(key, value, level, [0] * level, 0, 0)
        self._nodes[h] = node
        touch = self._space.touch
        base = self._base
        for i in range(level):
            pred = update[i]
            if pred:
                pn = self._nodes[pred]
                node.forwards[i] = pn.forwards[i]
                pn.forwards[i] = h
                touch(pred, base + 8 * pn.level, True)
            else:
                node.forwards[i] = self._head[i]
                self._head[i] = h
        touch(h, base + 8 * level, True)
        anchor = self._tails[level]
        self._splice_after(anchor, h)
        for lvl in range(1, level + 1):
            if self._tails[lvl] == anchor:
                self._tails[lvl] = h
        if self._least_priority == anchor and self._space.is_purely_local(h):
            self._least_priority = h
        if level > self._levels:
            self._levels = level
        self._size += 1
        return True

    # -- node placement --------------------------------------------------

    def _alloc_plain(self, level: int) -> Handle:
        return self._alloc.sub_allocate(
            self._alloc.swappable_plain, 1, self._layouts[level])

    def _place(self, level: int, update: list[Handle]) -> Handle:
        variant = self._variant
        if variant is SkipListVariant.PLAIN:
            return self._alloc_plain(level)
        if variant is SkipListVariant.HINT:
            return self._halloc.allocate(1, self._layouts[level], update[0] or None)
        alloc = self._alloc
        layout = self._layouts[level]
        anchor = self._tails[level]
        if anchor:
            try:
                ref = alloc.get_suballocator_by_handle(anchor)
                return alloc.sub_allocate(ref, 1, layout)
            except CapacityExhausted:
                pass
            probed_purely_local = alloc.if_suballocator_contains(
                alloc.purely_local, anchor)
        elif self._uses_local:
            # the new node outranks every existing one; it belongs with the
            # highest-priority nodes
            try:
                return alloc.sub_allocate(alloc.purely_local, 1, layout)
            except CapacityExhausted:
                pass
            probed_purely_local = True
        else:
            return self._alloc_plain(level)
        if (self._uses_local and probed_purely_local
                and self._least_priority != anchor):
            while True:
                lp = self._least_priority
                prev = self._nodes[lp].prev
                new_lp = self._evict_to_plain(lp)
                for i, u in enumerate(update):
                    if u == lp:
                        update[i] = new_lp
                self._least_priority = prev
                try:
                    return alloc.sub_allocate(alloc.purely_local, 1, layout)
                except CapacityExhausted:
                    if prev == anchor:
                        return self._alloc_plain(level)
        return self._alloc_plain(level)

    def _evict_to_plain(self, h: Handle) -> Handle:
        node = self._nodes[h]
        preds = self._find_predecessors(node.key)
        layout = self._layouts[node.level]
        return self._relocate(
            h,
            lambda: self._alloc.sub_allocate(self._alloc.swappable_plain, 1, layout),
            lambda old: self._alloc.deallocate(old, 1, layout),
            preds)

    # -- priority list ---------------------------------------------------

    def _splice_after(self, anchor: Handle, h: Handle) -> None:
        node = self._nodes[h]
        touch = self._space.touch
        base = self._base
        if anchor:
            a = self._nodes[anchor]
            nxt = a.next
            node.prev = anchor
            node.next = nxt
            a.next = h
            touch(anchor, base + 8 * a.level, True)
            if nxt:
                n = self._nodes[nxt]
                n.prev = h
                touch(nxt, base + 8 * n.level, True)
            else:
                self._prio_tail = h
        else:
            head = self._prio_head
            node.prev = 0
            node.next = head
            if head:
                n = self._nodes[head]
                n.prev = h
                touch(head, base + 8 * n.level, True)
            else:
                self._prio_tail = h
            self._prio_head = h
        touch(h, base + 8 * node.level, True)

    # -- relocation ------------------------------------------------------

    def _relocate(self, h: Handle, alloc_fn, free_fn,
                  preds: list[Handle]) -> Handle:
        """Move one node, patching its level-wise predecessors (``preds[i]``
        owns the forward pointer in slot ``i``; 0 means the head tower),
        priority neighbours, and list bookkeeping."""
        node = self._nodes[h]
        new_h = alloc_fn()
        touch = self._space.touch
        base = self._base
        touch(h, base + 8 * node.level, False)
        self._nodes[new_h] = node
        del self._nodes[h]
        touch(new_h, base + 8 * node.level, True)
        for i in range(node.level):
            pred = preds[i]
            if pred:
                pn = self._nodes[pred]
                pn.forwards[i] = new_h
                touch(pred, base + 8 * pn.level, True)
            else:
                self._head[i] = new_h
        if node.prev:
            pn = self._nodes[node.prev]
            pn.next = new_h
            touch(node.prev, base + 8 * pn.level, True)
        elif self._prio_head == h:
            self._prio_head = new_h
        if node.next:
            nn = self._nodes[node.next]
            nn.prev = new_h
            touch(node.next, base + 8 * nn.level, True)
        elif self._prio_tail == h:
            self._prio_tail = new_h
        for lvl in range(1, self._levels + 1):
            if self._tails[lvl] == h:
                self._tails[lvl] = new_h
        if self._least_priority == h:
            self._least_priority = new_h
        free_fn(h)
        return new_h

    # -- batch rearrangement ---------------------------------------------

    def make_page_aware(self):
        """Key-order sweep per the variant's policy; returns created
        per-page sub-allocators (empty for the hint variant)."""
        v = self._variant
        if v in (SkipListVariant.PAGE, SkipListVariant.LOCAL_PAGE):
            return self._sweep_to_pages()
        if v is SkipListVariant.HINT:
            return self._sweep_with_hints()
        raise UsageError(f"variant {v.value} has no batch rearrangement")

    def _fresh_page(self, created):
        ref = self._alloc.get_suballocator_by_kind(Kind.NEW_PER_PAGE)
        created.append(ref)
        return ref

    def _sweep_to_pages(self):
        created = []
        page = self._fresh_page(created)
        last_seen = [0] * self._max_level
        touch = self._space.touch
        base = self._base
        h = self._head[0]
        while h:
            node = self._nodes[h]
            touch(h, base + 8 * node.level, False)
            nxt = node.forwards[0]
            new_h = h
            if not self._space.is_purely_local(h):
                if not self._alloc.is_occupancy_under(page, OCCUPANCY_LIMIT):
                    page = self._fresh_page(created)
                layout = self._layouts[node.level]
                dest = page
                new_h = self._relocate(
                    h,
                    lambda: self._alloc.sub_allocate(dest, 1, layout),
                    lambda old: self._alloc.deallocate(old, 1, layout),
                    last_seen)
            for i in range(node.level):
                last_seen[i] = new_h
            h = nxt
        return created

    def _sweep_with_hints(self):
        if self._halloc is None:
            raise UsageError("hint rearrangement needs the hint allocator")
        last_seen = [0] * self._max_level
        previous = 0
        touch = self._space.touch
        base = self._base
        h = self._head[0]
        while h:
            node = self._nodes[h]
            touch(h, base + 8 * node.level, False)
            nxt = node.forwards[0]
            layout = self._layouts[node.level]
            hint = previous or None
            new_h = self._relocate(
                h,
                lambda: self._halloc.allocate(1, layout, hint),
                lambda old: self._halloc.deallocate(old, 1, layout),
                last_seen)
            for i in range(node.level):
                last_seen[i] = new_h
            previous = new_h
            h = nxt
        return []

    # -- offline inspection (no touch accounting) ------------------------

    def items(self) -> list[tuple[int, bytes]]:
        out = []
        h = self._head[0]
        while h:
            n = self._nodes[h]
            out.append((n.key, n.val))
            h = n.forwards[0]
        return out

    def structural_links(self):
        """Forward edges between stored nodes, every level; the head tower
        contributes none."""
        for h, node in self._nodes.items():
            for t in node.forwards:
                if t:
                    yield h, t

    def node_handles(self) -> list[Handle]:
        return list(self._nodes.keys())

    def validate(self) -> None:
        """Assert every structural and placement invariant; test support."""
        nodes = self._nodes
        seq = []
        prev_key = None
        h = self._head[0]
        while h:
            n = nodes[h]
            assert prev_key is None or n.key > prev_key, "level-0 chain out of order"
            seq.append(h)
            prev_key = n.key
            h = n.forwards[0]
        assert len(seq) == len(nodes) == self._size
        for i in range(self._max_level):
            expect = [x for x in seq if nodes[x].level > i]
            got = []
            h = self._head[i]
            while h:
                got.append(h)
                h = nodes[h].forwards[i]
            assert got == expect, f"forward chain {i} inconsistent"
        if seq:
            assert max(nodes[x].level for x in seq) == self._levels
        else:
            assert self._levels == 0
        plist = []
        prev = 0
        h = self._prio_head
        while h:
            n = nodes[h]
            assert n.prev == prev
            plist.append(h)
            prev = h
            h = n.next
        assert self._prio_tail == (plist[-1] if plist else 0)
        assert len(plist) == len(nodes) and set(plist) == set(seq), \
            "priority list must contain every node exactly once"
        levels = [nodes[x].level for x in plist]
        assert levels == sorted(levels, reverse=True), \
            "priority list must be ordered by non-increasing level"
        for lvl in range(1, self._max_level + 1):
            tall = [x for x in plist if nodes[x].level >= lvl]
            assert self._tails[lvl] == (tall[-1] if tall else 0)
        flags = [self._space.is_purely_local(x) for x in plist]
        k = sum(flags)
        assert all(flags[:k]), "purely-local nodes must form a prefix"
        assert self._least_priority == (plist[k - 1] if k else 0)
        if not self._uses_local:
            assert k == 0, "this variant must not hold purely-local nodes"
