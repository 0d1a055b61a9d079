"""Classic B-tree with pluggable node-placement policies.

Every node is a key/value-bearing block carved out of a simulated far-memory
space; each node access goes through the space's touch accounting.  The
placement variant decides where a node created by a split lands:

* ``plain``      -- swappable plain sub-allocator, no placement control
* ``hint``       -- baseline hint allocator, parent used as the hint
* ``local``      -- probe the sub-allocator owning the split node, evicting
                    the least-priority purely-local node on exhaustion
* ``dfs``        -- probe the sub-allocator owning the split node's parent;
                    batch rearrangement relocates nodes in post-order DFS
                    into per-page sub-allocators
* ``local+dfs``  -- dfs plus the purely-local region and eviction policy
* ``veb``        -- dfs allocation policy with a van Emde Boas style
                    half-height batch rearrangement
* ``local+veb``  -- veb plus the purely-local region

Nodes are kept on a priority list ordered by non-decreasing depth; in the
local variants the purely-local nodes always form a prefix of that list and
``least_priority`` names the prefix's last node.
"""
from __future__ import annotations

from bisect import bisect_right
from enum import Enum

from ..collective import CollectiveAllocator, HintAllocator, Kind, ObjectLayout
from ..farmem import CapacityExhausted, ConfigError, Handle, UsageError

# A batch rearrangement moves to a fresh per-page sub-allocator once the
# current one's occupancy reaches this fraction of the page.
OCCUPANCY_LIMIT = 0.7


class BTreeVariant(Enum):
    PLAIN = "plain"
    HINT = "hint"
    LOCAL = "local"
    DFS = "dfs"
    LOCAL_DFS = "local+dfs"
    VEB = "veb"
    LOCAL_VEB = "local+veb"


_LOCAL_VARIANTS = frozenset(
    {BTreeVariant.LOCAL, BTreeVariant.LOCAL_DFS, BTreeVariant.LOCAL_VEB})
_PARENT_ANCHOR_VARIANTS = frozenset(
    {BTreeVariant.DFS, BTreeVariant.LOCAL_DFS, BTreeVariant.VEB, BTreeVariant.LOCAL_VEB})


class _Node:
    __slots__ = ("keys", "vals", "children", "parent", "prev", "next", "leaf")

    def __init__(self, keys, vals, children, parent, prev, nxt, leaf):
        self.keys = keys
        self.vals = vals
        self.children = children
        self.parent = parent
        self.prev = prev
        self.next = nxt
        self.leaf = leaf


class BTree:
    """Order-``order`` B-tree (max ``order - 1`` keys per node).

    Duplicate-key inserts are no-ops.  Values are byte strings of at most
    ``value_slot`` bytes; node blocks are padded to one fixed size so page
    occupancy arithmetic is exact.
    """

    def __init__(self, allocator, variant: BTreeVariant, *,
                 order: int = 5, value_slot: int = 152):
        if order < 3:
            raise ConfigError(f"order must be >= 3, got {order}")
        if value_slot < 1:
            raise ConfigError(f"value slot must be positive, got {value_slot}")
        self._variant = variant
        if variant is BTreeVariant.HINT:
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
        self._order = order
        self._max_keys = order - 1
        self._min_keys = (order + 1) // 2 - 1
        self._value_slot = value_slot
        # keys + value slots + child pointers + parent + prev + next + count
        self._block = (order - 1) * 8 + (order - 1) * value_slot + order * 8 + 8 * 3 + 8
        self._layout = ObjectLayout(self._block, 8)
        self._uses_local = variant in _LOCAL_VARIANTS
        self._nodes: dict[Handle, _Node] = {}
        self._root: Handle = 0
        self._height = 0
        self._size = 0
        self._prio_head: Handle = 0
        self._prio_tail: Handle = 0
        self._least_priority: Handle = 0

    # -- basic properties ------------------------------------------------

    @property
    def space(self):
        return self._space

    @property
    def variant(self) -> BTreeVariant:
        return self._variant

    @property
    def has_rearrangement(self) -> bool:
        return self._variant not in (BTreeVariant.PLAIN, BTreeVariant.LOCAL)

    @property
    def height(self) -> int:
        return self._height

    @property
    def node_block_bytes(self) -> int:
        return self._block

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    def __len__(self) -> int:
        return self._size

    # -- queries ---------------------------------------------------------

    def search(self, key: int) -> bytes | None:
        nodes = self._nodes
        touch = self._space.touch
        block = self._block
        h = self._root
        while h:
            node = nodes[h]
            touch(h, block, False)
            keys = node.keys
            i = bisect_right(keys, key)
            if i and keys[i - 1] == key:
                return node.vals[i - 1]
            if node.leaf:
                return None
            h = node.children[i]
        return None

    def update(self, key: int, value: bytes) -> bool:
        self._check_value(value)
        nodes = self._nodes
        touch = self._space.touch
        block = self._block
        h = self._root
        while h:
            node = nodes[h]
            touch(h, block, False)
            keys = node.keys
            i = bisect_right(keys, key)
            if i and keys[i - 1] == key:
                node.vals[i - 1] = value
                touch(h, block, True)
                return True
            if node.leaf:
                return False
            h = node.children[i]
        return False

    def scan(self, key: int, length: int) -> list[tuple[int, bytes]]:
        """Up to ``length`` pairs in ascending key order, starting at ``key``
        or, when absent, at its successor."""
        if length < 1:
            raise UsageError(f"scan length must be >= 1, got {length}")
        nodes = self._nodes
        touch = self._space.touch
        block = self._block
        h = self._root
        at = None
        while h:
            node = nodes[h]
            touch(h, block, False)
            keys = node.keys
            i = bisect_right(keys, key)
            if i and keys[i - 1] == key:
                at = (h, i - 1)
                break
            if i < len(keys):
                at = (h, i)
            if node.leaf:
                break
            h = node.children[i]
        out: list[tuple[int, bytes]] = []
        while at and len(out) < length:
            h, idx = at
            node = nodes[h]
            out.append((node.keys[idx], node.vals[idx]))
            at = self._next_entry(h, idx)
        return out

    def _next_entry(self, h: Handle, idx: int):
        nodes = self._nodes
        touch = self._space.touch
        block = self._block
        node = nodes[h]
        if not node.leaf:
            nh = node.children[idx + 1]
            touch(nh, block, False)
            n = nodes[nh]
            while not n.leaf:
                nh = n.children[0]
                touch(nh, block, False)
                n = nodes[nh]
            return (nh, 0)
        if idx + 1 < len(node.keys):
            return (h, idx + 1)
        child = h
        p = node.parent
        while p:
            pn = nodes[p]
            touch(p, block, False)
            pos = pn.children.index(child)
            if pos < len(pn.keys):
                return (p, pos)
            child = p
            p = pn.parent
        return None

    # -- insertion -------------------------------------------------------

    def insert(self, key: int, value: bytes) -> bool:
        """Insert one pair; returns False (and changes nothing) when the key
        is already present."""
        self._check_value(value)
        if not self._root:
            h = self._place_first_root()
            self._nodes[h] = _Node([key], [value], [], 0, 0, 0, True)
            self._space.touch(h, self._block, True)
            self._prio_head = self._prio_tail = h
            if self._space.is_purely_local(h):
                self._least_priority = h
            self._root = h
            self._height = 1
            self._size = 1
            return True
        baby, sep_k, sep_v, inserted = self._ins_rec(self._root, key, value)
        if baby:
            old_root = self._root
            new_h, (old_root, baby) = self._place_new_root(old_root, (old_root, baby))
            self._nodes[new_h] = _Node([sep_k], [sep_v], [old_root, baby], 0, 0, 0, False)
            self._space.touch(new_h, self._block, True)
            self._nodes[old_root].parent = new_h
            self._space.touch(old_root, self._block, True)
            self._nodes[baby].parent = new_h
            self._space.touch(baby, self._block, True)
            self._splice_head(new_h)
            self._root = new_h
            self._height += 1
        if inserted:
            self._size += 1
        return inserted

    def _check_value(self, value: bytes) -> None:
        if len(value) > self._value_slot:
            raise UsageError(
                f"value of {len(value)} bytes exceeds the {self._value_slot}-byte slot")

    def _ins_rec(self, h: Handle, key: int, value: bytes):
        node = self._nodes[h]
        self._space.touch(h, self._block, False)
        keys = node.keys
        i = bisect_right(keys, key)
        if i and keys[i - 1] == key:
            return 0, None, None, False
        if node.leaf:
            if len(keys) < self._max_keys:
                keys.insert(i, key)
                node.vals.insert(i, value)
                self._space.touch(h, self._block, True)
                return 0, None, None, True
            new_h, _ = self._place_node(h, ())
            sep_k, sep_v = self._split_leaf(h, new_h, i, key, value)
            return new_h, sep_k, sep_v, True
        baby, sep_k, sep_v, inserted = self._ins_rec(node.children[i], key, value)
        if not baby:
            return 0, None, None, inserted
        if len(keys) < self._max_keys:
            keys.insert(i, sep_k)
            node.vals.insert(i, sep_v)
            node.children.insert(i + 1, baby)
            self._space.touch(h, self._block, True)
            return 0, None, None, inserted
        new_h, (baby,) = self._place_node(h, (baby,))
        sep2_k, sep2_v = self._split_internal(h, new_h, i, sep_k, sep_v, baby)
        return new_h, sep2_k, sep2_v, inserted

    def _split_leaf(self, h, new_h, i, key, value):
        node = self._nodes[h]
        keys, vals = node.keys, node.vals
        keys.insert(i, key)
        vals.insert(i, value)
        mid = self._max_keys // 2
        right = _Node(keys[mid + 1:], vals[mid + 1:], [], node.parent, 0, 0, True)
        sep_k, sep_v = keys[mid], vals[mid]
        del keys[mid:]
        del vals[mid:]
        self._nodes[new_h] = right
        self._space.touch(h, self._block, True)
        self._space.touch(new_h, self._block, True)
        self._splice_after(h, new_h)
        return sep_k, sep_v

    def _split_internal(self, h, new_h, i, sep_k, sep_v, baby):
        node = self._nodes[h]
        keys, vals, children = node.keys, node.vals, node.children
        keys.insert(i, sep_k)
        vals.insert(i, sep_v)
        children.insert(i + 1, baby)
        mid = self._max_keys // 2
        right = _Node(keys[mid + 1:], vals[mid + 1:], children[mid + 1:],
                      node.parent, 0, 0, False)
        up_k, up_v = keys[mid], vals[mid]
        del keys[mid:]
        del vals[mid:]
        del children[mid + 1:]
        self._nodes[new_h] = right
        for c in right.children:
            self._nodes[c].parent = new_h
            self._space.touch(c, self._block, True)
        self._space.touch(h, self._block, True)
        self._space.touch(new_h, self._block, True)
        self._splice_after(h, new_h)
        return up_k, up_v

    # -- node placement --------------------------------------------------

    def _alloc_plain(self) -> Handle:
        return self._alloc.sub_allocate(self._alloc.swappable_plain, 1, self._layout)

    def _place_first_root(self) -> Handle:
        if self._variant is BTreeVariant.HINT:
            return self._halloc.allocate(1, self._layout, None)
        if self._uses_local:
            try:
                return self._alloc.sub_allocate(self._alloc.purely_local, 1, self._layout)
            except CapacityExhausted:
                pass
        return self._alloc_plain()

    def _place_new_root(self, old_root: Handle, tracked):
        if self._variant is BTreeVariant.HINT:
            return self._halloc.allocate(1, self._layout, None), tracked
        if self._variant is BTreeVariant.PLAIN:
            return self._alloc_plain(), tracked
        return self._place_with_collective(old_root, old_root, tracked, at_head=True)

    def _place_node(self, split_h: Handle, tracked):
        """Allocate the block for the new sibling created by splitting
        ``split_h``; returns the handle plus the (possibly relocated)
        tracked handles."""
        variant = self._variant
        if variant is BTreeVariant.HINT:
            parent = self._nodes[split_h].parent
            return self._halloc.allocate(1, self._layout, parent or None), tracked
        if variant is BTreeVariant.PLAIN:
            return self._alloc_plain(), tracked
        if variant in _PARENT_ANCHOR_VARIANTS:
            anchor = self._nodes[split_h].parent or split_h
        else:
            anchor = split_h
        return self._place_with_collective(split_h, anchor, tracked)

    def _place_with_collective(self, split_h, anchor, tracked, at_head=False):
        alloc = self._alloc
        try:
            ref = alloc.get_suballocator_by_handle(anchor)
            h = alloc.sub_allocate(ref, 1, self._layout)
            if not at_head and self._least_priority == split_h:
                self._least_priority = h
            return h, tracked
        except CapacityExhausted:
            pass
        if (self._uses_local
                and (at_head or self._least_priority != split_h)
                and alloc.if_suballocator_contains(alloc.purely_local, split_h)):
            # Evicting the node being split would invalidate the caller's
            # handle, so an ordinary split stops short of it.  A new root
            # outranks everything and its caller re-reads the old root
            # through ``tracked``, so there the whole prefix is fair game.
            pl = alloc.purely_local
            while True:
                lp = self._least_priority
                if not lp or (not at_head and lp == split_h):
                    return self._alloc_plain(), tracked
                prev = self._nodes[lp].prev
                new_lp = self.relocate_to_swappable(lp)
                if tracked and lp in tracked:
                    tracked = tuple(new_lp if t == lp else t for t in tracked)
                self._least_priority = prev
                try:
                    h = alloc.sub_allocate(pl, 1, self._layout)
                except CapacityExhausted:
                    continue
                if at_head:
                    if not prev:
                        self._least_priority = h
                elif prev == split_h:
                    self._least_priority = h
                return h, tracked
        return self._alloc_plain(), tracked

    # -- priority list ---------------------------------------------------

    def _splice_after(self, anchor_h: Handle, new_h: Handle) -> None:
        node = self._nodes[new_h]
        anchor = self._nodes[anchor_h]
        nxt = anchor.next
        node.prev = anchor_h
        node.next = nxt
        anchor.next = new_h
        self._space.touch(anchor_h, self._block, True)
        if nxt:
            self._nodes[nxt].prev = new_h
            self._space.touch(nxt, self._block, True)
        else:
            self._prio_tail = new_h
        self._space.touch(new_h, self._block, True)

    def _splice_head(self, new_h: Handle) -> None:
        node = self._nodes[new_h]
        head = self._prio_head
        node.prev = 0
        node.next = head
        if head:
            self._nodes[head].prev = new_h
            self._space.touch(head, self._block, True)
        else:
            self._prio_tail = new_h
        self._prio_head = new_h
        self._space.touch(new_h, self._block, True)

    # -- relocation ------------------------------------------------------

    def relocate_to_swappable(self, h: Handle) -> Handle:
        """Move a node to the swappable plain sub-allocator, rewriting every
        reference to it; its priority-list position is unchanged."""
        self._need_collective()
        return self._relocate(h, self._alloc_plain, self._dealloc)

    def relocate_to_page(self, h: Handle, page_ref) -> Handle:
        self._need_collective()
        return self._relocate(
            h, lambda: self._alloc.sub_allocate(page_ref, 1, self._layout), self._dealloc)

    def _need_collective(self) -> None:
        if self._alloc is None:
            raise UsageError("this variant has no collective allocator")

    def _dealloc(self, h: Handle) -> None:
        self._alloc.deallocate(h, 1, self._layout)

    def _hint_dealloc(self, h: Handle) -> None:
        self._halloc.deallocate(h, 1, self._layout)

    def _relocate(self, h: Handle, alloc_fn, free_fn) -> Handle:
        node = self._nodes[h]
        new_h = alloc_fn()
        self._space.touch(h, self._block, False)
        self._nodes[new_h] = node
        del self._nodes[h]
        self._space.touch(new_h, self._block, True)
        p = node.parent
        if p:
            siblings = self._nodes[p].children
            try:
                siblings[siblings.index(h)] = new_h
                self._space.touch(p, self._block, True)
            except ValueError:
                pass   # a freshly split node not yet wired into its parent
        for c in node.children:
            self._nodes[c].parent = new_h
            self._space.touch(c, self._block, True)
        if node.prev:
            self._nodes[node.prev].next = new_h
            self._space.touch(node.prev, self._block, True)
        elif self._prio_head == h:
            self._prio_head = new_h
        if node.next:
            self._nodes[node.next].prev = new_h
            self._space.touch(node.next, self._block, True)
        elif self._prio_tail == h:
            self._prio_tail = new_h
        if self._root == h:
            self._root = new_h
        if self._least_priority == h:
            # both destinations are swappable, so the marker falls back to
            # the previous (still purely-local) node
            self._least_priority = (new_h if self._space.is_purely_local(new_h)
                                    else node.prev)
        free_fn(h)
        return new_h

    # -- batch rearrangement ---------------------------------------------

    def make_page_aware(self):
        """Run the variant's batch rearrangement; returns the per-page
        sub-allocators it created (empty for the hint variant)."""
        v = self._variant
        if v in (BTreeVariant.DFS, BTreeVariant.LOCAL_DFS):
            return self._rearrange_dfs()
        if v in (BTreeVariant.VEB, BTreeVariant.LOCAL_VEB):
            return self._rearrange_veb()
        if v is BTreeVariant.HINT:
            return self._rearrange_hint()
        raise UsageError(f"variant {v.value} has no batch rearrangement")

    def _fresh_page(self, created):
        ref = self._alloc.get_suballocator_by_kind(Kind.NEW_PER_PAGE)
        created.append(ref)
        return ref

    def _rearrange_dfs(self):
        created = []
        holder = [self._fresh_page(created)]
        if self._root:
            self._dfs_visit(self._root, holder, created)
        return created

    def _dfs_visit(self, h, holder, created):
        node = self._nodes[h]
        self._space.touch(h, self._block, False)
        if not node.leaf:
            children = node.children
            for i in range(len(children)):
                self._dfs_visit(children[i], holder, created)
        if self._space.is_purely_local(h):
            return h
        page = holder[0]
        if not self._alloc.is_occupancy_under(page, OCCUPANCY_LIMIT):
            page = self._fresh_page(created)
            holder[0] = page
        return self.relocate_to_page(h, page)

    def _rearrange_veb(self):
        created = []
        holder = [self._fresh_page(created)]
        if self._root:
            self._veb_visit(self._root, self._height, holder, created)
        return created

    def _veb_visit(self, h, height, holder, created):
        if height == 0:
            return h
        if height == 1:
            self._space.touch(h, self._block, False)
            if self._space.is_purely_local(h):
                return h
            page = holder[0]
            if not self._alloc.is_occupancy_under(page, OCCUPANCY_LIMIT):
                page = self._fresh_page(created)
                holder[0] = page
            return self.relocate_to_page(h, page)
        lower = height // 2
        upper = height - lower
        h = self._veb_visit(h, upper, holder, created)
        for d in self._descendants_below(h, upper):
            self._veb_visit(d, lower, holder, created)
        return h

    def _descendants_below(self, h, generations):
        level = [h]
        for _ in range(generations):
            nxt = []
            for hh in level:
                node = self._nodes[hh]
                self._space.touch(hh, self._block, False)
                if not node.leaf:
                    nxt.extend(node.children)
            level = nxt
        return level

    def _rearrange_hint(self):
        if self._halloc is None:
            raise UsageError("hint rearrangement needs the hint allocator")
        if self._root:
            self._hint_visit(self._root, [0])
        return []

    def _hint_visit(self, h, prev_holder):
        node = self._nodes[h]
        self._space.touch(h, self._block, False)
        if not node.leaf:
            children = node.children
            for i in range(len(children)):
                self._hint_visit(children[i], prev_holder)
        hint = prev_holder[0] or None
        new_h = self._relocate(
            h, lambda: self._halloc.allocate(1, self._layout, hint), self._hint_dealloc)
        prev_holder[0] = new_h
        return new_h

    # -- offline inspection (no touch accounting) ------------------------

    def items(self) -> list[tuple[int, bytes]]:
        out: list[tuple[int, bytes]] = []

        def rec(h):
            node = self._nodes[h]
            if node.leaf:
                out.extend(zip(node.keys, node.vals))
                return
            for i, c in enumerate(node.children):
                rec(c)
                if i < len(node.keys):
                    out.append((node.keys[i], node.vals[i]))

        if self._root:
            rec(self._root)
        return out

    def structural_links(self):
        """Parent-to-child edges, one tuple per live link."""
        for h, node in self._nodes.items():
            for c in node.children:
                yield h, c

    def node_handles(self) -> list[Handle]:
        return list(self._nodes.keys())

    def validate(self) -> None:
        """Assert every structural and placement invariant; test support."""
        nodes = self._nodes
        if not self._root:
            assert not nodes and self._prio_head == 0 and self._prio_tail == 0
            assert self._least_priority == 0 and self._size == 0
            return
        depths: dict[Handle, int] = {}
        leaf_depths: set[int] = set()
        total_pairs = 0

        def rec(h, parent, depth, lo, hi):
            nonlocal total_pairs
            node = nodes[h]
            assert node.parent == parent, "parent link out of date"
            ks = node.keys
            assert ks == sorted(set(ks)), "keys must be strictly increasing"
            limit = 1 if h == self._root else self._min_keys
            assert limit <= len(ks) <= self._max_keys, "key count out of range"
            if lo is not None:
                assert ks[0] > lo
            if hi is not None:
                assert ks[-1] < hi
            total_pairs += len(ks)
            depths[h] = depth
            if node.leaf:
                assert not node.children
                leaf_depths.add(depth)
                return
            assert len(node.children) == len(ks) + 1
            for i, c in enumerate(node.children):
                rec(c, h, depth + 1,
                    ks[i - 1] if i else lo, ks[i] if i < len(ks) else hi)

        rec(self._root, 0, 0, None, None)
        assert len(leaf_depths) == 1, "leaves must share one depth"
        assert len(depths) == len(nodes), "unreachable or duplicated nodes"
        assert self._height == next(iter(leaf_depths)) + 1
        assert self._size == total_pairs
        seen = []
        h = self._prio_head
        prev = 0
        while h:
            node = nodes[h]
            assert node.prev == prev
            seen.append(h)
            prev = h
            h = node.next
        assert len(seen) == len(nodes) and set(seen) == set(nodes), \
            "priority list must contain every node exactly once"
        assert self._prio_tail == seen[-1]
        ds = [depths[x] for x in seen]
        assert ds == sorted(ds), "priority list must be ordered by depth"
        flags = [self._space.is_purely_local(x) for x in seen]
        k = sum(flags)
        assert all(flags[:k]), "purely-local nodes must form a prefix"
        assert self._least_priority == (seen[k - 1] if k else 0)
        if not self._uses_local:
            assert k == 0, "this variant must not hold purely-local nodes"
