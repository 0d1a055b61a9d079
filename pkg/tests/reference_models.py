"""Independent reference models the tests check the package against.

Everything here is written for obviousness, not speed: the naive LRU keeps a
plain list, the allocator oracle marks individual bytes.  They share no code
with the package under test.
"""
from farloc.farmem import SWAP_BASE


class NaiveLru:
    """Strict-LRU page cache with dirty bits, one list, no cleverness."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.order = []          # index 0 is the least recently used page
        self.dirty = set()
        self.swap_ins = 0
        self.write_backs = 0

    def touch_page(self, page, is_write=False):
        if page in self.order:
            self.order.remove(page)
            self.order.append(page)
            if is_write:
                self.dirty.add(page)
            return
        self.swap_ins += 1
        if self.capacity == 0:
            # nothing can stay resident; a written page goes straight back
            if is_write:
                self.write_backs += 1
            return
        if len(self.order) >= self.capacity:
            victim = self.order.pop(0)
            if victim in self.dirty:
                self.dirty.remove(victim)
                self.write_backs += 1
        self.order.append(page)
        if is_write:
            self.dirty.add(page)

    def evict_all(self):
        for page in self.order:
            if page in self.dirty:
                self.write_backs += 1
        self.order.clear()
        self.dirty.clear()


class ReplayLru:
    """Same cache policy as NaiveLru on a dict, fast enough to replay long
    page traces at large capacities.  NaiveLru independently pins the policy;
    this class only exists so replays do not cost O(capacity) per touch."""

    def __init__(self, capacity):
        self.capacity = capacity
        self._resident = {}      # page -> dirty, insertion order = LRU order
        self.swap_ins = 0
        self.write_backs = 0

    def touch_page(self, page, is_write=False):
        res = self._resident
        if page in res:
            dirty = res.pop(page) or is_write
            res[page] = dirty
            return
        self.swap_ins += 1
        if self.capacity == 0:
            if is_write:
                self.write_backs += 1
            return
        if len(res) >= self.capacity:
            victim = next(iter(res))
            if res.pop(victim):
                self.write_backs += 1
        res[page] = is_write


class ByteMapFirstFit:
    """First-fit allocator over an explicit byte map.

    An allocation returns the lowest aligned address whose whole extent is
    free, which is exactly what scanning free segments in address order and
    aligning up within each yields.
    """

    def __init__(self, base, size):
        self.base = base
        self.used = bytearray(size)

    def allocate(self, size, align):
        start = (-self.base) % align
        while start + size <= len(self.used):
            if not any(self.used[start:start + size]):
                for i in range(start, start + size):
                    self.used[i] = 1
                return self.base + start
            start += align
        return None

    def free(self, addr, size):
        off = addr - self.base
        assert all(self.used[off:off + size]), "freeing unallocated bytes"
        for i in range(off, off + size):
            self.used[i] = 0

    def max_free(self):
        best = run = 0
        for b in self.used:
            run = 0 if b else run + 1
            best = max(best, run)
        return best


def ref_fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def page_index(handle: int, page_size: int) -> int:
    """Swappable page holding an address, computed from raw arithmetic."""
    assert handle >= SWAP_BASE
    return (handle - SWAP_BASE) // page_size


def tree_depths(tree) -> dict[int, int]:
    """Handle -> depth, derived only from the public parent-child edges."""
    children = {}
    child_set = set()
    for parent, child in tree.structural_links():
        children.setdefault(parent, []).append(child)
        child_set.add(child)
    handles = tree.node_handles()
    roots = [h for h in handles if h not in child_set]
    assert len(roots) == 1
    depths = {roots[0]: 0}
    queue = [roots[0]]
    while queue:
        h = queue.pop()
        for c in children.get(h, ()):
            depths[c] = depths[h] + 1
            queue.append(c)
    assert len(depths) == len(handles)
    return depths


def btree_root(tree) -> int:
    child_set = {c for _, c in tree.structural_links()}
    roots = [h for h in tree.node_handles() if h not in child_set]
    assert len(roots) == 1
    return roots[0]


def skiplist_chain(slist) -> list[int]:
    """Node handles in key order.  Reaches into the level-0 chain because the
    public surface exposes keys and links but not their association."""
    out = []
    h = slist._head[0]
    while h:
        out.append(h)
        h = slist._nodes[h].forwards[0]
    return out


def draw_skiplist_levels(seed: int, p: float, max_level: int, count: int) -> list[int]:
    """Replay of the list's geometric level draws for a given seed."""
    import random

    rng = random.Random(seed)
    levels = []
    for _ in range(count):
        lvl = 1
        while lvl < max_level and rng.random() < p:
            lvl += 1
        levels.append(lvl)
    return levels


def grouped(seq) -> bool:
    """True when every distinct value of seq occupies one contiguous run."""
    seen = set()
    prev = object()
    for x in seq:
        if x != prev:
            if x in seen:
                return False
            seen.add(x)
            prev = x
    return True
