"""Placement-aware ordered containers over the collective allocator."""
from .btree import OCCUPANCY_LIMIT, BTree, BTreeVariant
from .skiplist import SkipList, SkipListVariant

__all__ = [
    "OCCUPANCY_LIMIT",
    "BTree",
    "BTreeVariant",
    "SkipList",
    "SkipListVariant",
]
