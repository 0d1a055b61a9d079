"""Locality analysis of a container's structural links.

A structural link is an inter-object reference that queries actually chase:
a B-tree parent-to-child edge or a skip-list forward edge (any level).
Priority-list bookkeeping links and parent back-links are excluded; the
former are not on the query path, the latter would double-count each edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .farmem import Handle, Space, UsageError


class LinkClass(Enum):
    PURELY_LOCAL = "purely_local"
    IN_PAGE = "in_page"
    CROSS_PAGE = "cross_page"


@dataclass(frozen=True)
class LinkComposition:
    purely_local_ratio: float
    in_page_ratio: float
    cross_page_ratio: float


def classify_link(space: Space, a: Handle, b: Handle) -> LinkClass:
    """Purely-local when both ends are in the purely-local region, in-page
    when both sit on one swapping page, cross-page otherwise."""
    pa = space.page_of(a)
    pb = space.page_of(b)
    if pa is None and pb is None:
        return LinkClass.PURELY_LOCAL
    if pa is not None and pa == pb:
        return LinkClass.IN_PAGE
    return LinkClass.CROSS_PAGE


def link_composition(container) -> LinkComposition:
    """Class ratios over every structural link of the container; the three
    ratios sum to one."""
    space = container.space
    purely_local = in_page = total = 0
    for a, b in container.structural_links():
        cls = classify_link(space, a, b)
        if cls is LinkClass.PURELY_LOCAL:
            purely_local += 1
        elif cls is LinkClass.IN_PAGE:
            in_page += 1
        total += 1
    if total == 0:
        raise UsageError("link composition is undefined for a container without links")
    return LinkComposition(
        purely_local / total,
        in_page / total,
        (total - purely_local - in_page) / total,
    )


def parent_page_mismatch_fraction(tree) -> float:
    """Fraction of non-root B-tree nodes on a different page from their
    parent; both ends purely-local counts as a match."""
    space = tree.space
    total = mismatch = 0
    for parent, child in tree.structural_links():
        pp = space.page_of(parent)
        cp = space.page_of(child)
        total += 1
        same = (pp is None and cp is None) or (pp is not None and pp == cp)
        if not same:
            mismatch += 1
    if total == 0:
        raise UsageError("mismatch fraction needs at least two nodes")
    return mismatch / total
