"""Key-value store swap benchmark.

A run has two phases over one container in a fresh simulated space:

1. Placement: insert N pairs keyed by the FNV-1a hashes of N-1 down to 0,
   then run the variant's batch rearrangement when it has one.
2. Measurement: drop every cached page and the counters, then replay a
   deterministic Zipfian mix of Scan and Update queries and report the swap
   traffic it causes.

The local-memory budget L (a percentage of the total data size) is split
half purely-local capacity, half page cache for variants that use the
purely-local region, and goes entirely to the page cache otherwise.

All randomness derives from the config seed through independent streams so
that changing the update ratio alters neither the query keys nor the scan
lengths, keeping variants and update mixes comparable cell by cell.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .collective import CollectiveAllocator, HintAllocator
from .containers import BTree, BTreeVariant, SkipList, SkipListVariant
from .farmem import ConfigError, Space, SpaceConfig, SwapStats, UsageError
from .metrics import LinkComposition, link_composition

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv64(x: int) -> int:
    """FNV-1a of the eight little-endian bytes of a 64-bit unsigned value."""
    if not 0 <= x <= _MASK64:
        raise UsageError(f"fnv64 input out of 64-bit range: {x}")
    h = FNV64_OFFSET
    for b in x.to_bytes(8, "little"):
        h = ((h ^ b) * FNV64_PRIME) & _MASK64
    return h


def fnv64_batch(values) -> np.ndarray:
    """Vectorized fnv64 over an array of unsigned integers."""
    xs = np.asarray(values, dtype=np.uint64)
    h = np.full(xs.shape, FNV64_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV64_PRIME)
    mask = np.uint64(0xFF)
    with np.errstate(over="ignore"):
        for shift in range(0, 64, 8):
            h = (h ^ ((xs >> np.uint64(shift)) & mask)) * prime
    return h


class ZipfSampler:
    """Inverse-CDF sampler of ranks 1..n with P(k) proportional to k**-alpha."""

    def __init__(self, n: int, alpha: float):
        if n < 1:
            raise ConfigError(f"population must be >= 1, got {n}")
        if alpha < 0:
            raise ConfigError(f"skew must be >= 0, got {alpha}")
        self.n = n
        self.alpha = alpha
        weights = np.arange(1, n + 1, dtype=np.float64) ** -alpha
        cdf = np.cumsum(weights)
        self._cdf = cdf / cdf[-1]

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        u = rng.random(size)
        return np.searchsorted(self._cdf, u, side="right") + 1


def zipf_sample(rng: np.random.Generator, n: int, alpha: float) -> int:
    """One rank in [1, n]; convenience wrapper over ZipfSampler."""
    return int(ZipfSampler(n, alpha).sample(rng))


# name -> (container family, variant, uses purely-local region)
VARIANTS: dict[str, tuple[str, object, bool]] = {
    "plain": ("btree", BTreeVariant.PLAIN, False),
    "hint": ("btree", BTreeVariant.HINT, False),
    "local": ("btree", BTreeVariant.LOCAL, True),
    "dfs": ("btree", BTreeVariant.DFS, False),
    "local+dfs": ("btree", BTreeVariant.LOCAL_DFS, True),
    "veb": ("btree", BTreeVariant.VEB, False),
    "local+veb": ("btree", BTreeVariant.LOCAL_VEB, True),
    "skip-plain": ("skiplist", SkipListVariant.PLAIN, False),
    "skip-hint": ("skiplist", SkipListVariant.HINT, False),
    "skip-local": ("skiplist", SkipListVariant.LOCAL, True),
    "skip-page": ("skiplist", SkipListVariant.PAGE, False),
    "skip-local+page": ("skiplist", SkipListVariant.LOCAL_PAGE, True),
}


def variant_uses_local(name: str) -> bool:
    return VARIANTS[name][2]


@dataclass(frozen=True)
class BenchConfig:
    variant: str = "plain"
    total_data_bytes: int = 16 * 1024 * 1024
    value_size_bytes: int = 150
    l_percent: float = 50.0
    alpha: float = 0.8
    update_ratio: float = 0.05
    num_queries: int = 2000
    scan_len_max: int = 100
    page_size_bytes: int = 4096
    seed: int = 0

    @property
    def pair_size_bytes(self) -> int:
        # 8-byte key plus the value slot padded to 8-byte alignment
        return 8 + (self.value_size_bytes + 7) // 8 * 8

    @property
    def num_pairs(self) -> int:
        return self.total_data_bytes // self.pair_size_bytes

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.value_size_bytes < 1:
            raise ConfigError(f"value size must be positive, got {self.value_size_bytes}")
        if self.num_pairs < 1:
            raise ConfigError(
                f"{self.total_data_bytes} data bytes hold no "
                f"{self.pair_size_bytes}-byte pair")
        if self.l_percent <= 0:
            raise ConfigError(f"local budget must be > 0 %, got {self.l_percent}")
        if not 0.0 <= self.update_ratio <= 1.0:
            raise ConfigError(f"update ratio must be in [0, 1], got {self.update_ratio}")
        if self.num_queries < 0:
            raise ConfigError(f"query count must be >= 0, got {self.num_queries}")
        if self.scan_len_max < 1:
            raise ConfigError(f"max scan length must be >= 1, got {self.scan_len_max}")


@dataclass(frozen=True)
class QueryOp:
    key: int
    kind: str              # "scan" | "update"
    length: int = 0        # scan only
    value: bytes = b""     # update only


@dataclass(frozen=True)
class BenchReport:
    config: BenchConfig
    placement_stats: SwapStats
    links: LinkComposition
    measurement_stats: SwapStats
    wall_time_s: float


def _streams(seed: int):
    """Independent child seeds: placement values, query keys, query mix,
    update values."""
    return np.random.SeedSequence(seed).spawn(4)


def local_budget(cfg: BenchConfig) -> tuple[int, int]:
    """(purely-local capacity in bytes, page-cache capacity in pages)."""
    l_bytes = int(round(cfg.total_data_bytes * cfg.l_percent / 100.0))
    if variant_uses_local(cfg.variant):
        half = l_bytes // 2
        return half, half // cfg.page_size_bytes
    return 0, l_bytes // cfg.page_size_bytes


def placement_keys(cfg: BenchConfig) -> np.ndarray:
    """fnv64 of N-1, N-2, ..., 0; dependent keys arrive shallow-first."""
    n = cfg.num_pairs
    return fnv64_batch(np.arange(n - 1, -1, -1, dtype=np.uint64))


def build_placement(cfg: BenchConfig):
    """Placement phase: a fresh space and container, all pairs inserted and
    the batch rearrangement run when the variant has one.  Returns
    (container, space)."""
    cfg.validate()
    family, variant, uses_local = VARIANTS[cfg.variant]
    pl_bytes, cache_pages = local_budget(cfg)
    space = Space(SpaceConfig(cfg.page_size_bytes, pl_bytes, cache_pages))
    hinted = variant in (BTreeVariant.HINT, SkipListVariant.HINT)
    allocator = HintAllocator(space) if hinted else CollectiveAllocator(space)
    value_slot = cfg.pair_size_bytes - 8
    if family == "btree":
        container = BTree(allocator, variant, value_slot=value_slot)
    else:
        container = SkipList(allocator, variant, value_slot=value_slot,
                             level_seed=cfg.seed)
    vs = cfg.value_size_bytes
    buf = np.random.default_rng(_streams(cfg.seed)[0]).integers(
        0, 256, size=cfg.num_pairs * vs, dtype=np.uint8).tobytes()
    insert = container.insert
    for i, key in enumerate(placement_keys(cfg).tolist()):
        insert(key, buf[i * vs:(i + 1) * vs])
    if container.has_rearrangement:
        container.make_page_aware()
    return container, space


def query_script(cfg: BenchConfig) -> list[QueryOp]:
    """Deterministic measurement-phase script.  Keys are Zipf ranks hashed
    into the inserted key set; kinds and scan lengths are drawn up front so
    they do not depend on the update ratio's effect on stream consumption."""
    cfg.validate()
    _, key_seed, mix_seed, upd_seed = _streams(cfg.seed)
    nq = cfg.num_queries
    ranks = ZipfSampler(cfg.num_pairs, cfg.alpha).sample(
        np.random.default_rng(key_seed), nq)
    keys = fnv64_batch((ranks - 1).astype(np.uint64))
    mix_rng = np.random.default_rng(mix_seed)
    is_update = mix_rng.random(nq) < cfg.update_ratio
    lengths = mix_rng.integers(1, cfg.scan_len_max + 1, size=nq)
    vs = cfg.value_size_bytes
    upd_buf = np.random.default_rng(upd_seed).integers(
        0, 256, size=int(is_update.sum()) * vs, dtype=np.uint8).tobytes()
    ops: list[QueryOp] = []
    ui = 0
    for i in range(nq):
        key = int(keys[i])
        if is_update[i]:
            ops.append(QueryOp(key, "update", 0, upd_buf[ui * vs:(ui + 1) * vs]))
            ui += 1
        else:
            ops.append(QueryOp(key, "scan", int(lengths[i])))
    return ops


def run_queries(container, script: list[QueryOp]) -> None:
    for op in script:
        if op.kind == "update":
            container.update(op.key, op.value)
        else:
            container.scan(op.key, op.length)


def run_benchmark(cfg: BenchConfig) -> BenchReport:
    t0 = time.perf_counter()
    container, space = build_placement(cfg)
    placement_stats = space.stats()
    links = link_composition(container)
    space.evict_all()
    space.reset_stats()
    run_queries(container, query_script(cfg))
    return BenchReport(cfg, placement_stats, links, space.stats(),
                       time.perf_counter() - t0)
