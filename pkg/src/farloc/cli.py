"""Benchmark sweep driver.

Runs one benchmark cell per point of the Cartesian product
variant x L x alpha x update-ratio and writes CSV:

* swaps report: measurement-phase swap-in / write-back counts per cell
* links report: structural-link composition ratios per cell

Cells are independent; FARLOC_THREADS > 1 fans them out over a process
pool.  Row order always follows the sweep order, not completion order.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .farmem import FarlocError
from .workload import VARIANTS, BenchConfig, BenchReport, run_benchmark

SWAPS_HEADER = ["variant", "L_percent", "alpha", "update_ratio",
                "page_size", "num_queries", "swap_ins", "write_backs"]
LINKS_HEADER = ["variant", "L_percent", "purely_local_ratio",
                "in_page_ratio", "cross_page_ratio"]


@dataclass(frozen=True)
class SweepSpec:
    variants: tuple[str, ...]
    l_percents: tuple[float, ...]
    alphas: tuple[float, ...]
    update_ratios: tuple[float, ...]
    base: BenchConfig

    def cells(self) -> list[BenchConfig]:
        return [
            replace(self.base, variant=v, l_percent=l, alpha=a, update_ratio=u)
            for v in self.variants
            for l in self.l_percents
            for a in self.alphas
            for u in self.update_ratios
        ]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="farloc",
        description="Sweep placement variants over a key-value swap benchmark "
                    "and report swap traffic or link composition as CSV.")
    p.add_argument("--variant", action="append", choices=sorted(VARIANTS),
                   metavar="NAME",
                   help="container/placement variant, repeatable "
                        f"(default: plain; one of {', '.join(sorted(VARIANTS))})")
    p.add_argument("--l-percent", action="append", type=float, metavar="PCT",
                   help="local-memory budget as %% of data size, repeatable "
                        "(default: 50)")
    p.add_argument("--alpha", action="append", type=float, metavar="A",
                   help="Zipfian skew of query keys, repeatable (default: 0.8)")
    p.add_argument("--update-ratio", action="append", type=float, metavar="U",
                   help="fraction of Update queries, repeatable (default: 0.05)")
    p.add_argument("--data-bytes", type=int, default=16 * 1024 * 1024,
                   help="total key-value data size (default: %(default)s)")
    p.add_argument("--value-size", type=int, default=150,
                   help="value bytes per pair (default: %(default)s)")
    p.add_argument("--page-size", type=int, default=4096,
                   help="swap page size in bytes (default: %(default)s)")
    p.add_argument("--queries", type=int, default=2000,
                   help="measurement-phase query count (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0,
                   help="workload seed (default: %(default)s)")
    p.add_argument("--out", default="-", metavar="PATH",
                   help="output CSV path, - for stdout (default: -)")
    p.add_argument("--report", choices=["swaps", "links", "both"],
                   default="swaps", help="which report to emit (default: swaps)")
    return p


def parse_args(argv=None) -> tuple[SweepSpec, str, str]:
    """(sweep, output path, report kind); exits 2 on bad flags."""
    args = _parser().parse_args(argv)
    base = BenchConfig(
        total_data_bytes=args.data_bytes,
        value_size_bytes=args.value_size,
        num_queries=args.queries,
        page_size_bytes=args.page_size,
        seed=args.seed,
    )
    spec = SweepSpec(
        variants=tuple(args.variant or ["plain"]),
        l_percents=tuple(args.l_percent or [50.0]),
        alphas=tuple(args.alpha or [0.8]),
        update_ratios=tuple(args.update_ratio or [0.05]),
        base=base,
    )
    return spec, args.out, args.report


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[BenchReport]:
    """One report per cell, in sweep order.  threads=None reads
    FARLOC_THREADS (default 1; >1 uses a process pool)."""
    cells = spec.cells()
    if threads is None:
        threads = int(os.environ.get("FARLOC_THREADS", "1") or "1")
    if threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_benchmark, cells))
    return [run_benchmark(cell) for cell in cells]


def _num(x: float) -> str:
    return format(x, "g")


def emit_swaps_csv(reports: list[BenchReport], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWAPS_HEADER)
    for r in reports:
        c = r.config
        w.writerow([c.variant, _num(c.l_percent), _num(c.alpha),
                    _num(c.update_ratio), c.page_size_bytes, c.num_queries,
                    r.measurement_stats.swap_ins, r.measurement_stats.write_backs])


def emit_links_csv(reports: list[BenchReport], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(LINKS_HEADER)
    for r in reports:
        w.writerow([r.config.variant, _num(r.config.l_percent),
                    f"{r.links.purely_local_ratio:.6f}",
                    f"{r.links.in_page_ratio:.6f}",
                    f"{r.links.cross_page_ratio:.6f}"])


def _links_path(out_path: Path) -> Path:
    return out_path.with_name(out_path.stem + "_links" + (out_path.suffix or ".csv"))


def main(argv=None) -> int:
    spec, out_path, report = parse_args(argv)
    try:
        reports = run_sweep(spec)
        if out_path == "-":
            if report in ("swaps", "both"):
                emit_swaps_csv(reports, sys.stdout)
            if report in ("links", "both"):
                emit_links_csv(reports, sys.stdout)
        else:
            path = Path(out_path)
            if report == "links":
                with path.open("w", newline="") as f:
                    emit_links_csv(reports, f)
            else:
                with path.open("w", newline="") as f:
                    emit_swaps_csv(reports, f)
                if report == "both":
                    with _links_path(path).open("w", newline="") as f:
                        emit_links_csv(reports, f)
    except FarlocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
