"""Hyperparameter sweep: damping factor x citing window, scored by how evenly
prestige spreads across subjects."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus_io import ArticleRecord, RawEdge
from .engine import AspConfig, compute_asp
from .graph import (
    CitationGraph,
    PreprocessPolicy,
    build_graph,
    filter_window,
    gather_rows,
)

TIE_BREAK_RULE = "ties resolved by larger window, then d closest to 0.5, then smaller d"


@dataclass(frozen=True)
class SweepGrid:
    """Grid of damping factors (open (0,1)) and citing windows (>= 1 year)."""

    d_values: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    w_values: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    years: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not self.d_values or not self.w_values:
            raise ValueError("sweep grid must be non-empty")
        for d in self.d_values:
            if not 0.0 < d < 1.0:
                raise ValueError(f"damping factor must satisfy 0 < d < 1, got {d}")
        for w in self.w_values:
            if w < 1:
                raise ValueError(f"citing window must be >= 1, got {w}")
        if self.years is not None and self.years[0] > self.years[1]:
            raise ValueError(f"empty year interval {self.years}")


@dataclass(frozen=True)
class SweepResult:
    """Deviation surface over the grid; NaN marks non-converged cells."""

    d_values: tuple[float, ...]
    w_values: tuple[int, ...]
    years: tuple[int, ...]
    deviation: np.ndarray
    per_year_deviation: np.ndarray
    valid: np.ndarray
    optimum: tuple[float, int] | None
    tie_break: str = TIE_BREAK_RULE


def subject_deviation(
    asp_values: np.ndarray,
    graph: CitationGraph,
    year: int,
    *,
    norm: str = "l1",
) -> float:
    """Spread of per-subject mean prestige around the grand mean for one year.

    Articles contribute fully to every subject they carry.  ``norm="l1"``
    sums absolute differences (default, sign-cancellation proof); ``"l2"``
    returns the Euclidean norm of the differences instead.
    """
    if norm not in ("l1", "l2"):
        raise ValueError(f"unknown norm {norm!r}")
    asp_values = np.asarray(asp_values, dtype=float)
    nodes = np.flatnonzero(graph.node_year == year)
    if nodes.size == 0:
        warnings.warn(f"no articles in year {year}; deviation defined as 0")
        return 0.0
    grand = float(asp_values[nodes].mean())
    members = gather_rows(graph.subj_indptr, graph.subj_indices, nodes)
    if members.size == 0:
        return 0.0
    lens = (graph.subj_indptr[nodes + 1] - graph.subj_indptr[nodes]).astype(np.int64)
    weights = np.repeat(asp_values[nodes], lens)
    n_subjects = len(graph.subject_labels)
    sums = np.bincount(members, weights=weights, minlength=n_subjects)
    counts = np.bincount(members, minlength=n_subjects)
    present = counts > 0
    diffs = sums[present] / counts[present] - grand
    if norm == "l1":
        return float(np.abs(diffs).sum())
    return float(np.sqrt((diffs**2).sum()))


def run_sweep(
    articles: Sequence[ArticleRecord],
    edges: Sequence[RawEdge],
    policy: PreprocessPolicy | None,
    grid: SweepGrid,
    *,
    config: AspConfig | None = None,
    threads: int = 0,
    norm: str = "l1",
    cell_workers: int = 1,
) -> SweepResult:
    """Solve every (d, w) cell and pick the grid point evening out subjects.

    Each cell applies window w to the edges, solves prestige on the full node
    set, and sums the yearly subject deviation over the grid's analysis years.
    Non-converged cells are marked invalid and excluded from the optimum.
    """
    base, _ = build_graph(articles, edges, policy)
    return sweep_graph(
        base, grid, config=config, threads=threads, norm=norm, cell_workers=cell_workers
    )


def sweep_graph(
    base: CitationGraph,
    grid: SweepGrid,
    *,
    config: AspConfig | None = None,
    threads: int = 0,
    norm: str = "l1",
    cell_workers: int = 1,
) -> SweepResult:
    """Sweep over an already-built graph (see :func:`run_sweep`)."""
    template = config or AspConfig()
    years = _grid_years(base, grid)
    nd, nw, ny = len(grid.d_values), len(grid.w_values), len(years)
    per_year = np.full((nd, nw, ny), np.nan)
    valid = np.zeros((nd, nw), dtype=bool)

    windowed = {w: filter_window(base, w) for w in sorted(set(grid.w_values))}

    def solve_cell(cell: tuple[int, int]) -> tuple[int, int, np.ndarray | None]:
        di, wi = cell
        cfg = replace(template, d=grid.d_values[di])
        result = compute_asp(windowed[grid.w_values[wi]], cfg, threads=threads)
        if not result.converged:
            return di, wi, None
        devs = np.array(
            [
                subject_deviation(result.values, base, year, norm=norm)
                for year in years
            ]
        )
        return di, wi, devs

    cells = [(di, wi) for di in range(nd) for wi in range(nw)]
    if cell_workers > 1:
        with ThreadPoolExecutor(max_workers=cell_workers) as pool:
            outcomes = list(pool.map(solve_cell, cells))
    else:
        outcomes = [solve_cell(c) for c in cells]
    for di, wi, devs in outcomes:
        if devs is not None:
            per_year[di, wi, :] = devs
            valid[di, wi] = True

    deviation = per_year.sum(axis=2)
    deviation[~valid] = np.nan
    result = SweepResult(
        d_values=grid.d_values,
        w_values=grid.w_values,
        years=years,
        deviation=deviation,
        per_year_deviation=per_year,
        valid=valid,
        optimum=None,
    )
    if valid.any():
        result = replace(result, optimum=select_optimal(result))
    return result


def select_optimal(sweep: SweepResult) -> tuple[float, int]:
    """Argmin of total deviation over valid cells, with the declared tie-break."""
    cells = [
        (di, wi)
        for di in range(len(sweep.d_values))
        for wi in range(len(sweep.w_values))
        if sweep.valid[di, wi]
    ]
    if not cells:
        raise ValueError("no valid sweep cells to select from")
    best_dev = min(sweep.deviation[di, wi] for di, wi in cells)
    tied = [(di, wi) for di, wi in cells if sweep.deviation[di, wi] == best_dev]
    di, wi = min(
        tied,
        key=lambda c: (
            -sweep.w_values[c[1]],
            abs(sweep.d_values[c[0]] - 0.5),
            sweep.d_values[c[0]],
        ),
    )
    return sweep.d_values[di], sweep.w_values[wi]


def _grid_years(graph: CitationGraph, grid: SweepGrid) -> tuple[int, ...]:
    if grid.years is not None:
        return tuple(range(grid.years[0], grid.years[1] + 1))
    if graph.n == 0:
        return ()
    return tuple(range(int(graph.node_year.min()), int(graph.node_year.max()) + 1))
