"""Damped prestige fixed point solved by parallel Jacobi iteration.

Each article starts with one unit of prestige; every iteration redistributes
a fraction ``d`` of each article's prestige evenly over its references and
restores the constant ``1 - d``.  The sweep parallelizes over destination
nodes, with each node's incoming contributions accumulated sequentially in
CSR order, so results are bit-identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .graph import CitationGraph, topological_order


class GraphCycleError(ValueError):
    """An operation that requires an acyclic graph met a cycle."""


@dataclass(frozen=True)
class AspConfig:
    """Solver parameters.

    ``d`` is the damping factor in (0, 1): the share of prestige passed on to
    references.  ``d = 1`` is forbidden (the iteration would drain all
    prestige toward the oldest articles).  ``epsilon`` bounds the max-norm
    change between iterations at convergence.
    """

    d: float = 0.5
    epsilon: float = 0.01
    max_iterations: int = 100
    deterministic: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.d < 1.0:
            raise ValueError(f"damping factor must satisfy 0 < d < 1, got {self.d}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class AspResult:
    """Converged (or cut-off) prestige vector plus convergence diagnostics."""

    values: np.ndarray
    iterations: int
    residuals: tuple[float, ...]
    converged: bool

    @property
    def sum_ratio(self) -> float:
        """Total prestige divided by node count; drifts below 1 with danglers."""
        n = self.values.size
        return float(self.values.sum() / n) if n else 0.0


def compute_asp(
    graph: CitationGraph,
    config: AspConfig | None = None,
    *,
    threads: int = 0,
) -> AspResult:
    """Solve the prestige fixed point by Jacobi iteration from all-ones.

    Nodes with no references emit nothing (no redistribution of dangling
    mass), so an article with zero incoming citations sits exactly at the
    ``1 - d`` floor.  ``threads = 0`` keeps the current worker count; any
    positive count is clamped to the process maximum.  Non-convergence within
    ``max_iterations`` is reported via ``converged=False``, not raised.
    """
    config = config or AspConfig()
    if threads < 0:
        raise ValueError("threads must be non-negative")
    n = graph.n
    if n == 0:
        empty = np.empty(0)
        empty.flags.writeable = False
        return AspResult(empty, 0, (), True)

    inv_m = np.zeros(n)
    referencing = graph.out_degree > 0
    inv_m[referencing] = 1.0 / graph.out_degree[referencing]
    sweep = _jacobi_sweep if config.deterministic else _jacobi_sweep_reassoc

    prev = np.ones(n)
    nxt = np.empty(n)
    scaled = np.empty(n)
    residuals: list[float] = []
    converged = False
    iterations = 0
    old_threads = numba.get_num_threads()
    if threads:
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    try:
        for k in range(1, config.max_iterations + 1):
            np.multiply(prev, inv_m, out=scaled)
            sweep(graph.in_indptr, graph.in_indices, scaled, config.d, nxt)
            res = float(np.max(np.abs(nxt - prev)))
            residuals.append(res)
            prev, nxt = nxt, prev
            iterations = k
            if res < config.epsilon:
                converged = True
                break
    finally:
        numba.set_num_threads(old_threads)

    values = prev.copy()
    values.flags.writeable = False
    return AspResult(values, iterations, tuple(residuals), converged)


def compute_asp_dag_oracle(graph: CitationGraph, d: float) -> np.ndarray:
    """Exact fixed point on an acyclic graph, one pass in topological order.

    Visiting citers before the articles they cite makes every value final the
    moment it is read, so no iteration is needed.  Raises
    :class:`GraphCycleError` on cyclic graphs.
    """
    if not 0.0 < d < 1.0:
        raise ValueError(f"damping factor must satisfy 0 < d < 1, got {d}")
    topo = topological_order(graph)
    if not topo.is_dag:
        assert topo.cycle_nodes is not None
        raise GraphCycleError(
            f"graph is cyclic: {topo.cycle_nodes.size} nodes lie on cycles"
        )
    n = graph.n
    inv_m = np.zeros(n)
    referencing = graph.out_degree > 0
    inv_m[referencing] = 1.0 / graph.out_degree[referencing]
    values = np.full(n, 1.0 - d)
    if n:
        _dag_pass(topo.order, graph.out_indptr, graph.out_indices, inv_m, d, values)
    return values


def compute_asp_dense_oracle(
    graph: CitationGraph, config: AspConfig | None = None
) -> np.ndarray:
    """Reference solution via the materialized dense operator; tests only.

    Iterates x -> (1-d)*1 + d*(L M^-1) x on a dense matrix down to a 1e-12
    max-norm residual.  Guarded to small graphs.
    """
    config = config or AspConfig()
    n = graph.n
    if n > 2000:
        raise ValueError(f"dense oracle limited to 2000 nodes, got {n}")
    if n == 0:
        return np.empty(0)
    citing, cited = graph.edge_arrays()
    inv_m = np.zeros(n)
    referencing = graph.out_degree > 0
    inv_m[referencing] = 1.0 / graph.out_degree[referencing]
    operator = np.zeros((n, n))
    np.add.at(operator, (cited, citing), config.d * inv_m[citing])
    base = 1.0 - config.d
    x = np.ones(n)
    for _ in range(200_000):
        x_new = base + operator @ x
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta < 1e-12:
            return x
    raise RuntimeError("dense oracle did not reach 1e-12 residual")


def residual(prev: np.ndarray, new: np.ndarray) -> float:
    """Max-norm difference between consecutive iterates."""
    prev = np.asarray(prev, dtype=float)
    new = np.asarray(new, dtype=float)
    if prev.shape != new.shape:
        raise ValueError(f"length mismatch: {prev.shape} vs {new.shape}")
    if prev.size == 0:
        return 0.0
    return float(np.max(np.abs(new - prev)))


@njit(parallel=True, cache=True)
def _jacobi_sweep(in_indptr, in_indices, scaled, d, out):
    base = 1.0 - d
    for i in prange(in_indptr.size - 1):
        acc = 0.0
        for k in range(in_indptr[i], in_indptr[i + 1]):
            acc += scaled[in_indices[k]]
        out[i] = base + d * acc


@njit(parallel=True, fastmath=True, cache=True)
def _jacobi_sweep_reassoc(in_indptr, in_indices, scaled, d, out):
    # fastmath may vectorize and reorder the per-row sums
    base = 1.0 - d
    for i in prange(in_indptr.size - 1):
        acc = 0.0
        for k in range(in_indptr[i], in_indptr[i + 1]):
            acc += scaled[in_indices[k]]
        out[i] = base + d * acc


@njit(cache=True)
def _dag_pass(order, out_indptr, out_indices, inv_m, d, values):
    for t in range(order.size):
        j = order[t]
        share = d * values[j] * inv_m[j]
        for k in range(out_indptr[j], out_indptr[j + 1]):
            values[out_indices[k]] += share
