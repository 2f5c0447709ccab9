"""Descriptive and comparative statistics over prestige scores and citation counts."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .graph import CitationGraph

COVARIATE_BINS = tuple(str(k) for k in range(11)) + ("11+",)


@dataclass(frozen=True)
class SummaryStats:
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float


@dataclass(frozen=True)
class TailIndexEstimate:
    """Pareto tail fit above the empirical threshold ``x_min``."""

    alpha: float
    x_min: float
    n_tail: int


@dataclass(frozen=True)
class IntensityMatrix:
    """Symmetric cross-citation intensity between subjects or clusters."""

    labels: tuple[str, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class ClusterMap:
    """Subject-label to cluster-label mapping supplied as configuration."""

    mapping: Mapping[str, str]

    def __post_init__(self) -> None:
        for subject, cluster in self.mapping.items():
            if not cluster:
                raise ValueError(f"subject {subject!r} maps to an empty cluster label")

    @classmethod
    def from_file(cls, path: str | Path) -> "ClusterMap":
        """Read a two-column (subject, cluster) table; comma or tab separated."""
        import csv

        mapping: dict[str, str] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            sample = fh.read(4096)
            fh.seek(0)
            delimiter = "\t" if sample.count("\t") > sample.count(",") else ","
            reader = csv.reader(fh, delimiter=delimiter)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty cluster map")
            cols = [c.strip().lower() for c in header]
            try:
                si, ci = cols.index("subject"), cols.index("cluster")
            except ValueError:
                raise ValueError(
                    f"{path}: header must name 'subject' and 'cluster' columns"
                ) from None
            for row in reader:
                if not row:
                    continue
                mapping[row[si].strip()] = row[ci].strip()
        return cls(mapping)

    def missing(self, subjects: Iterable[str]) -> list[str]:
        return sorted({s for s in subjects if s not in self.mapping})

    def resolve(self, subjects: Sequence[str]) -> str | None:
        """Single cluster for an article: majority cluster, ties broken by the
        cluster of the first listed subject that belongs to a tied cluster."""
        if not subjects:
            return None
        clusters = [self.mapping[s] for s in subjects]
        counts = Counter(clusters)
        top = max(counts.values())
        tied = {c for c, k in counts.items() if k == top}
        if len(tied) == 1:
            return next(iter(tied))
        for c in clusters:
            if c in tied:
                return c
        return clusters[0]


def summary_stats(values: np.ndarray) -> SummaryStats:
    """Six-number summary; quartiles use linear interpolation between order
    statistics."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("summary_stats requires a non-empty vector")
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    return SummaryStats(
        min=float(values.min()),
        q1=float(q1),
        median=float(median),
        mean=float(values.mean()),
        q3=float(q3),
        max=float(values.max()),
    )


def tail_index(values: np.ndarray, tail_quantile: float = 0.90) -> TailIndexEstimate:
    """Hill (conditional maximum-likelihood) Pareto tail-index estimate.

    The threshold is the empirical ``tail_quantile`` quantile; the estimate is
    n_tail / sum(log(x_i / x_min)) over the samples at or above it.
    """
    if not 0.0 < tail_quantile < 1.0:
        raise ValueError(f"tail_quantile must be in (0, 1), got {tail_quantile}")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("tail_index requires a non-empty vector")
    x_min = float(np.quantile(values, tail_quantile))
    tail = values[values >= x_min]
    if tail.size < 20:
        raise ValueError(f"too few tail samples: {tail.size} above threshold {x_min}")
    if x_min <= 0.0 or (tail <= 0.0).any():
        raise ValueError("non-positive values in tail")
    log_sum = float(np.log(tail / x_min).sum())
    if log_sum <= 0.0:
        raise ValueError("degenerate tail: all samples sit at the threshold")
    return TailIndexEstimate(alpha=tail.size / log_sum, x_min=x_min, n_tail=int(tail.size))


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Product-moment correlation; undefined (raises) for constant input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs equal-length vectors, got {x.shape}, {y.shape}")
    if x.size < 2:
        raise ValueError("pearson needs at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt((xc**2).sum()))
    sy = float(np.sqrt((yc**2).sum()))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance: correlation undefined")
    r = float((xc * yc).sum() / (sx * sy))
    return max(-1.0, min(1.0, r))


def decile_correlations(
    asp: np.ndarray,
    ncit: np.ndarray,
    groups: Sequence[str] | np.ndarray,
) -> list[dict[str, object]]:
    """Per-group decile correlations between prestige and citation counts.

    Within a group, non-cited articles are dropped, the rest are sorted by
    citation count descending (stable, so ties keep input order) and split
    into 10 near-equal bins, the remainder going to the earliest bins.  Decile
    1 holds the most-cited articles.  Bins where the correlation is undefined
    get a null entry.
    """
    asp = np.asarray(asp, dtype=float)
    ncit = np.asarray(ncit)
    labels = np.asarray(groups, dtype=object)
    if not (asp.size == ncit.size == labels.size):
        raise ValueError("asp, ncit and groups must be aligned")
    rows: list[dict[str, object]] = []
    for g in sorted(set(labels.tolist())):
        sel = np.flatnonzero((labels == g) & (ncit > 0))
        order = sel[np.argsort(-ncit[sel], kind="stable")]
        n = order.size
        base, rem = divmod(n, 10)
        start = 0
        for k in range(10):
            size = base + (1 if k < rem else 0)
            chunk = order[start : start + size]
            start += size
            r: float | None
            if size < 2:
                r = None
            else:
                try:
                    r = pearson(asp[chunk], ncit[chunk])
                except ValueError:
                    r = None
            rows.append({"group": g, "decile": k + 1, "r": r, "n": size})
    return rows


def percentile_rank(values: np.ndarray, v: float) -> int:
    """Display percentile: floor of 100 * fraction of values strictly below v."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("percentile_rank requires a non-empty vector")
    below = int(np.count_nonzero(values < v))
    return int(math.floor(100.0 * below / values.size))


def noncited_ratio(
    ncit: np.ndarray,
    groups: Sequence[str] | np.ndarray,
    years: np.ndarray,
) -> list[dict[str, object]]:
    """Share of never-cited articles per (group, year); empty cells are null."""
    ncit = np.asarray(ncit)
    labels = np.asarray(groups, dtype=object)
    years = np.asarray(years)
    if not (ncit.size == labels.size == years.size):
        raise ValueError("ncit, groups and years must be aligned")
    rows: list[dict[str, object]] = []
    for g in sorted(set(labels.tolist())):
        gmask = labels == g
        for y in sorted(set(years.tolist())):
            mask = gmask & (years == y)
            n = int(mask.sum())
            ratio = float((ncit[mask] == 0).sum() / n) if n else None
            rows.append({"group": g, "year": int(y), "ratio": ratio, "n": n})
    return rows


def cross_intensity(
    graph: CitationGraph,
    level: str = "subject",
    cluster_map: ClusterMap | None = None,
    *,
    scale: float = 1.0,
    zero_diagonal: bool = False,
) -> IntensityMatrix:
    """Symmetric cross-citation intensity matrix.

    intensity(s, t) = scale * (edges s->t + edges t->s) / (articles(s) +
    articles(t)), with every article counting fully toward each of its
    subjects (at cluster level: toward each distinct cluster of its subjects).
    """
    if level == "subject":
        mem_indptr, mem_indices = graph.subj_indptr, graph.subj_indices
        labels = graph.subject_labels
    elif level == "cluster":
        if cluster_map is None:
            raise ValueError("cluster level requires a cluster_map")
        missing = cluster_map.missing(graph.subject_labels)
        if missing:
            raise ValueError(f"cluster_map lacks subjects: {', '.join(missing)}")
        labels_list = sorted(
            {cluster_map.mapping[s] for s in graph.subject_labels}
        )
        code = {c: k for k, c in enumerate(labels_list)}
        subj_to_cluster = np.array(
            [code[cluster_map.mapping[s]] for s in graph.subject_labels],
            dtype=np.int32,
        )
        mem_lists = []
        for i in range(graph.n):
            row = graph.subj_indices[graph.subj_indptr[i] : graph.subj_indptr[i + 1]]
            mem_lists.append(np.unique(subj_to_cluster[row]))
        mem_indptr = np.zeros(graph.n + 1, dtype=np.int64)
        np.cumsum([len(m) for m in mem_lists], out=mem_indptr[1:])
        mem_indices = (
            np.concatenate(mem_lists).astype(np.int32)
            if mem_lists
            else np.empty(0, dtype=np.int32)
        )
        labels = tuple(labels_list)
    else:
        raise ValueError(f"unknown intensity level {level!r}")

    n_labels = len(labels)
    counts = _pair_counts(
        graph.out_indptr, graph.out_indices, mem_indptr, mem_indices, n_labels
    )
    n_articles = np.bincount(mem_indices, minlength=n_labels).astype(float)
    denom = n_articles[:, None] + n_articles[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.where(denom > 0, (counts + counts.T) / np.where(denom > 0, denom, 1.0), 0.0)
    matrix *= scale
    if zero_diagonal:
        np.fill_diagonal(matrix, 0.0)
    return IntensityMatrix(labels=labels, matrix=matrix)


@njit(cache=True)
def _pair_counts(out_indptr, out_indices, mem_indptr, mem_indices, n_labels):
    counts = np.zeros((n_labels, n_labels))
    for j in range(out_indptr.size - 1):
        for k in range(out_indptr[j], out_indptr[j + 1]):
            i = out_indices[k]
            for a in range(mem_indptr[j], mem_indptr[j + 1]):
                s = mem_indices[a]
                for b in range(mem_indptr[i], mem_indptr[i + 1]):
                    counts[s, mem_indices[b]] += 1.0
    return counts


_JOURNAL_STATS = ("min", "mean", "median", "max")


def journal_aggregate(
    asp: np.ndarray,
    ncit: np.ndarray,
    journal_ids: Sequence[str | None],
    grade_table: Mapping[str, tuple[str, str]],
) -> tuple[list[dict[str, object]], int]:
    """Journal-grade aggregation of per-journal summary statistics.

    For every journal, compute min/mean/median/max of each metric; then per
    grade report the range and mean of each journal-level statistic.  The
    grade table maps a journal id to its (SJR quartile, H quartile) pair;
    journal ids are matched after casefold/strip normalization.  Returns the
    rows plus the count of journals that had no grade entry.
    """
    asp = np.asarray(asp, dtype=float)
    ncit = np.asarray(ncit, dtype=float)
    grades = {_norm_journal(j): g for j, g in grade_table.items()}

    by_journal: dict[str, list[int]] = {}
    for i, j in enumerate(journal_ids):
        if j is None:
            continue
        by_journal.setdefault(_norm_journal(j), []).append(i)

    excluded = 0
    # scheme -> grade -> stat -> metric -> list of journal-level values
    pools: dict[tuple[str, str, str, str], list[float]] = {}
    for journal, idx in sorted(by_journal.items()):
        grade_pair = grades.get(journal)
        if grade_pair is None:
            excluded += 1
            continue
        rows = np.asarray(idx)
        for metric, vec in (("asp", asp[rows]), ("ncit", ncit[rows])):
            stats = {
                "min": float(vec.min()),
                "mean": float(vec.mean()),
                "median": float(np.median(vec)),
                "max": float(vec.max()),
            }
            for scheme, grade in zip(("sjr", "h"), grade_pair):
                for stat, value in stats.items():
                    pools.setdefault((scheme, grade, stat, metric), []).append(value)

    rows_out: list[dict[str, object]] = []
    for (scheme, grade, stat, metric), values in sorted(pools.items()):
        arr = np.asarray(values)
        rows_out.append(
            {
                "scheme": scheme,
                "grade": grade,
                "stat": stat,
                "metric": metric,
                "lo": float(arr.min()),
                "hi": float(arr.max()),
                "mean": float(arr.mean()),
                "n_journals": int(arr.size),
            }
        )
    return rows_out, excluded


def _norm_journal(j: str) -> str:
    return j.strip().casefold()


def covariate_association(
    asp: np.ndarray, covariate: np.ndarray
) -> dict[str, object]:
    """Correlation plus binned medians of prestige against an integer covariate."""
    asp = np.asarray(asp, dtype=float)
    covariate = np.asarray(covariate)
    if asp.size != covariate.size:
        raise ValueError("asp and covariate must be aligned")
    r = pearson(asp, covariate)
    bins: list[dict[str, object]] = []
    for label in COVARIATE_BINS:
        if label == "11+":
            mask = covariate >= 11
        else:
            mask = covariate == int(label)
        n = int(mask.sum())
        bins.append(
            {
                "bin": label,
                "median_asp": float(np.median(asp[mask])) if n else None,
                "n": n,
            }
        )
    return {"pearson_r": r, "bins": bins}


def cluster_rollup(
    values: np.ndarray,
    subjects: Sequence[Sequence[str]],
    cluster_map: ClusterMap,
    stat: str = "mean",
    years: np.ndarray | None = None,
) -> list[dict[str, object]]:
    """Per-(cluster, year) statistic with single-cluster article assignment.

    Articles go to the cluster holding most of their subjects; ties fall to
    the first listed subject's cluster.  Every subject present must be mapped.
    """
    if stat not in ("mean", "median"):
        raise ValueError(f"unknown statistic {stat!r}")
    values = np.asarray(values, dtype=float)
    if years is None:
        years = np.zeros(values.size, dtype=np.int64)
    years = np.asarray(years)
    if not (values.size == len(subjects) == years.size):
        raise ValueError("values, subjects and years must be aligned")
    missing = cluster_map.missing(s for subj in subjects for s in subj)
    if missing:
        raise ValueError(f"cluster_map lacks subjects: {', '.join(missing)}")

    assigned = np.array(
        [cluster_map.resolve(subj) for subj in subjects], dtype=object
    )
    rows: list[dict[str, object]] = []
    clusters = sorted({c for c in assigned.tolist() if c is not None})
    for cluster in clusters:
        cmask = assigned == cluster
        for y in sorted(set(years[cmask].tolist())):
            vec = values[cmask & (years == y)]
            value = float(vec.mean()) if stat == "mean" else float(np.median(vec))
            rows.append({"cluster": cluster, "year": int(y), "value": value, "n": vec.size})
    return rows
