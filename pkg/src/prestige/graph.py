"""Temporally consistent sparse citation graph and windowed citation counts."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .corpus_io import ArticleRecord, RawEdge

_SNAPSHOT_MAGIC = b"PRSG"
_SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class PreprocessPolicy:
    """Which anomalies to drop while building the graph.

    ``corpus_years`` bounds the node set used for computation; the narrower
    ``analysis_years`` only masks reporting, never the solve itself.
    """

    drop_no_subject: bool = True
    drop_no_reference: bool = True
    drop_future_refs: bool = True
    dedup_parallel_edges: bool = True
    analysis_years: tuple[int, int] | None = None
    corpus_years: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        for name in ("analysis_years", "corpus_years"):
            interval = getattr(self, name)
            if interval is not None and interval[0] > interval[1]:
                raise ValueError(f"{name} interval {interval} is empty")
        if self.analysis_years is not None and self.corpus_years is not None:
            if not (
                self.corpus_years[0] <= self.analysis_years[0]
                and self.analysis_years[1] <= self.corpus_years[1]
            ):
                raise ValueError(
                    f"analysis_years {self.analysis_years} not contained in "
                    f"corpus_years {self.corpus_years}"
                )

    def analysis_mask(self, years: np.ndarray) -> np.ndarray:
        if self.analysis_years is None:
            return np.ones(years.size, dtype=bool)
        lo, hi = self.analysis_years
        return (years >= lo) & (years <= hi)


@dataclass(frozen=True)
class PreprocessReport:
    """Counts of everything the build dropped or merged."""

    articles_dropped_no_subject: int = 0
    articles_dropped_no_reference: int = 0
    articles_dropped_outside_years: int = 0
    edges_dropped_dangling: int = 0
    edges_dropped_future: int = 0
    self_loops_removed: int = 0
    parallel_edges_merged: int = 0
    articles_kept: int = 0
    edges_kept: int = 0


@dataclass(frozen=True, eq=False)
class CitationGraph:
    """Immutable double-CSR citation graph over a contiguous node index.

    ``out`` rows list the references of a node (row j holds the nodes j
    cites); ``in`` rows list the citers.  ``out_degree[j]`` is the reference
    count m_j that normalizes j's outgoing prestige flow.  Node indices are
    assigned by sorted article id, so identical inputs always produce an
    identical graph.
    """

    node_ids: np.ndarray
    node_year: np.ndarray
    subj_indptr: np.ndarray
    subj_indices: np.ndarray
    subject_labels: tuple[str, ...]
    node_journal: np.ndarray
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray
    out_degree: np.ndarray

    @property
    def n(self) -> int:
        return self.node_year.size

    @property
    def n_edges(self) -> int:
        return self.out_indices.size

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Edges as (citing, cited) index arrays in canonical order."""
        citing = np.repeat(
            np.arange(self.n, dtype=np.int32), np.diff(self.out_indptr)
        )
        return citing, self.out_indices.copy()

    def subjects_of(self, i: int) -> tuple[str, ...]:
        row = self.subj_indices[self.subj_indptr[i] : self.subj_indptr[i + 1]]
        return tuple(self.subject_labels[s] for s in row)

    def subject_lists(self) -> list[tuple[str, ...]]:
        return [self.subjects_of(i) for i in range(self.n)]


def build_graph(
    articles: Sequence[ArticleRecord],
    edges: Sequence[RawEdge],
    policy: PreprocessPolicy | None = None,
) -> tuple[CitationGraph, PreprocessReport]:
    """Build the preprocessed graph; anomalies become report counts, not errors."""
    policy = policy or PreprocessPolicy()
    ids = [a.article_id for a in articles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate article ids in corpus")

    referencing: set[str] = {e.citing_id for e in edges} if policy.drop_no_reference else set()
    dropped_subject = dropped_reference = dropped_years = 0
    kept: list[ArticleRecord] = []
    for a in articles:
        if policy.corpus_years is not None and not (
            policy.corpus_years[0] <= a.year <= policy.corpus_years[1]
        ):
            dropped_years += 1
            continue
        if policy.drop_no_subject and not a.subjects:
            dropped_subject += 1
            continue
        if policy.drop_no_reference and a.article_id not in referencing:
            dropped_reference += 1
            continue
        kept.append(a)
    kept.sort(key=lambda a: a.article_id)
    index = {a.article_id: i for i, a in enumerate(kept)}
    n = len(kept)

    years = np.fromiter((a.year for a in kept), dtype=np.int32, count=n)
    dangling = self_loops = future = 0
    citing_list: list[int] = []
    cited_list: list[int] = []
    for e in edges:
        j = index.get(e.citing_id)
        i = index.get(e.cited_id)
        if j is None or i is None:
            dangling += 1
            continue
        if i == j:
            self_loops += 1
            continue
        if policy.drop_future_refs and years[j] < years[i]:
            future += 1
            continue
        citing_list.append(j)
        cited_list.append(i)
    citing = np.asarray(citing_list, dtype=np.int32)
    cited = np.asarray(cited_list, dtype=np.int32)

    # repeated subject labels on one article collapse to the first occurrence
    subj_lists = [list(dict.fromkeys(a.subjects)) for a in kept]
    labels = sorted({s for subj in subj_lists for s in subj})
    label_id = {s: k for k, s in enumerate(labels)}
    subj_counts = np.fromiter((len(s) for s in subj_lists), dtype=np.int64, count=n)
    subj_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(subj_counts, out=subj_indptr[1:])
    subj_indices = np.fromiter(
        (label_id[s] for subj in subj_lists for s in subj),
        dtype=np.int32,
        count=int(subj_indptr[-1]),
    )
    journals = np.array([a.journal_id for a in kept], dtype=object)
    node_ids = np.array([a.article_id for a in kept], dtype=object)

    graph, merged = _assemble(
        node_ids,
        years,
        subj_indptr,
        subj_indices,
        tuple(labels),
        journals,
        citing,
        cited,
        dedup=policy.dedup_parallel_edges,
    )
    report = PreprocessReport(
        articles_dropped_no_subject=dropped_subject,
        articles_dropped_no_reference=dropped_reference,
        articles_dropped_outside_years=dropped_years,
        edges_dropped_dangling=dangling,
        edges_dropped_future=future,
        self_loops_removed=self_loops,
        parallel_edges_merged=merged,
        articles_kept=n,
        edges_kept=graph.n_edges,
    )
    return graph, report


def graph_from_arrays(
    node_ids: np.ndarray,
    years: np.ndarray,
    subj_indptr: np.ndarray,
    subj_indices: np.ndarray,
    subject_labels: tuple[str, ...],
    journals: np.ndarray,
    citing: np.ndarray,
    cited: np.ndarray,
    dedup: bool = True,
) -> CitationGraph:
    """Assemble a graph from pre-validated arrays (no self-loops, valid indices).

    This is the scalable entry point for corpora too large for per-record
    objects; :func:`build_graph` routes through the same assembly.
    """
    graph, _ = _assemble(
        np.asarray(node_ids, dtype=object),
        np.asarray(years, dtype=np.int32),
        np.asarray(subj_indptr, dtype=np.int64),
        np.asarray(subj_indices, dtype=np.int32),
        subject_labels,
        np.asarray(journals, dtype=object),
        np.asarray(citing, dtype=np.int32),
        np.asarray(cited, dtype=np.int32),
        dedup=dedup,
    )
    return graph


def _assemble(
    node_ids: np.ndarray,
    years: np.ndarray,
    subj_indptr: np.ndarray,
    subj_indices: np.ndarray,
    subject_labels: tuple[str, ...],
    journals: np.ndarray,
    citing: np.ndarray,
    cited: np.ndarray,
    dedup: bool,
) -> tuple[CitationGraph, int]:
    n = years.size
    merged = 0
    if citing.size:
        order = np.lexsort((cited, citing))
        citing = citing[order]
        cited = cited[order]
        if dedup:
            first = np.ones(citing.size, dtype=bool)
            first[1:] = (citing[1:] != citing[:-1]) | (cited[1:] != cited[:-1])
            merged = int(citing.size - first.sum())
            citing = citing[first]
            cited = cited[first]
    out_indptr, out_indices = _csr(n, citing, cited)
    in_indptr, in_indices = _csr(n, cited, citing)
    out_degree = np.diff(out_indptr)
    graph = CitationGraph(
        node_ids=node_ids,
        node_year=years,
        subj_indptr=subj_indptr,
        subj_indices=subj_indices,
        subject_labels=subject_labels,
        node_journal=journals,
        out_indptr=out_indptr,
        out_indices=out_indices,
        in_indptr=in_indptr,
        in_indices=in_indices,
        out_degree=out_degree,
    )
    for arr in (
        graph.node_year,
        graph.subj_indptr,
        graph.subj_indices,
        graph.out_indptr,
        graph.out_indices,
        graph.in_indptr,
        graph.in_indices,
        graph.out_degree,
    ):
        arr.flags.writeable = False
    return graph, merged


def _csr(n: int, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(n + 1, dtype=np.int64)
    if rows.size:
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        order = np.argsort(rows, kind="stable")
        indices = np.ascontiguousarray(cols[order], dtype=np.int32)
    else:
        indices = np.empty(0, dtype=np.int32)
    return indptr, indices


def filter_window(graph: CitationGraph, w: int) -> CitationGraph:
    """Keep only edges whose citation lag is within [0, w] years."""
    if w < 1:
        raise ValueError(f"citing window must be >= 1, got {w}")
    citing, cited = graph.edge_arrays()
    lag = graph.node_year[citing].astype(np.int64) - graph.node_year[cited]
    keep = (lag >= 0) & (lag <= w)
    graph2, _ = _assemble(
        graph.node_ids,
        graph.node_year,
        graph.subj_indptr,
        graph.subj_indices,
        graph.subject_labels,
        graph.node_journal,
        citing[keep],
        cited[keep],
        dedup=False,
    )
    return graph2


def citation_counts(graph: CitationGraph, w: int) -> np.ndarray:
    """Per-node count of incoming citations with lag in [0, w]."""
    if w < 1:
        raise ValueError(f"citing window must be >= 1, got {w}")
    citing, cited = graph.edge_arrays()
    if citing.size == 0:
        return np.zeros(graph.n, dtype=np.int64)
    lag = graph.node_year[citing].astype(np.int64) - graph.node_year[cited]
    keep = (lag >= 0) & (lag <= w)
    return np.bincount(cited[keep], minlength=graph.n).astype(np.int64)


@dataclass(frozen=True)
class TopoResult:
    """Either a citers-first node ordering or the set of nodes on cycles."""

    order: np.ndarray | None
    cycle_nodes: np.ndarray | None

    @property
    def is_dag(self) -> bool:
        return self.order is not None


def topological_order(graph: CitationGraph) -> TopoResult:
    """Order nodes so every article precedes its references, or report cycles.

    Same-year mutual citations are legal and surface here as cycle nodes
    rather than as an error.
    """
    citer_count = np.diff(graph.in_indptr).astype(np.int64)
    order, processed = _kahn(graph.out_indptr, graph.out_indices, citer_count)
    if processed == graph.n:
        return TopoResult(order=order, cycle_nodes=None)
    mat = csr_matrix(
        (
            np.ones(graph.n_edges, dtype=np.int8),
            graph.out_indices,
            graph.out_indptr,
        ),
        shape=(graph.n, graph.n),
    )
    _, labels = connected_components(mat, directed=True, connection="strong")
    sizes = np.bincount(labels)
    cycle_nodes = np.flatnonzero(sizes[labels] >= 2)
    return TopoResult(order=None, cycle_nodes=cycle_nodes)


@njit(cache=True)
def _kahn(out_indptr: np.ndarray, out_indices: np.ndarray, citer_count: np.ndarray):
    n = citer_count.size
    order = np.empty(n, dtype=np.int64)
    tail = 0
    for i in range(n):
        if citer_count[i] == 0:
            order[tail] = i
            tail += 1
    head = 0
    while head < tail:
        j = order[head]
        head += 1
        for k in range(out_indptr[j], out_indptr[j + 1]):
            i = out_indices[k]
            citer_count[i] -= 1
            if citer_count[i] == 0:
                order[tail] = i
                tail += 1
    return order, tail


def gather_rows(indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Concatenate CSR rows ``rows`` into one flat index array."""
    lens = (indptr[rows + 1] - indptr[rows]).astype(np.int64)
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    cum = np.cumsum(lens)
    flat_pos = np.arange(total, dtype=np.int64) - np.repeat(cum - lens, lens)
    return indices[flat_pos + np.repeat(indptr[rows], lens)]


# --- binary snapshot --------------------------------------------------------
#
# Layout: magic "PRSG", u16 version, u64 header length, JSON header, then the
# raw little-endian array payloads in header order.  Strings (ids, vocab) ride
# in the JSON header / newline-joined UTF-8 blobs.


def save_graph(graph: CitationGraph, path: str | Path) -> None:
    """Write a versioned binary snapshot of the built graph."""
    journal_vocab: list[str] = sorted({j for j in graph.node_journal if j is not None})
    journal_code = {j: k for k, j in enumerate(journal_vocab)}
    journal_arr = np.fromiter(
        (journal_code.get(j, -1) for j in graph.node_journal),
        dtype=np.int32,
        count=graph.n,
    )
    ids_blob = "\n".join(str(i) for i in graph.node_ids).encode("utf-8")
    arrays = [
        ("node_year", graph.node_year.astype("<i4")),
        ("subj_indptr", graph.subj_indptr.astype("<i8")),
        ("subj_indices", graph.subj_indices.astype("<i4")),
        ("journal_codes", journal_arr.astype("<i4")),
        ("out_indptr", graph.out_indptr.astype("<i8")),
        ("out_indices", graph.out_indices.astype("<i4")),
        ("in_indptr", graph.in_indptr.astype("<i8")),
        ("in_indices", graph.in_indices.astype("<i4")),
    ]
    header = {
        "n": graph.n,
        "subject_labels": list(graph.subject_labels),
        "journal_vocab": journal_vocab,
        "ids_bytes": len(ids_blob),
        "arrays": [
            {"name": name, "dtype": arr.dtype.str, "size": int(arr.size)}
            for name, arr in arrays
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<HQ", _SNAPSHOT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(ids_blob)
        for _, arr in arrays:
            fh.write(arr.tobytes())


def load_graph(path: str | Path) -> CitationGraph:
    """Read a snapshot written by :func:`save_graph`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a graph snapshot")
        version, blob_len = struct.unpack("<HQ", fh.read(10))
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        ids_blob = fh.read(header["ids_bytes"]).decode("utf-8")
        data = {}
        for meta in header["arrays"]:
            raw = fh.read(int(meta["size"]) * np.dtype(meta["dtype"]).itemsize)
            data[meta["name"]] = np.frombuffer(raw, dtype=meta["dtype"]).copy()
    n = header["n"]
    node_ids = np.array(ids_blob.split("\n") if n else [], dtype=object)
    vocab = header["journal_vocab"]
    journals = np.array(
        [vocab[c] if c >= 0 else None for c in data["journal_codes"]], dtype=object
    )
    graph = CitationGraph(
        node_ids=node_ids,
        node_year=data["node_year"].astype(np.int32),
        subj_indptr=data["subj_indptr"].astype(np.int64),
        subj_indices=data["subj_indices"].astype(np.int32),
        subject_labels=tuple(header["subject_labels"]),
        node_journal=journals,
        out_indptr=data["out_indptr"].astype(np.int64),
        out_indices=data["out_indices"].astype(np.int32),
        in_indptr=data["in_indptr"].astype(np.int64),
        in_indices=data["in_indices"].astype(np.int32),
        out_degree=np.diff(data["out_indptr"].astype(np.int64)),
    )
    for arr in (graph.node_year, graph.out_indptr, graph.out_indices):
        arr.flags.writeable = False
    return graph
