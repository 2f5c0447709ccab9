"""Article/edge file ingestion, synthetic corpus generation, and report tables."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

SUBJECT_SEP = ";"
ARTICLE_HEADER = ("id", "year", "subjects", "journal", "n_authors", "n_refs")


class ParseError(ValueError):
    """Malformed input data; the message carries a 1-based line number."""


@dataclass(frozen=True)
class ArticleRecord:
    """One publication with the attributes the analytics need."""

    article_id: str
    year: int
    subjects: tuple[str, ...] = ()
    journal_id: str | None = None
    n_coauthors: int = 0
    n_references_declared: int = 0


@dataclass(frozen=True)
class RawEdge:
    """One reference link: ``citing_id`` cites ``cited_id``."""

    citing_id: str
    cited_id: str


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic citation corpus generator.

    ``attachment_exponent`` steers how strongly popular articles keep
    attracting new citations: 0 gives uniform target choice, 1 gives linear
    preferential attachment (heavy-tailed in-degrees).
    """

    n_articles: int
    year_range: tuple[int, int] = (1990, 2015)
    n_subjects: int = 10
    mean_out_degree: float = 8.0
    attachment_exponent: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_articles <= 0:
            raise ValueError(f"n_articles must be positive, got {self.n_articles}")
        lo, hi = self.year_range
        if lo > hi:
            raise ValueError(f"empty year_range {self.year_range}")
        if self.n_subjects <= 0:
            raise ValueError(f"n_subjects must be positive, got {self.n_subjects}")
        if not 0 < self.mean_out_degree < self.n_articles:
            raise ValueError(
                f"mean_out_degree must be in (0, n_articles), got {self.mean_out_degree}"
            )
        if self.attachment_exponent < 0:
            raise ValueError("attachment_exponent must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def parse_articles(
    stream: Iterable[str],
    delimiter: str = "\t",
    year_range: tuple[int, int] = (1000, 3000),
) -> list[ArticleRecord]:
    """Parse delimiter-separated article rows (header row required).

    The header must name at least ``id`` and ``year``; the remaining canonical
    columns (``subjects``, ``journal``, ``n_authors``, ``n_refs``) are picked
    up when present and any unknown columns are ignored.  Subjects are
    ``;``-separated within their field.  Malformed rows and duplicate ids
    raise :class:`ParseError` naming the offending line.
    """
    reader = csv.reader(stream, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: missing header row") from None
    columns = [c.strip().lower() for c in header]
    col = {name: i for i, name in enumerate(columns)}
    for required in ("id", "year"):
        if required not in col:
            raise ParseError(f"line 1: header lacks required column {required!r}")

    lo, hi = year_range
    records: list[ArticleRecord] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(columns):
            raise ParseError(
                f"line {lineno}: expected {len(columns)} fields, got {len(row)}"
            )
        article_id = row[col["id"]].strip()
        if not article_id:
            raise ParseError(f"line {lineno}: empty article id")
        if article_id in seen:
            raise ParseError(f"line {lineno}: duplicate article id {article_id!r}")
        seen.add(article_id)
        year = _int_field(row[col["year"]], "year", lineno)
        if not lo <= year <= hi:
            raise ParseError(f"line {lineno}: year {year} outside [{lo}, {hi}]")
        subjects: tuple[str, ...] = ()
        if "subjects" in col:
            raw = row[col["subjects"]].strip()
            subjects = tuple(s.strip() for s in raw.split(SUBJECT_SEP) if s.strip())
        journal = None
        if "journal" in col:
            journal = row[col["journal"]].strip() or None
        n_authors = _int_field(row[col["n_authors"]], "n_authors", lineno) if "n_authors" in col else 0
        n_refs = _int_field(row[col["n_refs"]], "n_refs", lineno) if "n_refs" in col else 0
        if n_authors < 0 or n_refs < 0:
            raise ParseError(f"line {lineno}: negative count field")
        records.append(
            ArticleRecord(article_id, year, subjects, journal, n_authors, n_refs)
        )
    return records


def parse_edges(stream: Iterable[str], delimiter: str = "\t") -> list[RawEdge]:
    """Parse two-column (citing_id, cited_id) rows; no header, duplicates kept."""
    edges: list[RawEdge] = []
    reader = csv.reader(stream, delimiter=delimiter)
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"line {lineno}: expected 2 fields, got {len(row)}")
        citing, cited = row[0].strip(), row[1].strip()
        if not citing or not cited:
            raise ParseError(f"line {lineno}: empty article id in edge")
        edges.append(RawEdge(citing, cited))
    return edges


def read_articles(path: str | Path, delimiter: str = "\t") -> list[ArticleRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_articles(fh, delimiter=delimiter)


def read_edges(path: str | Path, delimiter: str = "\t") -> list[RawEdge]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_edges(fh, delimiter=delimiter)


def write_table(
    rows: Sequence[Mapping[str, object]],
    path: str | Path,
    format: str = "csv",
    *,
    delimiter: str = ",",
    columns: Sequence[str] | None = None,
) -> None:
    """Write a rectangular table atomically (temp file + rename).

    CSV output uses RFC-style quoting; JSON output is an array of objects.
    ``None`` values become empty CSV fields / JSON nulls.  All rows must share
    the same column set.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"unknown table format {format!r}")
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    colset = tuple(columns)
    for i, row in enumerate(rows):
        if tuple(row.keys()) != colset:
            raise ValueError(f"row {i} columns {tuple(row.keys())} != {colset}")

    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            if format == "csv":
                writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
                if colset:
                    writer.writerow(colset)
                for row in rows:
                    writer.writerow(["" if row[c] is None else _plain(row[c]) for c in colset])
            else:
                json.dump([{c: _plain(row[c]) for c in colset} for row in rows], fh)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def articles_to_rows(records: Sequence[ArticleRecord]) -> list[dict[str, object]]:
    """Serialize records into the canonical article-table column layout."""
    return [
        {
            "id": r.article_id,
            "year": r.year,
            "subjects": SUBJECT_SEP.join(r.subjects),
            "journal": r.journal_id or "",
            "n_authors": r.n_coauthors,
            "n_refs": r.n_references_declared,
        }
        for r in records
    ]


def edges_to_rows(edges: Sequence[RawEdge]) -> list[dict[str, object]]:
    return [{"citing_id": e.citing_id, "cited_id": e.cited_id} for e in edges]


def write_edges(edges: Sequence[RawEdge], path: str | Path, delimiter: str = "\t") -> None:
    """Write the two-column headerless edge list atomically."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            for e in edges:
                writer.writerow([e.citing_id, e.cited_id])
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _plain(value: object) -> object:
    if isinstance(value, np.generic):
        return value.item()
    return value


def _int_field(text: str, name: str, lineno: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"line {lineno}: bad integer for {name!r}: {text!r}") from None


# --- synthetic corpus -------------------------------------------------------


@dataclass(frozen=True)
class SyntheticArrays:
    """Array form of a synthetic corpus; index i is article i in id order.

    Years are ascending with the index, so every edge points from a later (or
    equal-year) index to a strictly smaller index.
    """

    years: np.ndarray
    subject_ids: np.ndarray
    journal_ids: np.ndarray
    n_coauthors: np.ndarray
    citing: np.ndarray
    cited: np.ndarray

    @property
    def n(self) -> int:
        return self.years.size

    def article_id(self, i: int) -> str:
        width = len(str(self.n - 1)) if self.n > 1 else 1
        return f"S{i:0{width}d}"

    def subject_label(self, s: int) -> str:
        return f"subj{s:03d}"

    def journal_label(self, j: int) -> str:
        return f"J{j:05d}"


def synthesize_arrays(spec: SyntheticSpec) -> SyntheticArrays:
    """Generate corpus arrays deterministically from the spec seed.

    Articles are laid out in chronological index order.  Article i draws a
    Poisson(mean_out_degree) number of references (capped at i) among articles
    0..i-1, each target chosen with probability proportional to
    (1 + in_degree)^attachment_exponent at draw time.  A reference may repeat
    within one article with small probability; preprocessing merges such
    parallel edges.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_articles
    lo, hi = spec.year_range
    years = np.sort(rng.integers(lo, hi + 1, size=n)).astype(np.int32)
    subject_ids = rng.integers(0, spec.n_subjects, size=n).astype(np.int32)
    n_journals = max(1, n // 200)
    journal_ids = rng.integers(0, n_journals, size=n).astype(np.int32)
    n_coauthors = (1 + rng.poisson(3.0, size=n)).astype(np.int32)

    counts = rng.poisson(spec.mean_out_degree, size=n)
    counts = np.minimum(counts, np.arange(n, dtype=np.int64)).astype(np.int64)
    uniforms = rng.random(int(counts.sum()))
    cited = _sample_targets(counts, uniforms, float(spec.attachment_exponent), n)
    citing = np.repeat(np.arange(n, dtype=np.int32), counts)
    return SyntheticArrays(years, subject_ids, journal_ids, n_coauthors, citing, cited)


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[ArticleRecord], list[RawEdge]]:
    """Generate a synthetic corpus as (articles, edges), pure in the spec."""
    arrays = synthesize_arrays(spec)
    ids = [arrays.article_id(i) for i in range(arrays.n)]
    out_counts = np.bincount(arrays.citing, minlength=arrays.n)
    articles = [
        ArticleRecord(
            article_id=ids[i],
            year=int(arrays.years[i]),
            subjects=(arrays.subject_label(int(arrays.subject_ids[i])),),
            journal_id=arrays.journal_label(int(arrays.journal_ids[i])),
            n_coauthors=int(arrays.n_coauthors[i]),
            n_references_declared=int(out_counts[i]),
        )
        for i in range(arrays.n)
    ]
    edges = [
        RawEdge(ids[int(c)], ids[int(t)])
        for c, t in zip(arrays.citing.tolist(), arrays.cited.tolist())
    ]
    return articles, edges


@njit(cache=True)
def _fenwick_add(tree: np.ndarray, i: int, delta: float) -> None:
    j = i + 1
    while j < tree.size:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True)
def _fenwick_total(tree: np.ndarray) -> float:
    s = 0.0
    j = tree.size - 1
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(cache=True)
def _fenwick_search(tree: np.ndarray, r: float, top_bit: int) -> int:
    # smallest 0-based index whose prefix sum exceeds r
    idx = 0
    bit = top_bit
    while bit > 0:
        nxt = idx + bit
        if nxt < tree.size and tree[nxt] <= r:
            idx = nxt
            r -= tree[nxt]
        bit >>= 1
    return idx


@njit(cache=True)
def _sample_targets(counts: np.ndarray, uniforms: np.ndarray, exponent: float, n: int) -> np.ndarray:
    tree = np.zeros(n + 1, dtype=np.float64)
    in_degree = np.zeros(n, dtype=np.int64)
    out = np.empty(uniforms.size, dtype=np.int32)
    top_bit = 1
    while top_bit * 2 <= n:
        top_bit *= 2
    pos = 0
    for i in range(n):
        for _ in range(counts[i]):
            # exact tree total keeps u*total strictly inside the weight mass
            total = _fenwick_total(tree)
            t = _fenwick_search(tree, uniforms[pos] * total, top_bit)
            out[pos] = t
            pos += 1
            old = (1.0 + in_degree[t]) ** exponent
            in_degree[t] += 1
            new = (1.0 + in_degree[t]) ** exponent
            _fenwick_add(tree, t, new - old)
        # article i only becomes citable once its own references are drawn
        _fenwick_add(tree, i, (1.0 + in_degree[i]) ** exponent)
    return out
