import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from prestige import (
    ArticleRecord,
    PreprocessPolicy,
    RawEdge,
    build_graph,
    graph_from_arrays,
)

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

KEEP_ALL = PreprocessPolicy(drop_no_subject=False, drop_no_reference=False)


def make_graph(nodes, edges, policy=KEEP_ALL):
    """Graph from (id, year[, subjects]) tuples and (citing_id, cited_id) pairs."""
    articles = []
    for node in nodes:
        if len(node) == 2:
            node = (*node, ("s0",))
        article_id, year, subjects = node
        articles.append(ArticleRecord(article_id, year, tuple(subjects)))
    raw = [RawEdge(a, b) for a, b in edges]
    graph, report = build_graph(articles, raw, policy)
    return graph, report


def random_temporal_graph(rng, n, mean_degree=4.0, n_years=8, multi_subject=False):
    """Random graph whose edges respect publication order; same-year pairs may
    form cycles."""
    years = np.sort(rng.integers(2000, 2000 + n_years, size=n)).astype(np.int32)
    m = int(mean_degree * n)
    a = rng.integers(0, n, size=m).astype(np.int32)
    b = rng.integers(0, n, size=m).astype(np.int32)
    keep = a != b
    a, b = a[keep], b[keep]
    swap = years[a] < years[b]
    citing = np.where(swap, b, a)
    cited = np.where(swap, a, b)
    return _assemble_random(rng, years, citing, cited, multi_subject)


def random_dag_graph(rng, n, mean_degree=4.0, n_years=8):
    """Random acyclic graph: edges always point to a strictly smaller index."""
    years = np.sort(rng.integers(2000, 2000 + n_years, size=n)).astype(np.int32)
    m = int(mean_degree * n)
    a = rng.integers(0, n, size=m).astype(np.int32)
    b = rng.integers(0, n, size=m).astype(np.int32)
    keep = a != b
    a, b = a[keep], b[keep]
    citing = np.maximum(a, b)
    cited = np.minimum(a, b)
    return _assemble_random(rng, years, citing, cited, multi_subject=False)


def _assemble_random(rng, years, citing, cited, multi_subject):
    n = years.size
    ids = np.array([f"N{i:06d}" for i in range(n)], dtype=object)
    labels = ("sa", "sb", "sc", "sd")
    if multi_subject:
        sizes = rng.integers(1, 4, size=n)
        rows = [
            np.sort(rng.choice(len(labels), size=k, replace=False)) for k in sizes
        ]
        subj_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(sizes, out=subj_indptr[1:])
        subj_indices = np.concatenate(rows).astype(np.int32) if rows else np.empty(0, np.int32)
    else:
        subj_indptr = np.arange(n + 1, dtype=np.int64)
        subj_indices = rng.integers(0, len(labels), size=n).astype(np.int32)
    journals = np.array([f"J{i % 7}" for i in range(n)], dtype=object)
    return graph_from_arrays(
        ids, years, subj_indptr, subj_indices, labels, journals, citing, cited
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
