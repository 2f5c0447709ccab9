import numpy as np
import pytest
from hypothesis import given, strategies as st

from prestige import (
    ArticleRecord,
    AspConfig,
    PreprocessPolicy,
    RawEdge,
    SweepGrid,
    SweepResult,
    build_graph,
    compute_asp,
    filter_window,
    run_sweep,
    select_optimal,
    subject_deviation,
)

from conftest import KEEP_ALL, make_graph, random_temporal_graph


def brute_force_deviation(asp, graph, year):
    per_subject = {}
    year_values = []
    for i in range(graph.n):
        if graph.node_year[i] != year:
            continue
        year_values.append(asp[i])
        for s in graph.subjects_of(i):
            per_subject.setdefault(s, []).append(asp[i])
    if not year_values:
        return 0.0
    grand = sum(year_values) / len(year_values)
    return sum(abs(sum(v) / len(v) - grand) for v in per_subject.values())


class TestSubjectDeviation:
    def test_constant_asp_gives_zero(self, rng):
        graph = random_temporal_graph(rng, 100, multi_subject=True)
        values = np.full(graph.n, 0.7)
        year = int(graph.node_year[0])
        assert subject_deviation(values, graph, year) == pytest.approx(0.0, abs=1e-12)

    def test_two_subject_arithmetic(self):
        graph, _ = make_graph(
            [("A", 2000, ("x",)), ("B", 2000, ("y",))], []
        )
        values = np.array([0.6, 0.8])
        # means 0.6 and 0.8 around a grand mean of 0.7
        assert subject_deviation(values, graph, 2000) == pytest.approx(0.2, abs=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            graph = random_temporal_graph(rng, 120, mean_degree=3.0, multi_subject=True)
            values = rng.uniform(0.5, 3.0, size=graph.n)
            year = int(rng.choice(graph.node_year))
            fast = subject_deviation(values, graph, year)
            slow = brute_force_deviation(values, graph, year)
            assert fast == pytest.approx(slow, abs=1e-12)

    def test_empty_year_warns_and_returns_zero(self, rng):
        graph = random_temporal_graph(rng, 50)
        with pytest.warns(UserWarning, match="no articles"):
            assert subject_deviation(np.ones(graph.n), graph, 1800) == 0.0

    def test_invariant_under_constant_shift(self, rng):
        graph = random_temporal_graph(rng, 150, multi_subject=True)
        values = rng.uniform(0.5, 2.0, size=graph.n)
        year = int(graph.node_year[10])
        for c in (0.5, -1.25, 100.0):
            shifted = subject_deviation(values + c, graph, year)
            assert shifted == pytest.approx(subject_deviation(values, graph, year), abs=1e-9)

    def test_invariant_under_subject_relabeling(self, rng):
        nodes = [(f"N{i}", 2000, (f"s{i % 4}",)) for i in range(40)]
        permuted = [(nid, y, (f"s{(int(s[0][1:]) + 1) % 4}",)) for nid, y, s in nodes]
        g1, _ = make_graph(nodes, [])
        g2, _ = make_graph(permuted, [])
        values = rng.uniform(0.5, 2.0, size=40)
        assert subject_deviation(values, g1, 2000) == pytest.approx(
            subject_deviation(values, g2, 2000), abs=1e-12
        )

    def test_l2_norm_variant(self):
        graph, _ = make_graph([("A", 2000, ("x",)), ("B", 2000, ("y",))], [])
        values = np.array([0.6, 0.8])
        assert subject_deviation(values, graph, 2000, norm="l2") == pytest.approx(
            np.hypot(0.1, 0.1), abs=1e-12
        )
        with pytest.raises(ValueError, match="norm"):
            subject_deviation(values, graph, 2000, norm="l3")


def small_corpus(rng, n=400, n_subjects=4):
    years = np.sort(rng.integers(2000, 2006, size=n))
    articles = [
        ArticleRecord(f"N{i:04d}", int(years[i]), (f"s{rng.integers(n_subjects)}",))
        for i in range(n)
    ]
    edges = []
    for j in range(1, n):
        for _ in range(3):
            i = int(rng.integers(0, j))
            edges.append(RawEdge(f"N{j:04d}", f"N{i:04d}"))
    return articles, edges


class TestRunSweep:
    def test_singleton_grid_equals_direct_composition(self, rng):
        articles, edges = small_corpus(rng)
        grid = SweepGrid(d_values=(0.5,), w_values=(5,), years=(2000, 2005))
        sweep = run_sweep(articles, edges, KEEP_ALL, grid)
        assert sweep.optimum == (0.5, 5)

        graph, _ = build_graph(articles, edges, KEEP_ALL)
        result = compute_asp(filter_window(graph, 5), AspConfig(d=0.5))
        direct = sum(
            subject_deviation(result.values, graph, year)
            for year in range(2000, 2006)
        )
        assert sweep.deviation[0, 0] == pytest.approx(direct, abs=1e-12)

    def test_windows_beyond_span_tie_to_larger_w(self, rng):
        # both windows exceed the corpus span, so the cells are bit-identical
        articles, edges = small_corpus(rng)
        grid = SweepGrid(d_values=(0.5,), w_values=(8, 10), years=(2000, 2005))
        sweep = run_sweep(articles, edges, KEEP_ALL, grid)
        assert sweep.deviation[0, 0] == sweep.deviation[0, 1]
        assert sweep.optimum == (0.5, 10)

    def test_non_converged_cells_excluded(self, rng):
        articles, edges = small_corpus(rng)
        grid = SweepGrid(d_values=(0.5,), w_values=(5,), years=(2000, 2005))
        sweep = run_sweep(
            articles, edges, KEEP_ALL, grid,
            config=AspConfig(max_iterations=1),
        )
        assert not sweep.valid.any()
        assert sweep.optimum is None
        with pytest.raises(ValueError, match="no valid"):
            select_optimal(sweep)

    def test_deviation_shrinks_as_damping_vanishes(self, rng):
        # one subject draws 10x the citations; with less prestige flowing
        # (d -> 0) the subject means collapse toward the common floor
        targets = [
            ArticleRecord(f"T{i:03d}", 2000, ("hot" if i < 50 else "cold",))
            for i in range(100)
        ]
        citers = [ArticleRecord(f"Z{i:04d}", 2001, ("filler",)) for i in range(1100)]
        edges = []
        for i, citer in enumerate(citers):
            if i < 1000:
                target = f"T{i % 50:03d}"          # hot targets: 20 cites each
            else:
                target = f"T{50 + i % 50:03d}"     # cold targets: 2 cites each
            edges.append(RawEdge(citer.article_id, target))
        grid = SweepGrid(d_values=(0.1, 0.2, 0.3, 0.4, 0.5), w_values=(2,),
                         years=(2000, 2000))
        sweep = run_sweep(targets + citers, edges, KEEP_ALL, grid)
        totals = sweep.deviation[:, 0]
        assert np.all(np.diff(totals) > 0)

    def test_cell_workers_match_serial(self, rng):
        articles, edges = small_corpus(rng, n=200)
        grid = SweepGrid(d_values=(0.3, 0.7), w_values=(2, 4), years=(2000, 2005))
        serial = run_sweep(articles, edges, KEEP_ALL, grid)
        threaded = run_sweep(articles, edges, KEEP_ALL, grid, cell_workers=4)
        assert np.array_equal(serial.deviation, threaded.deviation)

    def test_grid_validation(self):
        with pytest.raises(ValueError, match="0 < d < 1"):
            SweepGrid(d_values=(1.0,))
        with pytest.raises(ValueError, match=">= 1"):
            SweepGrid(w_values=(0,))
        with pytest.raises(ValueError, match="non-empty"):
            SweepGrid(d_values=())


def _sweep_result(deviation, d_values, w_values):
    deviation = np.asarray(deviation, dtype=float)
    return SweepResult(
        d_values=d_values,
        w_values=w_values,
        years=(2000,),
        deviation=deviation,
        per_year_deviation=deviation[:, :, None],
        valid=~np.isnan(deviation),
        optimum=None,
    )


class TestSelectOptimal:
    def test_unique_minimum(self):
        sweep = _sweep_result([[3.0, 1.0], [2.0, 5.0]], (0.3, 0.6), (3, 5))
        assert select_optimal(sweep) == (0.3, 5)

    def test_tie_prefers_larger_window(self):
        sweep = _sweep_result([[1.0, 1.0]], (0.5,), (3, 5))
        assert select_optimal(sweep) == (0.5, 5)

    def test_tie_then_d_closest_to_half(self):
        sweep = _sweep_result([[1.0], [1.0], [1.0]], (0.2, 0.6, 0.9), (5,))
        assert select_optimal(sweep) == (0.6, 5)

    def test_equidistant_damping_prefers_smaller(self):
        sweep = _sweep_result([[1.0], [1.0]], (0.4, 0.6), (5,))
        assert select_optimal(sweep) == (0.4, 5)

    def test_invalid_cells_skipped(self):
        sweep = _sweep_result([[np.nan, 2.0]], (0.5,), (3, 5))
        assert select_optimal(sweep) == (0.5, 5)
