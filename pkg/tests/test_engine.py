import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from prestige import (
    AspConfig,
    GraphCycleError,
    compute_asp,
    compute_asp_dag_oracle,
    compute_asp_dense_oracle,
    filter_window,
    graph_from_arrays,
    residual,
)

from conftest import make_graph, random_dag_graph, random_temporal_graph

TIGHT = AspConfig(epsilon=1e-12, max_iterations=20_000)


def chain_graph():
    # A(1992) cites B(1990)
    graph, _ = make_graph([("A", 1992), ("B", 1990)], [("A", "B")])
    return graph


def three_node_dag():
    # C cites A and B; B cites A
    graph, _ = make_graph(
        [("A", 1990), ("B", 1992), ("C", 1994)],
        [("C", "A"), ("C", "B"), ("B", "A")],
    )
    return graph


class TestAspConfig:
    @pytest.mark.parametrize("d", [0.0, 1.0, -0.2, 1.5])
    def test_damping_out_of_range(self, d):
        with pytest.raises(ValueError, match="0 < d < 1"):
            AspConfig(d=d)

    def test_epsilon_positive(self):
        with pytest.raises(ValueError, match="epsilon"):
            AspConfig(epsilon=0.0)

    def test_max_iterations_positive(self):
        with pytest.raises(ValueError, match="max_iterations"):
            AspConfig(max_iterations=0)


class TestComputeAsp:
    def test_isolated_node_sits_at_floor(self):
        graph, _ = make_graph([("A", 1990)], [])
        result = compute_asp(graph, AspConfig(d=0.5))
        assert result.values[0] == 0.5
        assert result.converged

    def test_chain_closed_form(self):
        result = compute_asp(chain_graph(), AspConfig(d=0.5))
        assert result.values.tolist() == [0.5, 0.75]

    def test_three_node_dag_hand_evaluated(self):
        result = compute_asp(three_node_dag(), AspConfig(d=0.5, epsilon=1e-12))
        assert result.values.tolist() == [0.9375, 0.625, 0.5]

    def test_empty_graph(self):
        graph, _ = make_graph([], [])
        result = compute_asp(graph)
        assert result.values.size == 0
        assert result.converged

    def test_non_convergence_reported_not_raised(self):
        nodes = [(f"N{k}", 1990 + k) for k in range(8)]
        edges = [(f"N{k + 1}", f"N{k}") for k in range(7)]
        graph, _ = make_graph(nodes, edges)
        result = compute_asp(graph, AspConfig(max_iterations=1))
        assert not result.converged
        assert result.iterations == 1
        assert len(result.residuals) == 1

    def test_residual_history_recorded_per_iteration(self):
        result = compute_asp(three_node_dag(), AspConfig(d=0.5, epsilon=1e-9))
        assert len(result.residuals) == result.iterations
        assert result.residuals[-1] < 1e-9

    def test_values_lower_bounded_with_equality_iff_uncited(self, rng):
        for _ in range(5):
            graph = random_temporal_graph(rng, 250, mean_degree=4.0)
            d = float(rng.uniform(0.15, 0.85))
            result = compute_asp(graph, AspConfig(d=d, epsilon=1e-10, max_iterations=5000))
            floor = 1.0 - d
            assert np.all(result.values >= floor)
            uncited = np.diff(graph.in_indptr) == 0
            assert np.all(result.values[uncited] == floor)
            assert np.all(result.values[~uncited] > floor)

    def test_windowed_uncited_floor_exact(self, rng):
        graph = random_temporal_graph(rng, 300, mean_degree=5.0)
        windowed = filter_window(graph, 2)
        result = compute_asp(windowed, AspConfig(d=0.5))
        uncited = np.diff(windowed.in_indptr) == 0
        assert uncited.any()
        assert np.all(result.values[uncited] == 0.5)

    def test_bit_identical_across_thread_masks(self, rng):
        graph = random_temporal_graph(rng, 30_000, mean_degree=8.0)
        reference = None
        for threads in (1, 2, 4, 8):
            result = compute_asp(graph, AspConfig(epsilon=1e-10, max_iterations=500),
                                 threads=threads)
            blob = result.values.tobytes()
            if reference is None:
                reference = blob
            assert blob == reference

    def test_reassociating_mode_close_to_deterministic(self, rng):
        graph = random_temporal_graph(rng, 5000, mean_degree=6.0)
        config = AspConfig(epsilon=1e-10, max_iterations=1000)
        fast = AspConfig(epsilon=1e-10, max_iterations=1000, deterministic=False)
        a = compute_asp(graph, config)
        b = compute_asp(graph, fast)
        assert np.max(np.abs(a.values - b.values)) < 1e-8

    def test_sum_ratio_diagnostic(self):
        result = compute_asp(chain_graph())
        assert result.sum_ratio == pytest.approx((0.5 + 0.75) / 2)

    def test_negative_threads_rejected(self):
        with pytest.raises(ValueError, match="threads"):
            compute_asp(chain_graph(), threads=-1)


class TestDagOracle:
    def test_chain_exact(self):
        values = compute_asp_dag_oracle(chain_graph(), 0.5)
        assert values.tolist() == [0.5, 0.75]

    def test_three_node_dag_exact(self):
        values = compute_asp_dag_oracle(three_node_dag(), 0.5)
        assert values.tolist() == [0.9375, 0.625, 0.5]

    def test_cyclic_pair_raises(self):
        graph, _ = make_graph([("A", 1990), ("B", 1990)], [("A", "B"), ("B", "A")])
        with pytest.raises(GraphCycleError, match="cyclic"):
            compute_asp_dag_oracle(graph, 0.5)

    def test_invalid_damping(self):
        with pytest.raises(ValueError, match="0 < d < 1"):
            compute_asp_dag_oracle(chain_graph(), 1.0)

    def test_matches_iterative_solver_on_random_dags(self, rng):
        for _ in range(5):
            graph = random_dag_graph(rng, 2000, mean_degree=4.0)
            d = float(rng.uniform(0.2, 0.8))
            exact = compute_asp_dag_oracle(graph, d)
            iterated = compute_asp(
                graph, AspConfig(d=d, epsilon=1e-10, max_iterations=5000)
            )
            assert np.max(np.abs(exact - iterated.values)) < 1e-8


class TestDenseOracle:
    def test_empty_edges_all_floor(self):
        graph, _ = make_graph([("A", 1990), ("B", 1991), ("C", 1992)], [])
        values = compute_asp_dense_oracle(graph, AspConfig(d=0.3))
        assert np.allclose(values, 0.7, atol=1e-12)

    def test_chain(self):
        values = compute_asp_dense_oracle(chain_graph(), AspConfig(d=0.5))
        assert values == pytest.approx([0.5, 0.75], abs=1e-12)

    def test_size_guard(self):
        n = 2001
        graph = graph_from_arrays(
            np.array([f"N{i}" for i in range(n)], dtype=object),
            np.full(n, 2000, dtype=np.int32),
            np.arange(n + 1, dtype=np.int64),
            np.zeros(n, dtype=np.int32),
            ("s0",),
            np.array([None] * n, dtype=object),
            np.empty(0, dtype=np.int32),
            np.empty(0, dtype=np.int32),
        )
        with pytest.raises(ValueError, match="2000"):
            compute_asp_dense_oracle(graph)

    def test_matches_solver_on_cyclic_graph(self, rng):
        graph = random_temporal_graph(rng, 400, mean_degree=5.0)
        dense = compute_asp_dense_oracle(graph, AspConfig(d=0.6))
        sparse = compute_asp(graph, AspConfig(d=0.6, epsilon=1e-12, max_iterations=20_000))
        assert np.max(np.abs(dense - sparse.values)) < 1e-8


class TestResidual:
    def test_identical_vectors(self):
        assert residual([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_half_step(self):
        assert residual([1.0, 1.0], [1.0, 1.5]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            residual([1.0], [1.0, 2.0])

    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=1,
            max_size=64,
        ),
        st.randoms(use_true_random=False),
    )
    def test_matches_elementwise_scan(self, values, rnd):
        other = [v + rnd.uniform(-10.0, 10.0) for v in values]
        brute = max(abs(b - a) for a, b in zip(values, other))
        assert residual(values, other) == pytest.approx(brute, rel=0, abs=0)


class TestConvergenceBehavior:
    def test_one_norm_residuals_contract_by_damping_factor(self, rng):
        # the iteration operator's column sums equal d, so consecutive
        # differences shrink geometrically in the 1-norm on any graph
        for _ in range(5):
            graph = random_temporal_graph(rng, 150, mean_degree=4.0)
            d = float(rng.uniform(0.2, 0.9))
            n = graph.n
            inv_m = np.zeros(n)
            nz = graph.out_degree > 0
            inv_m[nz] = 1.0 / graph.out_degree[nz]
            operator = np.zeros((n, n))
            citing, cited = graph.edge_arrays()
            np.add.at(operator, (cited, citing), d * inv_m[citing])
            x = np.ones(n)
            prev_step = None
            for _ in range(40):
                x_next = (1.0 - d) + operator @ x
                step = float(np.abs(x_next - x).sum())
                if prev_step is not None and prev_step > 1e-13:
                    assert step <= d * prev_step + 1e-12
                prev_step = step
                x = x_next

    def test_monotone_citation_gain(self, rng):
        # a new reference strictly lifts the cited node and leaves the citer alone
        for _ in range(20):
            graph = random_dag_graph(rng, 120, mean_degree=3.0)
            citing, cited = graph.edge_arrays()
            existing = set(zip(citing.tolist(), cited.tolist()))
            while True:
                j = int(rng.integers(1, graph.n))
                i = int(rng.integers(0, j))
                if (j, i) not in existing:
                    break
            before = compute_asp_dag_oracle(graph, 0.5)
            augmented = graph_from_arrays(
                graph.node_ids,
                graph.node_year,
                graph.subj_indptr,
                graph.subj_indices,
                graph.subject_labels,
                graph.node_journal,
                np.append(citing, np.int32(j)),
                np.append(cited, np.int32(i)),
            )
            after = compute_asp_dag_oracle(augmented, 0.5)
            assert after[i] > before[i]
            assert after[j] == pytest.approx(before[j], rel=0, abs=1e-10)
