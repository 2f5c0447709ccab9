"""Prestige scores and citation analytics for large citation networks."""

import os

# Must run before numba's first import: allow deterministic-mode thread masks
# beyond the physical core count and pin a threading layer.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .corpus_io import (  # noqa: E402
    ArticleRecord,
    ParseError,
    RawEdge,
    SyntheticSpec,
    generate_synthetic,
    parse_articles,
    parse_edges,
    synthesize_arrays,
    write_table,
)
from .graph import (  # noqa: E402
    CitationGraph,
    PreprocessPolicy,
    PreprocessReport,
    TopoResult,
    build_graph,
    citation_counts,
    filter_window,
    graph_from_arrays,
    load_graph,
    save_graph,
    topological_order,
)
from .engine import (  # noqa: E402
    AspConfig,
    AspResult,
    GraphCycleError,
    compute_asp,
    compute_asp_dag_oracle,
    compute_asp_dense_oracle,
    residual,
)
from .tuning import (  # noqa: E402
    SweepGrid,
    SweepResult,
    run_sweep,
    select_optimal,
    subject_deviation,
)
from .metrics import (  # noqa: E402
    ClusterMap,
    IntensityMatrix,
    SummaryStats,
    TailIndexEstimate,
    cluster_rollup,
    covariate_association,
    cross_intensity,
    decile_correlations,
    journal_aggregate,
    noncited_ratio,
    pearson,
    percentile_rank,
    summary_stats,
    tail_index,
)

__version__ = "0.1.0"
