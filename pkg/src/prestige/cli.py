"""Command-line entry point: config resolution, pipelines, report emission.

Settings resolve with precedence flags > config file > defaults, and every
command drops a ``provenance.json`` banner into its output directory recording
the resolved configuration and where each value came from.

Exit codes: 0 success, 1 input/config error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .corpus_io import (
    ArticleRecord,
    ParseError,
    SyntheticSpec,
    articles_to_rows,
    generate_synthetic,
    read_articles,
    read_edges,
    write_edges,
    write_table,
)
from .engine import AspConfig, compute_asp
from .graph import (
    CitationGraph,
    PreprocessPolicy,
    build_graph,
    citation_counts,
    filter_window,
    load_graph,
    save_graph,
    topological_order,
)
from .metrics import (
    ClusterMap,
    cluster_rollup,
    covariate_association,
    cross_intensity,
    decile_correlations,
    journal_aggregate,
    noncited_ratio,
    percentile_rank,
    summary_stats,
    tail_index,
)
from .tuning import SweepGrid, run_sweep

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2

DEFAULTS: dict[str, object] = {
    "articles": None,
    "edges": None,
    "cluster_map": None,
    "grade_table": None,
    "snapshot": None,
    "out": "reports",
    "format": "csv",
    "threads": 0,
    "d": 0.5,
    "epsilon": 0.01,
    "max_iterations": 100,
    "deterministic": True,
    "window": 5,
    "window_asp_graph": False,
    "drop_no_subject": True,
    "drop_no_reference": True,
    "drop_future_refs": True,
    "dedup_parallel_edges": True,
    "analysis_years": None,
    "corpus_years": None,
    "d_values": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    "w_values": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    "intensity_scale": 1.0,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_INPUT_ERROR
    try:
        return args.func(args)
    except (ParseError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


# --- commands ----------------------------------------------------------------


def cmd_asp(args: argparse.Namespace) -> int:
    cfg, sources = _resolve(args)
    graph, report, policy = _load_graph(cfg)
    config = _asp_config(cfg)
    ncit = citation_counts(graph, int(cfg["window"]))
    solve_graph = filter_window(graph, int(cfg["window"])) if cfg["window_asp_graph"] else graph
    result = compute_asp(solve_graph, config, threads=int(cfg["threads"]))

    outdir = _outdir(cfg)
    fmt = str(cfg["format"])
    mask = policy.analysis_mask(graph.node_year)
    idx = np.flatnonzero(mask)
    rows = [
        {
            "article_id": graph.node_ids[i],
            "year": int(graph.node_year[i]),
            "asp": float(result.values[i]),
            "n_cit_windowed": int(ncit[i]),
            "iterations_to_converge": result.iterations,
        }
        for i in idx
    ]
    _write(rows, outdir, "asp", fmt,
           columns=["article_id", "year", "asp", "n_cit_windowed", "iterations_to_converge"])
    _write(
        [
            {"iteration": k + 1, "residual": res, "converged": result.converged}
            for k, res in enumerate(result.residuals)
        ],
        outdir,
        "convergence",
        fmt,
        columns=["iteration", "residual", "converged"],
    )
    _write(
        [_summary_row("asp", result.values[idx]), _summary_row("n_cit", ncit[idx])],
        outdir,
        "summary",
        fmt,
    )
    _banner(outdir, "asp", cfg, sources, {
        "converged": result.converged,
        "iterations": result.iterations,
        "sum_ratio": result.sum_ratio,
        "preprocess": _report_dict(report),
    })
    print(f"asp: {graph.n} nodes, {graph.n_edges} edges, "
          f"{result.iterations} iterations, converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg, sources = _resolve(args)
    articles, edges = _load_corpus(cfg)
    policy = _policy(cfg)
    grid = SweepGrid(
        d_values=tuple(float(d) for d in cfg["d_values"]),
        w_values=tuple(int(w) for w in cfg["w_values"]),
        years=_interval(cfg["analysis_years"]),
    )
    config = _asp_config(cfg)
    sweep = run_sweep(articles, edges, policy, grid,
                      config=config, threads=int(cfg["threads"]))

    outdir = _outdir(cfg)
    fmt = str(cfg["format"])
    rows: list[dict[str, object]] = []
    for di, d in enumerate(sweep.d_values):
        for wi, w in enumerate(sweep.w_values):
            for yi, year in enumerate(sweep.years):
                value = sweep.per_year_deviation[di, wi, yi]
                rows.append({"d": d, "w": w, "year": year,
                             "deviation": None if np.isnan(value) else float(value)})
            total = sweep.deviation[di, wi]
            rows.append({"d": d, "w": w, "year": "total",
                         "deviation": None if np.isnan(total) else float(total)})
    _write(rows, outdir, "sweep", fmt, columns=["d", "w", "year", "deviation"])

    heat = []
    for di, d in enumerate(sweep.d_values):
        row: dict[str, object] = {"d": d}
        for wi, w in enumerate(sweep.w_values):
            value = sweep.deviation[di, wi]
            row[f"w={w}"] = None if np.isnan(value) else float(value)
        heat.append(row)
    _write(heat, outdir, "sweep_totals", fmt)

    diagnostics: dict[str, object] = {"tie_break": sweep.tie_break}
    if sweep.optimum is None:
        _banner(outdir, "sweep", cfg, sources, diagnostics | {"optimum": None})
        print("sweep: no cell converged")
        return EXIT_NOT_CONVERGED
    d_opt, w_opt = sweep.optimum
    diagnostics["optimum"] = {"d": d_opt, "w": w_opt}
    _banner(outdir, "sweep", cfg, sources, diagnostics)
    print(f"sweep: optimum d={d_opt} w={w_opt} ({sweep.tie_break})")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    cfg, sources = _resolve(args)
    graph, report, policy = _load_graph(cfg)
    articles_by_id = {}
    if cfg["articles"]:
        articles_by_id = {a.article_id: a for a in read_articles(cfg["articles"])}
    config = _asp_config(cfg)
    window = int(cfg["window"])
    ncit = citation_counts(graph, window)
    solve_graph = filter_window(graph, window) if cfg["window_asp_graph"] else graph
    result = compute_asp(solve_graph, config, threads=int(cfg["threads"]))
    asp = result.values

    cluster_map = None
    if cfg["cluster_map"]:
        cluster_map = ClusterMap.from_file(cfg["cluster_map"])
        missing = cluster_map.missing(graph.subject_labels)
        if missing:
            print(f"error: cluster map lacks subjects: {', '.join(missing)}",
                  file=sys.stderr)
            return EXIT_INPUT_ERROR
    labels = _group_labels(graph, cluster_map)

    mask = policy.analysis_mask(graph.node_year)
    idx = np.flatnonzero(mask)
    asp_m, ncit_m = asp[idx], ncit[idx]
    labels_m = labels[idx]
    years_m = graph.node_year[idx]

    outdir = _outdir(cfg)
    fmt = str(cfg["format"])

    summary_rows = [_summary_row("asp", asp_m), _summary_row("n_cit", ncit_m)]
    covariates: dict[str, np.ndarray] = {}
    if articles_by_id:
        refs = np.array(
            [articles_by_id[i].n_references_declared for i in graph.node_ids[idx]]
        )
        coauthors = np.array(
            [articles_by_id[i].n_coauthors for i in graph.node_ids[idx]]
        )
        covariates = {"n_references": refs, "n_coauthors": coauthors}
        summary_rows.append(_summary_row("n_references", refs))
        summary_rows.append(_summary_row("n_coauthors", coauthors))
    _write(summary_rows, outdir, "summary", fmt)

    tail_rows = []
    for metric, vec in (("asp", asp_m), ("ncit", ncit_m)):
        for g in sorted(set(labels_m.tolist())):
            for year in sorted(set(years_m.tolist())):
                cell = vec[(labels_m == g) & (years_m == year)]
                row = {"group": g, "year": int(year), "metric": metric,
                       "alpha": None, "x_min": None, "n_tail": None}
                try:
                    est = tail_index(cell.astype(float))
                    row.update(alpha=est.alpha, x_min=est.x_min, n_tail=est.n_tail)
                except ValueError:
                    pass
                tail_rows.append(row)
    _write(tail_rows, outdir, "tail_index", fmt)

    _write(decile_correlations(asp_m, ncit_m, labels_m), outdir,
           "decile_correlations", fmt)
    _write(noncited_ratio(ncit_m, labels_m, years_m), outdir, "noncited_ratio", fmt)

    level = "cluster" if cluster_map else "subject"
    intensity = cross_intensity(graph, level, cluster_map,
                                scale=float(cfg["intensity_scale"]))
    long_rows = [
        {"from": intensity.labels[s], "to": intensity.labels[t],
         "intensity": float(intensity.matrix[s, t])}
        for s in range(len(intensity.labels))
        for t in range(len(intensity.labels))
    ]
    _write(long_rows, outdir, "intensity_long", fmt)
    matrix_rows = []
    for s, label in enumerate(intensity.labels):
        row: dict[str, object] = {"label": label}
        for t, other in enumerate(intensity.labels):
            row[other] = float(intensity.matrix[s, t])
        matrix_rows.append(row)
    _write(matrix_rows, outdir, "intensity_matrix", fmt)

    diagnostics: dict[str, object] = {
        "converged": result.converged,
        "iterations": result.iterations,
        "sum_ratio": result.sum_ratio,
        "preprocess": _report_dict(report),
    }

    if cfg["grade_table"]:
        grades = _load_grade_table(cfg["grade_table"])
        journal_rows, excluded = journal_aggregate(
            asp_m, ncit_m, graph.node_journal[idx].tolist(), grades
        )
        _write(journal_rows, outdir, "journal_grades", fmt)
        diagnostics["journals_without_grade"] = excluded

    corr_rows, bin_rows = [], []
    for name, vec in covariates.items():
        assoc = covariate_association(asp_m, vec)
        corr_rows.append({"covariate": name, "pearson_r": assoc["pearson_r"]})
        for row in assoc["bins"]:
            bin_rows.append({"covariate": name, **row})
    if covariates:
        _write(corr_rows, outdir, "covariate_correlation", fmt)
        _write(bin_rows, outdir, "covariate_bins", fmt)

    if cluster_map:
        subject_lists = [graph.subjects_of(int(i)) for i in idx]
        rollup_rows = []
        for metric, vec in (("asp", asp_m), ("ncit", ncit_m)):
            for stat in ("mean", "median"):
                for row in cluster_rollup(
                    vec.astype(float), subject_lists, cluster_map, stat, years_m
                ):
                    rollup_rows.append({"metric": metric, "stat": stat, **row})
        _write(rollup_rows, outdir, "cluster_rollup", fmt)

    order = np.argsort(-asp_m, kind="stable")[:20]
    top_rows = [
        {
            "rank": k + 1,
            "article_id": graph.node_ids[idx[i]],
            "year": int(years_m[i]),
            "asp": float(asp_m[i]),
            "asp_pctile": percentile_rank(asp_m, float(asp_m[i])),
            "n_cit": int(ncit_m[i]),
            "ncit_pctile": percentile_rank(ncit_m.astype(float), float(ncit_m[i])),
        }
        for k, i in enumerate(order)
    ]
    _write(top_rows, outdir, "top_articles", fmt)

    _banner(outdir, "stats", cfg, sources, diagnostics)
    print(f"stats: {len(idx)} articles in analysis window, reports in {outdir}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_articles=args.n_articles,
        year_range=_interval(args.years) or (1990, 2015),
        n_subjects=args.n_subjects,
        mean_out_degree=args.mean_out_degree,
        attachment_exponent=args.attachment_exponent,
        seed=args.seed,
    )
    articles, edges = generate_synthetic(spec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_table(articles_to_rows(articles), outdir / "articles.tsv", "csv", delimiter="\t")
    write_edges(edges, outdir / "edges.tsv")
    print(f"synth: wrote {len(articles)} articles, {len(edges)} edges to {outdir}")
    return EXIT_OK


def cmd_graph_check(args: argparse.Namespace) -> int:
    cfg, sources = _resolve(args)
    graph, report, _ = _load_graph(cfg)
    for field_name, value in _report_dict(report).items():
        print(f"{field_name}: {value}")
    topo = topological_order(graph)
    if topo.is_dag:
        print("acyclic: true")
    else:
        print(f"acyclic: false ({topo.cycle_nodes.size} nodes on cycles)")
    if cfg["snapshot"]:
        save_graph(graph, cfg["snapshot"])
        print(f"snapshot written to {cfg['snapshot']}")
    return EXIT_OK


# --- helpers -----------------------------------------------------------------


def _resolve(args: argparse.Namespace) -> tuple[dict[str, object], dict[str, str]]:
    cfg = dict(DEFAULTS)
    sources = {k: "default" for k in DEFAULTS}
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in file_cfg.items():
            cfg[key] = value
            sources[key] = "file"
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
            sources[key] = "flag"
    return cfg, sources


def _interval(value: object) -> tuple[int, int] | None:
    if value is None:
        return None
    if isinstance(value, str):
        lo, _, hi = value.partition(":")
        if not hi:
            raise ValueError(f"expected LO:HI interval, got {value!r}")
        return int(lo), int(hi)
    lo, hi = value  # type: ignore[misc]
    return int(lo), int(hi)


def _int_list(value: object) -> list[int]:
    if isinstance(value, str):
        if ":" in value:
            lo, hi = _interval(value)  # type: ignore[misc]
            return list(range(lo, hi + 1))
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(v) for v in value]  # type: ignore[union-attr]


def _float_list(value: object) -> list[float]:
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    return [float(v) for v in value]  # type: ignore[union-attr]


def _policy(cfg: Mapping[str, object]) -> PreprocessPolicy:
    return PreprocessPolicy(
        drop_no_subject=bool(cfg["drop_no_subject"]),
        drop_no_reference=bool(cfg["drop_no_reference"]),
        drop_future_refs=bool(cfg["drop_future_refs"]),
        dedup_parallel_edges=bool(cfg["dedup_parallel_edges"]),
        analysis_years=_interval(cfg["analysis_years"]),
        corpus_years=_interval(cfg["corpus_years"]),
    )


def _asp_config(cfg: Mapping[str, object]) -> AspConfig:
    return AspConfig(
        d=float(cfg["d"]),
        epsilon=float(cfg["epsilon"]),
        max_iterations=int(cfg["max_iterations"]),
        deterministic=bool(cfg["deterministic"]),
    )


def _load_corpus(cfg: Mapping[str, object]) -> tuple[list[ArticleRecord], list]:
    if not cfg["articles"] or not cfg["edges"]:
        raise ValueError("--articles and --edges are required")
    return read_articles(cfg["articles"]), read_edges(cfg["edges"])


def _load_graph(cfg: Mapping[str, object]):
    policy = _policy(cfg)
    snapshot = cfg.get("snapshot")
    if snapshot and Path(str(snapshot)).exists():
        graph = load_graph(str(snapshot))
        from .graph import PreprocessReport

        return graph, PreprocessReport(articles_kept=graph.n, edges_kept=graph.n_edges), policy
    articles, edges = _load_corpus(cfg)
    graph, report = build_graph(articles, edges, policy)
    if snapshot:
        save_graph(graph, str(snapshot))
    return graph, report, policy


def _load_grade_table(path: str | Path) -> dict[str, tuple[str, str]]:
    import csv

    table: dict[str, tuple[str, str]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        delimiter = "\t" if sample.count("\t") > sample.count(",") else ","
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty grade table")
        cols = [c.strip().lower() for c in header]
        try:
            ji, si, hi = cols.index("journal"), cols.index("sjr"), cols.index("h")
        except ValueError:
            raise ValueError(
                f"{path}: header must name 'journal', 'sjr' and 'h' columns"
            ) from None
        for row in reader:
            if not row:
                continue
            table[row[ji].strip()] = (row[si].strip(), row[hi].strip())
    return table


def _group_labels(graph: CitationGraph, cluster_map: ClusterMap | None) -> np.ndarray:
    labels = np.empty(graph.n, dtype=object)
    for i in range(graph.n):
        subjects = graph.subjects_of(i)
        if cluster_map is not None:
            labels[i] = cluster_map.resolve(subjects) or "(none)"
        else:
            labels[i] = subjects[0] if subjects else "(none)"
    return labels


def _summary_row(name: str, values: np.ndarray) -> dict[str, object]:
    stats = summary_stats(np.asarray(values, dtype=float))
    return {
        "metric": name,
        "min": stats.min,
        "q1": stats.q1,
        "median": stats.median,
        "mean": stats.mean,
        "q3": stats.q3,
        "max": stats.max,
    }


def _report_dict(report) -> dict[str, int]:
    from dataclasses import asdict

    return asdict(report)


def _outdir(cfg: Mapping[str, object]) -> Path:
    outdir = Path(str(cfg["out"]))
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _write(
    rows: list[dict[str, object]],
    outdir: Path,
    name: str,
    fmt: str,
    columns: list[str] | None = None,
) -> None:
    write_table(rows, outdir / f"{name}.{fmt}", fmt, columns=columns)


def _banner(
    outdir: Path,
    command: str,
    cfg: Mapping[str, object],
    sources: Mapping[str, str],
    diagnostics: Mapping[str, object],
) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "argv": sys.argv[1:],
        "config": {k: cfg[k] for k in sorted(cfg)},
        "config_sources": {k: sources[k] for k in sorted(sources)},
        "diagnostics": dict(diagnostics),
    }
    with open(outdir / "provenance.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


# --- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prestige",
        description="Prestige scores and analytics over citation networks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override it)")
    common.add_argument("--articles", help="article table path (TSV)")
    common.add_argument("--edges", help="edge list path (TSV)")
    common.add_argument("--out", help="output directory for reports")
    common.add_argument("--format", choices=["csv", "json"], help="report file format")
    common.add_argument("--threads", type=int, help="worker threads (0 = auto)")
    common.add_argument("--snapshot", help="binary graph snapshot to reuse/create")
    common.add_argument("--corpus-years", dest="corpus_years", metavar="LO:HI")
    common.add_argument("--analysis-years", dest="analysis_years", metavar="LO:HI")
    for flag in ("drop-no-subject", "drop-no-reference", "drop-future-refs",
                 "dedup-parallel-edges"):
        common.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                            action=argparse.BooleanOptionalAction)

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--d", type=float, help="damping factor in (0, 1)")
    solver.add_argument("--epsilon", type=float, help="max-norm convergence threshold")
    solver.add_argument("--max-iterations", dest="max_iterations", type=int)
    solver.add_argument("--deterministic", action=argparse.BooleanOptionalAction)
    solver.add_argument("--window", type=int, help="citing window in years")
    solver.add_argument("--window-asp-graph", dest="window_asp_graph",
                        action=argparse.BooleanOptionalAction,
                        help="also restrict the solver's edges to the window")

    p_asp = sub.add_parser("asp", parents=[common, solver],
                           help="solve prestige scores and write the score table")
    p_asp.set_defaults(func=cmd_asp)

    p_sweep = sub.add_parser("sweep", parents=[common, solver],
                             help="sweep damping factor and citing window")
    p_sweep.add_argument("--d-values", dest="d_values", type=_float_list,
                         help="comma-separated damping factors")
    p_sweep.add_argument("--w-values", dest="w_values", type=_int_list,
                         help="comma-separated windows or LO:HI range")
    p_sweep.set_defaults(func=cmd_sweep)

    p_stats = sub.add_parser("stats", parents=[common, solver],
                             help="emit the descriptive/comparative statistics reports")
    p_stats.add_argument("--cluster-map", dest="cluster_map",
                         help="subject,cluster CSV mapping")
    p_stats.add_argument("--grade-table", dest="grade_table",
                         help="journal,sjr,h CSV grade table")
    p_stats.add_argument("--intensity-scale", dest="intensity_scale", type=float)
    p_stats.set_defaults(func=cmd_stats)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--n-articles", dest="n_articles", type=int, required=True)
    p_synth.add_argument("--years", default="1990:2015", metavar="LO:HI")
    p_synth.add_argument("--n-subjects", dest="n_subjects", type=int, default=10)
    p_synth.add_argument("--mean-out-degree", dest="mean_out_degree", type=float,
                         default=8.0)
    p_synth.add_argument("--attachment-exponent", dest="attachment_exponent",
                         type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", default="synthetic")
    p_synth.set_defaults(func=cmd_synth)

    p_check = sub.add_parser("graph-check", parents=[common],
                             help="run preprocessing and print the report")
    p_check.set_defaults(func=cmd_graph_check)

    return parser


if __name__ == "__main__":
    sys.exit(main())
