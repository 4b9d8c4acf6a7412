"""Batch command line front-end: ingest, weights, evaluate, predict, report.

Machine-readable results go to stdout or --out; progress and timing go to
stderr.  Exit codes: 0 success, 2 unreadable or unparsable input, 3 weight
computation did not converge, 4 unknown or empty prediction query.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .core import (
    BipartiteGraph,
    EdgeSchema,
    Hyperedge,
    Hypergraph,
    build_incidence_index,
    induce_hypergraph,
    parse_bipartite_edges,
)
from .evaluation import PAPER_EPSILONS, GridResult, SplitSpec, grid_search
from .geometry import GeometryConfig, SizePolicy, batch_counts, neighborhood_record
from .predictors import (
    predict_label_embedded,
    predict_label_modified,
    predict_weight_embedded,
    predict_weight_modified,
)
from .weighting import FairnessGoodness, ObservationMap, bucketize_labels, fairness_goodness, hyperedge_weights, normalize_ratings

logger = logging.getLogger("hyperknn")


@dataclass
class RunConfig:
    """Run parameters; a JSON config file fills fields, CLI flags override them."""

    input: str | None = None
    delimiter: str = "\t"
    u_col: int = 0
    v_col: int = 1
    rating_col: int = 2
    vertex_side: str = "U"
    task: str = "weight"
    method: str = "modified"
    q: int = 2
    k_max: int = 20
    epsilons: tuple[float, ...] = PAPER_EPSILONS
    holdout: float = 0.2
    seed: int = 0
    paper_protocol: bool = True
    workers: int | None = None
    tol: float = 1e-6
    max_iter: int = 100
    k: int = 3
    epsilon: float | None = None
    out: str | None = None
    grid_csv: str | None = None

    @classmethod
    def from_sources(cls, config_path: str | None, args: argparse.Namespace) -> RunConfig:
        cfg = cls()
        if config_path:
            data = json.loads(Path(config_path).read_text())
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            if "epsilons" in data:
                data["epsilons"] = tuple(float(x) for x in data["epsilons"])
            cfg = replace(cfg, **data)
        for f in fields(cls):
            value = getattr(args, f.name, None)
            if value is not None:
                cfg = replace(cfg, **{f.name: value})
        return cfg

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return self.workers
        env = os.environ.get("HYPERKNN_WORKERS")
        if env:
            return int(env)
        return os.cpu_count() or 1

    def schema(self) -> EdgeSchema:
        return EdgeSchema(self.delimiter, self.u_col, self.v_col, self.rating_col)

    def split(self) -> SplitSpec:
        return SplitSpec(self.holdout, self.seed)


def _decode_delimiter(raw: str) -> str:
    return raw.encode("utf-8").decode("unicode_escape")


def _parse_epsilons(raw: str) -> tuple[float, ...]:
    return tuple(float(Fraction(tok.strip())) for tok in raw.split(",") if tok.strip())


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def load_bipartite(cfg: RunConfig) -> BipartiteGraph:
    if not cfg.input:
        raise FileNotFoundError("no input file given")
    with open(cfg.input, encoding="utf-8") as fh:
        return parse_bipartite_edges(fh, cfg.schema())


def dataset_stats(g: BipartiteGraph, X: Hypergraph) -> dict:
    sizes = X.sizes()
    return {
        "hyperedges": len(X.edges),
        "vertices": X.vertex_count,
        "min_size": min(sizes),
        "max_size": max(sizes),
        "ratings": len(g.edges),
        "malformed": g.malformed,
        "duplicates": g.duplicates,
        "dropped_empty": X.dropped_empty,
    }


def compute_weights(g: BipartiteGraph, X: Hypergraph, cfg: RunConfig) -> tuple[ObservationMap, FairnessGoodness]:
    fg = fairness_goodness(normalize_ratings(g), tol=cfg.tol, max_iter=cfg.max_iter)
    return hyperedge_weights(X, fg), fg


def evaluate_report(cfg: RunConfig) -> dict:
    """Full pipeline to the report dict cmd_evaluate serializes; shared so library calls match the CLI."""
    t0 = time.monotonic()
    g = load_bipartite(cfg)
    X = induce_hypergraph(g, cfg.vertex_side)
    logger.info("ingested %d ratings -> %d hyperedges in %.2fs", len(g.edges), len(X.edges), time.monotonic() - t0)
    t1 = time.monotonic()
    W, fg = compute_weights(g, X, cfg)
    logger.info("weights in %d iterations (converged=%s) in %.2fs", fg.iterations, fg.converged, time.monotonic() - t1)
    F = W if cfg.task == "weight" else bucketize_labels(W, cfg.q)
    t2 = time.monotonic()
    result = grid_search(
        X,
        F,
        task=cfg.task,
        method=cfg.method,
        k_range=range(1, cfg.k_max + 1),
        epsilons=cfg.epsilons,
        q=cfg.q,
        split=cfg.split(),
        protocol="paper" if cfg.paper_protocol else "validation",
        workers=cfg.resolved_workers(),
    )
    logger.info("grid of %d cells in %.2fs", len(result.cells), time.monotonic() - t2)
    return {
        "dataset": dataset_stats(g, X),
        "weights": {
            "converged": fg.converged,
            "iterations": fg.iterations,
            "final_delta": fg.final_delta,
        },
        "report": result.to_dict(),
    }


def _grid_csv_text(grid_rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "task", "k", "epsilon", "mae", "rmse", "error_rate", "q"])
    for row in grid_rows:
        writer.writerow(
            [
                row["method"],
                row["task"],
                row["k"],
                "inf" if row["epsilon"] is None else row["epsilon"],
                row.get("mae", ""),
                row.get("rmse", ""),
                row.get("error_rate", ""),
                row.get("q", ""),
            ]
        )
    return buf.getvalue()


def cmd_ingest(cfg: RunConfig, args: argparse.Namespace) -> int:
    try:
        g = load_bipartite(cfg)
    except (OSError, ValueError) as exc:
        logger.error("cannot ingest: %s", exc)
        return 2
    X = induce_hypergraph(g, cfg.vertex_side)
    _emit(json.dumps(dataset_stats(g, X), indent=2, sort_keys=True) + "\n", cfg.out)
    return 0


def cmd_weights(cfg: RunConfig, args: argparse.Namespace) -> int:
    try:
        g = load_bipartite(cfg)
    except (OSError, ValueError) as exc:
        logger.error("cannot ingest: %s", exc)
        return 2
    X = induce_hypergraph(g, cfg.vertex_side)
    W, fg = compute_weights(g, X, cfg)
    side = g.v_ids if cfg.vertex_side == "U" else g.u_ids
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["edge_id", "source_item", "weight"])
    for e in X.edges:
        writer.writerow([e.id, side.name(e.source_v), repr(W[e.id])])
    _emit(buf.getvalue(), cfg.out)
    logger.info(
        "fairness/goodness: %d iterations, final delta %.3g, converged=%s",
        fg.iterations,
        fg.final_delta,
        fg.converged,
    )
    if not fg.converged:
        logger.warning("weight computation did not converge within %d iterations", cfg.max_iter)
        return 3
    return 0


def cmd_evaluate(cfg: RunConfig, args: argparse.Namespace) -> int:
    try:
        report = evaluate_report(cfg)
    except (OSError, ValueError) as exc:
        logger.error("cannot evaluate: %s", exc)
        return 2
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", cfg.out)
    if cfg.grid_csv:
        Path(cfg.grid_csv).write_text(_grid_csv_text(report["report"]["grid"]))
    return 0


def cmd_predict(cfg: RunConfig, args: argparse.Namespace) -> int:
    names = [tok.strip() for tok in (args.query or "").split(",") if tok.strip()]
    if not names:
        logger.error("empty query: pass --query with comma-separated vertex ids")
        return 4
    try:
        g = load_bipartite(cfg)
    except (OSError, ValueError) as exc:
        logger.error("cannot ingest: %s", exc)
        return 2
    X = induce_hypergraph(g, cfg.vertex_side)
    side = g.u_ids if cfg.vertex_side == "U" else g.v_ids
    vertex_ids = []
    for name in names:
        vid = side.get(name)
        if vid is None:
            logger.error("unknown vertex id %r", name)
            return 4
        vertex_ids.append(vid)
    W, fg = compute_weights(g, X, cfg)
    qid = len(X.edges)
    X2 = Hypergraph(X.vertex_count, X.edges + [Hyperedge(qid, tuple(sorted(set(vertex_ids))))])
    observed = list(range(qid))
    F = W if cfg.task == "weight" else bucketize_labels(W, cfg.q)
    config = GeometryConfig(SizePolicy(cfg.epsilon))
    counts = batch_counts(X2, observed, F, config, workers=cfg.resolved_workers())
    record = neighborhood_record(build_incidence_index(X2), X2, qid, observed, F, config)
    if cfg.task == "weight":
        if cfg.method == "modified":
            prediction = predict_weight_modified(qid, observed, W, counts, cfg.k)
        else:
            prediction = predict_weight_embedded(qid, X2, observed, W, config, q=cfg.q, k=cfg.k)
    else:
        if cfg.method == "modified":
            prediction = predict_label_modified(qid, observed, F, counts, cfg.k)
        else:
            prediction = predict_label_embedded(qid, X2, observed, F, config, k=cfg.k)
    out = {
        "query": names,
        "task": cfg.task,
        "method": cfg.method,
        "k": cfg.k,
        "epsilon": cfg.epsilon,
        "prediction": prediction,
        "count": record.count,
        "base_size": len(record.base),
        "neighborhood_mean": record.mean,
        "bandwidth": record.bandwidth,
        "weights_converged": fg.converged,
    }
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", cfg.out)
    return 0


def cmd_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    try:
        report = json.loads(Path(args.report_json).read_text())
    except (OSError, ValueError) as exc:
        logger.error("cannot read report: %s", exc)
        return 2
    _emit(_grid_csv_text(report["report"]["grid"]), cfg.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperknn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--input", help="delimited edge list (u, v, rating)")
        p.add_argument("--delimiter", type=_decode_delimiter, help="column delimiter (default tab)")
        p.add_argument("--vertex-side", dest="vertex_side", choices=("U", "V"))
        p.add_argument("--task", choices=("weight", "label"))
        p.add_argument("--method", choices=("modified", "embedded"))
        p.add_argument("--q", type=int, help="number of label classes")
        p.add_argument("--k-max", dest="k_max", type=int, help="sweep k from 1 to this value")
        p.add_argument("--epsilons", type=_parse_epsilons, help="comma list of size caps, fractions allowed (5/3,1,1/2)")
        p.add_argument("--split", dest="holdout", type=float, help="holdout fraction")
        p.add_argument("--seed", type=int)
        p.add_argument("--paper-protocol", dest="paper_protocol", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--workers", type=int, help="parallel workers (HYPERKNN_WORKERS, then cpu count)")
        p.add_argument("--out", help="write machine output here instead of stdout")

    p_ingest = sub.add_parser("ingest", help="parse + induce, print dataset stats")
    common(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_weights = sub.add_parser("weights", help="compute hyperedge weights as CSV")
    common(p_weights)
    p_weights.set_defaults(func=cmd_weights)

    p_eval = sub.add_parser("evaluate", help="run the grid sweep, emit a JSON report")
    common(p_eval)
    p_eval.add_argument("--grid-csv", dest="grid_csv", help="also write the grid table as CSV here")
    p_eval.set_defaults(func=cmd_evaluate)

    p_pred = sub.add_parser("predict", help="predict weight/label of an ad-hoc hyperedge")
    common(p_pred)
    p_pred.add_argument("--query", help="comma-separated vertex ids forming the hyperedge")
    p_pred.add_argument("--k", type=int, help="number of shells/points")
    p_pred.add_argument("--epsilon", type=float, help="size cap factor; omit for no cap")
    p_pred.set_defaults(func=cmd_predict)

    p_report = sub.add_parser("report", help="render a saved JSON report's grid as CSV")
    common(p_report)
    p_report.add_argument("report_json", help="path to a JSON report from evaluate")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_sources(args.config, args)
    except (OSError, ValueError) as exc:
        logger.error("bad configuration: %s", exc)
        return 2
    return args.func(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
