"""Command-line front end.

Exit status: 0 on success, 1 on a domain error (the error class is printed),
2 on a usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

from . import bounds, ilp
from .errors import TimeBudgetExceeded, TopologyError
from .evaluation import ExperimentConfig, generate_network, run_experiment
from .graph import NetworkGraph, RecoveredGraph
from .interference import InterferenceMatrix, TrafficConfig, infer_interference_matrix, interference_matrix
from .recovery import ALGORITHMS


class CommandFailed(Exception):
    """A command ran but its check did not pass (reported as status 1)."""


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _graph(path: str) -> NetworkGraph:
    return NetworkGraph.from_text(_read(path))


def _matrix(path: str) -> InterferenceMatrix:
    return InterferenceMatrix.from_csv(_read(path))


def _recovered_text(rg: RecoveredGraph) -> str:
    g, _ = rg.graph.relabeled()
    return g.to_text()


# -- commands ------------------------------------------------------------------------

def cmd_generate(args) -> None:
    cfg = ExperimentConfig(edge_prob=args.edge_prob, overlay_fraction=args.overlay_fraction,
                           generator=args.kind, trials=1)
    g = generate_network(cfg, args.n, args.seed)
    _write(args.output, g.to_text())


def cmd_fmatrix(args) -> None:
    _write(args.output, interference_matrix(_graph(args.graph)).to_csv())


def cmd_infer_f(args) -> None:
    cfg = TrafficConfig(rate=args.rate, threshold=args.threshold, horizon=args.horizon,
                        min_samples=args.min_samples, seed=args.seed)
    _write(args.output, infer_interference_matrix(_graph(args.graph), cfg, args.seed).to_csv())


def cmd_recover(args) -> None:
    f = _matrix(args.fmatrix)
    rg = ALGORITHMS[args.algo](f)
    _write(args.output, _recovered_text(rg))
    if args.diagnostics:
        Path(args.diagnostics).write_text(json.dumps(rg.diagnostics, sort_keys=True, default=str) + "\n")


def cmd_bounds(args) -> None:
    f = _matrix(args.fmatrix)
    gf = bounds.build_interference_graph(f)
    mode = bounds.EXACT if args.exact else bounds.GREEDY
    cover = bounds.min_edge_clique_cover(gf, mode, args.max_edges)
    lines = [
        f"tunnels: {f.size}",
        f"interference_edges: {len(gf.edges)}",
        f"clique_cover: {cover.size}",
        f"clique_cover_exact: {'yes' if cover.exact else 'no'}",
    ]
    if args.exact:
        lines.append(f"lower_bound: {math.ceil(cover.size / 2)}")
    else:
        lines.append(f"lower_bound: {bounds.lower_bound(f, bounds.GREEDY)}")
    fg = bounds.feasible_graph(f)
    lines.append(f"feasible_graph_edges: {fg.num_edges}")
    lines.append(f"upper_bound: {bounds.upper_bound(f)}")
    if args.graph:
        cond = bounds.check_unique_intersection_condition(_graph(args.graph))
        lines.append(f"unique_intersection: {'holds' if cond.holds else 'fails'}")
        free = cond.witness_free_links()
        lines.append("witness_free_links: " + (" ".join(f"{a}-{b}" for a, b in free) or "none"))
    if args.cover:
        Path(args.cover).write_text(cover.to_json() + "\n")
    _write(None, "\n".join(lines) + "\n")


def cmd_ilp_export(args) -> None:
    f = _matrix(args.fmatrix)
    model = ilp.build_ilp_model(f, node_budget=args.nodes)
    if args.output in (None, "-"):
        ilp.export_lp(model, sys.stdout)
    else:
        ilp.export_lp(model, args.output)
    if args.encode:
        g = _graph(args.encode)
        if len(g.nodes) > model.node_budget:
            raise ValueError(f"graph has {len(g.nodes)} nodes, model allows {model.node_budget}")
        values = ilp.assignment_from_solution(model, RecoveredGraph.from_routing(g))
        Path(args.solution_out or "solution.txt").write_text(ilp.write_solution(values))


def cmd_ilp_solve(args) -> None:
    f = _matrix(args.fmatrix)
    model = ilp.build_ilp_model(f, node_budget=args.nodes)
    limits = ilp.SolverLimits(time_budget=args.time_budget)
    try:
        rg = ilp.solve_exact_small(model, limits)
    except TimeBudgetExceeded as exc:
        if exc.best is not None and args.output:
            _write(args.output, _recovered_text(exc.best))
        raise
    sys.stdout.write(f"optimum_edges: {rg.num_edges}\n")
    if args.output:
        _write(args.output, _recovered_text(rg))
    if args.solution_out:
        Path(args.solution_out).write_text(ilp.write_solution(ilp.assignment_from_solution(model, rg)))


def cmd_verify(args) -> None:
    f = _matrix(args.fmatrix)
    if args.solution:
        candidate = ilp.recovered_from_solution(f, ilp.read_solution(_read(args.solution)))
    else:
        candidate = RecoveredGraph.from_routing(_graph(args.graph))
    result = bounds.verify_solution(f, candidate)
    lines = [f"feasible: {'yes' if result.feasible else 'no'}", f"edges: {candidate.num_edges}"]
    lines.extend(f"{v.constraint}: {v.detail}" for v in result.violations)
    _write(None, "\n".join(lines) + "\n")
    if not result.feasible:
        raise CommandFailed(f"{len(result.violations)} constraint violations")


def cmd_evaluate(args) -> None:
    cfg = ExperimentConfig.from_text(_read(args.config))
    if args.no_timing:
        cfg = dataclasses.replace(cfg, timing=False)
    report = run_experiment(cfg, jobs=args.jobs)
    _write(args.output, report.to_csv())
    if args.summary:
        Path(args.summary).write_text(report.summary())


def cmd_export_dot(args) -> None:
    _write(args.output, _graph(args.graph).to_dot())


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topoinfer",
                                description="Infer network topology from tunnel interference.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("generate", help="random network in the graph text format")
    s.add_argument("--n", type=int, required=True, help="Erdos-Renyi node count (overlays for tree/ring)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kind", choices=("random", "tree", "ring"), default="random")
    s.add_argument("--edge-prob", type=float, default=None, help="default 2/n")
    s.add_argument("--overlay-fraction", type=float, default=0.8)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("fmatrix", help="ground-truth interference matrix (CSV)")
    s.add_argument("-g", "--graph", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_fmatrix)

    s = sub.add_parser("infer-f", help="interference matrix estimated from simulated delays")
    s.add_argument("-g", "--graph", required=True)
    s.add_argument("--rate", type=float, default=TrafficConfig.rate)
    s.add_argument("--threshold", type=float, default=TrafficConfig.threshold)
    s.add_argument("--horizon", type=float, default=TrafficConfig.horizon)
    s.add_argument("--min-samples", type=int, default=TrafficConfig.min_samples)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_infer_f)

    s = sub.add_parser("recover", help="recover a topology from a matrix")
    s.add_argument("--algo", choices=sorted(ALGORITHMS), required=True)
    s.add_argument("-f", "--fmatrix", required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--diagnostics", help="write diagnostics as JSON here")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("bounds", help="lower/upper bounds on the number of links")
    s.add_argument("-f", "--fmatrix", required=True)
    s.add_argument("--exact", action="store_true", help="certified minimum clique cover")
    s.add_argument("--max-edges", type=int, default=bounds.DEFAULT_MAX_EDGES)
    s.add_argument("-g", "--graph", help="also check the minimality condition on this network")
    s.add_argument("--cover", help="write the clique cover as JSON here")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("ilp-export", help="write the integer program in LP format")
    s.add_argument("-f", "--fmatrix", required=True)
    s.add_argument("--nodes", type=int, default=None, help="node budget (overlays + routers)")
    s.add_argument("-o", "--output")
    s.add_argument("--encode", metavar="GRAPH", help="also encode this network as a solution")
    s.add_argument("--solution-out", help="where --encode writes (default solution.txt)")
    s.set_defaults(func=cmd_ilp_export)

    s = sub.add_parser("ilp-solve", help="solve the integer program exactly (toy sizes)")
    s.add_argument("-f", "--fmatrix", required=True)
    s.add_argument("--nodes", type=int, default=None)
    s.add_argument("--time-budget", type=float, default=60.0, help="seconds")
    s.add_argument("-o", "--output")
    s.add_argument("--solution-out")
    s.set_defaults(func=cmd_ilp_solve)

    s = sub.add_parser("verify", help="check a candidate network against a matrix")
    s.add_argument("-f", "--fmatrix", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("-s", "--solution", help="solver output (name=value lines)")
    src.add_argument("-g", "--graph", help="network routed on shortest paths")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("evaluate", help="run a recovery experiment")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--summary", help="write per-size aggregates here")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-timing", action="store_true", help="report runtime_ms as 0")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("export-dot", help="graph in Graphviz DOT")
    s.add_argument("-g", "--graph", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_export_dot)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except TopologyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except CommandFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
