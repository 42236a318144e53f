"""Command-line interface: tightspan, project, sparsify, quality, hard6.

All commands emit canonical JSON (sorted keys) so repeated runs with the same
arguments and seed are byte-identical.  Exit codes: 0 success, 1 property or
assertion failure, 2 input error.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from fractions import Fraction
from pathlib import Path

from .decompose import Decomposer, cost, contract, _SEED_MIX
from .flow import Demand, FlowError, quality_ratio
from .graphs import GraphError, project_graph
from .hard6 import generate, grid_snap, losses, directional_losses, planar_losses
from .metric import MetricError, as_fraction
from .textio import (TextFormatError, dump_graph, load_demand, load_graph,
                     load_metric)
from .tightspan import UnsupportedSizeError, enumerate_complex, project

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_INPUT = 2

_INPUT_ERRORS = (TextFormatError, MetricError, GraphError, FlowError, OSError,
                 UnsupportedSizeError, ValueError)


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        return
    def render(obj, indent=0):
        pad = "  " * indent
        if isinstance(obj, dict):
            for k in sorted(obj):
                v = obj[k]
                if isinstance(v, (dict, list)):
                    sys.stdout.write(f"{pad}{k}:\n")
                    render(v, indent + 1)
                else:
                    sys.stdout.write(f"{pad}{k}: {v}\n")
        elif isinstance(obj, list):
            for v in obj:
                if isinstance(v, (dict, list)):
                    render(v, indent + 1)
                else:
                    sys.stdout.write(f"{pad}- {v}\n")
    render(payload)


def _cmd_tightspan(args) -> int:
    m = load_metric(Path(args.metric).read_text())
    cx = enumerate_complex(m)
    _emit(cx.to_json_dict(), args.format)
    return EXIT_OK


def _cmd_project(args) -> int:
    m = load_metric(Path(args.metric).read_text())
    coords = [tok for tok in args.vector.replace(",", " ").split() if tok]
    x = m.vector([as_fraction(tok) for tok in coords])
    p = project(m, x)
    _emit({"terminals": list(m.terminals),
           "input": [str(x[t]) for t in m.terminals],
           "projected": [str(p[t]) for t in m.terminals]}, args.format)
    return EXIT_OK


def _cmd_sparsify(args) -> int:
    g = load_graph(Path(args.graph).read_text())
    if len(g.terminals) > 5:
        raise MetricError("sparsify supports at most 5 terminals")
    if args.samples < 1:
        raise MetricError("need at least one sample")
    emb = project_graph(g)
    dec = Decomposer(emb)
    best = None
    vols = []
    for i in range(args.samples):
        seed = (args.seed * _SEED_MIX + i) % (1 << 64)
        sol = dec.solution(seed)
        report = cost(emb, sol)
        vols.append(report.vol)
        if best is None or report.vol < best[1].vol:
            best = (sol, report)
    sol, report = best
    n = len(vols)
    mean = sum(vols, Fraction(0)) / n
    var = sum((float(v) - float(mean)) ** 2 for v in vols) / n
    stderr = (var / (n - 1)) ** 0.5 if n > 1 else 0.0
    sparsifier = contract(g, sol)
    payload = {
        "template": dec.template.tag,
        "solution": sol.to_json_dict(),
        "cost": report.to_json_dict(),
        "sparsifier": dump_graph(sparsifier),
        "monte_carlo": {
            "samples": n,
            "mean_vol": str(mean),
            "stderr": stderr,
            "opt": str(report.opt),
        },
        "seed": args.seed,
    }
    _emit(payload, args.format)
    return EXIT_OK


def _random_demand(names, rng) -> Demand:
    entries = {}
    pairs = [(t, u) for i, t in enumerate(names) for u in names[i + 1:]]
    chosen = rng.sample(pairs, rng.randint(1, len(pairs)))
    for t, u in chosen:
        entries[(t, u)] = Fraction(rng.randint(1, 8), rng.randint(1, 4))
    return Demand(entries)


def _cmd_quality(args) -> int:
    g = load_graph(Path(args.graph_g).read_text())
    h = load_graph(Path(args.graph_h).read_text())
    demands = [load_demand(Path(f).read_text()) for f in args.demands or []]
    if args.random_demands:
        if args.seed is None:
            raise MetricError("--random-demands requires --seed")
        rng = random.Random(args.seed)
        names = sorted(g.terminals)
        demands += [_random_demand(names, rng) for _ in range(args.random_demands)]
    if not demands:
        raise MetricError("no demands given (use --demands or --random-demands)")
    eps = as_fraction(args.epsilon)
    report = quality_ratio(g, h, demands, eps)
    _emit(report.to_json_dict(), args.format)
    return EXIT_OK


def _cmd_hard6(args) -> int:
    gamma = as_fraction(args.gamma)
    inst = generate(args.L, ave=args.ave, gamma=gamma)
    opt = inst.opt()
    bound = 90 * args.L * args.L
    payload = {
        "L": args.L,
        "vertices": len(inst.graph.vertices),
        "edges": len(inst.graph.edges),
        "paths": len(inst.all_paths()),
        "opt": str(opt),
        "opt_bound": str(bound) if not args.ave else None,
        "ave": args.ave,
    }
    if args.ave:
        payload["gamma"] = str(gamma)
        payload["demand"] = {f"{t},{u}": str(v)
                             for (t, u), v in sorted(inst.ave.demand.entries.items())}
    diagnostics = None
    if args.snap_grid is not None:
        sol = grid_snap(inst, args.snap_grid)
        rep = losses(inst, sol)
        dr = directional_losses(inst, sol)
        pr = planar_losses(inst, sol)
        diagnostics = {
            "snap_grid": args.snap_grid,
            "image_size": sol.image_size(),
            "total_loss": str(rep.total),
            "aggregates": {label: {"lhs": str(l), "rhs": str(r)}
                           for label, l, r in dr.aggregates},
            "x_bounds_ok": dr.x_bounds_ok,
            "step_bound_failures": len(pr.step_bound_failures),
            "transfer_bound_failures": len(pr.transfer_bound_failures),
            "planar_bound": {"lhs": str(pr.bound_lhs), "rhs": str(pr.bound_rhs)},
            "line_table": {f"{jy},{kz}": str(v)
                           for (jy, kz), v in sorted(pr.table.items())},
            "path_losses": {p.name: str(p.loss) for p in rep.per_path},
            "vertex_losses": {
                vid: {"x": str(pr.l_x.get(vid, 0)), "y": str(pr.l_y.get(vid, 0)),
                      "z1": str(pr.l_z1.get(vid, 0)), "z2": str(pr.l_z2.get(vid, 0))}
                for vid in sorted(set(pr.l_x) | set(pr.l_y)
                                  | set(pr.l_z1) | set(pr.l_z2))
            },
        }
        payload["diagnostics"] = {
            "snap_grid": args.snap_grid,
            "total_loss": str(rep.total),
            "image_size": sol.image_size(),
        }
    if args.out:
        outdir = Path(args.out)
        graph_text = dump_graph(inst.graph)
        sidecar = {
            "L": args.L,
            "gamma": str(gamma) if args.ave else None,
            "demand": ({f"{t},{u}": str(v)
                        for (t, u), v in sorted(inst.ave.demand.entries.items())}
                       if args.ave else None),
            "paths": [{
                "name": p.name, "group": p.group, "i": p.i, "j": p.j,
                "source": p.source, "sink": p.sink,
                "capacity": str(p.capacity),
                "direction": p.direction,
                "vertices": list(p.vertex_ids),
            } for p in inst.all_paths()],
        }
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "graph.txt").write_text(graph_text)
        (outdir / "instance.json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
        if diagnostics is not None:
            (outdir / "diagnostics.json").write_text(
                json.dumps(diagnostics, sort_keys=True, indent=2) + "\n")
        payload["out"] = str(outdir)
    _emit(payload, args.format)
    if not args.ave and opt > bound:
        sys.stderr.write("property failure: opt exceeds 90 L^2\n")
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spanflow")
    ap.add_argument("--format", choices=("json", "text"), default="json")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tightspan", help="enumerate the cell complex of a metric")
    p.add_argument("metric")
    p.set_defaults(func=_cmd_tightspan)

    p = sub.add_parser("project", help="project a vector onto the tight span")
    p.add_argument("metric")
    p.add_argument("vector", help="comma-separated rationals in terminal order")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("sparsify", help="sample decompositions and contract the best")
    p.add_argument("graph")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=_cmd_sparsify)

    p = sub.add_parser("quality", help="congestion ratios between two graphs")
    p.add_argument("graph_g")
    p.add_argument("graph_h")
    p.add_argument("--demands", action="append", help="demand file (repeatable)")
    p.add_argument("--random-demands", type=int, default=0)
    p.add_argument("--epsilon", default="1/100")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_quality)

    p = sub.add_parser("hard6", help="generate the 6-terminal hard instance")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--ave", action="store_true")
    p.add_argument("--gamma", default="1/1000000000000000")
    p.add_argument("--snap-grid", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_hard6)
    return ap


def _check_thread_env() -> None:
    # results are seed-indexed and never depend on the worker count; the
    # variable is validated so misconfiguration fails fast
    raw = os.environ.get("SPANFLOW_THREADS")
    if raw is None:
        return
    try:
        threads = int(raw)
    except ValueError:
        raise MetricError(f"SPANFLOW_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise MetricError("SPANFLOW_THREADS must be at least 1")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _check_thread_env()
        return args.func(args)
    except _INPUT_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except AssertionError as exc:
        sys.stderr.write(f"property failure: {exc}\n")
        return EXIT_PROPERTY


if __name__ == "__main__":
    raise SystemExit(main())
