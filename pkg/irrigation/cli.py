import argparse
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import __version__
from .caching import CacheManager
from .config import load_config
from .construct import DyadicBuilder
from .energy import CSV_HEADER, subsystem_equipartition, total_energy
from .errors import IrrigationError
from .graph_builder import NetworkXBuilder
from .measure_core import boundary_measure, slice_flow, validate_flow
from .measure_core.serialization import (atomic_write_text, dumps, load_flow, load_measure,
                                         save_csv, save_flow)
from .optimizer import (SWEEP_CSV_HEADER, TRACE_CSV_HEADER, Constraints, OptimizerConfig,
                        TopologySearch, first_variation_residual, optimize_positions, rt_sweep,
                        shrink_competitor_test)
from .potential import SHELL_CSV_HEADER, RegularizedKernelSpec, holder_quotient, sample_holder_pairs
from .regularity import CURVE_CSV_HEADER, RegularityAnalyzer
from .transport import bb_gap, plan_to_csv, wasserstein2

logger = logging.getLogger("irrigation")

EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_VIOLATION = 2
EXIT_NOT_CONVERGED = 3

BB_GAP_TOL = 1e-9
SPLIT_TOL = 1e-10
EQUIPARTITION_RTOL = 1e-6
SHRINK_RTOL = 1e-6
MAX_BB_INTERVALS = 50


class InvalidInput(IrrigationError):
    """Input that parses but fails validation outside `verify`."""


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _write_manifest(args, config: Dict[str, Any], inputs: List[str], outputs: List[str],
                    started: float) -> None:
    manifest = {
        "command": args.command,
        "inputs": inputs,
        "outputs": outputs,
        "config": config,
        "seed": config["optimizer"]["seed"],
        "version": __version__,
        "wall_time": time.time() - started,
    }
    atomic_write_text(args.output + ".manifest.json", dumps(manifest))


def _load_valid_flow(path: str):
    flow = load_flow(path)
    report = validate_flow(flow)
    if not report.ok:
        raise InvalidInput(f"{path} is not a valid flow: "
                           + "; ".join(v.describe() for v in report.violations))
    return flow


def _export(flow, args, outputs: List[str]) -> None:
    builder = NetworkXBuilder()
    if args.export_graph:
        path = f"{_stem(args.output)}.{args.export_graph}"
        builder.save_graph(builder.build_graph(flow), path, format=args.export_graph)
        outputs.append(path)
        print(f"Graph exported to {path}")
    if args.visualize:
        path = f"{_stem(args.output)}_flow.png"
        builder.visualize_flow(flow, path)
        outputs.append(path)
        print(f"Visualization saved to {path}")


def _apply_overrides(config: Dict[str, Any], args) -> Dict[str, Any]:
    opt = config["optimizer"]
    for flag, key in (("max_iters", "max_iters"), ("grad_tol", "grad_tol"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            opt[key] = value
    if getattr(args, "topology", False):
        opt["topology_moves"] = True
    construct = config["construct"]
    if getattr(args, "levels", None) is not None:
        construct["levels"] = args.levels
    if getattr(args, "time_split", None):
        construct["time_split"] = args.time_split
    if getattr(args, "ratio", None) is not None:
        construct["geometric_ratio"] = args.ratio
    if getattr(args, "epsilon", None) is not None:
        config["sweep"]["epsilon"] = args.epsilon
    if getattr(args, "alpha", None) is not None:
        config["analysis"]["alpha"] = args.alpha
    if getattr(args, "radii", None):
        config["analysis"]["radii"] = args.radii
    if getattr(args, "cache_dir", None):
        config["cache"]["enabled"] = True
        config["cache"]["cache_dir"] = args.cache_dir
    return config


# --- commands ----------------------------------------------------------------


def cmd_construct(args, config, inputs, outputs) -> int:
    builder = DyadicBuilder(config["construct"])
    if args.square_to_dirac:
        flow = builder.square_to_dirac()
    else:
        if not (args.source and args.target):
            raise InvalidInput("construct needs --square-to-dirac or --source and --target")
        inputs += [args.source, args.target]
        eps = args.epsilon if args.epsilon is not None else 0.0
        flow = builder.interpolate(load_measure(args.source), load_measure(args.target),
                                   T=args.T[0] if args.T else 1.0,
                                   R=args.R[0] if args.R else 1.0, eps=eps)
    save_flow(flow, args.output)
    outputs.append(args.output)
    print(f"Saved flow with {flow.n_nodes} nodes and {flow.n_edges} edges to {args.output}")
    _export(flow, args, outputs)
    return EXIT_OK


def cmd_evaluate(args, config, inputs, outputs) -> int:
    inputs.append(args.input)
    flow = _load_valid_flow(args.input)
    spec = RegularizedKernelSpec.from_dict(config["potential"])
    breakdown = total_energy(flow, spec)
    save_csv(args.output, CSV_HEADER, [breakdown.as_row()])
    outputs.append(args.output)
    print(f"P = {breakdown.P!r}  E = {breakdown.E!r}  I = {breakdown.I!r}")
    print(f"Total energy {breakdown.total!r} written to {args.output}")
    return EXIT_OK


def _constraints(args) -> Constraints:
    names = [name for flag, name in (("fix_boundary", "fix-boundary"), ("fix_root", "fix-root"),
                                     ("mass_simplex", "mass-simplex"),
                                     ("zero_barycenter", "zero-barycenter"))
             if getattr(args, flag)]
    if args.box is not None:
        names.append("box")
    return Constraints.from_names(names, box_half_width=args.box)


def cmd_optimize(args, config, inputs, outputs) -> int:
    inputs.append(args.input)
    flow = _load_valid_flow(args.input)
    cfg = OptimizerConfig.from_dict(config["optimizer"])
    spec = RegularizedKernelSpec.from_dict(config["potential"])
    constraints = _constraints(args)
    if cfg.topology_moves:
        result, trace = TopologySearch(cfg, constraints, spec).run(flow)
    else:
        result, trace = optimize_positions(flow, cfg, constraints, spec)
    save_flow(result, args.output)
    outputs.append(args.output)
    trace_path = args.trace or f"{_stem(args.output)}.trace.csv"
    save_csv(trace_path, TRACE_CSV_HEADER, trace.csv_rows())
    outputs.append(trace_path)
    final = trace.final
    print(f"Optimized flow with 𝓔 = {final.total!r} after {trace.iterations} iterations "
          f"saved to {args.output}")
    _export(result, args, outputs)
    if not trace.converged:
        print(f"Warning: not converged, projected gradient {final.grad_norm:.3e} "
              f"> {cfg.grad_tol:.1e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args, config, inputs, outputs) -> int:
    sweep = config["sweep"]
    R_list = args.R or sweep["R"]
    T_list = args.T or sweep["T"]
    leaves = args.leaves or int(sweep["leaves"])
    cache = CacheManager.from_config(config["cache"])
    table = rt_sweep(R_list, T_list, leaves, config, cache, progress=args.verbose)
    save_csv(args.output, SWEEP_CSV_HEADER, table.csv_rows())
    outputs.append(args.output)
    diagnostics_path = f"{_stem(args.output)}.diagnostics.json"
    atomic_write_text(diagnostics_path, dumps({
        "monotone": table.is_monotone(),
        "stabilization_gap": table.stabilization_gap(),
        "cells": [dict(R=row.R, T=row.T, **row.diagnostics.to_dict())
                  for row in table.rows if row.diagnostics is not None],
    }))
    outputs.append(diagnostics_path)
    for row in table.rows:
        print(f"e({row.R:g}, {row.T:g}) = {row.e!r}  [{row.seed_of_best}]")
    print(f"Sweep table written to {args.output}")
    return EXIT_OK


def cmd_analyze(args, config, inputs, outputs) -> int:
    inputs.append(args.input)
    flow = _load_valid_flow(args.input)
    m = boundary_measure(flow)
    analysis = config["analysis"]
    report = RegularityAnalyzer(analysis).analyze(m)
    stem = _stem(args.output)
    result = {"regularity": report.to_dict()}

    alpha = float(analysis.get("alpha", 2.0))
    radii = np.asarray(report.radii)
    if 1.0 < alpha <= 2.0:
        spec = RegularizedKernelSpec.from_dict(config["potential"])
        half_width = max(0.5 * m.diameter, flow.eps, 1e-6)
        pairs = sample_holder_pairs(m.barycenter(), half_width,
                                    shells=int(analysis.get("holder_shells", 11)),
                                    per_shell=int(analysis.get("holder_pairs_per_shell", 64)),
                                    seed=config["optimizer"]["seed"])
        M = float(np.max(np.asarray(report.masses) / radii ** alpha))
        holder = holder_quotient(m, alpha, pairs, spec, ahlfors_M=M, r_star=float(radii.max()))
        result["holder"] = holder.to_dict()
        save_csv(f"{stem}.holder.csv", SHELL_CSV_HEADER, holder.shell_rows())
        outputs.append(f"{stem}.holder.csv")
    save_csv(f"{stem}.curve.csv", CURVE_CSV_HEADER, report.curve_rows())
    outputs.append(f"{stem}.curve.csv")
    atomic_write_text(args.output, dumps(result))
    outputs.append(args.output)
    fitted = "n/a" if report.fitted_alpha is None else f"{report.fitted_alpha:.4f}"
    print(f"Fitted dimension {fitted} over {len(m)} atoms; report written to {args.output}")
    return EXIT_OK


def _bb_intervals(flow) -> List[tuple]:
    grid = flow.breakpoints()
    intervals = list(zip(grid[:-1], grid[1:]))[:MAX_BB_INTERVALS]
    if len(grid) > 2:
        intervals.append((grid[0], grid[-1]))
    return intervals


def verify_flow(flow, config: Dict[str, Any], expect_minimizer: bool = False,
                lam: float = 0.5) -> Dict[str, Any]:
    """
    Run every invariant check on a flow.

    Returns:
        Mapping with the individual checks and a `violations` list; minimizer
        contracts only count as violations with expect_minimizer
    """
    violations: List[str] = []
    report: Dict[str, Any] = {"violations": violations}
    validation = validate_flow(flow)
    report["validation"] = validation.to_dict()
    violations += [v.describe() for v in validation.violations]
    if not validation.ok or flow.n_edges == 0:
        return report

    gaps = []
    for a, b in _bb_intervals(flow):
        try:
            gap = bb_gap(flow, float(a), float(b))
        except IrrigationError as e:
            logger.warning("bb_gap on (%g, %g) skipped: %s", a, b, e)
            continue
        gaps.append([float(a), float(b), gap])
        if gap < -BB_GAP_TOL:
            violations.append(f"bb_gap {gap:.3e} on ({a:g}, {b:g})")
    report["bb_gaps"] = gaps

    spec = RegularizedKernelSpec.from_dict(config["potential"])
    energy = total_energy(flow, spec)
    split = abs(energy.I - (energy.P + energy.E))
    report["energy"] = energy.to_dict()
    if split > SPLIT_TOL * (1.0 + abs(energy.I)):
        violations.append(f"I - (P + E) = {split:.3e}")

    equipartition = subsystem_equipartition(flow)
    report["equipartition"] = [[r.node_id, r.time, r.residual, r.internal_energy]
                               for r in equipartition]
    rooted_tree = flow.rooted and flow.is_in_forest and len(flow.roots) == 1
    if rooted_tree:
        stats = first_variation_residual(flow, spec)
        report["first_variation"] = stats.to_dict()
        shrink = {}
        for row in np.flatnonzero((flow.in_degree > 0) & (flow.out_degree > 0)):
            node_id = int(flow.node_ids[row])
            shrink[node_id] = shrink_competitor_test(flow, node_id, lam, spec).to_dict()
        report["shrink"] = [shrink[k] for k in sorted(shrink)]
    if expect_minimizer:
        for r in equipartition:
            if r.residual > EQUIPARTITION_RTOL * max(abs(r.internal_energy), 1e-300):
                violations.append(f"equipartition Λ = {r.residual:.3e} at node {r.node_id}")
        # competitors move the boundary, which ε = 0 keeps fixed
        if rooted_tree and flow.eps > 0.0:
            if stats.fires():
                violations.append(f"first variation cv = {stats.cv:.3e}")
            for entry in report["shrink"]:
                if entry["gap"] < -SHRINK_RTOL * abs(entry["energy"]):
                    violations.append(f"shrink gap {entry['gap']:.3e} at node {entry['node_id']}")
    return report


def _export_plan(flow, path: str) -> None:
    _, plan = wasserstein2(slice_flow(flow, flow.t_start), slice_flow(flow, flow.horizon))
    plan_to_csv(plan, path)
    print(f"Transport plan of the end slices written to {path}")


def cmd_verify(args, config, inputs, outputs) -> int:
    inputs.append(args.input)
    flow = load_flow(args.input)
    report = verify_flow(flow, config, args.expect_minimizer, args.lam)
    atomic_write_text(args.output, dumps(report))
    outputs.append(args.output)
    if args.export_plan and "bb_gaps" in report:
        _export_plan(flow, args.export_plan)
        outputs.append(args.export_plan)
    if report["violations"]:
        for v in report["violations"]:
            print(f"✗ {v}")
        print(f"{len(report['violations'])} violation(s); report written to {args.output}")
        return EXIT_VIOLATION
    print(f"✓ All checks passed; report written to {args.output}")
    return EXIT_OK


COMMANDS = {
    "construct": cmd_construct,
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irrigation",
        description="Build, optimize and verify branched-transport flows")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file overriding the default configuration")
    common.add_argument("--verbose", action="store_true", help="Log progress")
    common.add_argument("--seed", type=int, help="Seed of every random choice")
    common.add_argument("--output", "-o", help="Output file")
    graph = argparse.ArgumentParser(add_help=False)
    graph.add_argument("--export-graph", choices=["gexf", "graphml", "gml"],
                       help="Also export the flow as a graph file")
    graph.add_argument("--visualize", action="store_true", help="Draw the flow as PNG")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common, graph], help="Emit a constructed flow")
    p.add_argument("--square-to-dirac", action="store_true",
                   help="Irrigate the unit square from δ_0")
    p.add_argument("--source", help="Measure JSON of the initial slice")
    p.add_argument("--target", help="Measure JSON of the final slice")
    p.add_argument("--levels", type=int, help="Dyadic refinement depth")
    p.add_argument("--time-split", choices=["geometric", "uniform"])
    p.add_argument("--ratio", type=float, help="Geometric time split ratio")
    p.add_argument("--R", type=_floats, help="Square side")
    p.add_argument("--T", type=_floats, help="Horizon")
    p.add_argument("--epsilon", type=float, help="Leaf radius")

    p = sub.add_parser("evaluate", parents=[common], help="Energy breakdown of a flow")
    p.add_argument("input")

    p = sub.add_parser("optimize", parents=[common, graph], help="Minimize 𝓔 over a flow")
    p.add_argument("input")
    p.add_argument("--fix-boundary", action="store_true")
    p.add_argument("--fix-root", action="store_true")
    p.add_argument("--mass-simplex", action="store_true")
    p.add_argument("--zero-barycenter", action="store_true")
    p.add_argument("--box", type=float, help="Half width of the position box")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--topology", action="store_true", help="Run the topology search")
    p.add_argument("--trace", help="Trace CSV path (default <output>.trace.csv)")

    p = sub.add_parser("sweep", parents=[common], help="Tabulate e(R, T)")
    p.add_argument("--R", type=_floats, help="Comma separated square sides")
    p.add_argument("--T", type=_floats, help="Comma separated horizons")
    p.add_argument("--leaves", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--cache-dir", help="Cache solved cells in this directory")

    p = sub.add_parser("analyze", parents=[common], help="Regularity of a flow's boundary measure")
    p.add_argument("input")
    p.add_argument("--alpha", type=float)
    p.add_argument("--radii", type=_floats, help="Comma separated ball radii")

    p = sub.add_parser("verify", parents=[common], help="Check every invariant of a flow")
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="Shrink factor of the competitor test")
    p.add_argument("--expect-minimizer", action="store_true",
                   help="Treat minimizer contracts as violations")
    p.add_argument("--export-plan", metavar="CSV",
                   help="Write the optimal plan between the first and last slice")
    return parser


def _default_output(args) -> str:
    if args.command in ("evaluate", "optimize", "analyze", "verify"):
        suffix = {"evaluate": ".energy.csv", "optimize": ".opt.json",
                  "analyze": ".analysis.json", "verify": ".verify.json"}[args.command]
        return _stem(args.input) + suffix
    return {"construct": "flow.json", "sweep": "sweep.csv"}[args.command]


def main(argv: Optional[List[str]] = None) -> int:
    """Command line interface for irrigation flows."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.output = args.output or _default_output(args)
    started = time.time()
    inputs: List[str] = []
    outputs: List[str] = []
    try:
        config = _apply_overrides(load_config(args.config), args)
        if args.config:
            inputs.append(args.config)
        status = COMMANDS[args.command](args, config, inputs, outputs)
    except (ValueError, OSError, yaml.YAMLError) as e:
        # IrrigationError is a ValueError
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_MALFORMED
    _write_manifest(args, config, inputs, outputs, started)
    return status


if __name__ == "__main__":
    sys.exit(main())
