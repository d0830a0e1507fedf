"""Command-line front end: validation, sweeps, and CSV serialization.

Output files are CSV with a '#'-prefixed metadata header that echoes the
tool version and the full configuration, so every file can be reproduced
from its own header.  Floats print as %.12e and sweep results are emitted
in input order, making runs byte-identical for identical inputs.

Exit codes: 0 success, 1 input error, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import conditions as vc
from .assembly import SpectralContext, SpectralPointError, green_function
from .continuum import (GeometryError, junction_smatrix, load_geometry, mode0_profile,
                        network_eigenvalues_2d, network_from_junction, tabulate_junction)
from .continuum.modes import ModeError
from .continuum.network2d import EigenSolveError
from .graph import GraphError, load_graph
from .spectral import SpectralError, find_eigenvalues, network_smatrix
from .threshold import (ThresholdError, build_threshold_problem, classify_limit,
                        eps_family, limiting_eigenvalues)


class UsageError(ValueError):
    """Command invoked against the wrong kind of input."""


def _fmt(x) -> str:
    return "%.12e" % float(x)


def _meta(args: argparse.Namespace, skip=("func", "out")) -> list[str]:
    lines = [f"# wgnet {__version__}", f"# command: {args.command}"]
    for key in sorted(vars(args)):
        if key in skip or key == "command" or callable(getattr(args, key)):
            continue
        lines.append(f"# {key} = {getattr(args, key)}")
    return lines


def _write_out(path: str | None, lines: list[str]):
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _parse_grid(spec: str) -> np.ndarray:
    """Grid spec: 'lo:hi:n' (inclusive linspace) or a comma list."""
    try:
        if ":" in spec:
            lo, hi, n = spec.split(":")
            grid = np.linspace(float(lo), float(hi), int(n))
        else:
            grid = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad grid spec '{spec}': {exc}") from exc
    if len(grid) == 0 or np.any(np.diff(grid) <= 0) and len(grid) > 1:
        raise UsageError(f"grid '{spec}' must be nonempty and strictly increasing")
    return grid


def _parse_point(spec: str) -> tuple[str, float]:
    try:
        edge, t = spec.rsplit(":", 1)
        return edge, float(t)
    except ValueError as exc:
        raise UsageError(f"bad point spec '{spec}' (want EDGE:COORD)") from exc


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    return int(os.environ.get("WGNET_WORKERS", "1"))


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------- commands ---------------------------

def cmd_validate(args) -> int:
    try:
        graph = load_graph(args.graph)
    except GraphError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    samples = np.linspace(graph.lambda0 - 2.0,
                          0.5 * (graph.lambda0 + graph.lambda1), 7)
    issues = []
    for v in graph.junctions:
        try:
            report = vc.validate_condition(
                v.condition, [s for s in samples if _evaluable(v.condition, s)],
                lambda0=graph.lambda0, lambda1=graph.lambda1)
        except vc.ConditionError as exc:
            issues.append(f"vertex '{v.id}': {exc}")
            continue
        if not report.passed:
            issues.append(
                f"vertex '{v.id}': condition deviates from its symmetry class "
                f"(unitarity {report.max_unitarity:.3e}, symmetry {report.max_symmetry:.3e}, "
                f"imag {report.max_imag:.3e}, orthogonality {report.max_orthogonality:.3e})")
    if issues:
        for line in issues:
            print(line, file=sys.stderr)
        return 1
    print(f"ok: {graph.n_finite} finite edges, {graph.n_leads} leads, "
          f"{len(graph.junctions)} junctions")
    return 0


def _evaluable(condition, lam) -> bool:
    if isinstance(condition, vc.TabulatedCondition):
        return condition.grid[0] <= lam <= condition.grid[-1]
    return True


def cmd_spectrum(args) -> int:
    graph = load_graph(args.graph)
    if not graph.is_bounded:
        print("graph has leads: its spectrum above the threshold is continuous; "
              "use smatrix", file=sys.stderr)
        return 2
    interval = None
    if args.lmin is not None or args.lmax is not None:
        interval = (args.lmin if args.lmin is not None else graph.lambda0,
                    args.lmax if args.lmax is not None else graph.lambda1)
    result = find_eigenvalues(graph, args.eps, interval, resolution=args.resolution)
    lines = _meta(args)
    lines.append("lambda,k,multiplicity,sigma_min")
    for ev in result:
        lines.append(f"{_fmt(ev.lam)},{_fmt(ev.k)},{ev.multiplicity},{_fmt(ev.sigma_min)}")
    _write_out(args.out, lines)
    return 0


def cmd_smatrix(args) -> int:
    graph = load_graph(args.graph)
    if graph.n_leads == 0:
        print("graph has no leads: use spectrum", file=sys.stderr)
        return 2
    grid = _parse_grid(args.lambda_grid)
    leads = [e.id for e in graph.leads]

    def one(lam):
        try:
            ctx = SpectralContext.for_graph(graph, lam, args.eps)
            return network_smatrix(graph, ctx)
        except SpectralPointError as exc:
            return exc

    results = _pmap(one, list(grid), _workers(args))
    lines = _meta(args)
    lines.append("# leads: " + ",".join(leads))
    header = ["lambda"]
    header += [f"re_s_{i}_{j},im_s_{i}_{j}" for i in leads for j in leads]
    header += ["unitarity", "symmetry", "flag"]
    lines.append(",".join(header))
    for lam, res in zip(grid, results):
        if isinstance(res, SpectralPointError):
            row = [_fmt(lam)] + ["nan"] * (2 * len(leads) ** 2 + 2)
            row.append(f"spectral_point(sigma_min={res.sigma_min:.3e})")
        else:
            row = [_fmt(lam)]
            for i in range(len(leads)):
                for j in range(len(leads)):
                    row += [_fmt(res.matrix[i, j].real), _fmt(res.matrix[i, j].imag)]
            row += [_fmt(res.unitarity), _fmt(res.symmetry), "ok"]
        lines.append(",".join(row))
    _write_out(args.out, lines)
    return 0


def cmd_green(args) -> int:
    graph = load_graph(args.graph)
    ctx = SpectralContext.for_graph(graph, args.lam, args.eps)
    source = _parse_point(args.source)
    targets = [_parse_point(t) for t in args.targets.split(";")]
    lines = _meta(args)
    lines.append("edge,t,re_g,im_g")
    for edge, t in targets:
        val = green_function(graph, ctx, source, (edge, t))
        lines.append(f"{edge},{_fmt(t)},{_fmt(val.real)},{_fmt(val.imag)}")
    _write_out(args.out, lines)
    return 0


def cmd_threshold(args) -> int:
    graph = load_graph(args.graph)
    problem = build_threshold_problem(graph, allow_extrapolation=args.extrapolate)
    report = classify_limit(problem)
    lines = _meta(args)
    for lab in report.junctions:
        lines.append(f"# junction {lab.vertex_id}: k={lab.k} of d={lab.degree} ({lab.label})")
    lines.append(f"# limiting problem: {report.overall}")

    if args.eps_list:
        eps_values = [float(v) for v in args.eps_list.split(",")]
        table = eps_family(graph, eps_values, args.count,
                           allow_extrapolation=args.extrapolate)
        for note in table.ambiguities:
            lines.append(f"# ambiguity: {note}")
        lines.append("j,mu_limit,eps,mu_eps,abs_err")
        for j in range(len(table.mu_limit)):
            for i, eps in enumerate(table.eps_values):
                lines.append(f"{j},{_fmt(table.mu_limit[j])},{_fmt(eps)},"
                             f"{_fmt(table.mu_eps[i, j])},"
                             f"{_fmt(abs(table.mu_eps[i, j] - table.mu_limit[j]))}")
    else:
        spectrum = limiting_eigenvalues(problem, args.count)
        lines.append("j,mu,multiplicity,sigma_min")
        for j, ev in enumerate(spectrum):
            lines.append(f"{j},{_fmt(ev.mu)},{ev.multiplicity},{_fmt(ev.sigma_min)}")
    _write_out(args.out, lines)
    return 0


def cmd_junction(args) -> int:
    geometry = load_geometry(args.geometry)
    grid = _parse_grid(args.lambda_grid)
    cond, extras = tabulate_junction(geometry, grid, h=args.h, n_modes=args.modes,
                                     path=args.out)
    worst_unit = max(e["unitarity"] for e in extras)
    worst_asym = max(e["asymmetry"] for e in extras)
    print(f"tabulated {len(grid)} matrices of degree {cond.degree} -> {args.out}")
    print(f"max unitarity deviation {worst_unit:.3e}, max asymmetry {worst_asym:.3e}")

    if args.profile_out:
        res = junction_smatrix(geometry, float(grid[-1]), args.h, args.modes)
        lines = _meta(args)
        lines.append("lead,t,re_c0,im_c0,residual")
        field = res.fields[0]
        for lead in res.lead_ids:
            prof = mode0_profile(field, lead)
            for t, c0, r in zip(prof.t, prof.c0, prof.residual):
                lines.append(f"{lead},{_fmt(t)},{_fmt(c0.real)},{_fmt(c0.imag)},{_fmt(r)}")
        _write_out(args.profile_out, lines)
    return 0


def cmd_converge(args) -> int:
    geometry = load_geometry(args.geometry)
    graph = load_graph(args.graph)
    if graph.n_leads or len(graph.junctions) != 1:
        raise UsageError("convergence study needs a bounded single-junction star graph")
    junction = graph.junctions[0]
    lead_ids = {l.id for l in geometry.leads}
    if set(junction.order) != lead_ids:
        raise UsageError(
            f"geometry leads {sorted(lead_ids)} must match the junction's edges "
            f"{sorted(junction.order)}")
    eps_values = [float(v) for v in args.eps_list.split(",")]
    h_ref = args.h_ref

    # one junction table at the reference resolution; matched-resolution runs
    # (h = ε·h_ref) then see the exact same discrete junction at every ε
    probe = junction_smatrix(geometry, graph.lambda0 + 1e-3 * (graph.lambda1 - graph.lambda0),
                             h_ref, args.modes)
    lam0_h = probe.lambda0_discrete
    total_len = sum(e.length for e in graph.finite_edges)
    mu_cap = (math.pi * (args.count + len(graph.edges) + 2) / total_len) ** 2
    k_nodes = np.linspace(1e-3, math.sqrt(mu_cap) * max(eps_values), args.table_size)
    lam_nodes = lam0_h + k_nodes ** 2
    cond, _ = tabulate_junction(geometry, lam_nodes, h_ref, args.modes)

    matched_graph = graph.with_conditions({junction.id: cond}, lambda0=lam0_h)
    raw_graph = graph.with_conditions({junction.id: cond})

    lines = _meta(args)
    lines.append(f"# lambda0_discrete = {_fmt(lam0_h)}")
    lines.append("eps,j,lambda_2d,residual_2d,lambda_graph,distance,"
                 "lambda_graph_raw,distance_raw,flag")
    lengths = {eid: graph.edge(eid).length for eid in junction.order}
    for eps in eps_values:
        net = network_from_junction(geometry, eps, lengths)
        pairs = network_eigenvalues_2d(net, eps, eps * h_ref, count=args.count + 4)
        window = (lam0_h, lam0_h + mu_cap * eps ** 2)
        graph_ev = find_eigenvalues(matched_graph, eps, window).flat()
        raw_window = (graph.lambda0, graph.lambda0 + mu_cap * eps ** 2)
        raw_ev = find_eigenvalues(raw_graph, eps, raw_window).flat()
        kept = 0
        for lam2d, res2d in pairs:
            if kept >= args.count:
                break
            if lam2d < lam0_h:
                lines.append(f"{_fmt(eps)},-,{_fmt(lam2d)},{_fmt(res2d)},nan,nan,nan,nan,"
                             "below_threshold(junction_state)")
                continue
            near = graph_ev[np.argmin(np.abs(graph_ev - lam2d))] if len(graph_ev) else math.nan
            near_raw = raw_ev[np.argmin(np.abs(raw_ev - lam2d))] if len(raw_ev) else math.nan
            lines.append(",".join([
                _fmt(eps), str(kept), _fmt(lam2d), _fmt(res2d),
                _fmt(near), _fmt(abs(lam2d - near)),
                _fmt(near_raw), _fmt(abs(lam2d - near_raw)), "ok"]))
            kept += 1
    _write_out(args.out, lines)
    return 0


# --------------------------- entry point ---------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgnet",
        description="Spectra, Green functions, and scattering matrices of "
                    "thin-waveguide networks and their metric-graph models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a graph file")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("spectrum", help="eigenvalues of a bounded graph in (λ0, λ1)")
    p.add_argument("graph")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lmin", type=float)
    p.add_argument("--lmax", type=float)
    p.add_argument("--resolution", type=float, default=2000.0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("smatrix", help="network scattering matrix over a λ grid")
    p.add_argument("graph")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lambda-grid", dest="lambda_grid", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_smatrix)

    p = sub.add_parser("green", help="Green function values at target points")
    p.add_argument("graph")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--source", required=True, metavar="EDGE:T")
    p.add_argument("--targets", required=True, metavar="EDGE:T[;EDGE:T...]")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("threshold", help="limiting eigenvalues near λ0 and ε-families")
    p.add_argument("graph")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--eps-list", dest="eps_list")
    p.add_argument("--extrapolate", action="store_true",
                   help="allow evaluating tabulated conditions below their grid")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("junction", help="tabulate a junction scattering matrix")
    p.add_argument("geometry")
    p.add_argument("--lambda-grid", dest="lambda_grid", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--profile-out", dest="profile_out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_junction)

    p = sub.add_parser("converge", help="2D network eigenvalues vs the graph model")
    p.add_argument("geometry", help="reference junction geometry (truncated leads)")
    p.add_argument("graph", help="bounded single-junction star graph")
    p.add_argument("--eps-list", dest="eps_list", required=True)
    p.add_argument("--h-ref", dest="h_ref", type=float, default=0.1)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--table-size", dest="table_size", type=int, default=25)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (GraphError, GeometryError, vc.ConditionError, ModeError,
            json.JSONDecodeError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (SpectralPointError, EigenSolveError, ThresholdError, SpectralError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
