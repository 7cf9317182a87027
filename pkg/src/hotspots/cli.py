"""Command-line interface: solve, verify, scan and render.

Each subcommand reads optional settings from a JSON config (``--config``);
any flag given on the command line overrides the config value. Suites run
their cases in parallel processes, at most ``HOTSPOTS_THREADS`` at a time.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import __version__, verify
from .analysis import directional_field, find_critical_points, nodal_graph, recover_gradient
from .eigensolve import read_solution_csv, solve, write_solution_csv
from .geometry import (GraphFunction, PlanarDomainSpec, classify_vertices, graph_domain_from_function,
                       triangle_spec)
from .mesh import read_mesh_csv, write_mesh_csv
from .plotting import render_solution_svg, render_values_svg
from .schemas import validate
from .specfun import DerivativeFieldSpec, FitError

log = logging.getLogger("hotspots")

DEFAULTS = {"h": 1 / 32, "tol": 1e-10, "nmax": 6, "out": "hotspots-out", "seed": 0, "budget": 20,
            "field": "dx", "family": "convex_quad", "levels": 4}
FIELDS = {"dx": 0.0, "dy": np.pi / 2}


class CliError(Exception):
    """A user-facing error; printed without a traceback, exit code 2."""


# -- config ------------------------------------------------------------------------------

def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must be a JSON object")
    return cfg


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the JSON config and explicit flags, in that order."""
    cfg = dict(DEFAULTS)
    cfg.update(load_config(getattr(args, "config", None)))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func", "verbose"):
            cfg[k] = v
    h, tol = float(cfg["h"]), float(cfg["tol"])
    if not h > 0:
        raise CliError(f"h must be positive, got {h}")
    if not 0 < tol <= 1e-2:
        raise CliError(f"tol must lie in (0, 1e-2], got {tol}")
    cfg["h"], cfg["tol"] = h, tol
    return cfg


def max_workers() -> int:
    cap = os.environ.get("HOTSPOTS_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise CliError(f"HOTSPOTS_THREADS must be an integer, got {cap!r}") from exc
    return n


def _out_dir(cfg: dict) -> str:
    out = cfg["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc.strerror}") from exc
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out} is not writable")
    return out


def _write_json(doc: dict, path: str, schema: str) -> None:
    validate(doc, schema)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_spec(path: str) -> PlanarDomainSpec:
    try:
        return PlanarDomainSpec.from_json(path)
    except OSError as exc:
        raise CliError(f"cannot read domain {path}: {exc.strerror}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid domain file {path}: {exc}") from exc


# -- solve / render ------------------------------------------------------------------------

def _field_spec(name: str) -> Optional[DerivativeFieldSpec]:
    if name == "none":
        return None
    if name in FIELDS:
        return DerivativeFieldSpec.constant(FIELDS[name], name)
    try:
        return DerivativeFieldSpec.constant(float(name), f"angle {name}")
    except ValueError as exc:
        raise CliError(f"unknown field {name!r}; use dx, dy, none or an angle in radians") from exc


def _nodal_arcs(g, mesh, X):
    if X is None:
        return []
    ng = nodal_graph(directional_field(g, X), mesh, scale=g.magnitude_max)
    return [a.points for a in ng.arcs]


def cmd_solve(cfg: dict) -> int:
    if not cfg.get("domain"):
        raise CliError("solve needs a domain file")
    spec = _load_spec(cfg["domain"])
    out = _out_dir(cfg)
    sol = solve(spec, cfg["h"], tol=cfg["tol"])
    mesh, eig = sol.mesh, sol.eig
    g = recover_gradient(eig, mesh, enforce_bc=True)
    search = find_critical_points(eig, mesh, g)
    files = {"spec": "spec.json", "solution": "solution.csv", "svg": "solution.svg", "fits": "fits.json"}
    spec.to_json(os.path.join(out, files["spec"]))
    for k, p in write_mesh_csv(mesh, out).items():
        files[k] = os.path.basename(p)
    write_solution_csv(mesh, eig, os.path.join(out, files["solution"]))
    fits = []
    for v in classify_vertices(spec):
        try:
            fits.append(verify.fit_with_fallback(eig, mesh, v, int(cfg["nmax"])).to_dict())
        except FitError as exc:
            log.info("vertex %d: fit skipped: %s", v.index, exc)
            fits.append({"vertex": v.index, "error": str(exc)})
    _write_json({"vertices": fits}, os.path.join(out, files["fits"]), "fit_report")
    summary = {**eig.summary(), "h": cfg["h"], "tol": cfg["tol"], "n_nodes": int(mesh.n_nodes),
               "n_triangles": int(len(mesh.triangles)), "spec": spec.to_dict(),
               "critical_search": search.to_dict(), "files": files}
    _write_json(verify._jsonable(summary), os.path.join(out, "summary.json"), "solution_summary")
    X = _field_spec(cfg["field"])
    render_solution_svg(mesh.nodes, mesh.triangles, eig.u, os.path.join(out, files["svg"]),
                        mesh.boundary_edges, list(mesh.edge_condition),
                        [p.to_dict() for p in search.points], _nodal_arcs(g, mesh, X),
                        title=f"lambda1 = {eig.lambda1:.6g}")
    print(f"lambda1 = {eig.lambda1:.10g}  residual = {eig.residual:.2e}  "
          f"critical points = {len(search.points)}  -> {out}")
    return 0


def cmd_render(cfg: dict) -> int:
    src = cfg.get("solution_dir")
    if not src or not os.path.isdir(src):
        raise CliError(f"solution directory {src!r} not found")
    spec_path = os.path.join(src, "spec.json")
    spec = _load_spec(spec_path) if os.path.exists(spec_path) else None
    try:
        mesh = read_mesh_csv(src, spec=spec)
        ids, xy, u = read_solution_csv(os.path.join(src, "solution.csv"))
    except FileNotFoundError as exc:
        raise CliError(f"missing input file {exc.filename}") from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if len(u) != mesh.n_nodes or not np.array_equal(ids, np.arange(mesh.n_nodes)):
        raise CliError("solution.csv does not match nodes.csv")
    critical = []
    summ = os.path.join(src, "summary.json")
    if os.path.exists(summ):
        with open(summ) as fh:
            critical = json.load(fh).get("critical_search", {}).get("points", [])
    X = _field_spec(cfg["field"])
    arcs = _nodal_arcs(recover_gradient(u, mesh, enforce_bc=spec is not None), mesh, X) if X else []
    target = cfg.get("svg") or os.path.join(src, "render.svg")
    render_solution_svg(mesh.nodes, mesh.triangles, u, target, mesh.boundary_edges,
                        list(mesh.edge_condition), critical, arcs)
    print(target)
    return 0


# -- verification suites -------------------------------------------------------------------

def _run_case(job):
    kind, case_id, payload, h, tol = job
    if kind == "triangle":
        return verify.verify_triangle(payload, h, case_id, tol)
    return verify.verify_graph_domain(payload, h, case_id, tol)


def _run_jobs(jobs: list) -> list:
    n = min(max_workers(), len(jobs))
    if n <= 1:
        return [_run_case(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_run_case, jobs))


def _suite_doc(name: str, reports: list, h: float) -> dict:
    failed = sum(r.status() == verify.FAIL for r in reports)
    incon = sum(r.status() == verify.INCONCLUSIVE for r in reports)
    status = verify.FAIL if failed else (verify.INCONCLUSIVE if incon else verify.PASS)
    return {"suite": name, "status": status, "n_cases": len(reports), "n_failed": failed,
            "n_inconclusive": incon, "h": h, "cases": [r.to_dict() for r in reports]}


def _finish_suite(name: str, reports: list, cfg: dict, table_rows: Optional[list] = None) -> int:
    out = _out_dir(cfg)
    doc = verify._jsonable(_suite_doc(name, reports, cfg["h"]))
    _write_json(doc, os.path.join(out, f"{name}_report.json"), "suite_report")
    text = "\n".join(r.text_summary() for r in reports)
    if table_rows:
        text += "\n\n" + "\n".join(table_rows)
    text += f"\n\n{name}: {doc['status']} ({doc['n_cases']} cases, {doc['n_failed']} failed, " \
            f"{doc['n_inconclusive']} inconclusive)\n"
    with open(os.path.join(out, f"{name}_report.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    return 0 if doc["n_failed"] == 0 else 1


def triangle_cases(cfg: dict) -> list:
    if "cases" not in cfg:
        return verify.triangle_suite()
    cases = []
    for i, c in enumerate(cfg["cases"]):
        try:
            p0, p1, p2 = c["corners"]
            cases.append((c.get("id", f"triangle-{i}"), triangle_spec(p0, p1, p2, c["dirichlet"])[0]))
        except (KeyError, ValueError, TypeError) as exc:
            raise CliError(f"bad triangle case {i}: {exc}") from exc
    return cases


def graph_cases(cfg: dict) -> list:
    if "cases" not in cfg:
        return verify.graph_suite()
    cases = []
    for i, c in enumerate(cfg["cases"]):
        try:
            cases.append((c.get("id", f"graph-{i}"), GraphFunction(c["x"], c["y"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise CliError(f"bad graph case {i}: {exc}") from exc
    return cases


def cmd_verify_triangle(cfg: dict) -> int:
    cases = triangle_cases(cfg)
    if not cases:
        raise CliError("no cases")
    reports = _run_jobs([("triangle", cid, s, cfg["h"], cfg["tol"]) for cid, s in cases])
    return _finish_suite("triangle", reports, cfg)


def cmd_verify_graph(cfg: dict) -> int:
    cases = graph_cases(cfg)
    if not cases:
        raise CliError("no cases")
    reports = _run_jobs([("graph", cid, f, cfg["h"], cfg["tol"]) for cid, f in cases])
    rows = [f"{'case':<20} {'status':>12} {'k':>3} {'n':>3} {'extrema':>8} {'bound':>6}"]
    for r in reports:
        c = r.info.get("count")
        if c:
            rows.append(f"{r.case_id:<20} {r.status():>12} {c['k']:>3} {c['bound_n']:>3} "
                        f"{c['extrema_count']:>8} {c['extrema_bound']:>6}")
        else:
            rows.append(f"{r.case_id:<20} {r.status():>12} {'-':>3} {'-':>3} {'-':>8} {'-':>6}")
    return _finish_suite("graph", reports, cfg, rows)


def cmd_approx(cfg: dict) -> int:
    n_levels = int(cfg["levels"])
    if "f" in cfg:
        try:
            levels = verify.nested_levels(GraphFunction(cfg["f"]["x"], cfg["f"]["y"]), n_levels)
        except (KeyError, ValueError, TypeError) as exc:
            raise CliError(f"bad approximation function: {exc}") from exc
    else:
        levels = verify.default_approximation_levels(n_levels)
    shortest = min(graph_domain_from_function(f).shortest_edge for f in levels)
    h = min(cfg["h"], shortest)
    if h < cfg["h"]:
        log.warning("h lowered to %.4g, the shortest boundary edge of the finest level", h)
    rep = verify.domain_approximation_experiment(levels, h, tol=min(cfg["tol"], 1e-12))
    out = _out_dir(cfg)
    lams = rep.info["lambdas"]
    render_values_svg(list(range(len(lams))), {"lambda1": lams}, os.path.join(out, "approximation.svg"),
                      "level", "lambda1", "first eigenvalue along the exhaustion")
    rep.artifacts["svg"] = "approximation.svg"
    return _finish_suite("approximation", [rep], cfg)


def cmd_scan(cfg: dict) -> int:
    family = cfg["family"]
    if family not in verify.FAMILY_DIMS:
        raise CliError(f"unknown family {family!r}; choose from {sorted(verify.FAMILY_DIMS)}")
    res = verify.scan_conjecture(family, int(cfg["budget"]), cfg["h"], int(cfg["seed"]))
    out = _out_dir(cfg)
    _write_json(verify._jsonable(res), os.path.join(out, f"scan_{family}.json"), "scan")
    print(f"{family}: {res['budget']} samples, {res['n_candidates']} interior-extremum candidates, "
          f"{res['n_errors']} errors")
    # candidates are leads for refinement studies, not failures
    return 0


# -- parser --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hotspots", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, budget=False):
        sp.add_argument("--config", help="JSON config; flags override its fields")
        sp.add_argument("--h", type=float, help="target mesh size")
        sp.add_argument("--tol", type=float, help="eigen-residual tolerance in (0, 1e-2]")
        sp.add_argument("--nmax", type=int, help="highest expansion index in vertex fits")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="scan seed")
        if budget:
            sp.add_argument("--budget", type=int, help="number of scan samples")
        sp.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("solve", help="solve one domain and write CSV, JSON and SVG")
    s.add_argument("domain", nargs="?", help="domain JSON file")
    s.add_argument("--field", help="nodal overlay: dx, dy, none or an angle in radians")
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("verify-triangle", help="run the triangle suite")
    common(s)
    s.set_defaults(func=cmd_verify_triangle)

    s = sub.add_parser("verify-graph", help="run the graph-domain suite")
    common(s)
    s.set_defaults(func=cmd_verify_graph)

    s = sub.add_parser("approx-experiment", help="eigenvalues along a nested exhaustion")
    s.add_argument("--levels", type=int, help="number of nesting levels")
    common(s)
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("scan", help="search a shape family for interior extrema")
    s.add_argument("--family", choices=sorted(verify.FAMILY_DIMS))
    common(s, budget=True)
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("render", help="re-render a solve output directory as SVG")
    s.add_argument("solution_dir", help="directory written by 'solve'")
    s.add_argument("--field", help="nodal overlay: dx, dy, none or an angle in radians")
    s.add_argument("--svg", help="output SVG path (default: <solution_dir>/render.svg)")
    common(s)
    s.set_defaults(func=cmd_render)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(resolve(args))
    except CliError as exc:
        print(f"hotspots: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # upstream failures surface as a nonzero exit
        log.debug("unhandled error", exc_info=True)
        print(f"hotspots: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
