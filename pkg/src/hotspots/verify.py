"""End-to-end checks of the hot-spots statements on triangles and graph domains.

Every check produces :class:`Claim` objects whose ids come from the fixed
registry :data:`CLAIMS`. A claim is ``pass``, ``fail`` or ``inconclusive``;
the last is used whenever the numerical evidence is below the resolution of
the mesh (unknown indices, candidates inside a corner window, predicates on
an interval endpoint) and is never counted as a failure.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .analysis import (CriticalKind, check_monotone, count_critical_on_N, directional_field,
                       find_critical_points, hausdorff, nodal_graph, recover_gradient,
                       sign_component_check, tao_identity_check, traced_vertex_incidence)
from .analysis.nodal import densify
from .eigensolve import Solution, solve
from .geometry import (AngleClass, Condition, GeometryError, GraphFunction, PlanarDomainSpec,
                       VertexType, angle_class, classify_vertices, graph_domain_from_function,
                       polygon_spec, rectangle_spec, triangle_info, triangle_spec)
from .mesh import GradingPolicy
from .specfun import (DerivativeFieldSpec, FieldKind, FitError, Incidence, UnsupportedCase,
                      dominance_radius, fit_vertex_expansion, predicate_in_domain)

log = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

# Fixed registry of checked statements: id -> what is asserted.
CLAIMS = {
    "triangle.critical_set_at_most_one_point_in_N":
        "u has at most one critical point and it lies on the Neumann part",
    "triangle.two_dirichlet_non_obtuse.outward_normal_monotone":
        "D two edges, N-adjacent angles non-obtuse: Lu > 0 for L the outward normal of N",
    "triangle.two_dirichlet_non_obtuse.unique_max_on_N":
        "D two edges, N-adjacent angles non-obtuse: exactly one critical point, the maximum, on N",
    "triangle.two_dirichlet_obtuse.bisector_monotone":
        "D two edges, one N-adjacent angle obtuse: Lu > 0 for L bisecting the Dirichlet vertex",
    "triangle.two_dirichlet_obtuse.unique_max_on_N":
        "D two edges, one N-adjacent angle obtuse: exactly one critical point, the maximum, on N",
    "triangle.one_dirichlet_non_obtuse.inward_normal_monotone":
        "D one edge, Neumann angle at most pi/2: Lu > 0 for L the inward normal of D",
    "triangle.one_dirichlet_non_obtuse.vertex_max_no_critical_points":
        "D one edge, Neumann angle at most pi/2: no critical points, maximum at the Neumann vertex",
    "triangle.one_dirichlet_obtuse.longer_edge_normal_monotone":
        "D one edge, obtuse Neumann angle: Lu > 0 for L the outward normal of the longer N edge",
    "triangle.one_dirichlet_obtuse_isosceles.vertex_max_no_critical_points":
        "D one edge, obtuse isosceles: no critical points, maximum at the Neumann vertex",
    "triangle.one_dirichlet_obtuse_scalene.max_on_longer_neumann_edge":
        "D one edge, obtuse scalene: a single critical point, the maximum, on the longer N edge",
    "graph.neg_dy_monotone":
        "graph domain: -d_y u > 0 in the domain",
    "graph.critical_count_at_most_n":
        "graph domain: at most n critical points on N",
    "graph.extrema_count_bounded":
        "graph domain: at most (n+1)/2 (n odd) or n/2 (n even) local extrema on N",
    "graph.no_critical_points_near_vertices":
        "graph domain: vertices are not accumulation points of critical points",
    "rectangle.single_dirichlet_edge.degenerate":
        "rectangle with D one edge: d_x u vanishes identically and the opposite edge is critical",
    "rectangle.opposite_dirichlet_edges.midline":
        "rectangle with D two opposite edges: Z(d_x u) is the segment joining the edge midpoints",
    "approximation.lambda_nonincreasing":
        "nested graph-domain exhaustion: first eigenvalues are nonincreasing",
    "approximation.gaps_shrink":
        "nested graph-domain exhaustion: successive eigenvalue gaps shrink by a factor >= 2",
    "approximation.neg_dy_monotone_each_level":
        "nested graph-domain exhaustion: -d_y u > 0 at every level",
    "identity.edge_integral":
        "int_gamma Lu d_nu(Lu) equals -lam/2 <L,gamma'><L,nu>(u(q)^2 - u(p)^2)",
    "identity.sign_component_positive":
        "the boundary integral of phi d_nu phi is positive on each admissible sign component",
    "predicate.vertex_incidence":
        "leading-term prediction of whether Z(Xu) reaches a vertex",
}

# gap shrink factor between successive approximation levels
GAP_SHRINK = 2.0
# eigenvalues of nested domains may rise by at most this much
NONINCREASING_ATOL = 1e-8
# relative size below which a fitted n = 1 Neumann coefficient counts as noise
A1_NOISE = 1e-4
# strict positivity margin for sign-component integrals (relative)
POSITIVE_RTOL = 1e-4


@dataclass
class Claim:
    claim_id: str
    predicted: object
    observed: object
    status: str
    detail: str = ""

    def __post_init__(self):
        if self.claim_id not in CLAIMS:
            raise KeyError(f"unregistered claim id {self.claim_id!r}")
        if self.status not in (PASS, FAIL, INCONCLUSIVE):
            raise ValueError(f"bad claim status {self.status!r}")

    @property
    def statement(self) -> str:
        return CLAIMS[self.claim_id]

    def to_dict(self) -> dict:
        return {"id": self.claim_id, "statement": self.statement, "predicted": _jsonable(self.predicted),
                "observed": _jsonable(self.observed), "status": self.status, "detail": self.detail}


@dataclass
class VerificationReport:
    case_id: str
    spec_summary: dict
    h: float
    lambda1: float
    residual: float
    claims: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when no claim failed; inconclusive claims do not count."""
        return all(c.status != FAIL for c in self.claims)

    @property
    def n_inconclusive(self) -> int:
        return sum(c.status == INCONCLUSIVE for c in self.claims)

    def status(self) -> str:
        if not self.passed:
            return FAIL
        return INCONCLUSIVE if self.n_inconclusive else PASS

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "spec": self.spec_summary, "h": self.h,
                "lambda1": self.lambda1, "residual": self.residual, "status": self.status(),
                "claims": [c.to_dict() for c in self.claims], "artifacts": dict(self.artifacts),
                "info": _jsonable(self.info)}

    def text_summary(self) -> str:
        lines = [f"{self.case_id}: {self.status()}  lambda1={self.lambda1:.10g}  h={self.h:.4g}"]
        for c in self.claims:
            lines.append(f"  [{c.status:>12}] {c.claim_id}: observed {c.observed!r}"
                         + (f" ({c.detail})" if c.detail else ""))
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if hasattr(x, "to_dict"):
        return x.to_dict()
    return x


def spec_summary(spec: PlanarDomainSpec) -> dict:
    return {"kind": spec.kind.value, "corners": spec.corners().tolist(),
            "conditions": [e.condition.value for e in spec.edges()]}


# -- shared per-solution analysis --------------------------------------------------------

@dataclass
class Analysis:
    """A solution with its recovered gradient and critical-point search."""

    sol: Solution
    g: object
    search: object

    @property
    def mesh(self):
        return self.sol.mesh

    @property
    def eig(self):
        return self.sol.eig

    @property
    def spec(self):
        return self.sol.spec


def analyze(spec: PlanarDomainSpec, h: float, tol: float = 1e-10,
            grading: Optional[GradingPolicy] = None) -> Analysis:
    sol = solve(spec, h, grading, tol)
    g = recover_gradient(sol.eig, sol.mesh, enforce_bc=True)
    search = find_critical_points(sol.eig, sol.mesh, g)
    return Analysis(sol, g, search)


def _report(case_id: str, a: Analysis, h: float) -> VerificationReport:
    return VerificationReport(case_id, spec_summary(a.spec), h, a.eig.lambda1, a.eig.residual,
                              info={"critical_search": a.search.to_dict(),
                                    "n_nodes": int(a.mesh.n_nodes)})


def _monotone_claim(claim_id: str, a: Analysis, L: DerivativeFieldSpec) -> Claim:
    res = check_monotone(a.eig, a.mesh, a.g, L)
    return Claim(claim_id, "min Lu > -eps", res.min_value, PASS if res.holds else FAIL,
                 f"eps={res.epsilon:.3g}, L={L.label or L.delta}")


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# -- triangles ----------------------------------------------------------------------------

def triangle_route(spec: PlanarDomainSpec) -> tuple:
    """(route name, proposition-specific field L) for a labeled triangle."""
    info = triangle_info(spec)
    edges = spec.edges()
    verts = classify_vertices(spec)
    if len(info.dirichlet_edges) == 2:
        n_edge = edges[info.neumann_edges[0]]
        if info.neumann_angle_class is AngleClass.OBTUSE:
            dv = next(v for v in verts if v.vtype is VertexType.DIRICHLET)
            e_in, e_out = edges[dv.prev_edge], edges[dv.next_edge]
            # inward bisector: sum of the unit vectors along both edges away from the vertex
            L = _unit(e_out.tangent - e_in.tangent)
            return "two_dirichlet_obtuse", DerivativeFieldSpec.along(L, "dirichlet-angle bisector")
        return "two_dirichlet_non_obtuse", DerivativeFieldSpec.along(n_edge.normal, "outward normal of N")
    d_edge = edges[info.dirichlet_edges[0]]
    if info.neumann_angle_class is AngleClass.OBTUSE:
        longer = edges[info.longer_neumann_edge]
        L = DerivativeFieldSpec.along(longer.normal, "outward normal of the longer N edge")
        return ("one_dirichlet_obtuse_isosceles" if info.isosceles
                else "one_dirichlet_obtuse_scalene"), L
    return "one_dirichlet_non_obtuse", DerivativeFieldSpec.along(-d_edge.normal, "inward normal of D")


def _count_claim(a: Analysis) -> Claim:
    s = a.search
    n_int, n_n = len(s.interior), len(s.on_neumann)
    observed = {"interior": n_int, "on_N": n_n, "critical_intervals": list(s.critical_intervals)}
    if s.unresolved:
        return Claim("triangle.critical_set_at_most_one_point_in_N", "<= 1, on N", observed,
                     INCONCLUSIVE, "interior candidate overflow")
    ok = n_int == 0 and n_n <= 1 and not s.critical_intervals
    return Claim("triangle.critical_set_at_most_one_point_in_N", "<= 1, on N", observed,
                 PASS if ok else FAIL)


def verify_triangle(spec: PlanarDomainSpec, h: float, case_id: str = "triangle",
                    tol: float = 1e-10) -> VerificationReport:
    """Run the triangle checks along the route fixed by the angle data.

    The route selects the field ``L`` that must be monotone and the expected
    location of the critical set. A critical point seen only inside the
    corner window of :func:`find_critical_points` makes the location claim
    inconclusive rather than failed.
    """
    info = triangle_info(spec)
    route, L = triangle_route(spec)
    a = analyze(spec, h, tol)
    rep = _report(case_id, a, h)
    rep.info["route"] = route
    rep.claims.append(_count_claim(a))
    mono_ids = {"two_dirichlet_non_obtuse": "triangle.two_dirichlet_non_obtuse.outward_normal_monotone",
                "two_dirichlet_obtuse": "triangle.two_dirichlet_obtuse.bisector_monotone",
                "one_dirichlet_non_obtuse": "triangle.one_dirichlet_non_obtuse.inward_normal_monotone",
                "one_dirichlet_obtuse_isosceles": "triangle.one_dirichlet_obtuse.longer_edge_normal_monotone",
                "one_dirichlet_obtuse_scalene": "triangle.one_dirichlet_obtuse.longer_edge_normal_monotone"}
    rep.claims.append(_monotone_claim(mono_ids[route], a, L))
    s = a.search
    on_n = s.on_neumann
    verts = classify_vertices(spec)
    if route.startswith("two_dirichlet"):
        cid = f"triangle.{route}.unique_max_on_N"
        maxima = [p for p in on_n if p.extremum == "max"]
        observed = {"on_N": len(on_n), "maxima": len(maxima), "near_vertex": len(s.near_vertex)}
        if len(on_n) == 1 and len(maxima) == 1 and not s.interior:
            status = PASS
        elif not on_n and s.near_vertex:
            status = INCONCLUSIVE
        else:
            status = FAIL
        rep.claims.append(Claim(cid, "one maximum on N", observed, status))
    elif route in ("one_dirichlet_non_obtuse", "one_dirichlet_obtuse_isosceles"):
        cid = f"triangle.{route}.vertex_max_no_critical_points"
        nv = next(v for v in verts if v.vtype is VertexType.NEUMANN)
        vmax = [e for e in s.vertex_extrema if e.kind == "max"]
        observed = {"critical_points": len(s.points), "vertex_maxima": [e.vertex for e in vmax],
                    "near_vertex": len(s.near_vertex)}
        if not s.points and [e.vertex for e in vmax] == [nv.index]:
            status = PASS
        elif not s.points and s.near_vertex:
            status = INCONCLUSIVE
        else:
            status = FAIL
        rep.claims.append(Claim(cid, {"critical_points": 0, "vertex_max": nv.index}, observed, status))
    else:
        cid = "triangle.one_dirichlet_obtuse_scalene.max_on_longer_neumann_edge"
        observed = {"edges": [p.edge for p in on_n], "extrema": [p.extremum for p in on_n],
                    "near_vertex": s.near_vertex}
        if len(on_n) == 1 and on_n[0].edge == info.longer_neumann_edge and on_n[0].extremum == "max":
            status = PASS
        elif not on_n and s.near_vertex:
            status = INCONCLUSIVE
        else:
            status = FAIL
        rep.claims.append(Claim(cid, {"edge": info.longer_neumann_edge, "extremum": "max"},
                                observed, status, "inside corner window" if status == INCONCLUSIVE else ""))
    return rep


# -- graph domains ------------------------------------------------------------------------

def verify_graph_domain(f: GraphFunction, h: float, case_id: str = "graph",
                        tol: float = 1e-10) -> VerificationReport:
    """Monotonicity of ``-d_y u`` and the critical-point bounds on a graph domain.

    A constant ``f`` gives a rectangle with Dirichlet data on three sides.
    That is not the degenerate one-edge rectangle, so it goes through the
    same checks as any other graph domain.
    """
    spec = graph_domain_from_function(f)
    a = analyze(spec, h, tol)
    rep = _report(case_id, a, h)
    rep.info["f"] = {"x": list(f.x), "y": list(f.y)}
    rep.claims.append(_monotone_claim("graph.neg_dy_monotone", a,
                                      DerivativeFieldSpec.constant(-math.pi / 2, "-d_y")))
    cnt = count_critical_on_N(a.search.points, f)
    rep.info["count"] = cnt.to_dict()
    unknown = any(p.index is None for p in a.search.on_neumann)
    rep.claims.append(Claim("graph.critical_count_at_most_n", cnt.bound_n, cnt.k,
                            PASS if cnt.k <= cnt.bound_n else FAIL))
    if cnt.extrema_count <= cnt.extrema_bound:
        st = PASS
    else:
        st = INCONCLUSIVE if unknown else FAIL
    rep.claims.append(Claim("graph.extrema_count_bounded", cnt.extrema_bound, cnt.extrema_count, st))
    rep.claims.append(_vertex_accumulation_claim(a))
    return rep


def _vertex_accumulation_claim(a: Analysis) -> Claim:
    """Critical points stay clear of corners, except near right-angle mixed corners."""
    corners = a.spec.corners()
    verts = classify_vertices(a.spec)
    h = a.mesh.h_target
    close = []
    for p in a.search.on_neumann:
        d = np.linalg.norm(corners - np.asarray(p.location), axis=1)
        k = int(np.argmin(d))
        if d[k] < h:
            close.append(k)
    near = [c["vertex"] for c in a.search.near_vertex]
    exempt = {v.index for v in verts if angle_class(v.angle_beta) is AngleClass.RIGHT}
    observed = {"within_h": close, "inside_corner_window": near}
    if close:
        status = PASS if set(close) <= exempt else FAIL
    elif set(near) - exempt:
        status = INCONCLUSIVE
    else:
        status = PASS
    return Claim("graph.no_critical_points_near_vertices", "none within h of a vertex",
                 observed, status)


def verify_rectangle_exclusion(spec: PlanarDomainSpec, h: float, case_id: str = "rectangle",
                               tol: float = 1e-10) -> VerificationReport:
    """The rectangle cases excluded from finiteness of the critical set.

    With one Dirichlet edge, ``d_x u`` (derivative along the Dirichlet edge)
    must be flagged degenerate and the opposite Neumann edge reported as a
    critical interval. With two opposite Dirichlet edges the zero set of the
    derivative across them must be the midline, within Hausdorff distance
    ``2 h``.
    """
    edges = spec.edges()
    d_edges = [e for e in edges if e.condition is Condition.DIRICHLET]
    if len(edges) != 4 or len(d_edges) not in (1, 2):
        raise GeometryError("rectangle exclusion expects a quadrilateral with one or two Dirichlet edges")
    a = analyze(spec, h, tol)
    rep = _report(case_id, a, h)
    gmax = a.g.magnitude_max
    if len(d_edges) == 1:
        d = d_edges[0]
        X = DerivativeFieldSpec.along(d.tangent, "along D")
        ng = nodal_graph(directional_field(a.g, X), a.mesh, scale=gmax)
        opposite = next(e.index for e in edges if abs(abs(float(np.dot(e.tangent, d.tangent))) - 1) < 1e-12
                        and e.index != d.index)
        ok = ng.degenerate and opposite in a.search.critical_intervals
        rep.claims.append(Claim("rectangle.single_dirichlet_edge.degenerate",
                                {"degenerate": True, "critical_interval": opposite},
                                {"degenerate": ng.degenerate, "max_abs": ng.max_abs,
                                 "threshold": ng.threshold,
                                 "critical_intervals": list(a.search.critical_intervals)},
                                PASS if ok else FAIL))
        return rep
    d0, d1 = d_edges
    if abs(abs(float(np.dot(d0.tangent, d1.tangent))) - 1) > 1e-12:
        raise GeometryError("the two Dirichlet edges must be opposite")
    X = DerivativeFieldSpec.along(d0.normal, "across D")
    ng = nodal_graph(directional_field(a.g, X), a.mesh, scale=gmax)
    m0 = 0.5 * (np.asarray(d0.p0) + np.asarray(d1.p1))
    m1 = 0.5 * (np.asarray(d0.p1) + np.asarray(d1.p0))
    step = 0.25 * a.mesh.h_target
    exact = densify(np.array([m0, m1]), step)
    traced = np.vstack([densify(arc.points, step) for arc in ng.arcs]) if ng.arcs else np.zeros((0, 2))
    dist = hausdorff(traced, exact)
    h_max = float(a.mesh.diameters.max())
    rep.info["midline"] = {"hausdorff": dist, "n_arcs": len(ng.arcs)}
    rep.claims.append(Claim("rectangle.opposite_dirichlet_edges.midline", f"<= 2h = {2 * h_max:.4g}",
                            dist, PASS if dist <= 2 * h_max else FAIL))
    return rep


# -- nested approximation -----------------------------------------------------------------

def nested_levels(f: GraphFunction, n_levels: int) -> list:
    """Coarse-to-fine subsamplings of the breakpoints of ``f``.

    Level ``k`` keeps every ``2^(n_levels-1-k)``-th breakpoint, so the finest
    level is ``f`` itself.
    """
    m = len(f.x) - 1
    stride = 2 ** (n_levels - 1)
    if m % stride:
        raise GeometryError(f"{m} pieces cannot be halved {n_levels - 1} times")
    out = []
    for k in range(n_levels):
        s = 2 ** (n_levels - 1 - k)
        out.append(GraphFunction(f.x[::s], f.y[::s]))
    return out


def _pl_values(f: GraphFunction, x) -> np.ndarray:
    return np.interp(x, f.x, f.y)


def check_nested(levels: Sequence[GraphFunction], atol: float = 1e-12) -> None:
    """Raise unless each domain lies inside the next one."""
    for k, (lo, hi) in enumerate(zip(levels[:-1], levels[1:])):
        if abs(lo.a - hi.a) > atol or abs(lo.b - hi.b) > atol:
            raise GeometryError(f"levels {k} and {k + 1} have different supports")
        xs = np.union1d(lo.x, hi.x)
        if np.any(_pl_values(lo, xs) > _pl_values(hi, xs) + atol):
            raise GeometryError(f"level {k} is not contained in level {k + 1}")


def domain_approximation_experiment(levels: Sequence[GraphFunction], h: float,
                                    case_id: str = "approximation",
                                    tol: float = 1e-12) -> VerificationReport:
    """First eigenvalues along an increasing sequence of graph domains.

    Parameters
    ----------
    levels : sequence of GraphFunction
        Increasing piecewise-linear approximations, coarse to fine, for
        instance from :func:`nested_levels`. Non-nested input is rejected.
    """
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    check_nested(levels)
    lams, monos = [], []
    last = None
    for f in levels:
        spec = graph_domain_from_function(f)
        a = analyze(spec, h, tol)
        lams.append(a.eig.lambda1)
        monos.append(check_monotone(a.eig, a.mesh, a.g, DerivativeFieldSpec.constant(-math.pi / 2)))
        last = a
    lams = np.array(lams)
    rep = _report(case_id, last, h)
    rep.lambda1 = float(lams[-1])
    rep.info["lambdas"] = lams.tolist()
    rises = np.diff(lams)
    rep.claims.append(Claim("approximation.lambda_nonincreasing", f"increments <= {NONINCREASING_ATOL:g}",
                            rises.tolist(), PASS if np.all(rises <= NONINCREASING_ATOL) else FAIL))
    gaps = -rises
    if np.all(np.abs(gaps) <= NONINCREASING_ATOL * max(1.0, lams[0])):
        ratios, status, detail = [], PASS, "all levels coincide"
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = (gaps[:-1] / gaps[1:]).tolist()
        if not ratios:
            status, detail = INCONCLUSIVE, "a gap ratio needs at least three levels"
        else:
            status = PASS if all(r >= GAP_SHRINK for r in ratios) else FAIL
            detail = ""
    rep.info["gap_ratios"] = ratios
    rep.claims.append(Claim("approximation.gaps_shrink", f"ratio >= {GAP_SHRINK:g}", ratios, status, detail))
    rep.claims.append(Claim("approximation.neg_dy_monotone_each_level", "all hold",
                            [m.holds for m in monos],
                            PASS if all(m.holds for m in monos) else FAIL))
    return rep


def sampled_graph_function(fun: Callable, a: float, b: float, n_pieces: int) -> GraphFunction:
    x = np.linspace(a, b, n_pieces + 1)
    y = np.array([fun(t) for t in x], dtype=float)
    y[np.abs(y) < 1e-15] = 0.0
    return GraphFunction(tuple(x), tuple(y))


# -- identity and predicate surveys -------------------------------------------------------

def tao_pairs(a: Analysis) -> list:
    """(edge, p, q) along Neumann edges between consecutive admissible endpoints.

    Endpoints are Neumann vertices and detected critical points of the edge.
    """
    verts = classify_vertices(a.spec)
    out = []
    for e in a.spec.edges():
        if e.condition is not Condition.NEUMANN:
            continue
        stops = []
        for v in (verts[e.start], verts[e.end]):
            if v.vtype is VertexType.NEUMANN:
                stops.append(np.asarray(v.position))
        stops += [np.asarray(p.location) for p in a.search.on_neumann if p.edge == e.index]
        if len(stops) < 2:
            continue
        stops.sort(key=lambda x: float(e.project(x)[0]))
        for p, q in zip(stops[:-1], stops[1:]):
            out.append((e.index, p, q))
    return out


def tao_survey(a: Analysis, angles: Iterable[float] = (math.pi / 4, 3 * math.pi / 4)) -> list:
    """Edge identity results for every admissible pair and each field angle."""
    out = []
    for edge, p, q in tao_pairs(a):
        e = a.spec.edges()[edge]
        base = math.atan2(e.tangent[1], e.tangent[0])
        for ang in angles:
            L = DerivativeFieldSpec.constant(base + ang, f"tangent+{ang:.3f}")
            out.append(tao_identity_check(a.eig, a.mesh, a.g, edge, p, q, L))
    return out


def probe_fields(spec: PlanarDomainSpec, n_angles: int = 8) -> list:
    """Derivative fields used for the component and incidence surveys.

    Constant fields at generic angles ``(j + 0.37) 2 pi / n_angles``,
    fields tangent to every edge and normal to every Neumann edge, and
    rotations about every mixed vertex and about every Dirichlet edge
    midpoint.
    """
    out = [DerivativeFieldSpec.constant((j + 0.37) * 2 * math.pi / n_angles, f"generic{j}")
           for j in range(n_angles)]
    for e in spec.edges():
        ang = math.atan2(e.tangent[1], e.tangent[0])
        out.append(DerivativeFieldSpec.constant(ang, f"tangent{e.index}"))
        if e.condition is Condition.NEUMANN:
            out.append(DerivativeFieldSpec.constant(ang - math.pi / 2, f"normal{e.index}"))
    for v in classify_vertices(spec):
        if v.vtype is VertexType.MIXED:
            out.append(DerivativeFieldSpec.rotational(v.position, f"rotate-v{v.index}"))
    for e in spec.edges():
        if e.condition is Condition.DIRICHLET:
            mid = 0.5 * (np.asarray(e.p0) + np.asarray(e.p1))
            out.append(DerivativeFieldSpec.rotational(tuple(mid), f"rotate-mid{e.index}"))
    return out


def generic_fields(spec: PlanarDomainSpec, n_angles: int = 12) -> list:
    """Probe fields for the incidence comparison.

    Constant fields at generic angles and rotations about the Dirichlet
    edge midpoints. Fields tangent or normal to an edge are left out: at the
    two vertices of that edge they sit exactly on an interval endpoint,
    where the prediction is Inconclusive by construction.
    """
    out = [DerivativeFieldSpec.constant((j + 0.37) * 2 * math.pi / n_angles, f"generic{j}")
           for j in range(n_angles)]
    out += [X for X in probe_fields(spec, 0) if X.label.startswith("rotate-mid")]
    return out


def component_survey(a: Analysis, fields: Optional[list] = None) -> list:
    """Sign-component integrals for each field; one dict per component."""
    fields = probe_fields(a.spec) if fields is None else fields
    sing = [v.index for v in classify_vertices(a.spec) if v.singular]
    out = []
    for X in fields:
        phi = directional_field(a.g, X)
        for c in sign_component_check(phi, a.mesh, a.eig, X, a.g, sing):
            d = c.to_dict()
            d["field"] = X.label
            out.append(d)
    return out


def fit_with_fallback(eig, mesh, v, n_max: int = 6):
    """Vertex expansion with at most ``n_max`` modes, fewer if the annulus holds too few nodes.

    Raises :class:`FitError` when even two modes cannot be fitted.
    """
    err = None
    # small sectors hold few nodes; drop high modes until the fit is determined
    for n in range(n_max, 1, -1):
        try:
            return fit_vertex_expansion(eig, mesh, v, n_max=n)
        except FitError as exc:
            err = exc
    raise err if err is not None else FitError(f"n_max={n_max} leaves no modes to fit")


def adaptive_fit(a: Analysis, v):
    """Vertex expansion with as many modes as the nodes in the annulus allow, or None."""
    try:
        return fit_with_fallback(a.eig, a.mesh, v)
    except FitError:
        return None


def a1_status(fit) -> Optional[bool]:
    """False when the fitted n = 1 Neumann coefficient is clearly nonzero, None if in noise."""
    if fit is None:
        return None
    sel = np.flatnonzero(fit.labels == 1)
    if not len(sel):
        return None
    return None if fit.amplitudes[sel[0]] < A1_NOISE * fit.u_norm else False


# label of the expansion term whose gradient the predicate rule relies on
_RULE_LEAD = {"dirichlet": 1, "mixed": 0, "mixed-rotational-on-dirichlet-line": 0,
              "neumann-radial": 0, "neumann-first-mode": 1}


@dataclass
class IncidencePair:
    vertex: int
    field: str
    predicted: str
    traced: str
    rule: str
    note: str = ""

    @property
    def agreement(self) -> str:
        p, t = self.predicted, self.traced
        inc = Incidence.INCONCLUSIVE.value
        if p == inc or t == inc:
            return "inconclusive"
        return "match" if p == t else "contradiction"

    def to_dict(self) -> dict:
        return {"vertex": self.vertex, "field": self.field, "predicted": self.predicted,
                "traced": self.traced, "rule": self.rule, "note": self.note,
                "agreement": self.agreement}


def incidence_survey(a: Analysis, fields: Optional[list] = None, atol: float = 0.03,
                     margin: float = 0.05) -> dict:
    """Compare predicted and traced vertex incidence of ``Z(Xu)``.

    The tracer ignores an angular band of ``margin * beta`` next to each
    edge, so the predicate is asked to return Inconclusive for zero rays in
    a slightly wider band. Pairs where the predicate does not apply (a
    rotation about the vertex itself, or about a point away from a mixed
    vertex) are counted as unsupported and left out of the comparison.
    """
    fields = generic_fields(a.spec) if fields is None else fields
    verts = classify_vertices(a.spec)
    fits = {v.index: adaptive_fit(a, v) for v in verts}
    a1 = {k: a1_status(f) for k, f in fits.items() if verts[k].vtype is VertexType.NEUMANN}
    pairs, unsupported = [], 0
    for X in fields:
        phi = directional_field(a.g, X)
        for v in verts:
            try:
                pr = predicate_in_domain(a.spec, v, X, a1.get(v.index, False), atol,
                                         theta_tol=1.2 * margin * v.angle_beta)
            except UnsupportedCase:
                unsupported += 1
                continue
            h_trace, why = _trace_scale(a, v, fits[v.index], pr.rule)
            if h_trace is None:
                traced = Incidence.INCONCLUSIVE.value
            else:
                traced = traced_vertex_incidence(phi, a.mesh, v, margin=margin, h=h_trace).outcome.value
            pairs.append(IncidencePair(v.index, X.label, pr.outcome.value, traced, pr.rule, why))
    return {"pairs": pairs, "unsupported": unsupported}


def _trace_scale(a: Analysis, v, fit, rule: str, resolution: float = 2.0):
    """Length unit for the tracing circles (radii 4 and 8 units) at a vertex.

    The circles are pulled inside the radius where the term used by the
    predicate dominates the fitted gradient. If that pushes the inner
    circle below ``resolution`` local element sizes the comparison is not
    resolved and None is returned.
    """
    h = a.mesh.h_target
    lead = _RULE_LEAD.get(rule.split(":")[0])
    if fit is None or lead is None:
        return h, "default radii"
    try:
        r_dom = dominance_radius(fit, lead)
    except ValueError:
        return h, "default radii"
    h_trace = min(h, r_dom / 8.0)
    h_loc = float(a.mesh.node_h[a.mesh.corner_nodes[v.index]])
    if 4.0 * h_trace < resolution * h_loc:
        return None, f"leading term dominates only below r={r_dom:.3g}"
    return h_trace, ""


def tally(pairs: Sequence[IncidencePair]) -> dict:
    out = {"match": 0, "inconclusive": 0, "contradiction": 0}
    for p in pairs:
        out[p.agreement] += 1
    out["total"] = len(pairs)
    return out


# -- default suites -----------------------------------------------------------------------

def triangle_suite() -> list:
    """(case id, spec) pairs covering every triangle route."""
    s3 = math.sqrt(3) / 2
    cases = [
        ("right-isosceles-D-leg", (0, 0), (1, 0), (1, 1), [1]),
        ("acute-D-base", (0, 0), (1, 0), (0.3, 0.6), [0]),
        ("right-neumann-D-hypotenuse", (0, 0), (1, 0), (0, 1), [1]),
        ("acute-scalene-D-side", (0, 0), (1, 0), (0.7, 0.9), [2]),
        ("obtuse-scalene-D-base-a", (0, 0), (1, 0), (0.2, 0.1), [0]),
        ("obtuse-scalene-D-base-b", (0, 0), (1, 0), (0.15, 0.1), [0]),
        ("obtuse-isosceles-D-base", (0, 0), (1, 0), (0.5, 0.2), [0]),
        ("equilateral-D-two", (0, 0), (1, 0), (0.5, s3), [1, 2]),
        ("acute-isosceles-D-two", (0, 0), (1, 0), (0.5, 0.8), [1, 2]),
        ("acute-scalene-D-two", (0, 0), (1, 0), (0.3, 0.7), [1, 2]),
        ("right-mixed-D-two", (0, 0), (1, 0), (0, 0.8), [1, 2]),
        ("obtuse-dirichlet-vertex-D-two", (0, 0), (1, 0), (0.2, 0.3), [1, 2]),
        ("obtuse-mixed-left-D-two", (0, 0), (1, 0), (-0.3, 0.6), [1, 2]),
        ("obtuse-mixed-right-D-two", (0, 0), (1, 0), (1.4, 0.5), [1, 2]),
    ]
    return [(cid, triangle_spec(p0, p1, p2, d)[0]) for cid, p0, p1, p2, d in cases]


def graph_suite() -> list:
    """(case id, GraphFunction) pairs with n = 1, 2, 3 and 5."""
    G = GraphFunction
    return [
        ("tent", G((0, 0.5, 1), (0, 1, 0))),
        ("skew-tent", G((0, 0.3, 1), (0, 0.8, 0))),
        ("flat-top", G((0, 0.4, 1.0, 1.4), (0, 1, 1, 0))),
        ("rise-then-step", G((0, 0.5, 1.0), (0, 1, 0.6))),
        ("raised-tent", G((0, 0.5, 1.0), (0.5, 1, 0.5))),
        ("double-tent", G((0, 0.4, 0.7, 1.1, 1.5), (0, 1, 0.6, 0.9, 0))),
        ("triple-tent", G((0, 0.3, 0.6, 0.9, 1.2, 1.5, 1.8), (0, 0.8, 0.5, 0.9, 0.55, 0.85, 0))),
    ]


def quad_suite() -> list:
    """Quadrilaterals with one Dirichlet edge opposite a Neumann edge joining two Neumann vertices."""
    N, D = Condition.NEUMANN, Condition.DIRICHLET
    quads = [
        ("quad-a", [(0, 0), (1, 0), (1.1, 0.8), (-0.1, 0.7)]),
        ("quad-b", [(0, 0), (1.2, 0), (0.9, 0.9), (0.2, 0.6)]),
        ("quad-c", [(0, 0), (1, 0), (1.3, 0.6), (0.1, 0.9)]),
        ("quad-d", [(0, 0), (0.9, 0.1), (1.0, 1.0), (-0.2, 0.8)]),
        ("quad-e", [(0, 0), (1.5, 0), (1.2, 0.7), (0.4, 0.8)]),
    ]
    return [(cid, polygon_spec(p, [N, N, D, N])) for cid, p in quads]


def default_approximation_levels(n_levels: int = 4) -> list:
    """Nested chordal approximations of a parabola-shaped roof."""
    f = sampled_graph_function(lambda x: 0.8 * 4 * x * (1 - x), 0.0, 1.0, 2 ** (n_levels + 1))
    return nested_levels(f, n_levels)


# -- conjecture scan ----------------------------------------------------------------------

def _family_spec(family: str, s: np.ndarray) -> PlanarDomainSpec:
    """Shape from a point of the unit cube; D is always a single edge."""
    N, D = Condition.NEUMANN, Condition.DIRICHLET
    if family == "triangle":
        apex = (-0.4 + 1.8 * s[0], 0.15 + 0.85 * s[1])
        d_edge = min(int(s[2] * 3), 2)
        return triangle_spec((0, 0), (1, 0), apex, [d_edge])[0]
    if family == "convex_quad":
        th = [(k + 0.7 * (s[k] - 0.5)) * math.pi / 2 for k in range(4)]
        pts = [(math.cos(t), math.sin(t)) for t in th]
        return polygon_spec(pts, [D, N, N, N])
    if family == "thin_nonconvex":
        t, w = 0.1 + 0.5 * s[0], 0.15 + 0.25 * s[1]
        pts = [(0, 0), (1, t), (2, 0), (2, w), (1, t + w), (0, w)]
        return polygon_spec(pts, [N, N, N, N, N, D])
    raise ValueError(f"unknown family {family!r}")


FAMILY_DIMS = {"triangle": 3, "convex_quad": 4, "thin_nonconvex": 2}


def scan_conjecture(family: str, budget: int, h: float, seed: int = 0) -> dict:
    """Search a shape family for interior extrema of the first eigenfunction.

    Shapes are drawn from a scrambled Sobol sequence seeded by ``seed``.
    Interior extrema are reported as candidates for a closer study under
    refinement and are never treated as disproofs. Failing samples are
    logged and skipped.
    """
    if family not in FAMILY_DIMS:
        raise ValueError(f"unknown family {family!r}")
    if budget < 1:
        raise ValueError("budget must be positive")
    sampler = qmc.Sobol(FAMILY_DIMS[family], scramble=True, seed=seed)
    # draw a power of two to keep the balance properties, then keep the first points
    pts = sampler.random_base2(max(0, math.ceil(math.log2(budget))))[:budget]
    samples = []
    for i, s in enumerate(pts):
        rec = {"sample": i, "params": s.tolist()}
        try:
            spec = _family_spec(family, s)
            h_eff = min(h, spec.shortest_edge)
            a = analyze(spec, h_eff)
            interior = a.search.interior
            rec.update({"corners": spec.corners().tolist(), "h": h_eff, "lambda1": a.eig.lambda1,
                        "interior_extrema": [p.to_dict() for p in interior if p.index == 1],
                        "interior_critical": len(interior), "unresolved": a.search.unresolved})
            rec["candidate"] = bool(rec["interior_extrema"])
        except Exception as exc:  # keep scanning; the failure is part of the record
            log.warning("sample %d of %s failed: %s", i, family, exc)
            rec.update({"error": str(exc), "candidate": False})
        samples.append(rec)
    return {"family": family, "budget": budget, "seed": seed, "h": h, "samples": samples,
            "n_candidates": sum(r["candidate"] for r in samples),
            "n_errors": sum("error" in r for r in samples)}


def write_report(report: VerificationReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
