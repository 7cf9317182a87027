"""Critical points of the first eigenfunction and their indices."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from matplotlib.tri import LinearTriInterpolator
from scipy.spatial import cKDTree

from ..mesh import Mesh
from .gradient import RecoveredGradient
from .nodal import degenerate_threshold

log = logging.getLogger(__name__)

MAX_CANDIDATES = 64
TOUCH_RTOL = 1e-3


class CriticalKind(str, Enum):
    INTERIOR = "Interior"
    ON_N = "OnNeumannBoundary"


@dataclass
class CriticalPoint:
    """A located critical point of ``u``.

    ``index`` is -1, 0, 1, or None when the branch count was unstable.
    ``extremum`` is 'max', 'min' or 'none' for the restriction of ``u`` to
    the Neumann edge (boundary points) or to a neighborhood (interior).
    """

    location: tuple
    kind: CriticalKind
    u_value: float
    index: Optional[int] = None
    is_local_extremum_of_edge_restriction: bool = False
    extremum: str = "none"
    edge: Optional[int] = None
    h_local: float = float("nan")

    @property
    def index_label(self) -> str:
        return "Unknown" if self.index is None else str(self.index)

    def to_dict(self) -> dict:
        return {"location": [float(c) for c in self.location], "kind": self.kind.value,
                "u_value": float(self.u_value), "index": self.index_label,
                "is_local_extremum_of_edge_restriction": bool(self.is_local_extremum_of_edge_restriction),
                "extremum": self.extremum, "edge": self.edge}


@dataclass
class VertexExtremum:
    vertex: int
    position: tuple
    kind: str  # 'max' or 'min'
    u_value: float

    def to_dict(self) -> dict:
        return {"vertex": self.vertex, "position": [float(c) for c in self.position],
                "kind": self.kind, "u_value": float(self.u_value)}


@dataclass
class CriticalSearch:
    """Everything found by :func:`find_critical_points`."""

    points: list
    vertex_extrema: list
    critical_intervals: list  # polygon edge indices whose trace is flat
    near_vertex: list  # candidates discarded inside a corner window
    unresolved: bool = False
    info: dict = field(default_factory=dict)

    @property
    def on_neumann(self) -> list:
        return [p for p in self.points if p.kind is CriticalKind.ON_N]

    @property
    def interior(self) -> list:
        return [p for p in self.points if p.kind is CriticalKind.INTERIOR]

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {"points": [p.to_dict() for p in self.points],
                "vertex_extrema": [v.to_dict() for v in self.vertex_extrema],
                "critical_intervals": list(self.critical_intervals),
                "near_vertex": self.near_vertex, "unresolved": self.unresolved}


# -- boundary search --------------------------------------------------------------

def _edge_trace(mesh: Mesh, u: np.ndarray, parent: int):
    e = mesh.spec.edges()[parent]
    nodes = mesh.edge_nodes(parent)
    s = e.project(mesh.nodes[nodes])
    return e, nodes, s, u[nodes]


def _boundary_candidates(mesh: Mesh, u: np.ndarray, parent: int, gmax: float, thr: float):
    """Sign changes and touch zeros of the slope of the P1 trace on one edge."""
    e, nodes, s, tr = _edge_trace(mesh, u, parent)
    ds = np.diff(s)
    d = np.diff(tr) / ds
    mid = 0.5 * (s[:-1] + s[1:])
    if np.abs(d).max() <= thr:
        return "flat", []
    out = []
    for i in range(len(d) - 1):
        a, b = d[i], d[i + 1]
        if a * b < 0:
            t = a / (a - b)
            out.append((mid[i] + t * (mid[i + 1] - mid[i]), "max" if a > 0 else "min", i + 1))
    dmax = np.abs(d).max()
    for i in range(1, len(d) - 1):
        a, b, c = d[i - 1], d[i], d[i + 1]
        if (abs(b) <= TOUCH_RTOL * dmax and abs(b) < abs(a) and abs(b) < abs(c)
                and a * b > 0 and b * c > 0):
            out.append((mid[i], "none", i))
    out.sort()
    return e, out


def _cancel_pairs(cands, h):
    """Drop adjacent max/min pairs closer than ``2h``: mesh noise, not extrema."""
    changed = True
    cands = list(cands)
    while changed:
        changed = False
        for i in range(len(cands) - 1):
            (s0, k0, _), (s1, k1, _) = cands[i], cands[i + 1]
            if {k0, k1} == {"max", "min"} and s1 - s0 < 2 * h:
                del cands[i:i + 2]
                changed = True
                break
    return cands


# -- interior search --------------------------------------------------------------

def _element_gradient_zeros(mesh: Mesh, g: np.ndarray):
    """Zeros of the P1 interpolant of the nodal gradient inside elements."""
    t = mesh.triangles
    g0, g1, g2 = g[t[:, 0]], g[t[:, 1]], g[t[:, 2]]
    A = np.stack([g1 - g0, g2 - g0], axis=2)  # (Nt, 2, 2)
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    ok = np.abs(det) > 1e-300
    xi = np.full((len(t), 2), -1.0)
    rhs = -g0[ok]
    inv = np.stack([np.stack([A[ok, 1, 1], -A[ok, 0, 1]], 1),
                    np.stack([-A[ok, 1, 0], A[ok, 0, 0]], 1)], 1) / det[ok, None, None]
    xi[ok] = np.einsum("tij,tj->ti", inv, rhs)
    eps = 1e-12
    inside = (xi[:, 0] >= -eps) & (xi[:, 1] >= -eps) & (xi.sum(1) <= 1 + eps)
    idx = np.flatnonzero(inside)
    p = mesh.nodes[t[idx]]
    loc = p[:, 0] + xi[idx, :1] * (p[:, 1] - p[:, 0]) + xi[idx, 1:] * (p[:, 2] - p[:, 0])
    return idx, loc


def _quadratic_newton(mesh: Mesh, u: np.ndarray, tree, x, radius, steps=2):
    """Refine a critical point with a least-squares quadratic model of ``u``."""
    for _ in range(steps):
        nb = tree.query_ball_point(x, radius)
        if len(nb) < 8:
            return x
        d = mesh.nodes[nb] - x
        V = np.column_stack([np.ones(len(nb)), d[:, 0], d[:, 1],
                             0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1], 0.5 * d[:, 1] ** 2])
        c, *_ = np.linalg.lstsq(V, u[nb], rcond=None)
        H = np.array([[c[3], c[4]], [c[4], c[5]]])
        if abs(np.linalg.det(H)) < 1e-14 * max(1.0, np.abs(H).max() ** 2):
            return x
        x = x - np.linalg.solve(H, c[1:3])
    return x


def _boundary_distance(mesh: Mesh, pts) -> np.ndarray:
    return np.min(np.stack([e.distance(pts) for e in mesh.spec.edges()], 1), axis=1)


def _cluster(pts, radius):
    """Greedy clustering; returns cluster representatives (means)."""
    reps = []
    used = np.zeros(len(pts), dtype=bool)
    for i in range(len(pts)):
        if used[i]:
            continue
        close = np.linalg.norm(pts - pts[i], axis=1) <= radius[i]
        close &= ~used
        used |= close
        reps.append(pts[close].mean(axis=0))
    return np.array(reps).reshape(-1, 2)


def vertex_extrema(mesh: Mesh, u: np.ndarray) -> list:
    """Corners where ``u`` is a strict maximum or minimum over its 1-ring."""
    e = mesh.edges
    out = []
    for k, n in enumerate(mesh.corner_nodes):
        n = int(n)
        if u[n] == 0.0:
            continue
        nb = np.concatenate([e[e[:, 0] == n, 1], e[e[:, 1] == n, 0]])
        if np.all(u[nb] < u[n]):
            out.append(VertexExtremum(k, tuple(mesh.nodes[n]), "max", float(u[n])))
        elif np.all(u[nb] > u[n]):
            out.append(VertexExtremum(k, tuple(mesh.nodes[n]), "min", float(u[n])))
    return out


def find_critical_points(eig, mesh: Mesh, g: RecoveredGradient, with_index: bool = True,
                         window_factor: float = 2.0) -> CriticalSearch:
    """Locate critical points of ``u`` on Neumann edges and in the interior.

    Boundary points are sign changes of the slope of the P1 trace along each
    Neumann edge, placed by a secant between segment midpoints. Interior
    points are zeros of the interpolated recovered gradient kept at least
    ``2 h`` from the boundary, refined by Newton steps on a local quadratic
    fit. Candidates within ``window_factor`` local mesh sizes of a corner are
    recorded in ``near_vertex`` instead, since corners are never critical
    points. Dirichlet edges are never searched.
    """
    u = getattr(eig, "u", eig)
    spec = mesh.spec
    gmax = g.magnitude_max
    thr = degenerate_threshold(mesh, gmax)
    edges = spec.edges()
    points, intervals, near = [], [], []
    for e in edges:
        if e.condition.value != "N":
            continue
        res = _boundary_candidates(mesh, u, e.index, gmax, thr)
        if res[0] == "flat":
            intervals.append(e.index)
            continue
        _, cands = res
        chain = mesh.edge_nodes(e.index)
        hs = mesh.node_h[chain]
        s_nodes = e.project(mesh.nodes[chain])
        h_here = lambda s: float(np.interp(s, s_nodes, hs))
        cands = _cancel_pairs(cands, max(hs.max(), 1e-300)) if len(cands) > 1 else cands
        w0 = window_factor * mesh.node_h[mesh.corner_nodes[e.start]]
        w1 = window_factor * mesh.node_h[mesh.corner_nodes[e.end]]
        for s, kind, _ in cands:
            x = np.asarray(e.p0) + s * e.tangent
            if s < w0 or s > e.length - w1:
                near.append({"edge": e.index, "vertex": int(e.start if s < w0 else e.end),
                             "distance": float(min(s, e.length - s)), "extremum": kind})
                continue
            uval = float(np.interp(s, s_nodes, u[chain]))
            points.append(CriticalPoint(tuple(x), CriticalKind.ON_N, uval, None,
                                        kind != "none", kind, e.index, h_here(s)))
    # interior
    idx, loc = _element_gradient_zeros(mesh, g.nodal)
    unresolved = False
    if len(idx):
        hl = mesh.diameters[idx]
        keep = _boundary_distance(mesh, loc) > 2 * hl
        idx, loc, hl = idx[keep], loc[keep], hl[keep]
    if len(idx):
        reps = _cluster(loc, 2 * hl)
        if len(reps) > MAX_CANDIDATES:
            unresolved = True
            log.warning("%d interior critical candidates; field looks degenerate", len(reps))
        else:
            tree = cKDTree(mesh.nodes)
            interp = LinearTriInterpolator(mesh.mpl_triangulation, u)
            for x in reps:
                h0 = float(mesh.local_h(x)[0])
                y = _quadratic_newton(mesh, u, tree, x, 3 * h0)
                if np.linalg.norm(y - x) > 2 * h0:
                    y = x
                val = interp(y[0], y[1])
                if np.ma.is_masked(val):
                    y, val = x, interp(x[0], x[1])
                if _boundary_distance(mesh, y[None])[0] <= 2 * h0:
                    continue
                points.append(CriticalPoint(tuple(y), CriticalKind.INTERIOR, float(val), None,
                                            False, "none", None, h0))
    search = CriticalSearch(points, vertex_extrema(mesh, u), intervals, near, unresolved,
                            {"degenerate_threshold": thr, "grad_max": gmax})
    if with_index and not unresolved:
        for p in search.points:
            p.index = index_of(p, eig, mesh)
            if p.kind is CriticalKind.INTERIOR:
                p.extremum = {1: "extremum", -1: "saddle"}.get(p.index, "none")
    return search


# -- index ------------------------------------------------------------------------

def _reflect(points, p0, t):
    d = points - p0
    along = d @ t
    foot = p0 + along[:, None] * t
    return 2 * foot - points


def _sign_changes(vals) -> int:
    s = np.sign(vals)
    s = s[s != 0]
    if len(s) == 0:
        return 0
    return int(np.count_nonzero(s != np.roll(s, 1)))


def index_of(p: CriticalPoint, eig, mesh: Mesh, factors=(4.0, 8.0), n_samples: int = 360,
             interp=None) -> Optional[int]:
    """Index ``1 - n/2`` from ``n`` level-set branches crossing small circles.

    Circles of radius ``4 h`` and ``8 h`` around the point are sampled,
    shrunk together when they would reach a corner; for a point on a Neumann
    edge the samples outside the domain are reflected
    back across the edge. Returns None (Unknown) when a sample cannot be
    evaluated or the two circles disagree.
    """
    u = getattr(eig, "u", eig)
    interp = interp or LinearTriInterpolator(mesh.mpl_triangulation, u)
    c = np.asarray(p.location, dtype=float)
    h = p.h_local if np.isfinite(p.h_local) else float(mesh.local_h(c)[0])
    edge = mesh.spec.edges()[p.edge] if p.edge is not None else None
    if edge is not None:
        # evaluate the center slightly inside the domain
        n_in = -edge.normal
        c_eval = c + 1e-9 * h * n_in
    else:
        c_eval = c
    u0 = interp(c_eval[0], c_eval[1])
    if np.ma.is_masked(u0):
        return None
    # keep both circles clear of corners (and of the boundary for interior points)
    d_room = float(np.min(np.linalg.norm(mesh.spec.corners() - c, axis=1)))
    if edge is None:
        d_room = min(d_room, float(_boundary_distance(mesh, c[None])[0]))
    scale = min(1.0, 0.6 * d_room / (max(factors) * h))
    counts = []
    th = np.linspace(0, 2 * math.pi, n_samples, endpoint=False)
    for f in factors:
        pts = c + f * h * scale * np.column_stack([np.cos(th), np.sin(th)])
        if edge is not None:
            outside = (pts - np.asarray(edge.p0)) @ edge.normal > 0
            pts[outside] = _reflect(pts[outside], np.asarray(edge.p0), edge.tangent)
        vals = interp(pts[:, 0], pts[:, 1])
        if np.ma.is_masked(vals) and np.any(np.ma.getmaskarray(vals)):
            return None
        counts.append(_sign_changes(np.asarray(vals) - float(u0)))
    if len(set(counts)) != 1 or counts[0] % 2:
        return None
    idx = 1 - counts[0] // 2
    return idx if idx in (-1, 0, 1) else None
