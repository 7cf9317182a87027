"""Zero sets of nodal fields by marching triangles."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..mesh import Mesh

DEGENERATE_FACTOR = 0.5


class EndpointKind(str, Enum):
    INTERIOR = "InteriorJunction"
    ON_N = "OnN"
    ON_D = "OnD"
    AT_VERTEX = "AtVertex"
    LOOP = "Loop"


@dataclass(frozen=True)
class Endpoint:
    kind: EndpointKind
    point: tuple
    vertex: Optional[int] = None
    edge: Optional[int] = None

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "point": list(map(float, self.point)),
                "vertex": self.vertex, "edge": self.edge}


@dataclass(frozen=True)
class NodalArc:
    points: np.ndarray
    start: Endpoint
    end: Endpoint

    @property
    def closed(self) -> bool:
        return self.start.kind is EndpointKind.LOOP

    def to_dict(self) -> dict:
        return {"points": np.round(self.points, 12).tolist(), "start": self.start.to_dict(),
                "end": self.end.to_dict()}


@dataclass
class NodalGraph:
    """Polyline pieces of the zero set of a P1 field."""

    arcs: list
    degenerate: bool = False
    max_abs: float = 0.0
    threshold: float = 0.0
    info: dict = field(default_factory=dict)

    def endpoints(self):
        for a in self.arcs:
            if not a.closed:
                yield a.start
                yield a.end

    def points(self) -> np.ndarray:
        if not self.arcs:
            return np.zeros((0, 2))
        return np.vstack([a.points for a in self.arcs])

    def to_dict(self) -> dict:
        return {"degenerate": bool(self.degenerate), "max_abs": float(self.max_abs),
                "threshold": float(self.threshold), "arcs": [a.to_dict() for a in self.arcs]}


def degenerate_threshold(mesh: Mesh, scale: float, factor: float = DEGENERATE_FACTOR) -> float:
    """Level below which a derivative field is treated as identically zero.

    Recovered derivatives of an exactly vanishing field are of size
    ``O(h)`` relative to ``|grad u|``, so the threshold scales with the
    mesh size relative to the domain diameter.
    """
    diam = float(np.ptp(mesh.nodes, axis=0).max())
    return factor * (float(mesh.diameters.max()) / diam) * scale


def _edge_ids(mesh: Mesh):
    nv = mesh.n_nodes
    e = mesh.edges
    keys = e[:, 0] * nv + e[:, 1]
    t = mesh.triangles
    loc = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        a, b = np.minimum(t[:, i], t[:, j]), np.maximum(t[:, i], t[:, j])
        loc.append(np.searchsorted(keys, a * nv + b))
    return np.stack(loc, axis=1)


def classify_point(mesh: Mesh, p, snap: float) -> Endpoint:
    """Classify a point by proximity to corners and boundary edges."""
    spec = mesh.spec
    corners = spec.corners()
    d = np.linalg.norm(corners - p, axis=1)
    k = int(np.argmin(d))
    if d[k] <= snap:
        return Endpoint(EndpointKind.AT_VERTEX, tuple(p), vertex=k)
    tol = 1e-9 * float(np.ptp(mesh.nodes, axis=0).max())
    for e in spec.edges():
        if e.distance(p)[0] <= tol:
            kind = EndpointKind.ON_D if e.condition.value == "D" else EndpointKind.ON_N
            return Endpoint(kind, tuple(p), edge=e.index)
    return Endpoint(EndpointKind.INTERIOR, tuple(p))


def nodal_graph(field_values: np.ndarray, mesh: Mesh, scale: Optional[float] = None,
                snap: Optional[float] = None) -> NodalGraph:
    """Trace the zero level set of the P1 interpolant of ``field_values``.

    Parameters
    ----------
    field_values : ndarray
        Nodal values; exact zeros are counted as positive.
    scale : float, optional
        Reference magnitude (typically ``max |grad u|``). When given, a
        field whose maximum falls below :func:`degenerate_threshold` is
        flagged degenerate and no arcs are traced.
    snap : float, optional
        Endpoints within this distance of a corner are attributed to it;
        default half the target mesh size.
    """
    f = np.asarray(field_values, dtype=float)
    max_abs = float(np.abs(f).max())
    thr = degenerate_threshold(mesh, scale) if scale is not None else 0.0
    if max_abs <= thr or max_abs == 0.0:
        return NodalGraph([], True, max_abs, thr)
    snap = 0.5 * mesh.h_target if snap is None else snap
    pos = f >= 0
    e = mesh.edges
    cross = pos[e[:, 0]] != pos[e[:, 1]]
    fa, fb = f[e[:, 0]], f[e[:, 1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, fa / (fa - fb), 0.0)
    pts = mesh.nodes[e[:, 0]] + t[:, None] * (mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]])
    tri_e = _edge_ids(mesh)
    # adjacency between crossing edges through the triangles they share
    adj: dict = {}
    tc = cross[tri_e]
    for tri in np.flatnonzero(tc.sum(axis=1) == 2):
        a, b = tri_e[tri][tc[tri]]
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    seen = set()
    arcs = []

    def walk(start):
        path = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in adj.get(cur, []) if n != prev]
            if not nxt:
                return path, False
            n = nxt[0]
            if n == start:
                return path, True
            if n in seen:
                return path, False
            seen.add(n)
            path.append(n)
            prev, cur = cur, n

    ends = [k for k, v in adj.items() if len(v) == 1]
    for k in sorted(ends):
        if k in seen:
            continue
        path, _ = walk(k)
        P = pts[path]
        arcs.append(NodalArc(P, classify_point(mesh, P[0], snap), classify_point(mesh, P[-1], snap)))
    for k in sorted(adj):
        if k in seen:
            continue
        path, closed = walk(k)
        P = pts[path + [path[0]]] if closed else pts[path]
        ep = Endpoint(EndpointKind.LOOP, tuple(P[0]))
        arcs.append(NodalArc(P, ep, ep))
    return NodalGraph(arcs, False, max_abs, thr)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point clouds."""
    from scipy.spatial import cKDTree
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def densify(points: np.ndarray, step: float) -> np.ndarray:
    """Resample a polyline so consecutive points are at most ``step`` apart."""
    out = [points[0]]
    for p, q in zip(points[:-1], points[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(q - p) / step)))
        for s in np.linspace(0, 1, n + 1)[1:]:
            out.append(p + s * (q - p))
    return np.array(out)
