"""Planar domains with Dirichlet/Neumann boundary labels.

A domain is a simple counterclockwise polygon whose boundary is split into
labeled polyline arcs. Graph domains are the region between the x-axis and
the graph of a positive piecewise-linear function, with the bottom segment
Neumann and everything else Dirichlet.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np
from shapely.geometry import LinearRing

# relative tolerance for deciding that three boundary points are collinear
COLLINEAR_RTOL = 1e-12
# angle tolerance used to route triangles into acute/right/obtuse classes
ANGLE_ATOL = 1e-9


class GeometryError(ValueError):
    """Raised for invalid or degenerate domain descriptions."""


class Condition(str, Enum):
    DIRICHLET = "D"
    NEUMANN = "N"


class DomainKind(str, Enum):
    POLYGON = "Polygon"
    GRAPH = "GraphDomain"


class VertexType(str, Enum):
    NEUMANN = "NeumannVertex"
    DIRICHLET = "DirichletVertex"
    MIXED = "MixedVertex"


def _as_condition(c) -> Condition:
    if isinstance(c, Condition):
        return c
    key = str(c).strip().upper()
    if key in ("D", "DIRICHLET"):
        return Condition.DIRICHLET
    if key in ("N", "NEUMANN"):
        return Condition.NEUMANN
    raise GeometryError(f"unknown boundary condition {c!r}")


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _is_straight(p_prev, p, p_next) -> bool:
    d1 = np.subtract(p, p_prev)
    d2 = np.subtract(p_next, p)
    scale = np.dot(d1, d1) + np.dot(d2, d2)
    return abs(_cross(d1, d2)) <= COLLINEAR_RTOL * scale and np.dot(d1, d2) > 0


def shoelace_area(points) -> float:
    """Signed area of a closed or open polygon point list (positive if ccw)."""
    p = np.asarray(points, dtype=float)
    if np.allclose(p[0], p[-1]):
        p = p[:-1]
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class BoundaryArc:
    """A labeled polyline piece of the boundary."""

    points: tuple
    condition: Condition
    arc_id: str

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 2:
            raise GeometryError(f"arc {self.arc_id!r} needs at least 2 points")
        for a, b in zip(pts[:-1], pts[1:]):
            if a == b:
                raise GeometryError(f"arc {self.arc_id!r} has repeated point {a}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "condition", _as_condition(self.condition))
        object.__setattr__(self, "arc_id", str(self.arc_id))

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.points)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.xy, axis=0), axis=1)))


@dataclass(frozen=True)
class Edge:
    """A straight boundary segment between two consecutive corners."""

    index: int
    start: int
    end: int
    p0: tuple
    p1: tuple
    condition: Condition
    arc_id: str

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def tangent(self) -> np.ndarray:
        """Unit tangent in the counterclockwise direction of the boundary."""
        d = np.subtract(self.p1, self.p0)
        return d / np.linalg.norm(d)

    @property
    def normal(self) -> np.ndarray:
        """Outward unit normal (right of the ccw tangent)."""
        t = self.tangent
        return np.array([t[1], -t[0]])

    def project(self, pts) -> np.ndarray:
        """Arclength coordinate of points projected onto the edge line."""
        return (np.atleast_2d(pts) - np.asarray(self.p0)) @ self.tangent

    def distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        s = np.clip(self.project(pts), 0.0, self.length)
        foot = np.asarray(self.p0) + s[:, None] * self.tangent
        return np.linalg.norm(pts - foot, axis=1)


@dataclass(frozen=True)
class VertexInfo:
    """A boundary corner with its interior angle and label type."""

    index: int
    position: tuple
    angle_beta: float
    vtype: VertexType
    nu: float
    prev_edge: int
    next_edge: int

    @property
    def exponent(self) -> float:
        """Leading exponent of the local expansion of u at this vertex."""
        return self.nu / 2.0 if self.vtype is VertexType.MIXED else self.nu

    @property
    def singular(self) -> bool:
        """True when the gradient of u is unbounded at the vertex."""
        return self.exponent < 1.0 - 1e-12


@dataclass(frozen=True)
class GraphFunction:
    """Piecewise-linear nonnegative function on [a, b] defining a graph domain."""

    x: tuple
    y: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) != len(y) or len(x) < 2:
            raise GeometryError("graph function needs matching x/y with >= 2 samples")
        if any(b <= a for a, b in zip(x[:-1], x[1:])):
            raise GeometryError("breakpoints must be strictly increasing")
        if any(v < 0 for v in y):
            raise GeometryError("graph function must be nonnegative")
        if any(v <= 0 for v in y[1:-1]):
            raise GeometryError("graph function has an interior zero")
        if len(x) == 2 and y[0] == 0 and y[1] == 0:
            raise GeometryError("graph function vanishes identically")
        if y[0] == 0 and y[1] == 0 or y[-1] == 0 and y[-2] == 0:
            raise GeometryError("non-Lipschitz endpoint corner (zero slope at a zero endpoint)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def a(self) -> float:
        return self.x[0]

    @property
    def b(self) -> float:
        return self.x[-1]

    @property
    def is_constant(self) -> bool:
        return len(set(self.y)) == 1

    def __call__(self, xq):
        return np.interp(xq, self.x, self.y)

    def simplified(self) -> "GraphFunction":
        """Drop breakpoints where the function is locally linear."""
        keep = [0]
        for i in range(1, len(self.x) - 1):
            p0 = (self.x[keep[-1]], self.y[keep[-1]])
            if not _is_straight(p0, (self.x[i], self.y[i]), (self.x[i + 1], self.y[i + 1])):
                keep.append(i)
        keep.append(len(self.x) - 1)
        return GraphFunction([self.x[i] for i in keep], [self.y[i] for i in keep])

    def dominates(self, other: "GraphFunction", atol: float = 1e-12) -> bool:
        """True if self >= other on the common interval [a, b]."""
        if abs(self.a - other.a) > atol or abs(self.b - other.b) > atol:
            return False
        xs = np.union1d(self.x, other.x)
        return bool(np.all(self(xs) >= other(xs) - atol))


@dataclass(frozen=True)
class PlanarDomainSpec:
    """Simple counterclockwise polygon with per-arc boundary conditions."""

    arcs: tuple
    kind: DomainKind = DomainKind.POLYGON
    f: Optional[GraphFunction] = None

    def __post_init__(self):
        arcs = tuple(self.arcs)
        if not arcs:
            raise GeometryError("domain has no arcs")
        object.__setattr__(self, "kind", DomainKind(self.kind))
        for a0, a1 in zip(arcs, arcs[1:] + arcs[:1]):
            if a0.points[-1] != a1.points[0]:
                raise GeometryError(
                    f"arcs {a0.arc_id!r} and {a1.arc_id!r} do not join: "
                    f"{a0.points[-1]} != {a1.points[0]}")
        arcs = _normalize_arcs(arcs)
        object.__setattr__(self, "arcs", arcs)
        conds = {a.condition for a in arcs}
        if conds != {Condition.DIRICHLET, Condition.NEUMANN}:
            raise GeometryError("both a Dirichlet and a Neumann part are required")
        loop = self.loop()
        if shoelace_area(loop) <= 0:
            raise GeometryError("boundary must be oriented counterclockwise")
        if not LinearRing(loop[:-1]).is_simple:
            raise GeometryError("boundary loop self-intersects")
        if self.kind is DomainKind.GRAPH:
            neu = [a for a in arcs if a.condition is Condition.NEUMANN]
            if len(neu) != 1:
                raise GeometryError("graph domain needs exactly one Neumann arc")
            pts = neu[0].xy
            if np.any(pts[:, 1] != 0.0):
                raise GeometryError("graph-domain Neumann arc must lie on the x-axis")

    # -- boundary bookkeeping -------------------------------------------------

    def loop(self) -> np.ndarray:
        """Closed boundary loop, last point equal to the first."""
        pts = [self.arcs[0].points[0]]
        for arc in self.arcs:
            pts.extend(arc.points[1:])
        return np.array(pts)

    def corners(self) -> np.ndarray:
        return self.loop()[:-1]

    def edges(self) -> list:
        out = []
        k = 0
        n = len(self.corners())
        for arc in self.arcs:
            for p0, p1 in zip(arc.points[:-1], arc.points[1:]):
                out.append(Edge(k, k, (k + 1) % n, p0, p1, arc.condition, arc.arc_id))
                k += 1
        return out

    def arc(self, arc_id) -> BoundaryArc:
        for a in self.arcs:
            if a.arc_id == str(arc_id):
                return a
        raise KeyError(f"arc {arc_id!r} not found")

    @property
    def area(self) -> float:
        return shoelace_area(self.loop())

    @property
    def diameter(self) -> float:
        c = self.corners()
        d = c[:, None, :] - c[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def shortest_edge(self) -> float:
        return min(e.length for e in self.edges())

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "arcs": [{"id": a.arc_id, "points": [list(p) for p in a.points],
                      "condition": a.condition.value} for a in self.arcs],
        }
        if self.f is not None:
            out["f"] = {"x": list(self.f.x), "y": list(self.f.y)}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PlanarDomainSpec":
        kind = DomainKind(d.get("kind", "Polygon"))
        if "f" in d and not d.get("arcs"):
            return graph_domain_from_function(GraphFunction(d["f"]["x"], d["f"]["y"]))
        arcs = [BoundaryArc(a["points"], a["condition"], a.get("id", f"arc{i}"))
                for i, a in enumerate(d["arcs"])]
        f = GraphFunction(d["f"]["x"], d["f"]["y"]) if "f" in d else None
        return cls(tuple(arcs), kind, f)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path) -> "PlanarDomainSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _normalize_arcs(arcs) -> tuple:
    """Merge collinear interior points and collinear same-label arc joins."""
    merged = []
    for arc in arcs:
        if merged and merged[-1].condition is arc.condition and _is_straight(
                merged[-1].points[-2], arc.points[0], arc.points[1]):
            prev = merged.pop()
            arc = BoundaryArc(prev.points + arc.points[1:], prev.condition, prev.arc_id)
        merged.append(arc)
    if len(merged) > 1 and merged[-1].condition is merged[0].condition and _is_straight(
            merged[-1].points[-2], merged[0].points[0], merged[0].points[1]):
        last = merged.pop()
        merged[0] = BoundaryArc(last.points + merged[0].points[1:], last.condition, last.arc_id)
    out = []
    for arc in merged:
        pts = [arc.points[0]]
        for i in range(1, len(arc.points) - 1):
            if not _is_straight(pts[-1], arc.points[i], arc.points[i + 1]):
                pts.append(arc.points[i])
        pts.append(arc.points[-1])
        out.append(BoundaryArc(pts, arc.condition, arc.arc_id))
    return tuple(out)


def polygon_spec(points, conditions, arc_ids=None) -> PlanarDomainSpec:
    """Polygon with one arc per edge; edge k runs from points[k] to points[k+1]."""
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    if len(conditions) != n:
        raise GeometryError("need one condition per polygon edge")
    ids = arc_ids or [f"e{k}" for k in range(n)]
    arcs = [BoundaryArc([pts[k], pts[(k + 1) % n]], conditions[k], ids[k]) for k in range(n)]
    return PlanarDomainSpec(tuple(arcs))


def interior_angle(p_prev, p, p_next) -> float:
    """Interior angle at p of a ccw polygon, in (0, 2*pi)."""
    d_in = np.subtract(p_prev, p)
    d_out = np.subtract(p_next, p)
    if np.linalg.norm(d_in) == 0 or np.linalg.norm(d_out) == 0:
        raise GeometryError(f"zero-length edge at {tuple(p)}")
    # sweep ccw from the outgoing edge to the incoming one
    ang = math.atan2(_cross(d_out, d_in), float(np.dot(d_out, d_in)))
    return ang if ang > 0 else ang + 2 * math.pi


def classify_vertices(spec: PlanarDomainSpec) -> list:
    corners = spec.corners()
    edges = spec.edges()
    n = len(corners)
    out = []
    for k in range(n):
        e_prev, e_next = edges[k - 1], edges[k]
        beta = interior_angle(corners[k - 1], corners[k], corners[(k + 1) % n])
        if e_prev.condition is not e_next.condition:
            vt = VertexType.MIXED
        elif e_prev.condition is Condition.DIRICHLET:
            vt = VertexType.DIRICHLET
        else:
            vt = VertexType.NEUMANN
        out.append(VertexInfo(k, tuple(corners[k]), beta, vt, math.pi / beta,
                              e_prev.index, e_next.index))
    return out


def graph_domain_from_function(f: GraphFunction) -> PlanarDomainSpec:
    """Graph domain under f with Neumann bottom and Dirichlet elsewhere."""
    x, y = f.x, f.y
    a, b = f.a, f.b
    arcs = [BoundaryArc([(a, 0.0), (b, 0.0)], Condition.NEUMANN, "N")]
    if y[-1] > 0:
        arcs.append(BoundaryArc([(b, 0.0), (b, y[-1])], Condition.DIRICHLET, "D_right"))
    top = [(xi, yi) for xi, yi in zip(reversed(x), reversed(y))]
    if top[0][1] == 0.0:
        top[0] = (b, 0.0)
    if top[-1][1] == 0.0:
        top[-1] = (a, 0.0)
    arcs.append(BoundaryArc(top, Condition.DIRICHLET, "D_graph"))
    if y[0] > 0:
        arcs.append(BoundaryArc([(a, y[0]), (a, 0.0)], Condition.DIRICHLET, "D_left"))
    return PlanarDomainSpec(tuple(arcs), DomainKind.GRAPH, f)


def count_bound_n(f: GraphFunction) -> int:
    """Strict local extrema with f > 0 plus the number of flat pieces of f.

    Piecewise-linear semantics with exact comparisons of breakpoint values:
    a run of equal consecutive values is one flat interval and none of its
    points is a strict extremum.
    """
    y = f.y
    # collapse runs of equal values, remembering flat runs
    runs = []  # (value, is_flat)
    i = 0
    while i < len(y):
        j = i
        while j + 1 < len(y) and y[j + 1] == y[i]:
            j += 1
        runs.append((y[i], j > i))
        i = j + 1
    n_flat = sum(1 for _, flat in runs if flat)
    n_ext = 0
    for k, (v, flat) in enumerate(runs):
        if flat or v <= 0:
            continue
        left = runs[k - 1][0] if k > 0 else None
        right = runs[k + 1][0] if k + 1 < len(runs) else None
        nbrs = [w for w in (left, right) if w is not None]
        if nbrs and (all(v > w for w in nbrs) or all(v < w for w in nbrs)):
            n_ext += 1
    return n_ext + n_flat


class AngleClass(str, Enum):
    ACUTE = "acute"
    RIGHT = "right"
    OBTUSE = "obtuse"


def angle_class(beta: float, atol: float = ANGLE_ATOL) -> AngleClass:
    if abs(beta - math.pi / 2) <= atol:
        return AngleClass.RIGHT
    return AngleClass.ACUTE if beta < math.pi / 2 else AngleClass.OBTUSE


@dataclass(frozen=True)
class TriangleInfo:
    """Routing data for the triangle theorem checks."""

    dirichlet_edges: tuple
    neumann_edges: tuple
    angles: tuple
    # one Dirichlet edge: class of the Neumann vertex; two: worst N-adjacent angle
    neumann_angle_class: AngleClass
    obtuse_vertex: Optional[int] = None
    longer_neumann_edge: Optional[int] = None
    isosceles: bool = False


def triangle_spec(p0, p1, p2, dirichlet_edges: Iterable[int],
                  iso_rtol: float = 1e-9) -> tuple:
    """Labeled triangle; edge k joins p_k to p_{k+1}.

    Returns
    -------
    (PlanarDomainSpec, TriangleInfo)
        The vertex order is made counterclockwise, so edge indices of the
        returned spec may differ from the input numbering; TriangleInfo uses
        the returned numbering.
    """
    pts = [tuple(map(float, p)) for p in (p0, p1, p2)]
    dset = set(int(k) for k in dirichlet_edges)
    if not dset or not dset < {0, 1, 2}:
        raise GeometryError("dirichlet_edges must be a nonempty proper subset of {0,1,2}")
    area = shoelace_area(pts)
    scale = max(np.linalg.norm(np.subtract(pts[i], pts[j])) for i in range(3) for j in range(i))
    if abs(area) <= 1e-12 * scale ** 2:
        raise GeometryError("collinear triangle vertices")
    if area < 0:
        # (p0, p2, p1): new edge 0 = old 2, new 1 = old 1, new 2 = old 0
        pts = [pts[0], pts[2], pts[1]]
        dset = {{2: 0, 1: 1, 0: 2}[k] for k in dset}
    conds = [Condition.DIRICHLET if k in dset else Condition.NEUMANN for k in range(3)]
    spec = polygon_spec(pts, conds)
    return spec, triangle_info(spec, iso_rtol)


def triangle_info(spec: PlanarDomainSpec, iso_rtol: float = 1e-9) -> TriangleInfo:
    edges = spec.edges()
    if len(edges) != 3:
        raise GeometryError("not a triangle")
    verts = classify_vertices(spec)
    dirichlet = tuple(e.index for e in edges if e.condition is Condition.DIRICHLET)
    neumann = tuple(e.index for e in edges if e.condition is Condition.NEUMANN)
    angles = tuple(v.angle_beta for v in verts)
    obtuse = next((v.index for v in verts if v.angle_beta > math.pi / 2 + ANGLE_ATOL), None)
    longer = None
    iso = False
    if len(dirichlet) == 1:
        nv = next(v for v in verts if v.vtype is VertexType.NEUMANN)
        cls = angle_class(nv.angle_beta)
        l0, l1 = (edges[k].length for k in neumann)
        iso = abs(l0 - l1) <= iso_rtol * max(l0, l1)
        longer = neumann[0] if l0 >= l1 else neumann[1]
    else:
        n_adj = [v for v in verts if v.vtype is VertexType.MIXED]
        worst = max(v.angle_beta for v in n_adj)
        cls = angle_class(worst)
    return TriangleInfo(dirichlet, neumann, angles, cls, obtuse, longer, iso)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test by orientation signs."""
    def orient(a, b, c):
        v = _cross(np.subtract(b, a), np.subtract(c, a))
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def sector_points(center, radius, theta0, theta1, n) -> list:
    """Polyline on a circular arc, endpoints included."""
    th = np.linspace(theta0, theta1, n + 1)
    return [(center[0] + radius * math.cos(t), center[1] + radius * math.sin(t)) for t in th]


def quarter_disk_spec(radius: float = 1.0, n_arc: int = 64) -> PlanarDomainSpec:
    """Quarter disk with Neumann radial edges and a Dirichlet polyline arc."""
    arc = sector_points((0.0, 0.0), radius, 0.0, math.pi / 2, n_arc)
    arc[0] = (radius, 0.0)
    arc[-1] = (0.0, radius)
    arcs = (
        BoundaryArc([(0.0, 0.0), (radius, 0.0)], Condition.NEUMANN, "N_bottom"),
        BoundaryArc(arc, Condition.DIRICHLET, "D_arc"),
        BoundaryArc([(0.0, radius), (0.0, 0.0)], Condition.NEUMANN, "N_left"),
    )
    return PlanarDomainSpec(arcs)


def rectangle_spec(width: float, height: float, dirichlet: Sequence[str]) -> PlanarDomainSpec:
    """Axis-aligned rectangle [0,w]x[0,h]; sides named bottom/right/top/left."""
    names = ["bottom", "right", "top", "left"]
    pts = [(0.0, 0.0), (width, 0.0), (width, height), (0.0, height)]
    conds = [Condition.DIRICHLET if s in dirichlet else Condition.NEUMANN for s in names]
    return polygon_spec(pts, conds, names)
