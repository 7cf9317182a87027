"""Graded conforming triangulations of labeled polygonal domains."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import triangle as tr

from .geometry import Condition, PlanarDomainSpec, VertexInfo, classify_vertices

log = logging.getLogger(__name__)

MAX_DEPTH = 12
# longest element edge allowed relative to the local size target
SIZE_SLACK = 1.0


class MeshError(RuntimeError):
    pass


@dataclass(frozen=True)
class GradingPolicy:
    """Geometric grading toward vertices whose expansion exponent is below one.

    Parameters
    ----------
    exponents : dict
        Corner index -> leading exponent s of the local expansion.
    q : float
        Ratio between consecutive refinement rings.
    depth : int or None
        Number of rings; None picks ceil(log2(1/h)) capped at 12.
    enabled : bool
        When False no grading is applied.
    """

    exponents: dict = field(default_factory=dict)
    q: float = 0.5
    depth: Optional[int] = None
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError("grading ratio must lie in (0, 1)")
        for s in self.exponents.values():
            if s <= 0:
                raise ValueError("grading exponents must be positive")

    @classmethod
    def from_spec(cls, spec: PlanarDomainSpec, **kw) -> "GradingPolicy":
        return cls({v.index: v.exponent for v in classify_vertices(spec)}, **kw)

    @classmethod
    def none(cls) -> "GradingPolicy":
        return cls(enabled=False)

    def levels(self, h: float) -> tuple:
        """(depth used, True when the cap was hit)."""
        if self.depth is not None:
            return min(self.depth, MAX_DEPTH), self.depth > MAX_DEPTH
        want = max(1, math.ceil(math.log2(1.0 / h))) if h < 1 else 1
        return min(want, MAX_DEPTH), want > MAX_DEPTH


class SizeField:
    """Target element size h(x) for a domain, mesh width and grading."""

    def __init__(self, spec: PlanarDomainSpec, h: float, grading: GradingPolicy):
        self.h = float(h)
        self.centers, self.radii, self.powers, self.rmins = [], [], [], []
        self.depth, self.cap_hit = grading.levels(h)
        if not grading.enabled:
            return
        corners = spec.corners()
        edges = spec.edges()
        for k, s in sorted(grading.exponents.items()):
            if s >= 1.0 - 1e-12:
                continue
            e_in, e_out = edges[k - 1], edges[k]
            R = 0.5 * min(e_in.length, e_out.length)
            self.centers.append(corners[k])
            self.radii.append(R)
            self.powers.append(1.0 - s)
            self.rmins.append(R * grading.q ** self.depth)

    @property
    def graded(self) -> bool:
        return bool(self.centers)

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.full(len(pts), self.h)
        for c, R, p, rmin in zip(self.centers, self.radii, self.powers, self.rmins):
            r = np.linalg.norm(pts - c, axis=1)
            loc = self.h * (np.clip(r, rmin, R) / R) ** p
            out = np.minimum(out, loc)
        return out


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangulation with labeled boundary edges.

    Attributes
    ----------
    nodes : (Nv, 2) float array
    triangles : (Nt, 3) int array, counterclockwise
    boundary_edges : (Nb, 2) int array, ordered along the ccw boundary
    edge_condition : (Nb,) array of 'D'/'N'
    edge_arc : (Nb,) array of arc ids
    edge_parent : (Nb,) polygon edge index each boundary edge lies on
    corner_nodes : (Nc,) node index of each polygon corner
    h_target : float
    info : dict of meshing diagnostics (grading depth, cap flag)
    spec : the source domain, when known
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_condition: np.ndarray
    edge_arc: np.ndarray
    edge_parent: np.ndarray
    corner_nodes: np.ndarray
    h_target: float
    info: dict = field(default_factory=dict)
    spec: Optional[PlanarDomainSpec] = None

    def __post_init__(self):
        for name in ("nodes", "triangles", "boundary_edges", "edge_condition",
                     "edge_arc", "edge_parent", "corner_nodes"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted node pairs."""
        t = self.triangles
        e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        lens = np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)], 1)
        return lens.max(axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def node_h(self) -> np.ndarray:
        """Local mesh size at each node: longest incident edge length."""
        e = self.edges
        lens = np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)
        out = np.zeros(self.n_nodes)
        np.maximum.at(out, e[:, 0], lens)
        np.maximum.at(out, e[:, 1], lens)
        return out

    @cached_property
    def boundary_node_mask(self) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=bool)
        m[self.boundary_edges.ravel()] = True
        return m

    @cached_property
    def mpl_triangulation(self):
        from matplotlib.tri import Triangulation
        return Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)

    def local_h(self, pts) -> np.ndarray:
        """Size of the nearest element to each query point (diameter of the containing one)."""
        pts = np.atleast_2d(pts)
        finder = self.mpl_triangulation.get_trifinder()
        idx = finder(pts[:, 0], pts[:, 1])
        out = np.empty(len(pts))
        inside = idx >= 0
        out[inside] = self.diameters[idx[inside]]
        if np.any(~inside):
            d = np.linalg.norm(self.nodes[None, :, :] - pts[~inside, None, :], axis=2)
            out[~inside] = self.node_h[np.argmin(d, axis=1)]
        return out

    def edge_nodes(self, parent: int) -> np.ndarray:
        """Ordered node path along polygon edge ``parent`` (ccw direction)."""
        sel = np.flatnonzero(self.edge_parent == parent)
        return _order_path(self.boundary_edges[sel])


def _order_path(edges: np.ndarray) -> np.ndarray:
    """Chain directed edges (a->b) into a single node path."""
    if len(edges) == 0:
        return np.zeros(0, dtype=int)
    nxt = {int(a): int(b) for a, b in edges}
    heads = set(nxt) - set(nxt.values())
    if len(heads) != 1:
        raise MeshError("boundary edges do not form a single open path")
    cur = heads.pop()
    path = [cur]
    while cur in nxt:
        cur = nxt[cur]
        path.append(cur)
    if len(path) != len(edges) + 1:
        raise MeshError("boundary path is not simple")
    return np.array(path)


def _boundary_points(spec: PlanarDomainSpec, size: SizeField):
    """Split each polygon edge with spacing following the size field."""
    pts, markers = [], []
    for e in spec.edges():
        p0, p1 = np.array(e.p0), np.array(e.p1)
        L = e.length
        s_list = [0.0]
        s = 0.0
        while True:
            x = p0 + (s / L) * (p1 - p0)
            step = float(size(x)[0])
            # look ahead so the step does not overshoot a finer region
            x2 = p0 + (min(s + step, L) / L) * (p1 - p0)
            step = min(step, float(size(x2)[0]))
            if s + step >= L - 1e-12 * L:
                break
            s += step
            s_list.append(s)
        # even out the last gap
        s_arr = np.array(s_list + [L])
        if len(s_arr) > 2 and s_arr[-1] - s_arr[-2] < 0.5 * (s_arr[-2] - s_arr[-3]):
            s_arr = np.delete(s_arr, -2)
        for s in s_arr[:-1]:
            pts.append(p0 + (s / L) * (p1 - p0))
            markers.append(e.index)
    return np.array(pts), np.array(markers)


def triangulate(spec: PlanarDomainSpec, h: float, grading: Optional[GradingPolicy] = None,
                min_angle: float = 30.0, max_rounds: int = 40) -> Mesh:
    """Constrained Delaunay mesh of ``spec`` with target size ``h``.

    The boundary is presampled with the graded size field, a quality
    constrained Delaunay triangulation is built, and elements whose longest
    edge exceeds the local target are refined until none remain.

    Raises
    ------
    MeshError
        If ``h`` is not positive or exceeds the shortest boundary edge.
    """
    if not h > 0:
        raise MeshError("mesh size must be positive")
    if h > spec.shortest_edge * (1 + 1e-12):
        raise MeshError(f"h={h} exceeds the shortest boundary edge {spec.shortest_edge:.6g}")
    if grading is None:
        grading = GradingPolicy.from_spec(spec)
    size = SizeField(spec, h, grading)
    bpts, bmark = _boundary_points(spec, size)
    n = len(bpts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    data = dict(vertices=bpts, segments=segs, segment_markers=(bmark + 1)[:, None])
    area0 = math.sqrt(3) / 4 * h * h
    out = tr.triangulate(data, f"pq{min_angle:g}a{area0:.17g}")
    for _ in range(max_rounds):
        verts, tris = out["vertices"], out["triangles"]
        p = verts[tris]
        lens = np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)], 1)
        target = np.min(np.stack([size(p[:, i]) for i in range(3)], 1), axis=1)
        bad = lens.max(axis=1) > SIZE_SLACK * target
        if not np.any(bad):
            break
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        max_area = np.where(bad, np.minimum(0.5 * area, math.sqrt(3) / 4 * target ** 2), -1.0)
        out = tr.triangulate(dict(vertices=verts, triangles=tris, segments=out["segments"],
                                  segment_markers=out["segment_markers"],
                                  triangle_max_area=max_area), f"rpq{min_angle:g}a")
    else:
        log.warning("size refinement did not settle after %d rounds", max_rounds)
    return _finish(spec, out, h, size)


def _finish(spec: PlanarDomainSpec, out: dict, h: float, size: SizeField) -> Mesh:
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    segs = np.asarray(out["segments"], dtype=np.int64)
    parent = np.asarray(out["segment_markers"], dtype=np.int64).ravel() - 1
    # make triangles ccw
    p = nodes[tris]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
         (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tris[sa < 0] = tris[sa < 0][:, [0, 2, 1]]
    # snap corners exactly and orient boundary edges along the ccw loop
    corners = spec.corners()
    edges = spec.edges()
    corner_nodes = np.array([int(np.argmin(np.linalg.norm(nodes - c, axis=1))) for c in corners])
    nodes[corner_nodes] = corners
    for k in range(len(segs)):
        e = edges[parent[k]]
        t = e.tangent
        a, b = segs[k]
        if np.dot(nodes[b] - nodes[a], t) < 0:
            segs[k] = (b, a)
    # sort boundary edges along the loop
    order = np.lexsort([[np.dot(nodes[a] - edges[pk].p0, edges[pk].tangent)
                         for (a, _), pk in zip(segs, parent)], parent])
    segs, parent = segs[order], parent[order]
    cond = np.array([edges[k].condition.value for k in parent])
    arc = np.array([edges[k].arc_id for k in parent])
    info = {"grading_depth": size.depth, "grading_cap_hit": size.cap_hit,
            "graded": size.graded, "n_nodes": len(nodes), "n_triangles": len(tris)}
    if size.cap_hit:
        log.warning("grading depth capped at %d levels", MAX_DEPTH)
    return Mesh(nodes, tris, segs, cond, arc, parent, corner_nodes, h, info, spec)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four by its edge midpoints."""
    t = mesh.triangles
    nv = mesh.n_nodes
    e = mesh.edges
    key = {(int(a), int(b)): nv + i for i, (a, b) in enumerate(e)}

    def mid(a, b):
        return np.array([key[(min(x, y), max(x, y))] for x, y in zip(a, b)])

    m01, m12, m20 = mid(t[:, 0], t[:, 1]), mid(t[:, 1], t[:, 2]), mid(t[:, 2], t[:, 0])
    nodes = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[e[:, 0]] + mesh.nodes[e[:, 1]])])
    tris = np.vstack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ])
    be = mesh.boundary_edges
    bm = mid(be[:, 0], be[:, 1])
    new_be = np.empty((2 * len(be), 2), dtype=np.int64)
    new_be[0::2] = np.column_stack([be[:, 0], bm])
    new_be[1::2] = np.column_stack([bm, be[:, 1]])
    rep = lambda a: np.repeat(a, 2)
    info = dict(mesh.info, n_nodes=len(nodes), n_triangles=len(tris),
                uniform_refinements=mesh.info.get("uniform_refinements", 0) + 1)
    return Mesh(nodes, tris, new_be, rep(mesh.edge_condition), rep(mesh.edge_arc),
                rep(mesh.edge_parent), mesh.corner_nodes, mesh.h_target / 2, info, mesh.spec)


@dataclass(frozen=True)
class BoundaryChain:
    nodes: np.ndarray
    reversed: bool
    arc_id: str

    def length(self, mesh: Mesh) -> float:
        p = mesh.nodes[self.nodes]
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def boundary_chain(mesh: Mesh, arc_id, reverse: bool = False) -> BoundaryChain:
    """Ordered node path along an arc, counterclockwise unless ``reverse``."""
    sel = np.flatnonzero(mesh.edge_arc == str(arc_id))
    if len(sel) == 0:
        raise KeyError(f"arc {arc_id!r} not found in mesh")
    path = _order_path(mesh.boundary_edges[sel])
    if reverse:
        path = path[::-1]
    return BoundaryChain(path, reverse, str(arc_id))


# -- CSV io -------------------------------------------------------------------

def write_mesh_csv(mesh: Mesh, directory) -> dict:
    os.makedirs(directory, exist_ok=True)
    paths = {k: os.path.join(directory, f"{k}.csv") for k in ("nodes", "triangles", "boundary_edges")}
    with open(paths["nodes"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "x", "y"])
        for i, (x, y) in enumerate(mesh.nodes):
            w.writerow([i, repr(float(x)), repr(float(y))])
    with open(paths["triangles"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tri_id", "n0", "n1", "n2"])
        for i, t in enumerate(mesh.triangles):
            w.writerow([i, *map(int, t)])
    cset = set(int(c) for c in mesh.corner_nodes)
    cidx = {int(c): k for k, c in enumerate(mesh.corner_nodes)}
    with open(paths["boundary_edges"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n0", "n1", "condition", "arc_id", "parent_edge", "vertex0", "vertex1"])
        for (a, b), c, arc, p in zip(mesh.boundary_edges, mesh.edge_condition,
                                     mesh.edge_arc, mesh.edge_parent):
            w.writerow([int(a), int(b), c, arc, int(p),
                        cidx[int(a)] if int(a) in cset else -1,
                        cidx[int(b)] if int(b) in cset else -1])
    return paths


def _read_rows(path, required):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
        fields = rows[0].keys() if rows else []
    for col in required:
        if col not in fields:
            raise ValueError(f"{os.path.basename(path)}: missing column {col!r}")
    return rows


def read_mesh_csv(directory, h_target: float = float("nan"),
                  spec: Optional[PlanarDomainSpec] = None) -> Mesh:
    nrows = _read_rows(os.path.join(directory, "nodes.csv"), ["node_id", "x", "y"])
    nodes = np.array([[float(r["x"]), float(r["y"])] for r in nrows])
    trows = _read_rows(os.path.join(directory, "triangles.csv"), ["n0", "n1", "n2"])
    tris = np.array([[int(r["n0"]), int(r["n1"]), int(r["n2"])] for r in trows])
    brows = _read_rows(os.path.join(directory, "boundary_edges.csv"),
                       ["n0", "n1", "condition", "arc_id", "parent_edge", "vertex0"])
    be = np.array([[int(r["n0"]), int(r["n1"])] for r in brows])
    corners = {}
    for r, (a, _) in zip(brows, be):
        if int(r["vertex0"]) >= 0:
            corners[int(r["vertex0"])] = a
    corner_nodes = np.array([corners[k] for k in sorted(corners)])
    return Mesh(nodes, tris, be, np.array([r["condition"] for r in brows]),
                np.array([r["arc_id"] for r in brows]),
                np.array([int(r["parent_edge"]) for r in brows]), corner_nodes,
                h_target, {}, spec)
