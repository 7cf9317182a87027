"""Monotonicity, boundary integral identities, and vertex incidence of nodal sets.

On a straight boundary edge with counterclockwise unit tangent ``t`` and
outward normal ``n`` the derivatives of ``Xu`` reduce to tangential
derivatives of traces. Writing ``a = X.t`` and ``b = X.n``:

* on a Neumann edge ``Xu = a u_t`` and
  ``d_n(Xu) = (d_n a) u_t + b (-lam u - u_tt)``,
* on a Dirichlet edge ``Xu = b u_n`` and ``d_n(Xu) = a d_t(u_n)``,

with ``d_n a = 0`` for constant fields and ``d_n a = 1`` for rotations.
These forms avoid second derivatives normal to the boundary, which P1 data
cannot resolve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from matplotlib.tri import LinearTriInterpolator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..geometry import Condition, GraphFunction, VertexInfo, count_bound_n
from ..mesh import Mesh
from ..specfun import DerivativeFieldSpec, FieldKind, Incidence, vertex_frame
from .critical import CriticalKind, CriticalPoint
from .gradient import RecoveredGradient, directional_field
from .nodal import degenerate_threshold

MONOTONE_RTOL = 1e-6
NOISE_FACTOR = 0.5


@dataclass
class MonotoneResult:
    min_value: float
    holds: bool
    epsilon: float
    argmin: tuple = ()

    def to_dict(self) -> dict:
        return {"min_value": self.min_value, "holds": self.holds, "epsilon": self.epsilon,
                "argmin": list(map(float, self.argmin))}


def check_monotone(eig, mesh: Mesh, g: RecoveredGradient, L: DerivativeFieldSpec) -> MonotoneResult:
    """Minimum of ``Lu`` at element barycenters against ``-1e-6 max |grad u|``.

    ``Lu`` is taken from the interpolated recovered gradient, which should
    carry the boundary-condition projection so that the exactly vanishing
    boundary values of ``Lu`` are not polluted by averaging.
    """
    if L.kind is not FieldKind.CONSTANT:
        raise ValueError("check_monotone expects a constant field")
    gb = g.at_barycenters(mesh)
    vals = L.apply(mesh.centroids, gb)
    i = int(np.argmin(vals))
    eps = MONOTONE_RTOL * g.magnitude_max
    return MonotoneResult(float(vals[i]), bool(vals[i] > -eps), float(eps), tuple(mesh.centroids[i]))


# -- traces on edges --------------------------------------------------------------

@dataclass
class EdgeTrace:
    """Values along one polygon edge, ordered counterclockwise."""

    edge: object
    nodes: np.ndarray
    s: np.ndarray
    u: np.ndarray
    grad: np.ndarray

    @property
    def u_t(self) -> np.ndarray:
        return self.grad @ self.edge.tangent

    @property
    def u_n(self) -> np.ndarray:
        return self.grad @ self.edge.normal


def edge_trace(mesh: Mesh, u: np.ndarray, g: RecoveredGradient, parent: int) -> EdgeTrace:
    e = mesh.spec.edges()[parent]
    nodes = mesh.edge_nodes(parent)
    return EdgeTrace(e, nodes, e.project(mesh.nodes[nodes]), u[nodes], g.nodal[nodes])


def _segment_derivative(s, f):
    """Piecewise-constant derivative of nodal data on each segment."""
    return np.diff(f) / np.diff(s)


@dataclass
class TaoResult:
    lhs: float
    rhs: float
    rel_gap: float
    edge: int
    p: tuple
    q: tuple
    L: dict

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "rel_gap": self.rel_gap, "edge": self.edge,
                "p": list(map(float, self.p)), "q": list(map(float, self.q)), "L": self.L}


class IdentityError(ValueError):
    pass


def _resample(tr: EdgeTrace, s0: float, s1: float):
    """Trace restricted to ``[s0, s1]`` with interpolated end values."""
    lo, hi = min(s0, s1), max(s0, s1)
    inner = (tr.s > lo) & (tr.s < hi)
    s = np.concatenate([[lo], tr.s[inner], [hi]])
    u = np.interp(s, tr.s, tr.u)
    ut = np.interp(s, tr.s, tr.u_t)
    if s0 > s1:
        s, u, ut = s[::-1], u[::-1], ut[::-1]
    return s, u, ut


def tao_identity_check(eig, mesh: Mesh, g: RecoveredGradient, edge: int, p, q,
                       L: DerivativeFieldSpec, valid_endpoints: Optional[list] = None,
                       tol_on_edge: float = 1e-9) -> TaoResult:
    """Compare both sides of the edge identity for ``int_gamma Lu d_nu(Lu)``.

    The left side is a composite trapezoid rule along the edge from ``p`` to
    ``q`` using ``Lu = a g`` and ``d_nu(Lu) = b(-lam u - g')``, where ``g`` is
    the recovered derivative of ``u`` along the direction of travel and
    ``g'`` its piecewise-constant derivative. The right side is the closed
    form ``-lam/2 <L, gamma'> <L, nu> (u(q)^2 - u(p)^2)``.

    Parameters
    ----------
    valid_endpoints : list of points, optional
        Critical points and Neumann vertices on the edge; ``p`` and ``q``
        must each lie within ``2 h`` of one of them.
    """
    e = mesh.spec.edges()[edge]
    if e.condition is not Condition.NEUMANN:
        raise IdentityError("the identity is stated on Neumann edges")
    p, q = np.asarray(p, float), np.asarray(q, float)
    for x in (p, q):
        if e.distance(x)[0] > tol_on_edge * max(1.0, e.length):
            raise IdentityError(f"point {tuple(x)} is not on edge {edge}")
    if valid_endpoints is not None:
        h = mesh.h_target
        for x in (p, q):
            if not any(np.linalg.norm(x - np.asarray(v)) <= 2 * h for v in valid_endpoints):
                raise IdentityError(f"{tuple(x)} is neither a critical point nor a Neumann vertex")
    u = getattr(eig, "u", eig)
    lam = eig.lambda1
    tr = edge_trace(mesh, u, g, edge)
    sp_, sq_ = float(e.project(p)[0]), float(e.project(q)[0])
    sigma = 1.0 if sq_ >= sp_ else -1.0
    s, uu, ut = _resample(tr, sp_, sq_)
    dist = np.abs(s - s[0])
    gdir = sigma * ut  # derivative along the direction of travel
    a = float(np.dot(L.vectors(p)[0], e.tangent))
    b = float(np.dot(L.vectors(p)[0], e.normal))
    ds = np.diff(dist)
    gp = np.where(ds > 0, np.diff(gdir) / np.where(ds > 0, ds, 1.0), 0.0)
    # Lu = a sigma g_dir, d_nu Lu = b(-lam u - g'); trapezoid per segment
    lu = a * sigma * gdir
    seg = 0.5 * (lu[:-1] * (b * (-lam * uu[:-1] - gp)) + lu[1:] * (b * (-lam * uu[1:] - gp)))
    lhs = float(np.sum(seg * ds))
    rhs = float(-0.5 * lam * (sigma * a) * b * (uu[-1] ** 2 - uu[0] ** 2))
    gap = abs(lhs - rhs) / (abs(rhs) + lam * float(np.max(u ** 2)) * 1e-6)
    return TaoResult(lhs, rhs, float(gap), edge, tuple(p), tuple(q), L.to_dict())


# -- sign components ------------------------------------------------------------------

@dataclass
class ComponentResult:
    component: int
    sign: int
    n_nodes: int
    boundary_integral: float
    absolute_integral: float
    relative: float
    positive: bool
    admissible: bool
    reason: str = ""
    touches_dirichlet: bool = False

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating,)) else v) for k, v in self.__dict__.items()}


def sign_components(field_values: np.ndarray, mesh: Mesh, floor: float = 0.0):
    """Connected sets of nodes where the field exceeds ``floor`` in magnitude
    with a fixed sign; other nodes get label -1."""
    f = np.where(np.abs(field_values) <= floor, 0.0, field_values)
    e = mesh.edges
    same = (np.sign(f[e[:, 0]]) == np.sign(f[e[:, 1]])) & (f[e[:, 0]] != 0)
    n = mesh.n_nodes
    A = coo_matrix((np.ones(same.sum()), (e[same, 0], e[same, 1])), shape=(n, n))
    ncomp, labels = connected_components(A, directed=False)
    labels = labels.copy()
    labels[f == 0] = -1
    return labels


def _normal_derivative_of_field(tr: EdgeTrace, X: DerivativeFieldSpec, lam: float, pts):
    """Nodal ``Xu`` and ``d_nu(Xu)`` on an edge from the edge-wise reductions."""
    e = tr.edge
    vec = X.vectors(pts)
    a = vec @ e.tangent
    b = vec @ e.normal
    dna = 1.0 if X.kind is FieldKind.ROTATIONAL else 0.0
    if e.condition is Condition.NEUMANN:
        ut = tr.u_t
        utt = _nodal_derivative(tr.s, ut)
        phi = a * ut
        dphi = dna * ut + b * (-lam * tr.u - utt)
    else:
        un = tr.u_n
        phi = b * un
        dphi = a * _nodal_derivative(tr.s, un)
    return phi, dphi


def _nodal_derivative(s, f):
    """Derivative at nodes: averaged neighbouring segment slopes."""
    d = _segment_derivative(s, f)
    out = np.empty_like(f)
    out[0], out[-1] = d[0], d[-1]
    w0, w1 = np.diff(s)[:-1], np.diff(s)[1:]
    out[1:-1] = (d[:-1] * w1 + d[1:] * w0) / (w0 + w1)
    return out


def sign_component_check(field_values: np.ndarray, mesh: Mesh, eig, X: DerivativeFieldSpec,
                         g: RecoveredGradient, singular_vertices=(),
                         noise_factor: float = NOISE_FACTOR) -> list:
    """Boundary integral of ``phi d_nu phi`` over each sign component of ``phi = Xu``.

    Components are connected sets of strictly signed nodes. The boundary
    integral uses the edge-wise reductions and a trapezoid rule, clipping
    each boundary segment at the zero of the linear interpolant. A
    component is admissible for the positivity statement when there are at
    least two components, no node of it lies on a Dirichlet edge (so
    ``phi`` vanishes there), and it does not reach a vertex where ``u`` is
    not in ``H^2``. Nodes with ``|phi|`` below ``noise_factor * (h / diam)
    * max |phi|`` are treated as zeros so recovery noise along the exact
    zero set does not split into spurious components.
    """
    u = getattr(eig, "u", eig)
    lam = eig.lambda1
    floor = degenerate_threshold(mesh, float(np.abs(field_values).max()), noise_factor)
    labels = sign_components(field_values, mesh, floor)
    comps = sorted(set(labels[labels >= 0].tolist()))
    integ = {c: 0.0 for c in comps}
    absint = {c: 0.0 for c in comps}
    spec = mesh.spec
    d_nodes = np.zeros(mesh.n_nodes, dtype=bool)
    d_nodes[mesh.boundary_edges[mesh.edge_condition == "D"].ravel()] = True
    sing_nodes = set()
    if singular_vertices:
        for k in singular_vertices:
            sing_nodes.add(int(mesh.corner_nodes[k]))
    for e in spec.edges():
        tr = edge_trace(mesh, u, g, e.index)
        pts = mesh.nodes[tr.nodes]
        phi, dphi = _normal_derivative_of_field(tr, X, lam, pts)
        lab = labels[tr.nodes]
        for i in range(len(tr.nodes) - 1):
            ds = tr.s[i + 1] - tr.s[i]
            l0, l1 = lab[i], lab[i + 1]
            f0, f1, d0, d1 = phi[i], phi[i + 1], dphi[i], dphi[i + 1]
            if l0 >= 0 and l0 == l1:
                integ[l0] += 0.5 * ds * (f0 * d0 + f1 * d1)
                absint[l0] += 0.5 * ds * (abs(f0 * d0) + abs(f1 * d1))
                continue
            # clip at the zero of the linear interpolant of phi
            if f0 * f1 < 0:
                t = f0 / (f0 - f1)
                dz = d0 + t * (d1 - d0)
                if l0 >= 0:
                    integ[l0] += 0.5 * t * ds * f0 * d0
                    absint[l0] += 0.5 * t * ds * abs(f0 * d0)
                if l1 >= 0:
                    integ[l1] += 0.5 * (1 - t) * ds * f1 * d1
                    absint[l1] += 0.5 * (1 - t) * ds * abs(f1 * d1)
                del dz
            else:
                for lab_, f_, d_ in ((l0, f0, d0), (l1, f1, d1)):
                    if lab_ >= 0:
                        integ[lab_] += 0.25 * ds * f_ * d_
                        absint[lab_] += 0.25 * ds * abs(f_ * d_)
    out = []
    for c in comps:
        members = np.flatnonzero(labels == c)
        sign = int(np.sign(field_values[members[0]]))
        touches_d = bool(d_nodes[members].any())
        reason = ""
        admissible = True
        if len(comps) < 2:
            admissible, reason = False, "single component"
        elif touches_d:
            admissible, reason = False, "field nonzero on the Dirichlet part"
        elif sing_nodes and _touches(mesh, members, sing_nodes):
            admissible, reason = False, "reaches a singular vertex"
        elif absint[c] == 0.0:
            admissible, reason = False, "no boundary contact"
        rel = integ[c] / absint[c] if absint[c] > 0 else 0.0
        out.append(ComponentResult(c, sign, len(members), float(integ[c]), float(absint[c]),
                                   float(rel), bool(rel > 0), admissible, reason, touches_d))
    return out


def _touches(mesh: Mesh, members, nodes) -> bool:
    mem = set(members.tolist())
    if mem & nodes:
        return True
    e = mesh.edges
    for n in nodes:
        nb = np.concatenate([e[e[:, 0] == n, 1], e[e[:, 1] == n, 0]])
        if mem & set(nb.tolist()):
            return True
    return False


# -- graph-domain counting --------------------------------------------------------------

@dataclass
class CountResult:
    k: int
    extrema_count: int
    bound_n: int
    extrema_bound: int
    satisfied: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def extrema_bound(n: int) -> int:
    return (n + 1) // 2 if n % 2 else n // 2


def count_critical_on_N(points, f: GraphFunction) -> CountResult:
    """Compare critical points on the Neumann edge with the bound from ``f``."""
    on_n = [p for p in points if p.kind is CriticalKind.ON_N]
    k = len(on_n)
    ext = sum(1 for p in on_n if p.is_local_extremum_of_edge_restriction)
    n = count_bound_n(f)
    eb = extrema_bound(n)
    return CountResult(k, ext, n, eb, bool(k <= n and ext <= eb))


# -- traced incidence at vertices ----------------------------------------------------

@dataclass
class TracedIncidence:
    outcome: Incidence
    crossings: tuple
    radii: tuple
    min_ratio: float = float("nan")

    def to_dict(self) -> dict:
        return {"outcome": self.outcome.value, "crossings": list(self.crossings),
                "radii": list(self.radii), "min_ratio": self.min_ratio}


def traced_vertex_incidence(field_values: np.ndarray, mesh: Mesh, v: VertexInfo,
                            factors=(4.0, 8.0), margin: float = 0.05, n_theta: int = 181,
                            h: Optional[float] = None, clear_ratio: float = 0.05,
                            interp=None) -> TracedIncidence:
    """Whether the traced zero set of a field reaches a corner.

    The field is sampled on arcs of radius ``4 h`` and ``8 h`` around the
    vertex, inside the sector with an angular margin of ``margin * beta`` on
    both sides. A sign change on both arcs means the zero set enters the
    corner. No sign change with ``min |f| >= 0.05 max |f|`` on both arcs
    means it stays away. Anything else is inconclusive.
    """
    spec = mesh.spec
    interp = interp or LinearTriInterpolator(mesh.mpl_triangulation, field_values)
    origin, a0, flip = vertex_frame(spec, v)
    sgn = -1.0 if flip else 1.0
    beta = v.angle_beta
    h = mesh.h_target if h is None else h
    th = np.linspace(margin * beta, (1 - margin) * beta, n_theta)
    outs, cross, ratios = [], [], []
    for f in factors:
        phi = a0 + sgn * th
        pts = origin + f * h * np.column_stack([np.cos(phi), np.sin(phi)])
        vals = interp(pts[:, 0], pts[:, 1])
        if np.any(np.ma.getmaskarray(vals)):
            return TracedIncidence(Incidence.INCONCLUSIVE, (), tuple(f * h for f in factors))
        vals = np.asarray(vals)
        nc = _sign_changes_open(vals)
        cross.append(nc)
        mx = np.abs(vals).max()
        ratio = float(np.abs(vals).min() / mx) if mx > 0 else 0.0
        ratios.append(ratio)
        if nc >= 1:
            outs.append(Incidence.VERTEX)
        elif ratio >= clear_ratio:
            outs.append(Incidence.NOT_VERTEX)
        else:
            outs.append(Incidence.INCONCLUSIVE)
    outcome = outs[0] if len(set(outs)) == 1 else Incidence.INCONCLUSIVE
    return TracedIncidence(outcome, tuple(cross), tuple(f * h for f in factors), min(ratios))


def _sign_changes_open(vals) -> int:
    s = np.sign(vals)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
