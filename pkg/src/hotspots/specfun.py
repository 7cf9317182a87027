"""Bessel functions of fractional order, vertex expansions, and vertex predicates.

Near a polygon corner of opening ``beta`` the first eigenfunction is a sum of
separated solutions ``J_mu(sqrt(lam) r) * trig(mu theta)`` whose orders
depend on the boundary labels of the two incident edges. This module fits
those expansions to finite element data and predicts, from the leading
term, whether the zero set of a directional derivative reaches the corner.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import mpmath
import numpy as np
from scipy.optimize import brentq

from .geometry import PlanarDomainSpec, VertexInfo, VertexType, classify_vertices

X_MAX = 30.0
# above this argument the float series loses too many digits to cancellation
FLOAT_SERIES_LIMIT = 12.0
TERM_RTOL = 1e-17


def _series_float(mu: float, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    # leading term in log form so large orders neither overflow nor raise
    with np.errstate(divide="ignore"):
        log_term = mu * np.log(np.where(half > 0, half, 1.0)) - math.lgamma(mu + 1.0)
    term = np.where(half > 0, np.exp(np.minimum(log_term, 700.0)), 1.0 if mu == 0 else 0.0)
    total = term.copy()
    q = -half * half
    for k in range(1, 200):
        term = term * q / (k * (mu + k))
        total += term
        if np.all(np.abs(term) <= TERM_RTOL * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _series_mp(mu: float, x: float) -> float:
    with mpmath.workdps(50):
        half = mpmath.mpf(x) / 2
        mu = mpmath.mpf(mu)
        term = half ** mu / mpmath.gamma(mu + 1)
        total = term
        q = -half * half
        k = 0
        while True:
            k += 1
            term = term * q / (k * (mu + k))
            total += term
            if abs(term) <= mpmath.mpf(10) ** -40 * max(abs(total), mpmath.mpf(10) ** -300):
                break
        return float(total)


def bessel_j(mu, x):
    """Bessel function of the first kind ``J_mu(x)`` by its ascending series.

    Parameters
    ----------
    mu : float
        Order, ``mu >= 0``.
    x : float or array_like
        Argument in ``[0, 30]``.

    Notes
    -----
    For ``x <= 12`` the series is summed in double precision. Larger
    arguments use 50-digit arithmetic because the alternating terms grow
    to about ``exp(x)`` before they decay.
    """
    if mu < 0:
        raise ValueError("order must be nonnegative")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > X_MAX) or np.any(~np.isfinite(xa)):
        raise ValueError(f"argument outside the supported range [0, {X_MAX}]")
    flat = xa.ravel()
    out = np.empty_like(flat)
    small = flat <= FLOAT_SERIES_LIMIT
    if np.any(small):
        out[small] = _series_float(float(mu), flat[small])
    for i in np.flatnonzero(~small):
        out[i] = _series_mp(float(mu), float(flat[i]))
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def bessel_zero(mu: float, k: int = 1) -> float:
    """k-th positive zero of ``J_mu`` by bracketing and Brent's method."""
    grid = np.linspace(1e-6, X_MAX, 3001)
    vals = bessel_j(mu, grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if len(idx) < k:
        raise ValueError(f"fewer than {k} zeros of J_{mu} below {X_MAX}")
    i = idx[k - 1]
    return brentq(lambda t: bessel_j(mu, t), grid[i], grid[i + 1], xtol=1e-15)


# -- vertex expansions ----------------------------------------------------------

def expansion_orders(vtype: VertexType, nu: float, n_max: int):
    """Orders ``mu_n`` and trig kind of the separated solutions at a vertex.

    Returns
    -------
    (labels, orders, kind) where ``kind`` is ``'cos'`` or ``'sin'``.
    """
    if vtype is VertexType.NEUMANN:
        ns = np.arange(0, n_max + 1)
        return ns, ns * nu, "cos"
    if vtype is VertexType.DIRICHLET:
        ns = np.arange(1, n_max + 1)
        return ns, ns * nu, "sin"
    ns = np.arange(0, n_max + 1)
    return ns, (ns + 0.5) * nu, "sin"


def vertex_frame(spec: PlanarDomainSpec, v: VertexInfo):
    """Local polar frame at a vertex.

    Returns
    -------
    (origin, angle0, flip)
        Local angle of a global direction ``phi`` is ``phi - angle0`` when
        ``flip`` is False and ``angle0 - phi`` when True. The domain occupies
        local angles ``[0, beta]``. For mixed vertices the Dirichlet edge is
        at local angle 0; otherwise the outgoing (counterclockwise) edge is.
    """
    edges = spec.edges()
    e_in, e_out = edges[v.prev_edge], edges[v.next_edge]
    origin = np.array(v.position)
    d_out = np.subtract(e_out.p1, e_out.p0)
    d_in = np.subtract(e_in.p0, e_in.p1)
    if v.vtype is VertexType.MIXED and e_in.condition.value == "D":
        return origin, math.atan2(d_in[1], d_in[0]), True
    return origin, math.atan2(d_out[1], d_out[0]), False


def to_local_polar(points, origin, angle0, flip, beta):
    d = np.atleast_2d(points) - origin
    r = np.hypot(d[:, 0], d[:, 1])
    phi = np.arctan2(d[:, 1], d[:, 0])
    th = (angle0 - phi) if flip else (phi - angle0)
    th = np.mod(th, 2 * math.pi)
    # points just outside due to round-off land near 2*pi; fold them to 0
    th = np.where(th > 0.5 * (beta + 2 * math.pi), th - 2 * math.pi, th)
    return r, th


def expansion_basis(r, theta, orders, kind, lam, r_ref=None):
    """Columns ``J_mu(sqrt(lam) r) trig(mu theta)``, optionally scaled.

    When ``r_ref`` is given every column is divided by its largest absolute
    value over the samples, and the scale factors are returned too.
    """
    k = math.sqrt(lam)
    cols = []
    trig = np.cos if kind == "cos" else np.sin
    for mu in orders:
        cols.append(bessel_j(mu, k * r) * trig(mu * theta))
    A = np.column_stack(cols)
    if r_ref is None:
        return A, np.ones(len(orders))
    scale = np.abs(A).max(axis=0)
    scale[scale == 0] = 1.0
    return A / scale, scale


class FitError(ValueError):
    pass


@dataclass
class VertexExpansionFit:
    """Least-squares vertex expansion of an eigenfunction.

    ``coefficients[i]`` multiplies ``J_{mu_i}(sqrt(lam) r) trig(mu_i theta)``
    with labels ``n`` from ``labels``. ``amplitudes[i]`` is the largest
    absolute value of that term over the fitting annulus, which is what the
    dominance checks compare.
    """

    vertex: VertexInfo
    labels: np.ndarray
    orders: np.ndarray
    coefficients: np.ndarray
    amplitudes: np.ndarray
    r_min: float
    r_max: float
    residual: float
    n_samples: int
    u_norm: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def leading(self) -> float:
        return float(self.coefficients[0])

    def relative_amplitudes(self) -> np.ndarray:
        return self.amplitudes / abs(self.amplitudes[0])

    def to_dict(self) -> dict:
        return {
            "vtype": self.vertex.vtype.value,
            "beta": float(self.vertex.angle_beta),
            "position": list(map(float, self.vertex.position)),
            "labels": [int(n) for n in self.labels],
            "orders": [float(m) for m in self.orders],
            "coefficients": [float(c) for c in self.coefficients],
            "amplitudes": [float(a) for a in self.amplitudes],
            "r_min": float(self.r_min),
            "r_max": float(self.r_max),
            "residual": float(self.residual),
            "n_samples": int(self.n_samples),
        }


def fit_expansion_samples(r, theta, values, vtype: VertexType, nu: float, lam: float,
                          n_max: int = 6):
    """Fit expansion coefficients to samples given in local polar coordinates.

    Returns
    -------
    labels, orders, coefficients, amplitudes, relative residual
    """
    labels, orders, kind = expansion_orders(vtype, nu, n_max)
    if len(values) < 10 * len(orders):
        raise FitError(f"need at least {10 * len(orders)} samples, got {len(values)}")
    A, scale = expansion_basis(r, theta, orders, kind, lam, r_ref=True)
    sol, _, rank, _ = np.linalg.lstsq(A, values, rcond=None)
    if rank < A.shape[1]:
        raise FitError("rank-deficient expansion basis on the fitting annulus")
    resid = float(np.linalg.norm(A @ sol - values) / max(np.linalg.norm(values), 1e-300))
    return labels, orders, sol / scale, np.abs(sol), resid


def default_annulus(spec: PlanarDomainSpec, v: VertexInfo, h_local: float):
    """(r_min, r_max) = (2 h_local, min(0.2 * shorter incident edge, sector radius))."""
    edges = spec.edges()
    e_in, e_out = edges[v.prev_edge], edges[v.next_edge]
    # the sector chart holds until the nearest non-incident edge
    others = [e for e in edges if e.index not in (v.prev_edge, v.next_edge)]
    eps = min(float(e.distance(np.array(v.position))[0]) for e in others) if others else np.inf
    return 2.0 * h_local, min(0.2 * min(e_in.length, e_out.length), 0.5 * eps)


def fit_vertex_expansion(eig, mesh, v: VertexInfo, n_max: int = 6,
                         r_min: Optional[float] = None, r_max: Optional[float] = None,
                         spec: Optional[PlanarDomainSpec] = None) -> VertexExpansionFit:
    """Fit the vertex expansion of ``eig.u`` on an annulus around ``v``.

    Raises
    ------
    FitError
        If the annulus is empty, reaches another vertex's region, or the
        basis is rank deficient on the samples.
    """
    spec = spec or mesh.spec
    node = int(mesh.corner_nodes[v.index])
    h_local = float(mesh.node_h[node])
    d_min, d_max = default_annulus(spec, v, h_local)
    r_min = d_min if r_min is None else r_min
    r_max = d_max if r_max is None else r_max
    if not r_min < r_max:
        raise FitError(f"empty annulus ({r_min:.3g}, {r_max:.3g}); refine the mesh")
    if r_max > d_max * (1 + 1e-12):
        raise FitError("annulus reaches beyond the vertex sector")
    origin, a0, flip = vertex_frame(spec, v)
    r, th = to_local_polar(mesh.nodes, origin, a0, flip, v.angle_beta)
    sel = (r >= r_min) & (r <= r_max)
    labels, orders, coef, amp, resid = fit_expansion_samples(
        r[sel], th[sel], eig.u[sel], v.vtype, v.nu, eig.lambda1, n_max)
    u_norm = float(np.linalg.norm(eig.u[sel]) / math.sqrt(max(sel.sum(), 1)))
    return VertexExpansionFit(v, labels, orders, coef, amp, r_min, r_max, resid,
                              int(sel.sum()), u_norm, {"lambda1": float(eig.lambda1)})


def leading_exponent(eig, mesh, v: VertexInfo, r_min: Optional[float] = None,
                     r_max: Optional[float] = None, n_rings: int = 12, n_theta: int = 64,
                     spec: Optional[PlanarDomainSpec] = None) -> float:
    """Power ``p`` in ``||u(r, .)|| ~ r^p`` near a vertex.

    The angular L2 norm of ``u`` on rings is regressed against ``r`` on a
    log-log scale. The Bessel factor ``J_p(kr)/(kr)^p`` is divided out and
    the regression repeated until ``p`` settles.
    """
    spec = spec or mesh.spec
    node = int(mesh.corner_nodes[v.index])
    h_local = float(mesh.node_h[node])
    d_min, d_max = default_annulus(spec, v, h_local)
    r_min = d_min if r_min is None else r_min
    r_max = 0.5 * d_max if r_max is None else r_max
    origin, a0, flip = vertex_frame(spec, v)
    radii = np.geomspace(r_min, r_max, n_rings)
    m = v.angle_beta
    th = np.linspace(0.02 * m, 0.98 * m, n_theta)
    sgn = -1.0 if flip else 1.0
    interp = _interpolator(mesh, eig.u)
    norms = []
    for rr in radii:
        phi = a0 + sgn * th
        pts = origin + rr * np.column_stack([np.cos(phi), np.sin(phi)])
        vals = np.ma.filled(interp(pts[:, 0], pts[:, 1]), np.nan)
        norms.append(np.sqrt(np.nanmean(vals ** 2)))
    norms = np.array(norms)
    k = math.sqrt(eig.lambda1)
    p = np.polyfit(np.log(radii), np.log(norms), 1)[0]
    for _ in range(5):
        g = bessel_j(max(p, 0.0), k * radii) / (k * radii) ** max(p, 0.0)
        p = np.polyfit(np.log(radii), np.log(norms / np.abs(g)), 1)[0]
    return float(p)


def _term_gradient_bound(mu: float, k: float, r: np.ndarray) -> np.ndarray:
    """Upper bound of ``|grad (J_mu(k r) trig(mu theta))|`` on the circle of radius r."""
    x = k * r
    j = bessel_j(mu, x)
    # J_mu'(x) = (mu / x) J_mu(x) - J_{mu+1}(x)
    dj = mu / x * j - bessel_j(mu + 1, x)
    return np.hypot(k * dj, mu * j / r)


def dominance_radius(fit: VertexExpansionFit, label: int, factor: float = 2.0,
                     n_grid: int = 200) -> float:
    """Largest radius below which one fitted term controls the gradient.

    Returns the largest ``r`` such that, on every circle of radius at most
    ``r``, the gradient of the term with the given label exceeds ``factor``
    times the summed gradient bounds of all other fitted terms. Returns 0
    when no such radius exists inside the fitting range.
    """
    k = math.sqrt(fit.info["lambda1"])
    idx = np.flatnonzero(fit.labels == label)
    if not len(idx):
        raise ValueError(f"label {label} is not part of the fit")
    i = int(idx[0])
    r = np.geomspace(1e-4 * fit.r_max, fit.r_max, n_grid)
    grads = [abs(c) * _term_gradient_bound(float(m), k, r) for c, m in zip(fit.coefficients, fit.orders)]
    lead = grads[i]
    rest = sum(g for j, g in enumerate(grads) if j != i)
    ok = lead >= factor * rest
    if not ok[0]:
        return 0.0
    bad = np.flatnonzero(~ok)
    return float(r[-1] if not len(bad) else r[bad[0] - 1])


def _interpolator(mesh, values):
    from matplotlib.tri import LinearTriInterpolator
    return LinearTriInterpolator(mesh.mpl_triangulation, values)


def write_fit_report(fits, path) -> None:
    with open(path, "w") as fh:
        json.dump({"vertices": [f.to_dict() for f in fits]}, fh, indent=2)


# -- derivative fields and the degree-one predicates -------------------------------

class FieldKind(str, Enum):
    CONSTANT = "constant"
    ROTATIONAL = "rotational"


@dataclass(frozen=True)
class DerivativeFieldSpec:
    """Constant unit field at angle ``delta`` or rotation about ``center``."""

    kind: FieldKind
    delta: float = 0.0
    center: tuple = (0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", FieldKind(self.kind))
        if self.kind is FieldKind.ROTATIONAL and not np.all(np.isfinite(self.center)):
            raise ValueError("rotational center must be finite")

    @classmethod
    def constant(cls, delta: float, label: str = "") -> "DerivativeFieldSpec":
        return cls(FieldKind.CONSTANT, float(delta), label=label)

    @classmethod
    def along(cls, vec, label: str = "") -> "DerivativeFieldSpec":
        return cls.constant(math.atan2(vec[1], vec[0]), label)

    @classmethod
    def rotational(cls, center, label: str = "") -> "DerivativeFieldSpec":
        return cls(FieldKind.ROTATIONAL, center=tuple(map(float, center)), label=label)

    def vectors(self, points) -> np.ndarray:
        """Field vectors at the given points."""
        pts = np.atleast_2d(points)
        if self.kind is FieldKind.CONSTANT:
            v = np.array([math.cos(self.delta), math.sin(self.delta)])
            return np.tile(v, (len(pts), 1))
        c = np.asarray(self.center)
        return np.column_stack([-(pts[:, 1] - c[1]), pts[:, 0] - c[0]])

    def apply(self, points, grad) -> np.ndarray:
        """``Xu = X . grad u`` pointwise."""
        return np.einsum("ij,ij->i", self.vectors(points), np.atleast_2d(grad))

    def to_dict(self) -> dict:
        if self.kind is FieldKind.CONSTANT:
            return {"kind": "constant", "delta": float(self.delta), "label": self.label}
        return {"kind": "rotational", "center": list(self.center), "label": self.label}


class Incidence(str, Enum):
    VERTEX = "IsDegreeOneVertex"
    NOT_VERTEX = "NotAVertex"
    INCONCLUSIVE = "Inconclusive"


class UnsupportedCase(ValueError):
    pass


def _phase_zeros(lo: float, hi: float, offset: float, atol: float):
    """Zeros ``offset + k*pi`` inside ``[lo, hi]``; flags near-endpoint hits."""
    k0 = math.floor((lo - offset - atol) / math.pi)
    k1 = math.ceil((hi - offset + atol) / math.pi)
    inside, edge = 0, False
    for k in range(k0, k1 + 1):
        z = offset + k * math.pi
        if abs(z - lo) <= atol or abs(z - hi) <= atol:
            edge = True
        elif lo < z < hi:
            inside += 1
    return inside, edge


def _leading_profile_zero(mu: float, kind: str, delta: float, beta: float, atol: float,
                          theta_tol: float = 0.0):
    """Zero test for ``X`` applied to ``r^mu trig(mu theta)`` on ``[0, beta]``.

    With ``X`` at angle ``delta`` the derivative is, up to ``mu r^(mu-1)``,
    ``cos((mu-1) theta + delta)`` for the cosine mode and
    ``sin((mu-1) theta + delta)`` for the sine mode.
    """
    span = (mu - 1.0) * beta
    lo, hi = delta + min(0.0, span), delta + max(0.0, span)
    offset = math.pi / 2 if kind == "cos" else 0.0
    # a zero ray within theta_tol of an edge is within |mu-1| theta_tol in phase
    return _phase_zeros(lo, hi, offset, atol + abs(mu - 1.0) * theta_tol)


@dataclass(frozen=True)
class PredicateResult:
    outcome: Incidence
    rule: str
    delta_local: Optional[float] = None


def degree_one_predicate(v: VertexInfo, X: DerivativeFieldSpec, a1_zero: Optional[bool] = False,
                         atol: float = 1e-9, center_local=None,
                         theta_tol: float = 0.0) -> PredicateResult:
    """Does the zero set of ``Xu`` reach vertex ``v``, judged by the leading term?

    Parameters
    ----------
    v : VertexInfo
    X : DerivativeFieldSpec
        For a constant field ``X.delta`` must already be expressed in the
        vertex frame (see :func:`vertex_frame`). For a rotational field pass
        the center in the vertex frame as ``center_local``.
    a1_zero : bool or None
        Whether the ``n = 1`` Neumann coefficient vanishes; None means the
        fitted value is within noise.
    atol : float
        Angles this close to an interval endpoint give Inconclusive.
    theta_tol : float
        Also Inconclusive when a predicted zero ray lies within this angle
        of one of the two edges, where a traced zero set cannot be told
        apart from the boundary.
    """
    beta, nu = v.angle_beta, v.nu
    if X.kind is FieldKind.ROTATIONAL:
        if v.vtype is not VertexType.MIXED:
            raise UnsupportedCase("rotational fields are handled only at mixed vertices")
        c = np.asarray(center_local if center_local is not None else X.center, dtype=float)
        if np.hypot(*c) <= atol:
            raise UnsupportedCase("rotational field centered at the vertex")
        if beta < math.pi and abs(c[1]) <= atol * max(1.0, abs(c[0])):
            return PredicateResult(Incidence.NOT_VERTEX, "mixed-rotational-on-dirichlet-line")
        # off the Dirichlet line the field is locally the constant (c_y, -c_x)
        delta = math.atan2(-c[0], c[1])
        X = DerivativeFieldSpec.constant(delta)
    delta = float(np.mod(X.delta, 2 * math.pi))
    if v.vtype is VertexType.DIRICHLET:
        n, edge = _leading_profile_zero(nu, "sin", delta, beta, atol, theta_tol)
        rule = "dirichlet"
    elif v.vtype is VertexType.MIXED:
        n, edge = _leading_profile_zero(nu / 2, "sin", delta, beta, atol, theta_tol)
        rule = "mixed"
    else:
        if abs(beta - math.pi / 2) <= atol:
            return PredicateResult(Incidence.INCONCLUSIVE, "neumann-right-angle", delta)
        if beta < math.pi / 2 or a1_zero is True:
            if beta > math.pi / 2:
                # a1 = 0 with an obtuse corner: higher modes compete with the
                # radial term; only the radial term is covered here
                if 2 * nu - 1 <= 1 + atol:
                    return PredicateResult(Incidence.INCONCLUSIVE, "neumann-a1-zero-obtuse", delta)
            # radial term J_0: X J_0 ~ r cos(theta - delta)
            n, edge = _phase_zeros(-delta, beta - delta, math.pi / 2, atol + theta_tol)
            rule = "neumann-radial"
        elif a1_zero is None:
            return PredicateResult(Incidence.INCONCLUSIVE, "neumann-a1-in-noise", delta)
        else:
            n, edge = _leading_profile_zero(nu, "cos", delta, beta, atol, theta_tol)
            rule = "neumann-first-mode"
    if edge:
        return PredicateResult(Incidence.INCONCLUSIVE, rule + ":interval-endpoint", delta)
    if n == 0:
        return PredicateResult(Incidence.NOT_VERTEX, rule, delta)
    if n == 1:
        return PredicateResult(Incidence.VERTEX, rule, delta)
    return PredicateResult(Incidence.INCONCLUSIVE, rule + ":several-branches", delta)


def predicate_in_domain(spec: PlanarDomainSpec, v: VertexInfo, X: DerivativeFieldSpec,
                        a1_zero: Optional[bool] = False, atol: float = 1e-9,
                        theta_tol: float = 0.0) -> PredicateResult:
    """:func:`degree_one_predicate` with ``X`` given in global coordinates."""
    origin, a0, flip = vertex_frame(spec, v)
    sgn = -1.0 if flip else 1.0
    if X.kind is FieldKind.CONSTANT:
        loc = DerivativeFieldSpec.constant(sgn * (X.delta - a0))
        return degree_one_predicate(v, loc, a1_zero, atol, theta_tol=theta_tol)
    d = np.asarray(X.center) - origin
    r, phi = math.hypot(*d), math.atan2(d[1], d[0])
    th = sgn * (phi - a0)
    c_loc = (r * math.cos(th), r * math.sin(th))
    res = degree_one_predicate(v, X, a1_zero, atol, center_local=c_loc, theta_tol=theta_tol)
    return res
