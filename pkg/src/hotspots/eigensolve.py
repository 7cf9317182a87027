"""Smallest eigenpair of the restricted generalized problem K x = lambda M x."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import splu

from .assembly import DofMap, assemble_stiffness_mass, build_dofmap, restrict
from .geometry import PlanarDomainSpec
from .mesh import GradingPolicy, Mesh, triangulate

log = logging.getLogger(__name__)

POSITIVITY_EPS = 1e-8
RQ_SWITCH = 1e-3


class EigenSolveError(RuntimeError):
    pass


@dataclass
class EigenPair:
    """First eigenvalue with its M-normalized, positive nodal eigenfunction.

    Attributes
    ----------
    lambda1 : float
    u : ndarray
        Values at every mesh node; zero on constrained nodes.
    residual : float
        ``||K u - lambda M u||_2 / (lambda ||M u||_2)`` on free dofs.
    iterations : int
    positive : bool
        True when ``min(u) >= -1e-8 max(u)``.
    """

    lambda1: float
    u: np.ndarray
    residual: float
    iterations: int
    positive: bool = True
    info: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"lambda1": float(self.lambda1), "residual": float(self.residual),
                "iterations": int(self.iterations)}


def _factor(A, what: str):
    try:
        return splu(A.tocsc())
    except RuntimeError as exc:
        raise EigenSolveError(
            f"factorization of {what} failed (n={A.shape[0]}, nnz={A.nnz}): {exc}") from exc


def _rel_residual(K, M, x, lam):
    Mx = M @ x
    return float(np.linalg.norm(K @ x - lam * Mx) / (abs(lam) * np.linalg.norm(Mx)))


def smallest_eigenpair_free(K, M, tol: float = 1e-10, max_iter: int = 500, x0=None):
    """Inverse iteration on free-dof matrices, with Rayleigh-quotient shifts.

    Returns
    -------
    (lam, x, residual, iterations) with ``x^T M x = 1``.
    """
    n = K.shape[0]
    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= np.sqrt(x @ (M @ x))
    lu = _factor(K, "K")
    sigma = 0.0
    since_shift = 0
    lam, res = np.nan, np.inf
    for it in range(1, max_iter + 1):
        y = lu.solve(M @ x)
        x = y / np.sqrt(y @ (M @ y))
        lam = float(x @ (K @ x))
        res = _rel_residual(K, M, x, lam)
        if res <= tol:
            return lam, x, res, it
        since_shift += 1
        if res < RQ_SWITCH and (sigma == 0.0 or since_shift >= 5):
            # Rayleigh-quotient shift; the pencil stays nonsingular because
            # the discrete lambda is never hit exactly by the iterate
            sigma = lam
            lu = _factor(K - sigma * M, "K - sigma M")
            since_shift = 0
    raise EigenSolveError(f"no convergence after {max_iter} iterations (residual {res:.3e})")


def smallest_eigenpair(K, M, dofmap: DofMap, tol: float = 1e-10, max_iter: int = 500) -> EigenPair:
    """Smallest eigenpair of the Dirichlet-restricted pencil.

    ``K`` and ``M`` are the full matrices; the problem is restricted to the
    free dofs of ``dofmap`` and the returned vector is extended by zero.
    """
    Kf, Mf = restrict(K, dofmap), restrict(M, dofmap)
    lam, x, res, it = smallest_eigenpair_free(Kf, Mf, tol, max_iter)
    if np.sum(Mf @ x) < 0:
        x = -x
    u = dofmap.extend(x)
    umax = float(u.max())
    positive = bool(u.min() >= -POSITIVITY_EPS * umax)
    if not positive:
        log.warning("discrete eigenfunction has negative values down to %.3e (max %.3e)",
                    u.min(), umax)
    return EigenPair(lam, u, res, it, positive, {"min_u": float(u.min()), "max_u": umax})


@dataclass
class SecondEigenvalue:
    lambda2: float
    gap: float
    orthogonality: float
    iterations: int
    vector: np.ndarray


def second_eigenvalue_estimate(K, M, dofmap: DofMap, first: EigenPair, tol: float = 1e-8,
                               max_iter: int = 300, block: int = 3, seed: int = 0) -> SecondEigenvalue:
    """Ritz estimate of the second eigenvalue by deflated block inverse iteration.

    Each iterate is M-orthogonalized against the first eigenvector, so the
    iteration converges to the lowest eigenpairs of the complement.
    """
    Kf, Mf = restrict(K, dofmap), restrict(M, dofmap)
    u1 = first.u[dofmap.free]
    lu = _factor(Kf, "K")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((Kf.shape[0], block))

    def deflate(Y):
        return Y - np.outer(u1, u1 @ (Mf @ Y))

    lam_old = np.inf
    for it in range(1, max_iter + 1):
        X = deflate(lu.solve(Mf @ deflate(X)))
        # Rayleigh-Ritz on the block
        KX, MX = X.T @ (Kf @ X), X.T @ (Mf @ X)
        w, V = eigh(0.5 * (KX + KX.T), 0.5 * (MX + MX.T))
        X = X @ V
        x = X[:, 0]
        lam = float(w[0])
        res = _rel_residual(Kf, Mf, x, lam)
        if res < tol or abs(lam - lam_old) <= 1e-14 * lam:
            break
        lam_old = lam
    else:
        raise EigenSolveError("second eigenvalue iteration did not converge")
    x = x / np.sqrt(x @ (Mf @ x))
    orth = float(abs(x @ (Mf @ u1)))
    return SecondEigenvalue(lam, lam - first.lambda1, orth, it, dofmap.extend(x))


@dataclass
class Solution:
    """Mesh, matrices and first eigenpair of one solve."""

    spec: PlanarDomainSpec
    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    dofmap: DofMap
    eig: EigenPair


def solve_mesh(mesh: Mesh, tol: float = 1e-10, max_iter: int = 500) -> Solution:
    K, M = assemble_stiffness_mass(mesh)
    d = build_dofmap(mesh)
    eig = smallest_eigenpair(K, M, d, tol, max_iter)
    return Solution(mesh.spec, mesh, K, M, d, eig)


def solve(spec: PlanarDomainSpec, h: float, grading: Optional[GradingPolicy] = None,
          tol: float = 1e-10, max_iter: int = 500) -> Solution:
    """Mesh ``spec`` at size ``h`` and return its first eigenpair."""
    mesh = triangulate(spec, h, grading)
    sol = solve_mesh(mesh, tol, max_iter)
    log.info("lambda1=%.10g on %d nodes (%d iterations)", sol.eig.lambda1, mesh.n_nodes,
             sol.eig.iterations)
    return sol


def write_solution_csv(mesh: Mesh, eig: EigenPair, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "x", "y", "u"])
        for i, ((x, y), v) in enumerate(zip(mesh.nodes, eig.u)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(v))])


def read_solution_csv(path):
    """Return (node_ids, xy, u) from a solution CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty solution file")
    for col in ("node_id", "x", "y", "u"):
        if col not in rows[0]:
            raise ValueError(f"{path}: missing column {col!r}")
    ids = np.array([int(r["node_id"]) for r in rows])
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    u = np.array([float(r["u"]) for r in rows])
    return ids, xy, u


def write_summary_json(eig: EigenPair, path, extra: Optional[dict] = None) -> None:
    out = eig.summary()
    if extra:
        out.update(extra)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
