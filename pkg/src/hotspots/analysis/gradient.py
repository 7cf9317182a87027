"""Nodal gradient recovery and directional derivative fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..assembly import element_gradients
from ..mesh import Mesh
from ..specfun import DerivativeFieldSpec

# below this |sin| two boundary constraints at a node count as parallel
_INDEPENDENT_SIN = 1e-6


@dataclass(frozen=True)
class RecoveredGradient:
    """Element-constant and area-averaged nodal gradients of a P1 field."""

    nodal: np.ndarray  # (Nv, 2)
    element: np.ndarray  # (Nt, 2)
    points: np.ndarray  # (Nv, 2) node coordinates
    bc_enforced: bool = False

    @property
    def magnitude_max(self) -> float:
        return float(np.linalg.norm(self.nodal, axis=1).max())

    def at_barycenters(self, mesh: Mesh) -> np.ndarray:
        """P1 interpolant of the nodal gradient evaluated at element centroids."""
        return self.nodal[mesh.triangles].mean(axis=1)


def element_gradient(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    G, _ = element_gradients(mesh)
    return np.einsum("tik,ti->tk", G, u[mesh.triangles])


def boundary_constraints(mesh: Mesh):
    """Per boundary node, the unit vectors ``c`` with ``g . c = 0`` imposed.

    A Neumann edge contributes its normal and a Dirichlet edge its tangent.
    """
    spec = mesh.spec
    edges = spec.edges()
    cons: dict = {}
    for (a, b), parent in zip(mesh.boundary_edges, mesh.edge_parent):
        e = edges[parent]
        c = e.normal if e.condition.value == "N" else e.tangent
        for n in (int(a), int(b)):
            cons.setdefault(n, [])
            if not any(abs(abs(float(np.dot(c, d))) - 1) < 1e-12 for d in cons[n]):
                cons[n].append(c)
    return cons


def project_boundary(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Impose the boundary conditions on recovered boundary gradients.

    Neumann edges force ``g . n = 0`` and Dirichlet edges force ``g . t = 0``.
    At a corner with two independent constraints the gradient is set to zero.
    """
    out = nodal.copy()
    for n, cs in boundary_constraints(mesh).items():
        if len(cs) == 1:
            c = cs[0]
            out[n] = out[n] - np.dot(out[n], c) * c
        else:
            c0, c1 = cs[0], cs[1]
            if abs(c0[0] * c1[1] - c0[1] * c1[0]) > _INDEPENDENT_SIN:
                out[n] = 0.0
            else:
                out[n] = out[n] - np.dot(out[n], c0) * c0
    return out


def recover_gradient(eig, mesh: Mesh, enforce_bc: bool = False) -> RecoveredGradient:
    """Area-weighted average of the element gradients around each node.

    Parameters
    ----------
    eig : EigenPair or ndarray
        Eigenpair, or any nodal field.
    enforce_bc : bool
        Project boundary-node gradients onto the boundary conditions, see
        :func:`project_boundary`. Exact affine fields are reproduced only
        when this is False.
    """
    u = np.asarray(getattr(eig, "u", eig), dtype=float)
    G, area = element_gradients(mesh)
    ge = np.einsum("tik,ti->tk", G, u[mesh.triangles])
    acc = np.zeros((mesh.n_nodes, 2))
    w = np.zeros(mesh.n_nodes)
    for i in range(3):
        np.add.at(acc, mesh.triangles[:, i], ge * area[:, None])
        np.add.at(w, mesh.triangles[:, i], area)
    nodal = acc / w[:, None]
    if enforce_bc:
        nodal = project_boundary(mesh, nodal)
    return RecoveredGradient(nodal, ge, mesh.nodes, enforce_bc)


def directional_field(g: RecoveredGradient, X: DerivativeFieldSpec) -> np.ndarray:
    """Nodal values of ``Xu`` from the recovered gradient."""
    return X.apply(g.points, g.nodal)
