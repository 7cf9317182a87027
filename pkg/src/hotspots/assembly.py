"""Linear finite element stiffness and mass matrices with Dirichlet elimination."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class AssemblyError(RuntimeError):
    pass


def element_gradients(mesh: Mesh):
    """Gradients of the three barycentric basis functions on every element.

    Returns
    -------
    grads : (Nt, 3, 2) array
    area : (Nt,) array of signed areas
    """
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    # grad phi_i = (y_j - y_k, x_k - x_j) / (2A) for (i, j, k) cyclic
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    if np.any(area <= 0):
        raise AssemblyError(f"{int(np.sum(area <= 0))} elements with non-positive area")
    grads = np.stack([b, c], axis=2) / (2 * area)[:, None, None]
    return grads, area


def assemble_stiffness_mass(mesh: Mesh):
    """Consistent P1 stiffness and mass matrices.

    Returns
    -------
    K, M : scipy.sparse.csr_matrix
        ``K[i, j] = int grad phi_i . grad phi_j`` and ``M[i, j] = int phi_i phi_j``.
    """
    grads, area = element_gradients(mesh)
    ke = np.einsum("tik,tjk->tij", grads, grads) * area[:, None, None]
    me = (np.ones((3, 3)) + np.eye(3))[None, :, :] * (area / 12.0)[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    # coo -> csr sums duplicates in a fixed order, so the result is deterministic
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    # remove the O(eps) asymmetry from floating point accumulation
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return K.tocsr(), M.tocsr()


@dataclass(frozen=True)
class DofMap:
    """Free/constrained status of every mesh node."""

    constrained: np.ndarray  # bool per node

    @property
    def free(self) -> np.ndarray:
        return ~self.constrained

    @property
    def free_index(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained)

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self.constrained))

    def extend(self, x_free: np.ndarray) -> np.ndarray:
        """Embed a free-dof vector into a full nodal vector with zeros on D."""
        out = np.zeros(len(self.constrained))
        out[~self.constrained] = x_free
        return out


def build_dofmap(mesh: Mesh) -> DofMap:
    """Constrain every node lying on the closure of the Dirichlet part."""
    c = np.zeros(mesh.n_nodes, dtype=bool)
    d = mesh.edge_condition == "D"
    c[mesh.boundary_edges[d].ravel()] = True
    if c.all():
        raise AssemblyError("every node is constrained; the Neumann part is empty")
    if not c.any():
        raise AssemblyError("no Dirichlet nodes; the Dirichlet part is empty")
    return DofMap(c)


def restrict(A, d: DofMap):
    """Principal submatrix of ``A`` on the free nodes."""
    idx = d.free_index
    return A.tocsr()[idx][:, idx].tocsr()


def write_coo(A, path) -> None:
    """Write ``row col value`` lines, one per stored entry."""
    C = A.tocoo()
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for i, j, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_coo(path, shape=None):
    data = np.loadtxt(path, ndmin=2)
    r, c, v = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2]
    if shape is None:
        n = int(max(r.max(), c.max())) + 1
        shape = (n, n)
    return sp.coo_matrix((v, (r, c)), shape=shape).tocsr()
