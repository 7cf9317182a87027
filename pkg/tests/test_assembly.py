import numpy as np
import pytest
import scipy.sparse as sp

from hotspots.assembly import (AssemblyError, assemble_stiffness_mass, build_dofmap, read_coo,
                               restrict, write_coo)
from hotspots.geometry import rectangle_spec, triangle_spec
from hotspots.mesh import GradingPolicy, Mesh, triangulate


def unit_element() -> Mesh:
    return Mesh(np.array([[0, 0], [1, 0], [0, 1]], float), np.array([[0, 1, 2]]),
                np.array([[0, 1], [1, 2], [2, 0]]), np.array(["N", "D", "N"]),
                np.array(["a", "b", "c"]), np.arange(3), np.arange(3), 1.0)


def test_element_matrices():
    K, M = assemble_stiffness_mass(unit_element())
    # hand integration of constant gradients of the three hat functions
    ke = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    me = (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    assert np.allclose(K.toarray(), ke, atol=1e-15)
    assert np.allclose(M.toarray(), me, atol=1e-15)


@pytest.fixture(scope="module")
def square_mesh():
    return triangulate(rectangle_spec(1, 1, ["top"]), 0.125)


def test_row_sums_and_affine_consistency(square_mesh):
    K, M = assemble_stiffness_mass(square_mesh)
    interior = ~square_mesh.boundary_node_mask
    assert np.abs(K @ np.ones(square_mesh.n_nodes)).max() < 1e-12
    for coef in ((1.0, 0.0), (0.3, -2.0)):
        u = square_mesh.nodes @ np.array(coef) + 0.7
        assert np.abs((K @ u)[interior]).max() < 1e-12
    assert M.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(K - K.T).max() == 0 and abs(M - M.T).max() == 0


def test_dofmap_square_top_coarse():
    mesh = triangulate(rectangle_spec(1, 1, ["top"]), 0.5, GradingPolicy.none())
    d = build_dofmap(mesh)
    on_top = mesh.nodes[:, 1] == 1.0
    assert np.array_equal(d.constrained, on_top)
    xs = set(mesh.nodes[on_top, 0].tolist())
    assert {0.0, 0.5, 1.0} <= xs


def test_dofmap_two_dirichlet_edges():
    spec, _ = triangle_spec((0, 0), (1, 0), (0.5, 0.8), [1, 2])
    mesh = triangulate(spec, 0.1)
    d = build_dofmap(mesh)
    corners = mesh.corner_nodes
    assert d.constrained[corners].all()
    for e in spec.edges():
        on = e.distance(mesh.nodes) < 1e-12
        if e.condition.value == "D":
            assert d.constrained[on].all()


def test_dofmap_rejects_all_dirichlet():
    m = unit_element()
    m2 = Mesh(m.nodes, m.triangles, m.boundary_edges, np.array(["D", "D", "D"]), m.edge_arc,
              m.edge_parent, m.corner_nodes, 1.0)
    with pytest.raises(AssemblyError):
        build_dofmap(m2)


def test_restrict(square_mesh):
    d = build_dofmap(square_mesh)
    n = square_mesh.n_nodes
    eye = restrict(sp.identity(n, format="csr"), d)
    assert (eye != sp.identity(d.n_free)).nnz == 0
    K, _ = assemble_stiffness_mass(square_mesh)
    Kf = restrict(K, d)
    assert abs(Kf - Kf.T).max() == 0
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.standard_normal(d.n_free)
        full = d.extend(x)
        assert x @ (Kf @ x) == pytest.approx(full @ (K @ full), rel=1e-12)


def test_free_stiffness_positive_definite(square_mesh):
    from scipy.sparse.linalg import eigsh
    d = build_dofmap(square_mesh)
    K, M = assemble_stiffness_mass(square_mesh)
    vals = eigsh(restrict(K, d), k=1, M=restrict(M, d), sigma=0, which="LM", return_eigenvectors=False)
    assert vals.min() > 0


def test_coo_round_trip(tmp_path, square_mesh):
    K, _ = assemble_stiffness_mass(square_mesh)
    write_coo(K, tmp_path / "K.txt")
    back = read_coo(tmp_path / "K.txt", K.shape)
    assert abs(back - K).max() == 0
