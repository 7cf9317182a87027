import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from hotspots.assembly import DofMap, assemble_stiffness_mass, build_dofmap, restrict
from hotspots.eigensolve import (EigenSolveError, read_solution_csv, second_eigenvalue_estimate, solve,
                                 solve_mesh, smallest_eigenpair, smallest_eigenpair_free,
                                 write_solution_csv, write_summary_json)
from hotspots.geometry import rectangle_spec
from hotspots.mesh import refine_uniform, triangulate

QUARTER_PI2 = math.pi ** 2 / 4


def chain_matrices(n):
    """1D P1 matrices on [0, 1] with n elements."""
    h = 1.0 / n
    main = np.full(n + 1, 2.0)
    main[[0, -1]] = 1.0
    K = sp.diags([main / h, -np.ones(n) / h, -np.ones(n) / h], [0, 1, -1], format="csr")
    M = sp.diags([main * h / 3, np.ones(n) * h / 6, np.ones(n) * h / 6], [0, 1, -1], format="csr")
    return K, M


def test_chain_oracle():
    K, M = chain_matrices(64)
    cons = np.zeros(65, bool)
    cons[-1] = True  # u(1) = 0, natural condition at 0
    eig = smallest_eigenpair(K, M, DofMap(cons))
    assert eig.lambda1 == pytest.approx(QUARTER_PI2, rel=1e-3)
    x = np.linspace(0, 1, 65)
    assert np.allclose(eig.u / eig.u[0], np.cos(math.pi * x / 2), atol=1e-3)


def test_square_top_independent_of_x(square_top):
    eig, mesh = square_top.eig, square_top.mesh
    assert eig.lambda1 == pytest.approx(QUARTER_PI2, rel=1e-3)
    assert eig.positive
    # u depends on y only: compare against the 1D cosine
    ex = np.cos(math.pi * mesh.nodes[:, 1] / 2)
    c = (eig.u @ ex) / (ex @ ex)
    assert np.abs(eig.u / c - ex).max() < 1e-3


def test_square_sides_oracle(square_sides):
    eig, mesh = square_sides.eig, square_sides.mesh
    assert eig.lambda1 == pytest.approx(math.pi ** 2, rel=2e-3)
    ex = np.sin(math.pi * mesh.nodes[:, 0])
    c = (eig.u @ ex) / (ex @ ex)
    assert np.abs(eig.u / c - ex).max() < 5e-3


def test_against_scipy_eigsh(right_isosceles):
    s = right_isosceles.sol
    Kf, Mf = restrict(s.K, s.dofmap), restrict(s.M, s.dofmap)
    ref = eigsh(Kf, k=1, M=Mf, sigma=0, which="LM", return_eigenvectors=False)[0]
    assert s.eig.lambda1 == pytest.approx(ref, rel=1e-10)


def test_rayleigh_quotient_matches(right_isosceles):
    s = right_isosceles.sol
    u = s.eig.u
    rq = (u @ (s.K @ u)) / (u @ (s.M @ u))
    assert rq == pytest.approx(s.eig.lambda1, rel=1e-10)
    assert s.eig.residual <= 1e-10


def test_second_eigenvalue_square_top():
    sol = solve(rectangle_spec(1, 1, ["top"]), 1 / 64)
    sec = second_eigenvalue_estimate(sol.K, sol.M, sol.dofmap, sol.eig)
    # separable spectrum: next mode is (pi)^2 + (pi/2)^2
    assert sec.lambda2 / sol.eig.lambda1 == pytest.approx(5.0, rel=0.05)
    assert sec.gap > 0
    assert sec.orthogonality <= 1e-8


def test_nested_refinement_monotone():
    m = triangulate(rectangle_spec(1, 0.7, ["right"]), 0.2)
    lams = []
    for _ in range(3):
        lams.append(solve_mesh(m).eig.lambda1)
        m = refine_uniform(m)
    assert all(b <= a + 1e-12 for a, b in zip(lams, lams[1:]))


def test_singular_matrix_reports():
    K = sp.csr_matrix(np.zeros((3, 3)))
    with pytest.raises(EigenSolveError):
        smallest_eigenpair_free(K, sp.identity(3, format="csr"))


def test_solution_io(tmp_path, right_isosceles):
    a = right_isosceles
    write_solution_csv(a.mesh, a.eig, tmp_path / "u.csv")
    ids, xy, u = read_solution_csv(tmp_path / "u.csv")
    assert np.array_equal(u, a.eig.u) and np.array_equal(xy, a.mesh.nodes)
    write_summary_json(a.eig, tmp_path / "s.json", {"h": 0.5})
    import json
    d = json.loads((tmp_path / "s.json").read_text())
    assert d["lambda1"] == a.eig.lambda1 and d["h"] == 0.5


def test_missing_column(tmp_path):
    (tmp_path / "u.csv").write_text("node_id,x,y\n0,0,0\n")
    with pytest.raises(ValueError, match="'u'"):
        read_solution_csv(tmp_path / "u.csv")


def test_reproducible_lambda():
    spec = rectangle_spec(1, 0.6, ["top"])
    a, b = solve(spec, 0.1), solve(spec, 0.1)
    assert abs(a.eig.lambda1 - b.eig.lambda1) <= 1e-12
