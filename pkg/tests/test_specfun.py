import math

import numpy as np
import pytest
from scipy import special

from hotspots.eigensolve import EigenPair
from hotspots.geometry import VertexInfo, VertexType, classify_vertices, quarter_disk_spec, triangle_spec
from hotspots.mesh import triangulate
from hotspots.specfun import (DerivativeFieldSpec, FitError, Incidence, UnsupportedCase, bessel_j,
                              bessel_zero, degree_one_predicate, expansion_basis, expansion_orders,
                              fit_expansion_samples, fit_vertex_expansion, leading_exponent,
                              predicate_in_domain)

J01 = 2.404825557695773


def vertex(vtype, beta, index=0):
    return VertexInfo(index, (0.0, 0.0), beta, vtype, math.pi / beta, 0, 1)


def test_bessel_known_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(0.5, math.pi / 2) == pytest.approx(2 / math.pi, abs=1e-14)
    assert abs(bessel_j(0, J01)) < 1e-9


@pytest.mark.parametrize("mu", [0.0, 0.5, 2 / 3, 1.0, 2.25, 4.0, 9.5])
def test_bessel_matches_scipy(mu):
    x = np.concatenate([np.linspace(0, 12, 97), np.linspace(12.5, 30, 15)])
    assert np.allclose(bessel_j(mu, x), special.jv(mu, x), rtol=1e-10, atol=1e-12)


def test_bessel_large_order_no_overflow():
    x = np.array([0.0, 1e-3, 1.0, 5.0])
    v = bessel_j(180.0, x)
    assert np.all(np.isfinite(v))
    assert np.allclose(v, special.jv(180.0, x), atol=1e-300)


def test_bessel_rejects_bad_input():
    with pytest.raises(ValueError):
        bessel_j(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_j(0, 31.0)


def test_bessel_zero():
    assert bessel_zero(0) == pytest.approx(J01, abs=1e-12)
    assert bessel_zero(0.5) == pytest.approx(math.pi, abs=1e-12)


def test_expansion_orders():
    labels, orders, kind = expansion_orders(VertexType.MIXED, 2.0, 3)
    assert kind == "sin" and np.allclose(orders, [1, 3, 5, 7])
    labels, orders, kind = expansion_orders(VertexType.DIRICHLET, 3.0, 2)
    assert list(labels) == [1, 2] and np.allclose(orders, [3, 6])
    labels, orders, kind = expansion_orders(VertexType.NEUMANN, 1.5, 2)
    assert kind == "cos" and np.allclose(orders, [0, 1.5, 3])


def test_round_trip_fit():
    rng = np.random.default_rng(0)
    beta = 1.1
    nu = math.pi / beta
    r = rng.uniform(0.05, 0.3, 400)
    th = rng.uniform(0, beta, 400)
    for vt in VertexType:
        labels, orders, kind = expansion_orders(vt, nu, 4)
        # every term contributes at order one on the samples
        _, scale = expansion_basis(r, th, orders, kind, 7.0, r_ref=True)
        coef = rng.uniform(0.5, 2.0, len(orders)) * rng.choice([-1, 1], len(orders)) / scale
        A, _ = expansion_basis(r, th, orders, kind, 7.0)
        _, _, got, _, resid = fit_expansion_samples(r, th, A @ coef, vt, nu, 7.0, 4)
        assert np.allclose(got, coef, rtol=1e-8, atol=0)
        assert resid < 1e-10


def test_fit_needs_samples():
    with pytest.raises(FitError):
        fit_expansion_samples(np.ones(5), np.ones(5), np.ones(5), VertexType.NEUMANN, 2.0, 1.0, 6)


@pytest.fixture(scope="module")
def quarter_disk():
    spec = quarter_disk_spec(1.0, 64)
    mesh = triangulate(spec, 0.02)
    return spec, mesh


def test_quarter_disk_interpolant_amplitude(quarter_disk):
    spec, mesh = quarter_disk
    r = np.hypot(*mesh.nodes.T)
    u = special.j0(J01 * r)
    eig = EigenPair(J01 ** 2, u, 0.0, 0)
    v0 = classify_vertices(spec)[0]
    fit = fit_vertex_expansion(eig, mesh, v0)
    assert fit.coefficients[0] == pytest.approx(1.0, rel=1e-2)
    assert np.all(fit.relative_amplitudes()[1:] < 1e-2)


def test_right_isosceles_oracle_fits():
    spec, _ = triangle_spec((0, 0), (1, 0), (1, 1), [1])
    mesh = triangulate(spec, 1 / 32)
    x, y = mesh.nodes.T
    u = np.cos(math.pi * x / 2) * np.cos(math.pi * y / 2)
    eig = EigenPair(math.pi ** 2 / 2, u, 0.0, 0)
    verts = classify_vertices(spec)
    nv = next(v for v in verts if v.vtype is VertexType.NEUMANN)
    fit = fit_vertex_expansion(eig, mesh, nv, n_max=4)
    assert fit.residual <= 1e-2 and fit.coefficients[0] > 0
    mixed_right = next(v for v in verts if v.vtype is VertexType.MIXED
                       and abs(v.angle_beta - math.pi / 2) < 1e-12)
    assert leading_exponent(eig, mesh, mixed_right) == pytest.approx(1.0, abs=0.05)


def test_predicate_dirichlet_lemma_example():
    v = vertex(VertexType.DIRICHLET, math.pi / 3)
    res = degree_one_predicate(v, DerivativeFieldSpec.constant(math.pi / 2))
    assert res.outcome is Incidence.VERTEX


def test_predicate_neumann_acute_complement():
    v = vertex(VertexType.NEUMANN, math.pi / 3)
    assert degree_one_predicate(v, DerivativeFieldSpec.constant(0.0)).outcome is Incidence.NOT_VERTEX
    inside = degree_one_predicate(v, DerivativeFieldSpec.constant(math.pi / 2 + 0.5))
    assert inside.outcome is Incidence.VERTEX


def test_predicate_mixed_rotational_on_dirichlet_edge():
    v = vertex(VertexType.MIXED, math.pi / 2)
    X = DerivativeFieldSpec.rotational((0.5, 0.0))
    assert degree_one_predicate(v, X).outcome is Incidence.NOT_VERTEX


def test_predicate_endpoint_inconclusive_and_symmetric():
    v = vertex(VertexType.NEUMANN, math.pi / 3)
    lo = degree_one_predicate(v, DerivativeFieldSpec.constant(math.pi / 2))
    hi = degree_one_predicate(v, DerivativeFieldSpec.constant(math.pi / 2 + math.pi / 3))
    assert lo.outcome is Incidence.INCONCLUSIVE and hi.outcome is Incidence.INCONCLUSIVE


def test_predicate_unsupported_and_neumann_cases():
    with pytest.raises(UnsupportedCase):
        degree_one_predicate(vertex(VertexType.NEUMANN, 1.0), DerivativeFieldSpec.rotational((1, 1)))
    right = degree_one_predicate(vertex(VertexType.NEUMANN, math.pi / 2), DerivativeFieldSpec.constant(1.0))
    assert right.outcome is Incidence.INCONCLUSIVE
    noisy = degree_one_predicate(vertex(VertexType.NEUMANN, 2.0), DerivativeFieldSpec.constant(1.0), None)
    assert noisy.outcome is Incidence.INCONCLUSIVE


def test_predicate_in_domain_frame():
    # square corner (1,0) with D = right edge; global d_y is tangent to D
    spec, _ = triangle_spec((0, 0), (1, 0), (1, 1), [1])
    v = next(v for v in classify_vertices(spec) if v.position == (1.0, 0.0))
    a = predicate_in_domain(spec, v, DerivativeFieldSpec.constant(math.pi / 2 + 0.3))
    b = predicate_in_domain(spec, v, DerivativeFieldSpec.constant(math.pi / 2 + 0.3 + 2 * math.pi))
    assert a.outcome is b.outcome and a.rule == b.rule
    assert a.delta_local == pytest.approx(b.delta_local, abs=1e-12)
