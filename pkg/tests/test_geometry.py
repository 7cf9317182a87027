import math

import numpy as np
import pytest

from hotspots.geometry import (Condition, GeometryError, GraphFunction, PlanarDomainSpec, VertexType,
                               AngleClass, classify_vertices, count_bound_n, graph_domain_from_function,
                               polygon_spec, rectangle_spec, segments_intersect, shoelace_area,
                               triangle_spec)

N, D = Condition.NEUMANN, Condition.DIRICHLET


def test_constant_graph_is_unit_square():
    spec = graph_domain_from_function(GraphFunction((0, 1), (1, 1)))
    assert np.allclose(sorted(map(tuple, spec.corners())), [(0, 0), (0, 1), (1, 0), (1, 1)])
    conds = {tuple(np.round(e.p0, 12)): e.condition for e in spec.edges()}
    assert conds[(0.0, 0.0)] is N
    assert sum(e.condition is D for e in spec.edges()) == 3


def test_tent_is_triangle_with_neumann_base():
    spec = graph_domain_from_function(GraphFunction((0, 0.5, 1), (0, 1, 0)))
    edges = spec.edges()
    assert len(edges) == 3
    base = [e for e in edges if e.condition is N]
    assert len(base) == 1 and np.allclose(base[0].p0, (0, 0)) and np.allclose(base[0].p1, (1, 0))


def test_trapezoid_graph_loop_is_simple():
    spec = graph_domain_from_function(GraphFunction((0, 1, 2, 3), (1, 2, 2, 1)))
    loop = spec.loop()
    assert np.array_equal(loop[0], loop[-1])
    segs = list(zip(loop[:-1], loop[1:]))
    n = len(segs)
    # independent oracle: no two non-adjacent segments meet
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            assert not segments_intersect(*segs[i], *segs[j])
    vertical_d = [e for e in spec.edges() if e.condition is D and abs(e.p0[0] - e.p1[0]) < 1e-15]
    assert len(vertical_d) == 2


def test_square_top_vertex_types():
    verts = classify_vertices(rectangle_spec(1, 1, ["top"]))
    types = sorted(v.vtype.value for v in verts)
    assert types == sorted([VertexType.MIXED.value] * 2 + [VertexType.NEUMANN.value] * 2)
    assert all(abs(v.angle_beta - math.pi / 2) < 1e-12 for v in verts)


def test_equilateral_angles():
    spec, _ = triangle_spec((0, 0), (1, 0), (0.5, math.sqrt(3) / 2), [0])
    for v in classify_vertices(spec):
        assert v.angle_beta == pytest.approx(math.pi / 3, abs=1e-12)
        assert v.nu == pytest.approx(3.0, abs=1e-12)


def test_l_shape_reentrant_corner():
    pts = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
    spec = polygon_spec(pts, [N, N, N, N, N, D])
    verts = classify_vertices(spec)
    re = [v for v in verts if v.angle_beta > math.pi]
    assert len(re) == 1
    # oracle: the corner (1,1) turns by -pi/2, so its interior angle is 3pi/2
    assert re[0].position == (1.0, 1.0)
    assert re[0].angle_beta == pytest.approx(1.5 * math.pi, abs=1e-12)
    assert re[0].nu == pytest.approx(2 / 3, abs=1e-12)


@pytest.mark.parametrize("x,y,n", [
    ((0, 0.5, 1), (0, 1, 0), 1),
    ((0, 1), (1, 1), 1),
    ((0, 1, 2, 3, 4), (0, 1, 0.5, 1, 0), 3),
])
def test_count_bound_n(x, y, n):
    assert count_bound_n(GraphFunction(x, y)) == n


def test_right_isosceles_triangle_spec():
    spec, info = triangle_spec((0, 0), (1, 0), (1, 1), [1])
    nv = [v for v in classify_vertices(spec) if v.vtype is VertexType.NEUMANN]
    assert len(nv) == 1 and nv[0].position == (0.0, 0.0)
    assert nv[0].angle_beta == pytest.approx(math.pi / 4, abs=1e-12)
    assert info.neumann_angle_class is AngleClass.ACUTE


def test_obtuse_mixed_vertex_detected():
    spec, info = triangle_spec((0, 0), (1, 0), (0.9, 0.1), [0, 1])
    assert info.neumann_angle_class is AngleClass.OBTUSE
    obtuse = classify_vertices(spec)[info.obtuse_vertex]
    assert obtuse.vtype is VertexType.MIXED
    # oracle: angle at (0.9, 0.1) between (0.1,-0.1) and (-0.9,-0.1)
    a, b = np.array([0.1, -0.1]), np.array([-0.9, -0.1])
    assert obtuse.angle_beta == pytest.approx(math.acos(a @ b / np.linalg.norm(a) / np.linalg.norm(b)))


def test_degenerate_triangle_rejected():
    with pytest.raises(GeometryError):
        triangle_spec((0, 0), (1, 0), (2, 0), [0])


@pytest.mark.parametrize("pts,conds", [
    ([(0, 0), (1, 1), (1, 0), (0, 1)], [N, D, N, N]),  # bow tie
    ([(0, 0), (0, 1), (1, 1), (1, 0)], [N, D, N, N]),  # clockwise
    ([(0, 0), (1, 0), (1, 1), (0, 1)], [N, N, N, N]),  # no Dirichlet part
])
def test_invalid_polygons_rejected(pts, conds):
    with pytest.raises(GeometryError):
        polygon_spec(pts, conds)


def test_graph_function_validation():
    with pytest.raises(GeometryError):
        GraphFunction((0, 1, 2), (0, 0, 1))  # interior zero
    with pytest.raises(GeometryError):
        GraphFunction((0, 1), (1, -1))
    with pytest.raises(GeometryError):
        GraphFunction((0, 0), (1, 1))


def test_json_round_trip(tmp_path):
    spec = graph_domain_from_function(GraphFunction((0, 0.4, 1), (0.2, 1, 0)))
    spec.to_json(tmp_path / "d.json")
    back = PlanarDomainSpec.from_json(tmp_path / "d.json")
    assert np.array_equal(back.loop(), spec.loop())
    assert [e.condition for e in back.edges()] == [e.condition for e in spec.edges()]
    assert shoelace_area(back.loop()) == pytest.approx(0.5 * 0.4 * 1.2 + 0.5 * 0.6 * 1.0)
