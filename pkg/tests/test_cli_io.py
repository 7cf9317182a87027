"""Tests for the command-line entry points and their files."""
import csv
import json

import numpy as np
import pytest

from hotspots import cli
from hotspots.analysis import recover_gradient
from hotspots.eigensolve import read_solution_csv
from hotspots.geometry import PlanarDomainSpec, rectangle_spec, triangle_spec
from hotspots.mesh import read_mesh_csv
from hotspots.schemas import SCHEMAS, load_schema, validate


@pytest.fixture(scope="module")
def square_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("square")
    dom = root / "square.json"
    rectangle_spec(1.0, 1.0, ["top"]).to_json(dom)
    out = root / "out"
    rc = cli.main(["solve", str(dom), "--h", "0.125", "--out", str(out), "--field", "dy"])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def midline_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("midline")
    dom = root / "rect.json"
    rectangle_spec(1.0, 1.0, ["left", "right"]).to_json(dom)
    out = root / "out"
    assert cli.main(["solve", str(dom), "--h", "0.0625", "--out", str(out), "--field", "dx"]) == 0
    return out


def test_solve_writes_all_files(square_run):
    for name in ("spec.json", "nodes.csv", "triangles.csv", "boundary_edges.csv", "solution.csv",
                 "fits.json", "summary.json", "solution.svg"):
        assert (square_run / name).exists(), name
    with open(square_run / "solution.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["node_id", "x", "y", "u"]


def test_solve_json_validates(square_run):
    validate(json.loads((square_run / "summary.json").read_text()), "solution_summary")
    validate(json.loads((square_run / "fits.json").read_text()), "fit_report")


def test_square_levels_are_horizontal(square_run):
    ids, xy, u = read_solution_csv(square_run / "solution.csv")
    # the eigenfunction depends on y only, so u is constant along each row of nodes
    for y in np.unique(np.round(xy[:, 1], 12)):
        row = u[np.abs(xy[:, 1] - y) < 1e-12]
        assert np.ptp(row) <= 2e-2 * np.max(np.abs(u))


def test_render_is_byte_identical(square_run, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert cli.main(["render", str(square_run), "--svg", str(a)]) == 0
    assert cli.main(["render", str(square_run), "--svg", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().lstrip().startswith("<?xml")


def test_render_missing_column_names_it(square_run, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in ("spec.json", "nodes.csv", "triangles.csv", "boundary_edges.csv"):
        (bad / name).write_bytes((square_run / name).read_bytes())
    rows = list(csv.reader(open(square_run / "solution.csv", newline="")))
    with open(bad / "solution.csv", "w", newline="") as fh:
        csv.writer(fh).writerows([r[:3] for r in rows])
    assert cli.main(["render", str(bad)]) == 2
    assert "'u'" in capsys.readouterr().err


def test_bad_domain_path_exits_nonzero(tmp_path):
    assert cli.main(["solve", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) != 0
    assert cli.main(["render", str(tmp_path / "nowhere")]) != 0


def test_invalid_tolerance_rejected(tmp_path):
    dom = tmp_path / "d.json"
    rectangle_spec(1.0, 1.0, ["top"]).to_json(dom)
    assert cli.main(["solve", str(dom), "--tol", "0.5", "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["solve", str(dom), "--h", "-1", "--out", str(tmp_path / "o")]) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"h": 0.25, "tol": 1e-6, "out": "from-config", "budget": 7}))
    args = cli.build_parser().parse_args(["scan", "--config", str(cfg), "--h", "0.5"])
    r = cli.resolve(args)
    assert r["h"] == 0.5
    assert r["tol"] == 1e-6 and r["out"] == "from-config" and r["budget"] == 7
    args = cli.build_parser().parse_args(["scan"])
    assert cli.resolve(args)["h"] == cli.DEFAULTS["h"]


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("HOTSPOTS_THREADS", "1")
    assert cli.max_workers() == 1
    monkeypatch.setenv("HOTSPOTS_THREADS", "lots")
    with pytest.raises(cli.CliError):
        cli.max_workers()


def test_empty_suite_reports_no_cases(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cases": []}))
    assert cli.main(["verify-triangle", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "no cases" in capsys.readouterr().err


def test_triangle_suite_config(tmp_path, monkeypatch):
    monkeypatch.setenv("HOTSPOTS_THREADS", "2")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cases": [
        {"id": "right", "corners": [[0, 0], [1, 0], [1, 1]], "dirichlet": [1]},
        {"id": "equilateral", "corners": [[0, 0], [1, 0], [0.5, 0.8660254037844386]], "dirichlet": [1, 2]},
    ]}))
    assert cli.main(["verify-triangle", "--config", str(cfg), "--h", "0.05", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "triangle_report.json").read_text())
    validate(doc, "suite_report")
    assert [c["case_id"] for c in doc["cases"]] == ["right", "equilateral"]
    assert doc["n_failed"] == 0


def test_graph_suite_table(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cases": [{"id": "tent", "x": [0, 0.5, 1], "y": [0, 1, 0]},
                                         {"id": "double", "x": [0, 0.4, 0.7, 1.1, 1.5],
                                          "y": [0, 1, 0.6, 0.9, 0]}]}))
    assert cli.main(["verify-graph", "--config", str(cfg), "--h", "0.05", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "graph_report.txt").read_text()
    header = next(line for line in text.splitlines() if line.startswith("case"))
    assert header.split() == ["case", "status", "k", "n", "extrema", "bound"]
    row = next(line for line in text.splitlines() if line.startswith("double "))
    k, n = map(int, row.split()[2:4])
    assert n == 3 and k <= n


def test_midline_overlay(midline_run):
    spec = PlanarDomainSpec.from_json(midline_run / "spec.json")
    mesh = read_mesh_csv(midline_run, spec=spec)
    _, _, u = read_solution_csv(midline_run / "solution.csv")
    g = recover_gradient(u, mesh, enforce_bc=True)
    arcs = cli._nodal_arcs(g, mesh, cli._field_spec("dx"))
    pts = np.vstack(arcs)
    assert np.max(np.abs(pts[:, 0] - 0.5)) <= 2 * 0.0625
    assert np.ptp(pts[:, 1]) >= 0.9
    assert "nodal set" in (midline_run / "solution.svg").read_text()


def test_obtuse_triangle_marks_one_boundary_point(tmp_path):
    dom = tmp_path / "t.json"
    triangle_spec((0, 0), (1, 0), (0.2, 0.1), [0])[0].to_json(dom)
    out = tmp_path / "o"
    assert cli.main(["solve", str(dom), "--h", str(1 / 64), "--out", str(out)]) == 0
    pts = json.loads((out / "summary.json").read_text())["critical_search"]["points"]
    assert [p["kind"] for p in pts] == ["OnNeumannBoundary"]
    assert "critical (OnNeumannBoundary)" in (out / "solution.svg").read_text()


def test_scan_and_approx_outputs(tmp_path):
    assert cli.main(["scan", "--family", "triangle", "--budget", "2", "--h", "0.1",
                     "--out", str(tmp_path)]) == 0
    validate(json.loads((tmp_path / "scan_triangle.json").read_text()), "scan")
    assert cli.main(["approx-experiment", "--levels", "2", "--h", "0.1", "--out", str(tmp_path)]) == 0
    validate(json.loads((tmp_path / "approximation_report.json").read_text()), "suite_report")
    assert (tmp_path / "approximation.svg").exists()


def test_schemas_ship_with_package():
    for name in SCHEMAS:
        assert load_schema(name)["type"] == "object"
