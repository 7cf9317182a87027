"""Deterministic SVG rendering of eigenfunctions, nodal arcs and critical points.

Plots are written with a fixed hash salt and without a date stamp. Every
decimal number in the SVG text is then rounded to six significant digits,
so identical inputs give byte-identical files.
"""
from __future__ import annotations

import io
import re
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402

SIG_DIGITS = 6
_SVG_RC = {"svg.hashsalt": "hotspots", "svg.fonttype": "none", "path.simplify": False}
_DECIMAL = re.compile(r"-?\d+\.\d+(?:e[+-]?\d+)?")
CONDITION_COLORS = {"D": "#c0392b", "N": "#2471a3"}


def _round_decimals(text: str, digits: int = SIG_DIGITS) -> str:
    def fmt(m):
        s = f"{float(m.group(0)):.{digits}g}"
        return "0" if s == "-0" else s
    return _DECIMAL.sub(fmt, text)


def _boundary_segments(nodes: np.ndarray, boundary_edges: np.ndarray, conditions: Sequence[str]):
    segs = {"D": [], "N": []}
    for (a, b), c in zip(boundary_edges, conditions):
        segs[str(c)].append([nodes[a], nodes[b]])
    return segs


def render_solution_svg(nodes: np.ndarray, triangles: np.ndarray, u: np.ndarray, path,
                        boundary_edges: Optional[np.ndarray] = None,
                        conditions: Optional[Sequence[str]] = None,
                        critical: Iterable[dict] = (),
                        nodal_arcs: Iterable[np.ndarray] = (),
                        title: Optional[str] = None, levels: int = 16) -> str:
    """Write a filled-contour plot of ``u`` as SVG and return the SVG text.

    Parameters
    ----------
    nodes, triangles, u : ndarray
        P1 mesh and nodal values.
    boundary_edges, conditions : optional
        Boundary node pairs and their 'D'/'N' labels, drawn in two colors.
    critical : iterable of dict
        Critical points as produced by ``CriticalPoint.to_dict``.
    nodal_arcs : iterable of (k, 2) arrays
        Polylines of a zero set, drawn in black.
    """
    tri = Triangulation(nodes[:, 0], nodes[:, 1], triangles)
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 5))
        lo, hi = float(np.min(u)), float(np.max(u))
        if hi <= lo:
            hi = lo + 1.0
        cs = ax.tricontourf(tri, u, levels=np.linspace(lo, hi, levels + 1), cmap="viridis")
        fig.colorbar(cs, ax=ax, label="u")
        if boundary_edges is not None and conditions is not None:
            for cond, segs in _boundary_segments(nodes, boundary_edges, conditions).items():
                if segs:
                    ax.add_collection(LineCollection(segs, colors=CONDITION_COLORS[cond], linewidths=2.5,
                                                     label="Dirichlet" if cond == "D" else "Neumann"))
        for k, arc in enumerate(nodal_arcs):
            arc = np.asarray(arc)
            ax.plot(arc[:, 0], arc[:, 1], color="black", lw=1.2, label="nodal set" if k == 0 else None)
        marks = {"Interior": ("o", "white"), "OnNeumannBoundary": ("D", "orange")}
        seen = set()
        for p in critical:
            m, c = marks.get(p.get("kind"), ("x", "red"))
            lab = None if p.get("kind") in seen else f"critical ({p.get('kind')})"
            seen.add(p.get("kind"))
            ax.plot(*p["location"], marker=m, color=c, markeredgecolor="black", ms=8, ls="none", label=lab)
        ax.set_aspect("equal")
        ax.autoscale_view()
        if title:
            ax.set_title(title)
        handles, _ = ax.get_legend_handles_labels()
        if handles:
            ax.legend(loc="upper right", fontsize=7, framealpha=0.8)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    text = _round_decimals(buf.getvalue())
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text


def render_values_svg(x: Sequence[float], series: dict, path, xlabel: str = "", ylabel: str = "",
                      title: Optional[str] = None) -> str:
    """Line plot of one or more named series against ``x``, written as deterministic SVG."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, y in series.items():
            ax.plot(x, y, marker="o", label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(fontsize=8)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    text = _round_decimals(buf.getvalue())
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text
