"""CSV and SVG output for fields on the mesh and developed curves."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def node_charts(mesh) -> list[str]:
    return ["sphere" if k < 0 else f"pole{k}" for k in mesh.kind]


def write_field_csv(path, charts, z, values) -> Path:
    """Columns: chart, re z, im z, value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    z = np.asarray(z, dtype=complex)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chart", "re_z", "im_z", "value"])
        for c, zz, v in zip(charts, z, np.asarray(values, dtype=float)):
            w.writerow([c, repr(float(zz.real)), repr(float(zz.imag)), repr(float(v))])
    return path


def write_mesh_field(path, mesh, values) -> Path:
    return write_field_csv(path, node_charts(mesh), mesh.z, values)


def write_curve_csv(path, points) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(points, float), delimiter=",", header="alpha1,alpha2", comments="")
    return path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def heatmap_svg(path, z, values, title: str = "", extent: float = 2.0) -> Path:
    """Triangulated heatmap of values at points z with |Re z|, |Im z| <= extent."""
    plt = _pyplot()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    z = np.asarray(z, dtype=complex)
    v = np.asarray(values, dtype=float)
    keep = (np.abs(z.real) <= extent) & (np.abs(z.imag) <= extent) & np.isfinite(v)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    tc = ax.tripcolor(z.real[keep], z.imag[keep], v[keep], shading="gouraud", cmap="viridis")
    fig.colorbar(tc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def curves_svg(path, curves: dict, title: str = "", marker=None) -> Path:
    """Polylines in the (alpha^1, alpha^2) plane; ``marker`` is an optional point."""
    plt = _pyplot()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 5))
    for name, pts in curves.items():
        pts = np.asarray(pts, float)
        ax.plot(pts[:, 0], pts[:, 1], lw=1, label=name)
    if marker is not None:
        ax.plot([marker[0]], [marker[1]], "k+", ms=10)
    ax.set_aspect("equal")
    ax.set_xlabel("alpha1")
    ax.set_ylabel("alpha2")
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=7)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
