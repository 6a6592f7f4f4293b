"""Report figures for the CLI: loss curves, metric bars, pattern sheets,
and mesh previews, rendered to files next to the delimited outputs."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from sewkit.geometry import SewingPattern, panel_contour
from sewkit.mesh import TriMesh


def save_loss_curves(history: Sequence[Mapping[str, float]], path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    steps = np.arange(len(history))
    for key in ("total", "rec", "inn", "int", "nor"):
        vals = np.array([h.get(key, np.nan) for h in history])
        if np.all(~np.isfinite(vals)) or np.allclose(vals, 0.0):
            continue
        ax.plot(steps, vals, label=key, lw=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("symlog", linthresh=1e-4)
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_metrics_bars(rows: Sequence[Mapping[str, float]], path) -> None:
    """Grouped bars of chamfer/p2s/mgle per garment id."""
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(rows) + 3), 4))
    ids = [str(r["id"]) for r in rows]
    x = np.arange(len(rows))
    width = 0.27
    for off, key in ((-1, "chamfer"), (0, "p2s"), (1, "mgle")):
        ax.bar(x + off * width, [float(r[key]) for r in rows], width, label=key)
    ax.set_xticks(x)
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("cm")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_pattern_sheet(pattern: SewingPattern, path, m: int = 40) -> None:
    """All panels drawn to scale side by side, stitched edges color-paired."""
    fig, ax = plt.subplots(figsize=(8, 5))
    offset = 0.0
    centers = {}
    stitch_colors = plt.cm.tab10(np.linspace(0, 1, max(len(pattern.stitches), 1)))
    edge_color: dict[tuple[str, int], np.ndarray] = {}
    for si, st in enumerate(pattern.stitches):
        edge_color[(st.panel_a, st.edge_a)] = stitch_colors[si]
        edge_color[(st.panel_b, st.edge_b)] = stitch_colors[si]
    for p in pattern.panels:
        contour = panel_contour(p, m)
        lo = contour.min(axis=0)
        shift = np.array([offset - lo[0], -lo[1]])
        closed = np.vstack([contour, contour[:1]]) + shift
        ax.fill(closed[:, 0], closed[:, 1], alpha=0.12, color="steelblue")
        ax.plot(closed[:, 0], closed[:, 1], color="steelblue", lw=0.8)
        from sewkit.geometry import discretize_edge

        for ei, e in enumerate(p.edges):
            col = edge_color.get((p.id, ei))
            if col is not None:
                pts = discretize_edge(e, m) + shift
                ax.plot(pts[:, 0], pts[:, 1], color=col, lw=2.2)
        centers[p.id] = contour.mean(axis=0) + shift
        ax.annotate(p.id, centers[p.id], ha="center", fontsize=8)
        offset += contour.max(axis=0)[0] - lo[0] + 8.0
    ax.set_aspect("equal")
    ax.set_xlabel("cm")
    ax.set_title(pattern.category)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_mesh_preview(mesh: TriMesh, path, max_faces: int = 4000) -> None:
    """Two orthographic wireframe views of the garment."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 5))
    v = mesh.vertices
    faces = mesh.faces
    if len(faces) > max_faces:
        rng = np.random.default_rng(0)
        faces = faces[rng.choice(len(faces), max_faces, replace=False)]
    for ax, (i, j, name) in zip(axes, ((0, 1, "front (x-y)"), (2, 1, "side (z-y)"))):
        tri = v[faces][:, :, (i, j)]
        closed = np.concatenate([tri, tri[:, :1], np.full((len(tri), 1, 2), np.nan)], axis=1)
        flat = closed.reshape(-1, 2)
        ax.plot(flat[:, 0], flat[:, 1], lw=0.15, color="black", alpha=0.6)
        ax.set_aspect("equal")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("cm")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
