"""Triangulated garment readout from UV-position maps plus OBJ export.

Per panel: masked grid points strictly inside the contour become inner
vertices, each contour edge contributes k uniformly spaced boundary
vertices, and the 2D triangulation (ear clipping of the boundary ring,
inner points inserted by local splits) is lifted to 3D by bilinear
sampling of the position map. Stitched edge runs are bridged by seam
bands of 2(k-1) triangles; bands whose triangles collapse (already
coincident seams) keep their vertex pairing but drop the degenerate
faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from sewkit.geometry import (
    DEFAULT_EDGE_POINTS,
    SewingPattern,
    discretize_edge,
    points_in_contour,
)
from sewkit.uvmaps import MaskMap, PanelMaps, bilinear_sample

DEGENERATE_AREA = 1e-10


class MeshError(ValueError):
    pass


@dataclass
class TriMesh:
    """Garment mesh with seam correspondences and panel provenance."""

    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) int
    seam_bands: list[list[tuple[int, int]]] = field(default_factory=list)
    panel_of_vertex: list[str] = field(default_factory=list)
    panel_of_face: list[str] = field(default_factory=list)  # "" for seam bands

    def face_areas(self) -> np.ndarray:
        v = self.vertices
        f = self.faces
        if len(f) == 0:
            return np.zeros(0)
        a = v[f[:, 1]] - v[f[:, 0]]
        b = v[f[:, 2]] - v[f[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


# ---------------------------------------------------------------------------
# 2D triangulation: ear clipping + incremental point insertion


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def ear_clip(ring: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon by ear clipping; indices into ring."""
    n = len(ring)
    if n < 3:
        raise MeshError(f"ring needs 3+ vertices, got {n}")
    idx = list(range(n))
    tris: list[tuple[int, int, int]] = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 4 * n * n:
            raise MeshError("ear clipping stalled; contour may be degenerate")
        best = None
        m = len(idx)
        pts = ring[idx]
        for pos in range(m):
            a, b, c = pts[pos - 1], pts[pos], pts[(pos + 1) % m]
            cross = _orient(a, b, c)
            if cross <= 1e-12:
                continue
            others = np.delete(pts, [(pos - 1) % m, pos, (pos + 1) % m], axis=0)
            s1 = (b[0] - a[0]) * (others[:, 1] - a[1]) - (b[1] - a[1]) * (others[:, 0] - a[0])
            s2 = (c[0] - b[0]) * (others[:, 1] - b[1]) - (c[1] - b[1]) * (others[:, 0] - b[0])
            s3 = (a[0] - c[0]) * (others[:, 1] - c[1]) - (a[1] - c[1]) * (others[:, 0] - c[0])
            if np.any((s1 > -1e-12) & (s2 > -1e-12) & (s3 > -1e-12)):
                continue
            best = pos
            break
        if best is None:
            # Fall back to the least-degenerate convex corner.
            crosses = [
                _orient(pts[p - 1], pts[p], pts[(p + 1) % m]) for p in range(m)
            ]
            best = int(np.argmax(crosses))
        tris.append((idx[(best - 1) % m], idx[best], idx[(best + 1) % m]))
        del idx[best]
    tris.append((idx[0], idx[1], idx[2]))
    return tris


class _Triangulation:
    """Growable 2D triangulation with walk-based point location and Lawson
    legalization (boundary edges are constrained and never flipped)."""

    def __init__(self, points: list[np.ndarray], tris: list[tuple[int, int, int]]):
        self.points = points
        self.tris: list[tuple[int, int, int] | None] = list(tris)
        self.adj: dict[tuple[int, int], list[int]] = {}
        self.boundary: set[tuple[int, int]] = set()
        for t, tri in enumerate(tris):
            self._link(t, tri)
        n = len(points)
        for i in range(n):
            self.boundary.add(self._edge(i, (i + 1) % n))
        self.legalize(list(self.adj))

    def _edge(self, a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def _link(self, t: int, tri: tuple[int, int, int]):
        for i in range(3):
            self.adj.setdefault(self._edge(tri[i], tri[(i + 1) % 3]), []).append(t)

    def _unlink(self, t: int, tri: tuple[int, int, int]):
        for i in range(3):
            self.adj[self._edge(tri[i], tri[(i + 1) % 3])].remove(t)

    def _incircle(self, a, b, c, d) -> bool:
        """Is d strictly inside the circumcircle of CCW triangle (a, b, c)?"""
        m = np.array(
            [
                [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
                [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
                [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
            ]
        )
        return float(np.linalg.det(m)) > 1e-12

    def legalize(self, edges: list[tuple[int, int]]) -> None:
        stack = list(edges)
        guard = 0
        limit = 40 * (len(self.points) + len(self.tris)) + 1000
        while stack:
            guard += 1
            if guard > limit:
                break  # quality pass only; a stalled flip never breaks validity
            e = stack.pop()
            if e in self.boundary:
                continue
            ts = self.adj.get(e, [])
            if len(ts) != 2:
                continue
            t1, t2 = ts
            tri1, tri2 = self.tris[t1], self.tris[t2]
            a, b = e
            c = next(v for v in tri1 if v not in e)
            d = next(v for v in tri2 if v not in e)
            p = self.points
            # orient tri1 as CCW (a,b,c) for the incircle test
            if _orient(p[a], p[b], p[c]) < 0:
                a, b = b, a
            if not self._incircle(p[a], p[b], p[c], p[d]):
                continue
            # flip only if the quad a-d-b-c is strictly convex: a strictly
            # left of d->c and b strictly left of c->d
            if _orient(p[d], p[c], p[a]) <= 1e-12 or _orient(p[c], p[d], p[b]) <= 1e-12:
                continue
            self._unlink(t1, tri1)
            self._unlink(t2, tri2)
            self.tris[t1] = None
            self.tris[t2] = None
            new1 = (c, a, d)
            new2 = (d, b, c)
            for nt in (new1, new2):
                self.tris.append(nt)
                self._link(len(self.tris) - 1, nt)
            for quad_edge in ((a, c), (a, d), (b, c), (b, d)):
                stack.append(self._edge(*quad_edge))

    def locate(self, p: np.ndarray, hint: int) -> tuple[int | None, tuple[int, int] | None]:
        """Walk to the triangle containing p. Returns (triangle, on_edge)."""
        t = hint
        if self.tris[t] is None:
            t = next(i for i, tri in enumerate(self.tris) if tri is not None)
        visited = 0
        limit = 4 * len(self.tris) + 16
        while True:
            visited += 1
            if visited > limit:
                return self._locate_scan(p)
            tri = self.tris[t]
            on_edge = None
            moved = False
            for i in range(3):
                a, b = tri[i], tri[(i + 1) % 3]
                s = _orient(self.points[a], self.points[b], p)
                if s < -1e-9:
                    nxt = [x for x in self.adj.get(self._edge(a, b), []) if x != t]
                    if not nxt:
                        return None, None  # walked out of the triangulation
                    t = nxt[0]
                    moved = True
                    break
                if abs(s) <= 1e-9:
                    on_edge = self._edge(a, b)
            if not moved:
                return t, on_edge

    def _locate_scan(self, p):
        for t, tri in enumerate(self.tris):
            if tri is None:
                continue
            ss = [
                _orient(self.points[tri[i]], self.points[tri[(i + 1) % 3]], p) for i in range(3)
            ]
            if all(s > -1e-9 for s in ss):
                on = None
                for i in range(3):
                    if abs(ss[i]) <= 1e-9:
                        on = self._edge(tri[i], tri[(i + 1) % 3])
                return t, on
        return None, None

    def insert(self, p: np.ndarray, vid: int, hint: int) -> int | None:
        """Insert point with vertex id vid; 3-split inside a triangle,
        4-split on an interior edge. Returns a location hint, or None if the
        point fell outside or on a boundary edge (skipped)."""
        t, on_edge = self.locate(p, hint)
        if t is None:
            return None
        if on_edge is not None:
            tris_on = list(self.adj.get(on_edge, []))
            if len(tris_on) < 2:
                return None  # boundary edge: never split seam runs
            a, b = on_edge
            opposite = []
            for told in tris_on:
                tri = self.tris[told]
                self._unlink(told, tri)
                self.tris[told] = None
                far = next(v for v in tri if v not in on_edge)
                opposite.append(far)
                # Preserve winding: replace the a-b edge with a-vid and vid-b.
                order = list(tri)
                ia = order.index(a)
                if order[(ia + 1) % 3] == b:
                    new1 = (a, vid, far)
                    new2 = (vid, b, far)
                else:
                    new1 = (vid, a, far)
                    new2 = (b, vid, far)
                for nt in (new1, new2):
                    self.tris.append(nt)
                    self._link(len(self.tris) - 1, nt)
            self.legalize([self._edge(x, far) for far in opposite for x in (a, b)])
            return len(self.tris) - 1
        tri = self.tris[t]
        self._unlink(t, tri)
        self.tris[t] = None
        for i in range(3):
            nt = (tri[i], tri[(i + 1) % 3], vid)
            self.tris.append(nt)
            self._link(len(self.tris) - 1, nt)
        self.legalize([self._edge(tri[i], tri[(i + 1) % 3]) for i in range(3)])
        return len(self.tris) - 1

    def triangles(self) -> list[tuple[int, int, int]]:
        return [t for t in self.tris if t is not None]


# ---------------------------------------------------------------------------
# Readout


def readout_mesh(
    maps: Mapping[str, PanelMaps],
    pattern: SewingPattern,
    k: int = DEFAULT_EDGE_POINTS,
    ys: Mapping[str, np.ndarray] | None = None,
) -> TriMesh:
    """Read out the triangulated garment.

    ``maps`` supplies each panel's mask (and, unless ``ys`` overrides them,
    its positions). Boundary vertices per contour edge: k, shared corners
    deduplicated; the stitch bands respect each stitch's reversed flag.
    """
    if k < 2:
        raise MeshError(f"k must be >= 2, got {k}")
    vertices: list[np.ndarray] = []
    panel_of_vertex: list[str] = []
    faces: list[tuple[int, int, int]] = []
    panel_of_face: list[str] = []
    edge_runs: dict[tuple[str, int], list[int]] = {}

    for panel in pattern.panels:
        pm = maps[panel.id]
        mask: MaskMap = pm.mask
        y = np.asarray(ys[panel.id] if ys is not None else pm.positions, dtype=float)
        if not mask.grid.any():
            raise MeshError(f"panel {panel.id!r} has an empty mask")

        base = len(vertices)
        ring_uv: list[np.ndarray] = []
        runs: list[list[int]] = []
        n_edges = len(panel.edges)
        for e_idx, edge in enumerate(panel.edges):
            uv = mask.uv_of(discretize_edge(edge, k))
            start = base + len(ring_uv)
            run = list(range(start, start + k - 1))
            ring_uv.extend(uv[:-1])
            runs.append(run)
        ring_count = len(ring_uv)
        for e_idx in range(n_edges):
            # close each run with the next edge's first vertex
            nxt_first = runs[(e_idx + 1) % n_edges][0]
            runs[e_idx].append(nxt_first)
            edge_runs[(panel.id, e_idx)] = runs[e_idx]
        ring = np.asarray(ring_uv)
        vertices.extend(ring)
        panel_of_vertex.extend([panel.id] * ring_count)

        tri = _Triangulation(list(ring), ear_clip(ring))

        ii, jj = np.nonzero(mask.grid)
        grid_uv = np.stack([jj, ii], axis=1).astype(float)
        inside = points_in_contour(ring, grid_uv)
        hint = 0
        for uv in grid_uv[inside]:
            vid = len(tri.points)
            tri.points.append(uv)
            res = tri.insert(uv, vid, hint)
            if res is None:
                tri.points.pop()
                continue
            hint = res
            vertices.append(uv)
            panel_of_vertex.append(panel.id)

        offset_of = {i: base + i for i in range(len(tri.points))}
        for a, b, c in tri.triangles():
            faces.append((offset_of[a], offset_of[b], offset_of[c]))
            panel_of_face.append(panel.id)

    # Lift every vertex through its panel's position map.
    verts3 = np.zeros((len(vertices), 3))
    cursor = 0
    for panel in pattern.panels:
        pm = maps[panel.id]
        y = np.asarray(ys[panel.id] if ys is not None else pm.positions, dtype=float)
        count = sum(1 for p in panel_of_vertex if p == panel.id)
        uv = np.asarray(vertices[cursor : cursor + count])
        verts3[cursor : cursor + count] = bilinear_sample(y, uv)
        cursor += count

    seam_bands: list[list[tuple[int, int]]] = []
    band_faces: list[tuple[int, int, int]] = []
    for st in pattern.stitches:
        run_a = edge_runs[(st.panel_a, st.edge_a)]
        run_b = edge_runs[(st.panel_b, st.edge_b)]
        if st.reversed:
            run_b = run_b[::-1]
        if len(run_a) != len(run_b):
            raise MeshError("stitch runs have mismatched vertex counts")
        seam_bands.append(list(zip(run_a, run_b)))
        for i in range(len(run_a) - 1):
            band_faces.append((run_a[i], run_b[i], run_a[i + 1]))
            band_faces.append((run_b[i], run_b[i + 1], run_a[i + 1]))

    all_faces = faces + band_faces
    all_panels = panel_of_face + [""] * len(band_faces)
    mesh = TriMesh(
        verts3,
        np.asarray(all_faces, dtype=int).reshape(-1, 3),
        seam_bands,
        panel_of_vertex,
        all_panels,
    )
    keep = mesh.face_areas() > DEGENERATE_AREA
    mesh.faces = mesh.faces[keep]
    mesh.panel_of_face = [p for p, k_ in zip(all_panels, keep) if k_]
    return mesh


def panel_euler_characteristics(mesh: TriMesh) -> dict[str, int]:
    """V - E + F per panel sub-mesh; 1 for a triangulated disk."""
    out: dict[str, int] = {}
    panel_faces: dict[str, list[int]] = {}
    for fi, pid in enumerate(mesh.panel_of_face):
        if pid:
            panel_faces.setdefault(pid, []).append(fi)
    for pid, fids in panel_faces.items():
        f = mesh.faces[fids]
        v = np.unique(f)
        e = np.unique(np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1), axis=0)
        out[pid] = int(len(v) - len(e) + len(f))
    return out


def check_mesh(mesh: TriMesh, pattern: SewingPattern | None = None) -> list[str]:
    """Mesh validity: index ranges, no degenerate faces, disk-topology
    panels, equal-length seam runs. Returns violation strings."""
    out = []
    if len(mesh.faces) and (mesh.faces.min() < 0 or mesh.faces.max() >= len(mesh.vertices)):
        out.append("face-index-out-of-range")
    areas = mesh.face_areas()
    n_degen = int((areas <= DEGENERATE_AREA).sum())
    if n_degen:
        out.append(f"degenerate-faces:{n_degen}")
    for pid, chi in panel_euler_characteristics(mesh).items():
        if chi != 1:
            out.append(f"panel-not-disk:{pid}:chi={chi}")
    for si, band in enumerate(mesh.seam_bands):
        if not band:
            out.append(f"empty-seam-band:{si}")
            continue
        n = len(mesh.vertices)
        if any(not (0 <= a < n and 0 <= b < n) for a, b in band):
            out.append(f"seam-index-out-of-range:{si}")
    if pattern is not None and len(mesh.seam_bands) != len(pattern.stitches):
        out.append("seam-band-count-mismatch")
    return out


# ---------------------------------------------------------------------------
# OBJ export / import


def export_mesh(mesh: TriMesh) -> str:
    """Wavefront OBJ text: vertices then faces (1-based), six decimal digits
    per coordinate, panel faces under g panel_<id>, bands under g seams."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    groups: dict[str, list[int]] = {}
    for fi, pid in enumerate(mesh.panel_of_face):
        groups.setdefault(pid, []).append(fi)
    ordered = sorted(g for g in groups if g)
    for pid in ordered:
        lines.append(f"g panel_{pid}")
        for fi in groups[pid]:
            a, b, c = mesh.faces[fi] + 1
            lines.append(f"f {a} {b} {c}")
    if "" in groups:
        lines.append("g seams")
        for fi in groups[""]:
            a, b, c = mesh.faces[fi] + 1
            lines.append(f"f {a} {b} {c}")
    for si, band in enumerate(mesh.seam_bands):
        pairs = " ".join(f"{a + 1}:{b + 1}" for a, b in band)
        lines.append(f"# seam {si} {pairs}")
    return "\n".join(lines) + "\n"


def import_mesh(text: str) -> TriMesh:
    """Parse the OBJ subset written by export_mesh (v/f/g/# seam lines)."""
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    panel_of_face: list[str] = []
    bands: list[list[tuple[int, int]]] = []
    group = ""
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "g":
            group = parts[1] if len(parts) > 1 else ""
        elif parts[0] == "f":
            idx = tuple(int(p.split("/")[0]) - 1 for p in parts[1:4])
            faces.append(idx)
            panel_of_face.append(group.removeprefix("panel_") if group.startswith("panel_") else "")
        elif parts[0] == "#" and len(parts) > 2 and parts[1] == "seam":
            pairs = []
            for token in parts[3:]:
                a, b = token.split(":")
                pairs.append((int(a) - 1, int(b) - 1))
            bands.append(pairs)
    return TriMesh(
        np.asarray(verts, dtype=float),
        np.asarray(faces, dtype=int).reshape(-1, 3),
        bands,
        [""] * len(verts),
        panel_of_face,
    )
