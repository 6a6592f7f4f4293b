import numpy as np
import pytest

from sewkit import synth
from sewkit.mesh import TriMesh, readout_mesh
from sewkit.metrics import (
    GeodesicGraph,
    MetricError,
    chamfer,
    closest_surface_points,
    geodesic,
    mgle,
    p2s,
    point_triangle_distances,
    sample_surface,
)


def cube_mesh(n=8):
    """Unit cube surface, each face an n x n grid of quads split into
    triangles, duplicate boundary vertices welded."""
    verts: dict[tuple, int] = {}
    faces = []

    def vid(p):
        key = tuple(np.round(p, 9))
        if key not in verts:
            verts[key] = len(verts)
        return verts[key]

    for axis in range(3):
        for side in (0.0, 1.0):
            for i in range(n):
                for j in range(n):
                    corners = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = np.zeros(3)
                        p[axis] = side
                        p[(axis + 1) % 3] = (i + di) / n
                        p[(axis + 2) % 3] = (j + dj) / n
                        corners.append(vid(p))
                    a, b, c, d = corners
                    faces += [(a, b, c), (a, c, d)]
    pts = np.array([np.array(k) for k in sorted(verts, key=verts.get)])
    return TriMesh(pts, np.array(faces), [], [""] * len(pts), [""] * len(faces))


@pytest.fixture(scope="module")
def garment_mesh(cylinder_sample):
    return readout_mesh(cylinder_sample.maps, cylinder_sample.pattern, k=12)


class TestChamfer:
    def test_identical_clouds(self):
        pts = np.random.default_rng(0).normal(0, 5, (200, 3))
        assert chamfer(pts, pts.copy()) == 0.0

    def test_two_points(self):
        assert chamfer(np.array([[0.0, 0, 0]]), np.array([[0.0, 3, 4]])) == pytest.approx(5.0)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0, 10, (500, 3))
        b = rng.normal(0, 10, (500, 3))
        d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
        brute = 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())
        assert abs(chamfer(a, b) - brute) < 1e-12

    def test_symmetry_and_rigid_invariance(self):
        rng = np.random.default_rng(2)
        a = rng.normal(0, 10, (300, 3))
        b = rng.normal(0, 10, (300, 3))
        assert chamfer(a, b) == pytest.approx(chamfer(b, a), rel=1e-12)
        th = 0.9
        rot = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1.0]])
        t = np.array([4.0, -2.0, 9.0])
        assert chamfer(a @ rot.T + t, b @ rot.T + t) == pytest.approx(chamfer(a, b), rel=1e-9)

    def test_empty_raises(self):
        with pytest.raises(MetricError):
            chamfer(np.zeros((0, 3)), np.zeros((3, 3)))


class TestP2S:
    def test_points_on_mesh(self, garment_mesh):
        pts = sample_surface(garment_mesh, 400, seed=3)
        assert p2s(pts, garment_mesh) < 1e-9

    def test_point_above_plane(self):
        big = TriMesh(
            np.array([[-50.0, 0, -50], [50, 0, -50], [50, 0, 50], [-50, 0, 50]]),
            np.array([[0, 1, 2], [0, 2, 3]]),
            [], [], ["p", "p"],
        )
        assert p2s(np.array([[0.0, 7.5, 0.0]]), big) == pytest.approx(7.5)

    def test_brute_force_oracle(self, garment_mesh):
        rng = np.random.default_rng(4)
        sub = garment_mesh.faces[:500]
        used = np.unique(sub)
        remap = np.full(len(garment_mesh.vertices), -1, int)
        remap[used] = np.arange(len(used))
        small = TriMesh(garment_mesh.vertices[used], remap[sub], [], [], [""] * len(sub))
        pts = rng.normal(0, 20, (500, 3))
        tris = small.vertices[small.faces]
        mins = np.full(len(pts), np.inf)
        for fi in range(len(tris)):
            mins = np.minimum(mins, point_triangle_distances(pts, tris[fi]))
        assert abs(p2s(pts, small) - mins.mean()) < 1e-12

    def test_closest_points_lie_on_surface(self, garment_mesh):
        rng = np.random.default_rng(5)
        pts = sample_surface(garment_mesh, 50, seed=6) + rng.normal(0, 2, (50, 3))
        closest = closest_surface_points(pts, garment_mesh)
        assert p2s(closest, garment_mesh) < 1e-9


class TestGeodesic:
    def test_adjacent_vertices_edge_length(self, garment_mesh):
        a, b = garment_mesh.faces[0][:2]
        d = geodesic(garment_mesh, int(a), int(b))
        assert d == pytest.approx(np.linalg.norm(garment_mesh.vertices[a] - garment_mesh.vertices[b]), rel=1e-12)

    def test_same_vertex_zero(self, garment_mesh):
        assert geodesic(garment_mesh, 5, 5) == 0.0

    def test_cube_corner_to_corner(self):
        cm = cube_mesh(8)
        i = int(np.argmin(np.linalg.norm(cm.vertices, axis=1)))
        j = int(np.argmin(np.linalg.norm(cm.vertices - 1.0, axis=1)))
        d = geodesic(cm, i, j)
        exact = np.sqrt(5.0)
        assert exact <= d <= 1.05 * exact

    def test_symmetry_and_triangle_inequality(self, garment_mesh):
        g = GeodesicGraph.build(garment_mesh)
        rng = np.random.default_rng(7)
        idx = rng.integers(0, len(garment_mesh.vertices), 6)
        dist = g.distances(list(idx))[:, idx]
        assert np.abs(dist - dist.T).max() < 1e-9
        for a in range(6):
            for b in range(6):
                for c in range(6):
                    assert dist[a, b] <= dist[a, c] + dist[c, b] + 1e-9

    def test_disconnected_raises(self):
        two = TriMesh(
            np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [10.0, 0, 0], [11, 0, 0], [10, 1, 0]]),
            np.array([[0, 1, 2], [3, 4, 5]]),
            [], [], ["a", "b"],
        )
        with pytest.raises(MetricError, match="not connected"):
            geodesic(two, 0, 3)

    def test_seam_bands_connect_panels(self):
        # two triangles, no shared vertices, bridged only by a seam pair
        two = TriMesh(
            np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [2.0, 0, 0], [3, 0, 0], [2, 1, 0]]),
            np.array([[0, 1, 2], [3, 4, 5]]),
            [[(1, 3)]], [], ["a", "b"],
        )
        d = geodesic(two, 0, 4)
        assert np.isfinite(d)


class TestMgle:
    def test_self_zero(self, garment_mesh):
        assert mgle(garment_mesh, garment_mesh, 10, 0) == 0.0

    def test_rigid_invariance(self, garment_mesh, cylinder_sample):
        other = readout_mesh(cylinder_sample.maps, cylinder_sample.pattern, k=8)
        th = 0.4
        rot = np.array([[np.cos(th), 0, np.sin(th)], [0, 1, 0], [-np.sin(th), 0, np.cos(th)]])
        t = np.array([3.0, 1.0, -8.0])

        def moved(mesh):
            return TriMesh(mesh.vertices @ rot.T + t, mesh.faces, mesh.seam_bands,
                           mesh.panel_of_vertex, mesh.panel_of_face)

        v1 = mgle(garment_mesh, other, 10, 3)
        v2 = mgle(moved(garment_mesh), moved(other), 10, 3)
        assert abs(v1 - v2) < 1e-9

    def test_scaled_mesh_direction(self, garment_mesh):
        # uniformly scaling the prediction scales all its geodesics
        scaled = TriMesh(garment_mesh.vertices * 1.1, garment_mesh.faces,
                         garment_mesh.seam_bands, garment_mesh.panel_of_vertex,
                         garment_mesh.panel_of_face)
        v = mgle(garment_mesh, scaled, 12, 1)
        assert v > 0.0

    def test_k_below_two(self, garment_mesh):
        with pytest.raises(MetricError):
            mgle(garment_mesh, garment_mesh, 1, 0)

    def test_details_report_skipped(self, garment_mesh):
        v, details = mgle(garment_mesh, garment_mesh, 8, 0, return_details=True)
        assert details["pairs"] == 8 * 7 // 2
        assert details["skipped"] == 0


def test_sample_surface_area_uniform(garment_mesh):
    # areas of faces hit should be proportional to face area: check the
    # empirical mean position stays near the analytic surface centroid
    pts = sample_surface(garment_mesh, 20_000, seed=8)
    areas = garment_mesh.face_areas()
    centroids = garment_mesh.vertices[garment_mesh.faces].mean(axis=1)
    expected = (centroids * (areas / areas.sum())[:, None]).sum(axis=0)
    assert np.linalg.norm(pts.mean(axis=0) - expected) < 0.5
