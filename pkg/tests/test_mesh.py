"""Mesh construction, geometry, point location, and file round-trips."""
import math

import numpy as np
import pytest

from dcgm.mesh import (TriMesh, TriangleWalker, build_disk_mesh,
                       build_rect_mesh, load_mesh, locate_point,
                       project_to_domain, save_mesh)


def test_rect_counts_small():
    m = build_rect_mesh(4, 3, 1.0, 1.0)
    assert (m.nv, m.nt, m.nbe) == (12, 12, 10)
    assert m.total_area == pytest.approx(1.0, abs=1e-14)


def test_rect_counts_large():
    m = build_rect_mesh(150, 150, 200.0, 2.0)
    assert (m.nv, m.nt) == (22500, 44402)
    assert m.total_area == pytest.approx(400.0, rel=1e-12)


def test_rect_boundary_labels():
    m = build_rect_mesh(5, 4, 2.0, 1.0)
    labels = set(int(v) for v in m.boundary_labels)
    assert labels == {1, 2, 3, 4}
    for (a, b), lab in zip(m.boundary_edges, m.boundary_labels):
        pa, pb = m.vertices[a], m.vertices[b]
        if lab == 1:
            assert pa[1] == 0.0 and pb[1] == 0.0
        elif lab == 3:
            assert pa[1] == 1.0 and pb[1] == 1.0


def test_disk_counts_frozen():
    # structured polar construction; sizes pinned so downstream benchmarks
    # are reproducible across versions
    for n, nv, nt in [(100, 851, 1600), (200, 3301, 6400), (400, 13001, 25600)]:
        m = build_disk_mesh(n)
        assert (m.nv, m.nt, m.nbe) == (nv, nt, n)


def test_disk_geometry(disk100):
    # area deficit of the inscribed polygonal disk is O(h^2)
    assert disk100.total_area == pytest.approx(math.pi, abs=5e-3)
    r = np.hypot(disk100.vertices[:, 0], disk100.vertices[:, 1])
    assert r.max() <= 1.0 + 1e-14
    assert disk100.convex


def test_disk_rejects_tiny():
    with pytest.raises(ValueError):
        build_disk_mesh(5)


def test_ccw_required():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 2, 1]])  # clockwise
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    with pytest.raises(ValueError):
        TriMesh(verts, tris, edges, np.ones(3, dtype=np.int32))


def test_h_max(unit_square):
    # 9x9 grid on the unit square: diagonal of one cell
    assert unit_square.h_max == pytest.approx(math.sqrt(2.0) / 8.0, rel=1e-12)


def test_barycentric_scalar_batch(disk60, rng):
    pts = rng.uniform(-0.5, 0.5, size=(40, 2))
    tris = rng.integers(0, disk60.nt, size=40)
    batch = disk60.barycentric(tris, pts)
    for i in range(40):
        single = disk60.barycentric(int(tris[i]), pts[i])
        assert np.allclose(batch[i], single, atol=1e-14)
        assert batch[i].sum() == pytest.approx(1.0, abs=1e-12)


def test_locate_interior_points(disk100, rng):
    # acceptance-grade check lives in test_acceptance; this is the cheap tier
    t = rng.uniform(0.0, 2.0 * math.pi, size=500)
    r = 0.999 * np.sqrt(rng.uniform(0.0, 1.0, size=500))
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    for p in pts:
        loc = locate_point(disk100, p)
        assert loc is not None
        tri, bary = loc
        assert bary.min() >= -1e-12
        v = disk100.vertices[disk100.triangles[tri]]
        back = bary @ v
        assert np.allclose(back, p, atol=1e-12)


def test_locate_hint_independent(disk100, rng):
    t = rng.uniform(0.0, 2.0 * math.pi, size=200)
    r = 0.99 * np.sqrt(rng.uniform(0.0, 1.0, size=200))
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    hints = rng.integers(0, disk100.nt, size=200)
    for p, h in zip(pts, hints):
        a = locate_point(disk100, p)
        b = locate_point(disk100, p, hint=int(h))
        assert a is not None and b is not None
        assert a[0] == b[0]
        assert np.allclose(a[1], b[1], atol=1e-12)


def test_locate_outside(disk100):
    assert locate_point(disk100, np.array([1.5, 0.0])) is None
    assert locate_point(disk100, np.array([0.9, 0.9])) is None


def test_walker_cache(disk100):
    w = TriangleWalker(disk100)
    path = [np.array([0.3 + 0.001 * k, 0.1]) for k in range(50)]
    for p in path:
        loc = w.locate(p)
        assert loc is not None


def test_project_to_domain(disk100):
    inside = project_to_domain(disk100, np.array([1.1, 0.0]))
    assert np.hypot(*inside) <= 1.0 + 1e-12
    assert locate_point(disk100, inside) is not None
    # an interior point passes through untouched
    same = project_to_domain(disk100, np.array([0.2, 0.1]))
    assert np.allclose(same, [0.2, 0.1])


def test_save_load_round_trip(tmp_path, disk60):
    path = tmp_path / "disk.msh"
    save_mesh(disk60, path)
    again = load_mesh(path)
    assert np.array_equal(again.vertices, disk60.vertices)
    assert np.array_equal(again.triangles, disk60.triangles)
    assert np.array_equal(again.boundary_edges, disk60.boundary_edges)
    assert np.array_equal(again.boundary_labels, disk60.boundary_labels)


def test_load_flips_clockwise(tmp_path):
    path = tmp_path / "cw.msh"
    path.write_text(
        "3 1 3\n"
        "0 0\n1 0\n0 1\n"
        "1 3 2 0\n"
        "1 2 1\n2 3 1\n3 1 1\n"
    )
    m = load_mesh(path)
    assert m.nt == 1
    assert m.areas[0] > 0


def test_load_rejects_truncated(tmp_path):
    path = tmp_path / "bad.msh"
    path.write_text("3 1 3\n0 0\n1 0\n")
    with pytest.raises(ValueError):
        load_mesh(path)


def test_load_rejects_bad_index(tmp_path):
    path = tmp_path / "bad2.msh"
    path.write_text(
        "3 1 3\n0 0\n1 0\n0 1\n"
        "1 2 9 0\n"
        "1 2 1\n2 3 1\n3 1 1\n"
    )
    with pytest.raises(ValueError):
        load_mesh(path)


def test_neighbors_consistent(disk60):
    nb = disk60.neighbors
    for k in range(disk60.nt):
        for j in range(3):
            other = nb[k, j]
            if other >= 0:
                assert k in nb[other]
