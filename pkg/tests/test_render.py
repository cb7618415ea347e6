import math

import numpy as np
import pytest

from oracles import brute_force_render, random_mesh, unit_cube_mesh
from viewsphere.mesh import MeshError, TriangleMesh
from viewsphere.render import (
    DepthImage,
    RenderConfig,
    build_bvh,
    depth_codes,
    read_pgm,
    render_all_views,
    render_depth,
    write_pgm,
)
from viewsphere.viewrig import Viewpoint, build_rig, viewpoint_from_index


def test_empty_mesh_renders_background():
    mesh = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    img = render_depth(mesh, viewpoint_from_index(0))
    assert img.pixels.shape == (224, 224)
    assert not img.pixels.any()


def test_cube_silhouette_fraction():
    img = render_depth(unit_cube_mesh(), Viewpoint(ring=2, azimuth=0))
    fraction = np.count_nonzero(img.pixels) / img.pixels.size
    assert abs(fraction - (1.0 / 1.9) ** 2) < 0.01


def test_render_bit_deterministic():
    rng = np.random.default_rng(0)
    mesh = random_mesh(rng, 60)
    view = viewpoint_from_index(17)
    a = render_depth(mesh, view)
    b = render_depth(mesh, view)
    assert np.array_equal(a.pixels, b.pixels)


def test_bvh_matches_brute_force_exactly():
    rng = np.random.default_rng(1)
    for _ in range(5):
        mesh = random_mesh(rng, int(rng.integers(5, 120)))
        bvh = build_bvh(mesh)
        for index in rng.integers(0, 60, size=2):
            view = viewpoint_from_index(int(index))
            fast = render_depth(mesh, view, bvh=bvh)
            slow = brute_force_render(mesh, view)
            assert np.array_equal(fast.pixels, slow.pixels)


def test_bvh_structure_invariants():
    rng = np.random.default_rng(2)
    mesh = random_mesh(rng, 123)
    bvh = build_bvh(mesh)
    seen = []

    def walk(node):
        if node.is_leaf:
            assert len(node.triangle_indices) <= bvh.leaf_size
            seen.extend(node.triangle_indices.tolist())
            for ti in node.triangle_indices:
                tri = bvh.triangles[ti]
                assert (tri.min(axis=0) >= node.box_min - 1e-12).all()
                assert (tri.max(axis=0) <= node.box_max + 1e-12).all()
        else:
            for child in (node.left, node.right):
                assert (child.box_min >= node.box_min - 1e-12).all()
                assert (child.box_max <= node.box_max + 1e-12).all()
                walk(child)

    walk(bvh.root)
    assert sorted(seen) == list(range(123))  # every triangle in exactly one leaf


def _mirrored_mesh(seed):
    """Random triangles plus their z-mirrors, with matched vertex order."""
    rng = np.random.default_rng(seed)
    half = rng.uniform(-0.45, 0.45, size=(12, 3, 3))
    mirrored = half * np.array([1.0, 1.0, -1.0])
    verts = np.vstack([half.reshape(-1, 3), mirrored.reshape(-1, 3)])
    faces = np.arange(len(verts)).reshape(-1, 3)
    return TriangleMesh(verts, faces)


def test_z_symmetric_mesh_flips_across_rings():
    mesh = _mirrored_mesh(3)
    rig = build_rig()
    images = render_all_views(mesh, rig)
    for k in range(5):
        for j in range(12):
            a = images[12 * k + j].pixels
            b = images[12 * (4 - k) + j].pixels
            assert np.array_equal(a, np.flipud(b))


def test_render_all_views_order_and_parallel_determinism():
    rng = np.random.default_rng(4)
    mesh = random_mesh(rng, 40)
    rig = build_rig()
    serial = render_all_views(mesh, rig)
    parallel = render_all_views(mesh, rig, workers=4)
    assert len(serial) == 60
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.pixels, b.pixels)
    one = render_depth(mesh, rig[23])
    assert np.array_equal(serial[23].pixels, one.pixels)


def test_cylinder_yaw_invariant_foreground():
    # 360-facet cylinder: nearly symmetric under any yaw step
    n = 360
    angles = 2 * math.pi * np.arange(n) / n
    bottom = np.stack([0.4 * np.cos(angles), 0.4 * np.sin(angles), np.full(n, -0.45)], axis=1)
    top = bottom + [0.0, 0.0, 0.9]
    verts = np.vstack([bottom, top, [[0, 0, -0.45]], [[0, 0, 0.45]]])
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces += [(i, j, n + j), (i, n + j, n + i), (2 * n, j, i), (2 * n + 1, n + i, n + j)]
    mesh = TriangleMesh(verts, np.array(faces))
    counts = []
    for azimuth in range(12):
        img = render_depth(mesh, Viewpoint(ring=1, azimuth=azimuth))
        counts.append(np.count_nonzero(img.pixels))
    assert max(counts) - min(counts) <= 0.005 * 224 * 224


def test_depth_codes_antitone_and_clamped():
    radius = 2.0
    t = np.array([radius - 1.0, radius - 0.5, radius, radius + 0.5, radius + 1.0, np.inf])
    codes = depth_codes(t, radius)
    assert codes[0] == 255 and codes[4] == 1 and codes[5] == 0
    hit = codes[:-1]
    assert (np.diff(hit.astype(int)) <= 0).all()
    # out-of-range hits clamp instead of wrapping
    assert depth_codes(np.array([radius + 2.0]), radius)[0] == 1
    assert depth_codes(np.array([radius - 2.0]), radius)[0] == 255


def test_foreground_nonzero_background_zero():
    img = render_depth(unit_cube_mesh(), viewpoint_from_index(30))
    values = np.unique(img.pixels)
    assert values[0] == 0
    assert (values[1:] >= 1).all()


def test_render_rejects_unnormalized_mesh():
    verts = np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
    with pytest.raises(MeshError, match="not normalized"):
        render_depth(TriangleMesh(verts, np.array([[0, 1, 2]])), viewpoint_from_index(0))


def test_degenerate_triangles_are_skipped_not_errors():
    verts = np.array([[0.1, 0.1, 0.1], [0.1, 0.1, 0.1], [0.1, 0.1, 0.1]])
    mesh = TriangleMesh(verts, np.array([[0, 1, 2]]))
    img = render_depth(mesh, viewpoint_from_index(0))
    assert not img.pixels.any()


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    img = DepthImage(rng.integers(0, 256, size=(224, 224), dtype=np.uint8))
    path = tmp_path / "v.pgm"
    write_pgm(img, path)
    again = read_pgm(path)
    assert np.array_equal(img.pixels, again.pixels)
    write_pgm(again, tmp_path / "v2.pgm")
    assert path.read_bytes() == (tmp_path / "v2.pgm").read_bytes()


def test_pgm_rejects_garbage(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(ValueError, match="not a binary PGM"):
        read_pgm(path)
    path.write_bytes(b"P5\n4 4\n255\nxx")
    with pytest.raises(ValueError, match="truncated"):
        read_pgm(path)


def test_depth_image_validation():
    with pytest.raises(ValueError, match="uint8"):
        DepthImage(np.zeros((224, 224)))
    with pytest.raises(ValueError, match="2D"):
        DepthImage(np.zeros((10,), dtype=np.uint8))
