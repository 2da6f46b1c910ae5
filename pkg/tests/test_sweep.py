"""Swept-mesh construction, neighbor selection, and windowed NCC tests."""

import numpy as np
import pytest

from meshsweep.camera import ImageBuffer
from meshsweep.render import TriangleMesh, render_textured
from meshsweep.sweep import (BACKFACE_COS, InsufficientCameras, SweepConfig,
                             extract_points, ncc_image, nearest_cameras,
                             sweep_facets)
from meshsweep.scenes import Scene
from conftest import make_camera


def plane_mesh(z=0.0, size=1.0):
    s = size
    v = np.array([[-s, -s, z], [s, -s, z], [s, s, z], [-s, s, z]], float)
    return TriangleMesh(v, np.array([[0, 1, 2], [0, 2, 3]], np.int32))


def test_offsets_symmetric():
    cfg = SweepConfig()
    offs = list(cfg.offsets())
    assert len(offs) == cfg.N + 1 == 21
    assert offs[0] == -10 and offs[-1] == 10 and 0 in offs
    assert offs == sorted(offs)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SweepConfig(N=3)           # offsets must pair symmetrically
    with pytest.raises(ValueError):
        SweepConfig(t_ncc=1.5)
    with pytest.raises(ValueError):
        SweepConfig(sigma=-1.0)


def test_sweep_zero_offset_is_identity():
    cam = make_camera((0, 0, 3), (0, 0, 0))
    mesh = plane_mesh()
    fam = sweep_facets(mesh, cam, SweepConfig(), cam_index=0)
    assert fam.camera == 0
    assert len(fam.meshes) == 21
    m0 = fam.meshes[list(fam.offsets).index(0)]
    # Zero offset reproduces the visible facets exactly (as a facet soup).
    got = np.sort(m0.vertices.reshape(-1, 3), axis=0)
    want = np.sort(mesh.vertices[mesh.triangles].reshape(-1, 3), axis=0)
    assert np.allclose(got, want, atol=1e-12)


def test_sweep_displacement_magnitude_and_sign():
    cam = make_camera((0, 0, 3), (0, 0, 0))
    mesh = plane_mesh()
    cfg = SweepConfig(alpha=0.03)
    fam = sweep_facets(mesh, cam, cfg, cam_index=0)
    base = fam.meshes[list(fam.offsets).index(0)].vertices
    for k, m in zip(fam.offsets, fam.meshes):
        disp = m.vertices - base
        norms = np.linalg.norm(disp, axis=1)
        # Independent bound: |shift| = alpha * |k| * |cos theta| <= alpha*|k|,
        # and the plane is viewed nearly head-on so |cos theta| > 0.8.
        assert (norms <= cfg.alpha * abs(k) + 1e-12).all()
        if k != 0:
            assert (norms >= 0.8 * cfg.alpha * abs(k)).all()
            away = np.einsum('ij,ij->i', disp, base - cam.C)
            if k > 0:    # positive offsets move away from the camera
                assert (away > 0).all()
            else:
                assert (away < 0).all()


def test_sweep_per_vertex_direction():
    """Each corner moves along its own camera ray, scaled by its own
    incidence angle: verify against a direct recomputation."""
    cam = make_camera((0.4, -0.3, 2.0), (0, 0, 0))
    mesh = plane_mesh(size=0.8)
    cfg = SweepConfig(alpha=0.05)
    fam = sweep_facets(mesh, cam, cfg, cam_index=0)
    idx0 = list(fam.offsets).index(0)
    base = fam.meshes[idx0].vertices
    n = np.array([0.0, 0.0, 1.0])        # plane normal
    for k, m in zip(fam.offsets, fam.meshes):
        d = base - cam.C
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        cos = np.abs(d @ n)
        want = base + (cfg.alpha * k) * cos[:, None] * d
        assert np.allclose(m.vertices, want, atol=1e-9)


def test_backface_facets_dropped():
    """A facet seen at a grazing angle beyond the cutoff yields no soup."""
    # Plane at z=0 seen from a camera almost in the plane: cos theta tiny.
    cam = make_camera((5.0, 0.0, 0.02), (0, 0, 0))
    mesh = plane_mesh(size=0.5)
    fam = sweep_facets(mesh, cam, SweepConfig(), cam_index=0)
    assert all(m.n_triangles == 0 for m in fam.meshes)


def dummy_scene(centers):
    cams = [make_camera(c, (0, 0, 0), width=8, height=8) for c in centers]
    return Scene(cams, np.zeros((0, 3)), [])


def test_nearest_cameras_orders_by_distance():
    sc = dummy_scene([(0, 0, 5), (1, 0, 5), (3, 0, 5), (0.5, 0, 5)])
    assert nearest_cameras(sc, 0, 2) == [3, 1]
    assert nearest_cameras(sc, 2, 2) == [1, 3]


def test_nearest_cameras_tie_prefers_lower_index():
    sc = dummy_scene([(0, 0, 5), (1, 0, 5), (-1, 0, 5)])
    assert nearest_cameras(sc, 0, 2) == [1, 2]


def test_nearest_cameras_insufficient():
    sc = dummy_scene([(0, 0, 5), (1, 0, 5)])
    with pytest.raises(InsufficientCameras):
        nearest_cameras(sc, 0, 2)


# -- NCC ------------------------------------------------------------------

def textured_image(rng, h=80, w=100):
    data = rng.random((h, w)).astype(np.float32)
    return ImageBuffer(data, np.ones((h, w), bool))


def test_ncc_self_is_one(rng):
    img = textured_image(rng)
    cfg = SweepConfig(sigma=3.0)
    ncc, good = ncc_image(img, img, cfg)
    assert good.any()
    assert np.abs(ncc[good] - 1.0).max() < 1e-9


def test_ncc_affine_invariance(rng):
    img = textured_image(rng)
    shifted = ImageBuffer(0.37 * img.data + 0.21, img.mask.copy())
    cfg = SweepConfig(sigma=3.0)
    ncc, good = ncc_image(img, shifted, cfg)
    assert np.abs(ncc[good] - 1.0).max() < 1e-9


def test_ncc_negated_is_minus_one(rng):
    img = textured_image(rng)
    neg = ImageBuffer(1.0 - img.data, img.mask.copy())
    ncc, good = ncc_image(img, neg, SweepConfig(sigma=3.0))
    assert np.abs(ncc[good] + 1.0).max() < 1e-9


def test_ncc_constant_region_masked(rng):
    img = textured_image(rng)
    flat = ImageBuffer(np.full_like(img.data, 0.5), img.mask.copy())
    _, good = ncc_image(flat, img, SweepConfig(sigma=3.0))
    assert not good.any()      # zero variance reference never matches


def test_ncc_uncorrelated_below_threshold(rng):
    a = textured_image(rng)
    b = textured_image(rng)
    cfg = SweepConfig(sigma=3.0)
    ncc, good = ncc_image(a, b, cfg)
    assert good.any()
    assert np.abs(ncc[good]).mean() < 0.5
    assert (ncc[good] >= cfg.t_ncc).mean() < 0.01


def test_ncc_respects_invalid_pixels(rng):
    img = textured_image(rng)
    mask = img.mask.copy()
    mask[30:50, 40:60] = False
    holed = ImageBuffer(img.data.copy(), mask)
    _, good = ncc_image(img, holed, SweepConfig(sigma=3.0))
    assert not good[38:42, 48:52].any()


# -- point extraction -----------------------------------------------------

def test_extract_points_on_true_surface(rng):
    """With the mesh already matching the scene, winners concentrate at the
    zero offset and back-project onto the surface."""
    mesh = plane_mesh(size=2.0)

    def tex(X):
        return 0.5 + 0.5 * np.sin(7 * X[:, 0]) * np.cos(9 * X[:, 1] + 0.3)

    centers = [(0, 0, 3), (0.7, 0, 3), (-0.7, 0, 3)]
    cams = []
    for c in centers:
        cam = make_camera(c, (0, 0, 0), width=200, height=160)
        img, _ = render_textured(mesh, cam, tex)
        cam.image = img
        cams.append(cam)
    sc = Scene(cams, np.zeros((0, 3)), [], gt_mesh=mesh)
    cfg = SweepConfig(sigma=3.0, tile=40)
    fam = sweep_facets(mesh, cams[0], cfg, cam_index=0)
    pts = extract_points(sc, fam, cfg)
    assert len(pts) >= 4
    offs = np.array([p.offset for p in pts])
    z = np.array([p.position[2] for p in pts])
    assert (np.abs(offs) <= 1).mean() > 0.8
    assert np.abs(z).max() < 1.5 * cfg.alpha
    for p in pts:
        assert p.ncc >= cfg.t_ncc
        assert p.camera == 0
