"""Synthetic scene generation and scene-file round-trip tests."""

import json

import numpy as np
import pytest

from meshsweep.scenes import (CORNER_Z_JITTER, DOWNWARD, UPWARD, Scene,
                              SceneError, ValueNoise, arc_cameras,
                              generate_pyramid, load_scene, pyramid_mesh,
                              save_scene)
from conftest import make_camera


@pytest.mark.parametrize("variant", [DOWNWARD, UPWARD])
def test_pyramid_geometry(variant):
    mesh = pyramid_mesh(variant)
    base = mesh.vertices[:4]
    # Square base, 2 m on a side, centered at the origin near z = 0.
    assert np.abs(np.abs(base[:, :2]) - 1.0).max() < 1e-12
    assert np.abs(base[:, 2]).max() <= CORNER_Z_JITTER
    apex = mesh.vertices[4]
    assert abs(abs(apex[2]) - 0.3) < 1e-6
    if variant == DOWNWARD:
        assert apex[2] < 0
    else:
        assert apex[2] > 0
    assert np.abs(apex[:2]).max() < 1e-12
    # Open surface of 4 lateral faces, all meeting at the apex, wound so the
    # normals face the cameras on the +z side.
    assert mesh.n_triangles == 4
    assert (mesh.triangles == 4).sum() == 4
    assert (mesh.face_normals()[:, 2] > 0).all()


def test_pyramid_corner_jitter_alternates():
    z = pyramid_mesh(DOWNWARD).vertices[:4, 2]
    assert sorted(np.sign(z)) == [-1, -1, 1, 1]
    assert (np.abs(z) == CORNER_Z_JITTER).all()


def test_arc_cameras_look_at_scene():
    cams = arc_cameras(6, 160, 120)
    assert len(cams) == 6
    for cam in cams:
        assert cam.C[2] > 0
        assert abs(np.linalg.norm(cam.C) - 3.0) < 1e-9
        # Optical axis points at the origin.
        axis = cam.R[2]
        to_origin = -cam.C / np.linalg.norm(cam.C)
        assert np.allclose(axis, to_origin, atol=1e-9)


def test_generate_pyramid_scene():
    sc = generate_pyramid(DOWNWARD, n_cameras=4, width=80, height=60, seed=1)
    assert sc.n_cameras == 4
    assert len(sc.points) == 4                      # the 4 base corners
    assert all(v == [0, 1, 2, 3] for v in sc.visibility)
    for cam in sc.cameras:
        assert cam.image.mask.mean() > 0.2          # object well in frame
        vals = cam.image.data[cam.image.mask]
        assert vals.std() > 0.05                    # actually textured
    dm = sc.gt_depth(0)
    assert dm.mask.any()


def test_generate_pyramid_deterministic():
    a = generate_pyramid(UPWARD, n_cameras=3, width=64, height=48, seed=7)
    b = generate_pyramid(UPWARD, n_cameras=3, width=64, height=48, seed=7)
    for ca, cb in zip(a.cameras, b.cameras):
        assert np.array_equal(ca.image.data, cb.image.data)
        assert np.array_equal(ca.K, cb.K)
    c = generate_pyramid(UPWARD, n_cameras=3, width=64, height=48, seed=8)
    assert not np.array_equal(a.cameras[0].image.data,
                              c.cameras[0].image.data)


def test_generate_pyramid_too_few_cameras():
    with pytest.raises(SceneError):
        generate_pyramid(DOWNWARD, n_cameras=2)


def test_value_noise_range_and_determinism():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, (500, 3))
    n1 = ValueNoise(5)(pts)
    n2 = ValueNoise(5)(pts)
    assert np.array_equal(n1, n2)
    assert (n1 >= 0).all() and (n1 <= 1).all()
    assert n1.std() > 0.05
    assert not np.allclose(n1, ValueNoise(6)(pts))


def test_save_load_round_trip(tmp_path):
    sc = generate_pyramid(DOWNWARD, n_cameras=3, width=64, height=48, seed=3)
    save_scene(sc, tmp_path)
    back = load_scene(tmp_path / "scene.json")
    assert back.n_cameras == 3
    assert np.allclose(back.points, sc.points)
    assert back.visibility == [list(v) for v in sc.visibility]
    for ca, cb in zip(sc.cameras, back.cameras):
        assert np.allclose(ca.K, cb.K)
        assert np.allclose(ca.R, cb.R)
        assert np.allclose(ca.C, cb.C)
        # Images were quantized to 8 bits, so the round trip is exact.
        assert np.array_equal(ca.image.data, cb.image.data)
    assert back.gt_mesh is not None
    assert np.allclose(back.gt_mesh.vertices, sc.gt_mesh.vertices)
    assert np.array_equal(back.gt_mesh.triangles, sc.gt_mesh.triangles)


def test_load_scene_missing_file(tmp_path):
    with pytest.raises(SceneError):
        load_scene(tmp_path / "nope.json")


def test_load_scene_bad_field_names_file(tmp_path):
    sc = generate_pyramid(DOWNWARD, n_cameras=3, width=32, height=24, seed=0)
    save_scene(sc, tmp_path)
    p = tmp_path / "scene.json"
    doc = json.loads(p.read_text())
    del doc["cameras"][0]["K"]
    p.write_text(json.dumps(doc))
    with pytest.raises(SceneError, match="K"):
        load_scene(p)


def test_scene_validation_names_point_index():
    cams = [make_camera((0, 0, 3), (0, 0, 0)) for _ in range(2)]
    with pytest.raises(SceneError, match=r"points\[1\]"):
        Scene(cams, np.zeros((2, 3)), [[0], [5]])


def test_visibility_length_mismatch():
    cams = [make_camera((0, 0, 3), (0, 0, 0))]
    with pytest.raises(SceneError):
        Scene(cams, np.zeros((2, 3)), [[0]])
