import numpy as np
import pytest

from meshsweep.camera import CameraView, look_at


def make_camera(center, target=(0.0, 0.0, 0.0), focal=300.0,
                width=160, height=120, image=None):
    center = np.asarray(center, float)
    K = np.array([[focal, 0.0, width / 2.0],
                  [0.0, focal, height / 2.0],
                  [0.0, 0.0, 1.0]])
    return CameraView(K, look_at(center, target), center, width, height,
                      image=image)


def random_points(rng, n, spread=1.0):
    """Well-separated random points (no near-duplicates)."""
    pts = []
    while len(pts) < n:
        p = rng.uniform(-spread, spread, 3)
        if all(np.linalg.norm(p - q) > 1e-3 for q in pts[-50:]):
            pts.append(p)
    return np.array(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
