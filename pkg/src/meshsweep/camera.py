"""Pinhole camera model and grayscale image buffers."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ImageBuffer:
    """Single-channel intensity raster in [0, 1] with a validity mask."""

    data: np.ndarray          # (h, w) float32
    mask: np.ndarray = None   # (h, w) bool; None means all valid

    def __post_init__(self):
        self.data = np.asarray(self.data, np.float32)
        if self.data.ndim != 2:
            raise ValueError("image data must be a 2D raster")
        if self.mask is None:
            self.mask = np.ones(self.data.shape, bool)
        else:
            self.mask = np.asarray(self.mask, bool)
            if self.mask.shape != self.data.shape:
                raise ValueError("mask shape mismatch")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass
class CameraView:
    """Calibrated pinhole camera: x_cam = R @ (X - C), pixel = K @ x_cam / z."""

    K: np.ndarray             # 3x3 intrinsics, upper triangular
    R: np.ndarray             # 3x3 world->camera rotation
    C: np.ndarray             # camera center, world frame, meters
    width: int
    height: int
    image: ImageBuffer = field(default=None, repr=False)

    def __post_init__(self):
        self.K = np.asarray(self.K, np.float64).reshape(3, 3)
        self.R = np.asarray(self.R, np.float64).reshape(3, 3)
        self.C = np.asarray(self.C, np.float64).reshape(3)
        if not np.all(np.isfinite(self.K)) or not np.all(np.isfinite(self.R)) \
                or not np.all(np.isfinite(self.C)):
            raise ValueError("camera parameters must be finite")
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if abs(self.K[1, 0]) > 0 or abs(self.K[2, 0]) > 0 or abs(self.K[2, 1]) > 0:
            raise ValueError("intrinsics must be upper triangular")
        if np.max(np.abs(self.R @ self.R.T - np.eye(3))) > 1e-9:
            raise ValueError("rotation must be orthonormal within 1e-9")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    def project(self, p):
        """Project world point p; returns (u, v, depth) or None if the point
        is at or behind the camera plane (depth <= 0)."""
        x = self.R @ (np.asarray(p, np.float64) - self.C)
        if x[2] <= 0:
            return None
        h = self.K @ x
        return h[0] / x[2], h[1] / x[2], x[2]

    def project_many(self, pts):
        """Vectorized projection: (n,3) -> (u, v, depth) arrays.

        Behind-camera points get depth <= 0; u, v are then meaningless.
        """
        x = (np.asarray(pts, np.float64) - self.C) @ self.R.T
        z = x[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            h = x @ self.K.T
            u = h[:, 0] / z
            v = h[:, 1] / z
        return u, v, z

    def pixel_ray(self, u, v):
        """Unit world-frame direction through pixel coordinate (u, v)."""
        d = np.linalg.solve(self.K, np.array([u, v, 1.0]))
        d = self.R.T @ d
        return d / np.linalg.norm(d)

    def pixel_rays_grid(self):
        """(h, w, 3) world directions through every pixel center (u+.5, v+.5),
        scaled so the camera-z component is 1 (X = C + dir * depth).  Cached:
        camera geometry is immutable after construction."""
        if getattr(self, "_rays_grid", None) is None:
            us, vs = np.meshgrid(np.arange(self.width) + 0.5,
                                 np.arange(self.height) + 0.5)
            ones = np.ones_like(us)
            pix = np.stack([us, vs, ones], axis=-1)
            d = pix @ np.linalg.inv(self.K).T
            d /= d[..., 2:3]
            self._rays_grid = d @ self.R  # R^T applied to each row vector
        return self._rays_grid


def look_at(center, target, up=(0.0, 0.0, 1.0)):
    """World->camera rotation for a camera at `center` looking at `target`.

    Camera z points at the target, x right, y down (image convention).
    """
    center = np.asarray(center, np.float64)
    z = np.asarray(target, np.float64) - center
    z = z / np.linalg.norm(z)
    up = np.asarray(up, np.float64)
    x = np.cross(z, up)
    n = np.linalg.norm(x)
    if n < 1e-12:
        up = np.array([0.0, 1.0, 0.0])
        x = np.cross(z, up)
        n = np.linalg.norm(x)
    x /= n
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    # Orthonormalize against accumulated rounding.
    u, _, vt = np.linalg.svd(R)
    return u @ vt
