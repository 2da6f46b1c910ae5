"""Per-camera mesh sweeping, Gaussian-weighted NCC scoring and tiled
extraction of new 3D points.

For a camera at C, every facet visible from C is offset along the
camera-to-vertex directions by multiples of the sweep step: vertex v moves
by alpha * k * |cos(theta)| along the unit direction from C to v, where
theta is the angle between the facet normal and that direction.  Positive
offsets sweep away from the camera.  Each facet moves independently
(vertices are duplicated), giving one facet soup per offset.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import cv2

from .camera import ImageBuffer
from .render import TriangleMesh, rasterize_depth, visible_triangles, reproject

BACKFACE_COS = math.cos(math.radians(85.0))  # grazing-facet cutoff


@dataclass
class SweepConfig:
    alpha: float = 0.03    # sweep step, meters
    N: int = 20            # offsets k in {-N/2..N/2} -> N+1 meshes
    sigma: float = 8.0     # px, NCC Gaussian kernel
    t_ncc: float = 0.98    # acceptance threshold
    tile: int = 100        # px, extraction tile size

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.N < 2 or self.N % 2:
            raise ValueError("N must be even and >= 2")
        if not 0.0 < self.t_ncc <= 1.0:
            raise ValueError("t_ncc must be in (0, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def offsets(self):
        half = self.N // 2
        return list(range(-half, half + 1))


@dataclass
class SweptMeshFamily:
    camera: int
    offsets: list
    meshes: list = field(repr=False)   # TriangleMesh per offset, facet soups

    def __len__(self):
        return len(self.meshes)


@dataclass
class MatchPoint:
    position: np.ndarray
    ncc: float
    camera: int
    neighbor: int
    offset: int


def sweep_facets(mesh, cam, cfg, cam_index=-1):
    """Swept-mesh family for one camera: N+1 facet soups, one per offset."""
    vis = sorted(visible_triangles(mesh, cam))
    V, F = mesh.vertices, mesh.triangles
    normals = mesh.face_normals()

    soup_tris = []
    corners = []     # (n_vis, 3, 3) facet corner positions
    coslist = []     # (n_vis, 3) |cos theta| per corner
    dirs = []        # (n_vis, 3, 3) unit camera-to-corner directions
    for t in vis:
        n = normals[t]
        cs = []
        ds = []
        pts = V[F[t]]
        for p in pts:
            d = p - cam.C
            ln = np.linalg.norm(d)
            if ln < 1e-12:
                break
            d = d / ln
            cs.append(abs(float(n @ d)))
            ds.append(d)
        else:
            if abs(sum(cs) / 3.0) < BACKFACE_COS:
                continue
            corners.append(pts)
            coslist.append(cs)
            dirs.append(ds)
    n_f = len(corners)
    meshes = []
    offsets = cfg.offsets()
    if n_f == 0:
        empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int32))
        return SweptMeshFamily(cam_index, offsets, [empty for _ in offsets])
    corners = np.asarray(corners)            # (n_f, 3, 3)
    coslist = np.asarray(coslist)[..., None]  # (n_f, 3, 1)
    dirs = np.asarray(dirs)                  # (n_f, 3, 3)
    tris = np.arange(3 * n_f, dtype=np.int32).reshape(n_f, 3)
    for k in offsets:
        shift = (cfg.alpha * k) * coslist * dirs
        meshes.append(TriangleMesh((corners + shift).reshape(-1, 3), tris))
    return SweptMeshFamily(cam_index, offsets, meshes)


class InsufficientCameras(ValueError):
    pass


def nearest_cameras(scene, cam_index, count=2):
    """Indices of the `count` cameras with centers closest to the given one
    (ties broken toward the lower index)."""
    centers = [c.C for c in scene.cameras]
    others = [(float(np.linalg.norm(centers[i] - centers[cam_index])), i)
              for i in range(len(centers)) if i != cam_index]
    if len(others) < count:
        raise InsufficientCameras(
            f"need {count} other cameras, have {len(others)}")
    others.sort()
    return [i for _, i in others[:count]]


def ncc_image(ref, test, cfg, dtype=np.float64):
    """Pixelwise zero-mean NCC between two images over a Gaussian window.

    Window radius is ceil(2*sigma); masked pixels contribute zero weight.
    Output pixels are invalid where less than half of the kernel mass is
    backed by valid pixels, or where either windowed variance vanishes.
    Returns (ncc float32 raster in [-1,1], valid mask).

    dtype float64 keeps the algebraic identities (self-correlation,
    affine invariance) to ~1e-12; the sweep loop trades that for speed
    with float32.
    """
    if ref.data.shape != test.data.shape:
        raise ValueError("NCC inputs must have identical dimensions")
    radius = int(math.ceil(2.0 * cfg.sigma))
    g = cv2.getGaussianKernel(2 * radius + 1, cfg.sigma, cv2.CV_64F)
    cvt = cv2.CV_64F
    if dtype == np.float32:
        g = g.astype(np.float32)
        cvt = cv2.CV_32F

    both = ref.mask & test.mask
    h, w = both.shape
    out_ncc = np.zeros((h, w), np.float32)
    out_good = np.zeros((h, w), bool)
    ys, xs = np.nonzero(both)
    if not len(ys):
        return out_ncc, out_good
    # Work only on the valid bounding box plus one kernel radius of margin.
    y0 = max(int(ys.min()) - radius, 0)
    y1 = min(int(ys.max()) + radius + 1, h)
    x0 = max(int(xs.min()) - radius, 0)
    x1 = min(int(xs.max()) + radius + 1, w)
    win = np.s_[y0:y1, x0:x1]

    m = both[win].astype(dtype)
    x = ref.data[win].astype(dtype) * m
    y = test.data[win].astype(dtype) * m

    def blur(a):
        return cv2.sepFilter2D(a, cvt, g, g,
                               borderType=cv2.BORDER_CONSTANT)

    wsum = blur(m)
    good = wsum > 0.5
    wsafe = np.where(good, wsum, 1.0)
    ex = blur(x) / wsafe
    ey = blur(y) / wsafe
    exx = blur(x * x) / wsafe
    eyy = blur(y * y) / wsafe
    exy = blur(x * y) / wsafe
    vx = exx - ex * ex
    vy = eyy - ey * ey
    cov = exy - ex * ey
    var_floor = 1e-12 if dtype == np.float64 else 1e-8
    good &= (vx > var_floor) & (vy > var_floor)
    ncc = np.where(good, cov / np.sqrt(np.where(good, vx * vy, 1.0)), 0.0)
    out_ncc[win] = np.clip(ncc, -1.0, 1.0)
    out_good[win] = good
    return out_ncc, out_good


def extract_points(scene, family, cfg, neighbors=None):
    """Best NCC match per tile over all swept meshes and both neighbor
    cameras, back-projected to 3D through the winning mesh."""
    cam_idx = family.camera
    cam = scene.cameras[cam_idx]
    ref = cam.image
    if neighbors is None:
        neighbors = nearest_cameras(scene, cam_idx, 2)

    h, w = cam.height, cam.width
    best_ncc = np.full((h, w), -np.inf, np.float32)
    best_j = np.full((h, w), -1, np.int16)
    best_k = np.full((h, w), -1, np.int16)
    best_tid = np.full((h, w), -1, np.int32)

    for j, mesh in enumerate(family.meshes):
        if mesh.n_triangles == 0:
            continue
        dm_c = rasterize_depth(mesh, cam)
        dms_k = {k: rasterize_depth(mesh, scene.cameras[k]) for k in neighbors}
        for k in neighbors:
            warped = reproject(mesh, cam, scene.cameras[k],
                               scene.cameras[k].image, dm_c=dm_c,
                               dm_k=dms_k[k])
            ncc, ok = ncc_image(ref, warped, cfg, dtype=np.float32)
            ok &= dm_c.mask
            better = ok & (ncc > best_ncc)
            best_ncc[better] = ncc[better]
            best_j[better] = j
            best_k[better] = k
            best_tid[better] = dm_c.tri_id[better]

    out = []
    passing = best_ncc >= cfg.t_ncc
    if not passing.any():
        return out
    for ty in range(0, h, cfg.tile):
        for tx in range(0, w, cfg.tile):
            sub = passing[ty:ty + cfg.tile, tx:tx + cfg.tile]
            if not sub.any():
                continue
            nsub = np.where(sub, best_ncc[ty:ty + cfg.tile, tx:tx + cfg.tile],
                            -np.inf)
            iy, ix = np.unravel_index(np.argmax(nsub), nsub.shape)
            py, px = ty + int(iy), tx + int(ix)
            j = int(best_j[py, px])
            tid = int(best_tid[py, px])
            pos = _backproject(scene, cam_idx, px, py, family.meshes[j], tid)
            if pos is None:
                continue
            out.append(MatchPoint(position=pos,
                                  ncc=float(best_ncc[py, px]),
                                  camera=cam_idx,
                                  neighbor=int(best_k[py, px]),
                                  offset=family.offsets[j]))
    return out


def _backproject(scene, cam_idx, px, py, mesh, tid):
    """Intersection of the pixel-center ray with the winning triangle's
    plane (exact point on the generating swept mesh)."""
    cam = scene.cameras[cam_idx]
    d = cam.pixel_ray(px + 0.5, py + 0.5)
    v0, v1, v2 = mesh.vertices[mesh.triangles[tid]]
    n = np.cross(v1 - v0, v2 - v0)
    denom = float(n @ d)
    if abs(denom) < 1e-300:
        return None
    t = float(n @ (v0 - cam.C)) / denom
    if t <= 0:
        return None
    return cam.C + t * d
