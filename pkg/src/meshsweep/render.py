"""CPU software renderer: z-buffer depth rasterization, image reprojection
through a mesh between two cameras, and bilinear sampling.

Pixel (u, v) samples the scene at pixel center (u + 0.5, v + 0.5).  Depth is
interpolated perspective-correctly (linear 1/z in screen space), so
rasterized surface points lie on their triangle's plane up to rounding.
Triangles are treated double-sided and independently (facet soups render
fine).  There is no near-plane clipping: triangles with a vertex at camera
depth <= 1e-9 are skipped.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .camera import ImageBuffer

DEGENERATE_AREA = 1e-12   # m^2; smaller triangles are flagged degenerate
OCCLUSION_TOL = 1e-4      # m, relative depth slack in occlusion tests


@dataclass
class TriangleMesh:
    """Indexed triangle soup/mesh: vertices (n,3) float, triangles (m,3) int."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, np.int32).reshape(-1, 3)
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def face_normals(self, normalize=True):
        """(m,3) per-triangle normals; zero for degenerate triangles."""
        V, F = self.vertices, self.triangles
        n = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
        if normalize:
            l = np.linalg.norm(n, axis=1)
            good = l > 2 * DEGENERATE_AREA
            n[good] /= l[good, None]
            n[~good] = 0.0
        return n

    def degenerate_mask(self):
        n = self.face_normals(normalize=False)
        return 0.5 * np.linalg.norm(n, axis=1) <= DEGENERATE_AREA

    def signed_volume(self):
        V, F = self.vertices, self.triangles
        return float(np.einsum("ij,ij->i", V[F[:, 0]],
                               np.cross(V[F[:, 1]], V[F[:, 2]])).sum() / 6.0)


@dataclass
class DepthMap:
    """Per-pixel depth raster with validity mask and winner triangle ids."""

    depth: np.ndarray          # (h,w) float32, meters along camera z
    mask: np.ndarray           # (h,w) bool
    tri_id: np.ndarray = None  # (h,w) int32, -1 where invalid

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]


@njit(cache=True, nogil=True)
def _warp_kernel(dirs, zc, Cc, Rk, Kk, Ck, img, img_mask,
                 dmk_depth, dmk_mask, occl_tol, vals, ok):
    """Per-valid-pixel warp: surface point -> cam_k projection -> occlusion
    test against cam_k's own mesh depth -> conservative bilinear sample."""
    h, w = img.shape
    for i in range(dirs.shape[0]):
        X0 = Cc[0] + dirs[i, 0] * zc[i] - Ck[0]
        X1 = Cc[1] + dirs[i, 1] * zc[i] - Ck[1]
        X2 = Cc[2] + dirs[i, 2] * zc[i] - Ck[2]
        zk = Rk[2, 0] * X0 + Rk[2, 1] * X1 + Rk[2, 2] * X2
        if zk <= 1e-9:
            continue
        xk = Rk[0, 0] * X0 + Rk[0, 1] * X1 + Rk[0, 2] * X2
        yk = Rk[1, 0] * X0 + Rk[1, 1] * X1 + Rk[1, 2] * X2
        uk = (Kk[0, 0] * xk + Kk[0, 1] * yk + Kk[0, 2] * zk) / zk
        vk = (Kk[1, 1] * yk + Kk[1, 2] * zk) / zk
        iu = int(np.floor(uk))
        iv = int(np.floor(vk))
        if iu < 0:
            iu = 0
        elif iu > w - 1:
            iu = w - 1
        if iv < 0:
            iv = 0
        elif iv > h - 1:
            iv = h - 1
        if not dmk_mask[iv, iu]:
            continue
        slack = occl_tol * (1.0 if zk < 1.0 else zk)
        if zk > dmk_depth[iv, iu] + slack:
            continue
        x = uk - 0.5
        y = vk - 0.5
        x0 = int(np.floor(x))
        y0 = int(np.floor(y))
        if x0 < 0 or y0 < 0 or x0 + 1 > w - 1 or y0 + 1 > h - 1:
            continue
        if not (img_mask[y0, x0] and img_mask[y0, x0 + 1]
                and img_mask[y0 + 1, x0] and img_mask[y0 + 1, x0 + 1]):
            continue
        fx = x - x0
        fy = y - y0
        vals[i] = ((1.0 - fy) * ((1.0 - fx) * img[y0, x0]
                                 + fx * img[y0, x0 + 1])
                   + fy * ((1.0 - fx) * img[y0 + 1, x0]
                           + fx * img[y0 + 1, x0 + 1]))
        ok[i] = True


@njit(cache=True, nogil=True)
def _raster_kernel(xs, ys, invz, tris, height, width, depth, tid):
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = xs[i0], ys[i0]
        x1, y1 = xs[i1], ys[i1]
        x2, y2 = xs[i2], ys[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        xmin = int(np.floor(min(x0, min(x1, x2)) - 0.5)) + 1
        xmax = int(np.ceil(max(x0, max(x1, x2)) - 0.5))
        ymin = int(np.floor(min(y0, min(y1, y2)) - 0.5)) + 1
        ymax = int(np.ceil(max(y0, max(y1, y2)) - 0.5))
        if xmin < 0:
            xmin = 0
        if ymin < 0:
            ymin = 0
        if xmax > width - 1:
            xmax = width - 1
        if ymax > height - 1:
            ymax = height - 1
        inv_area = 1.0 / area
        w0, w1, w2 = invz[i0], invz[i1], invz[i2]
        for py in range(ymin, ymax + 1):
            cy = py + 0.5
            for px in range(xmin, xmax + 1):
                cx = px + 0.5
                b0 = ((x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy)) * inv_area
                b1 = ((x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy)) * inv_area
                b2 = 1.0 - b0 - b1
                if b0 < 0.0 or b1 < 0.0 or b2 < 0.0:
                    continue
                iz = b0 * w0 + b1 * w1 + b2 * w2
                if iz <= 0.0:
                    continue
                z = 1.0 / iz
                if z < depth[py, px]:
                    depth[py, px] = z
                    tid[py, px] = t
    return depth


def rasterize_depth(mesh, cam):
    """Z-buffer depth map of the mesh from the camera, with triangle ids."""
    h, w = cam.height, cam.width
    depth = np.full((h, w), np.inf, np.float64)
    tid = np.full((h, w), -1, np.int32)
    if mesh.n_triangles:
        x = (mesh.vertices - cam.C) @ cam.R.T
        z = x[:, 2]
        ok = z > 1e-9
        hcoord = x @ cam.K.T
        xs = np.where(ok, hcoord[:, 0] / np.where(ok, z, 1.0), 0.0)
        ys = np.where(ok, hcoord[:, 1] / np.where(ok, z, 1.0), 0.0)
        invz = np.where(ok, 1.0 / np.where(ok, z, 1.0), 0.0)
        keep = ok[mesh.triangles].all(axis=1)
        tris = np.ascontiguousarray(mesh.triangles[keep])
        tmap = np.nonzero(keep)[0].astype(np.int32)
        _raster_kernel(np.ascontiguousarray(xs), np.ascontiguousarray(ys),
                       np.ascontiguousarray(invz), tris, h, w, depth, tid)
        valid = tid >= 0
        tid[valid] = tmap[tid[valid]]
    mask = np.isfinite(depth)
    depth[~mask] = 0.0
    return DepthMap(depth.astype(np.float32), mask, tid)


def visible_triangles(mesh, cam):
    """Ids of triangles winning the z-buffer in at least one pixel."""
    dm = rasterize_depth(mesh, cam)
    ids = np.unique(dm.tri_id[dm.mask])
    return set(int(i) for i in ids if i >= 0)


def surface_points(dm, cam):
    """(h,w,3) world-space surface point per valid pixel of a depth map."""
    dirs = cam.pixel_rays_grid()
    pts = cam.C + dirs * dm.depth[..., None].astype(np.float64)
    return pts


def bilinear_sample(img, us, vs):
    """Bilinear sample of an ImageBuffer at pixel coordinates (us, vs).

    Follows the pixel-center convention: image value of pixel (i, j) sits at
    (i + 0.5, j + 0.5).  Returns (values, valid); a sample is valid only if
    all four taps are in bounds and unmasked (conservative masking).
    """
    h, w = img.data.shape
    x = np.asarray(us, np.float64) - 0.5
    y = np.asarray(vs, np.float64) - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    valid = (x0 >= 0) & (y0 >= 0) & (x0 + 1 <= w - 1) & (y0 + 1 <= h - 1)
    x0c = np.clip(x0, 0, w - 2)
    y0c = np.clip(y0, 0, h - 2)
    d = img.data
    m = img.mask
    v00 = d[y0c, x0c]
    v01 = d[y0c, x0c + 1]
    v10 = d[y0c + 1, x0c]
    v11 = d[y0c + 1, x0c + 1]
    vals = ((1 - fy) * ((1 - fx) * v00 + fx * v01)
            + fy * ((1 - fx) * v10 + fx * v11))
    valid &= m[y0c, x0c] & m[y0c, x0c + 1] & m[y0c + 1, x0c] & m[y0c + 1, x0c + 1]
    return vals.astype(np.float32), valid


def reproject(mesh, cam_c, cam_k, image_k, dm_c=None, dm_k=None):
    """Image of camera k warped into camera c's viewpoint through the mesh.

    For each pixel of cam_c: take the nearest mesh point X (z-buffer), project
    X into cam_k, check occlusion against the mesh's own depth in cam_k, and
    bilinearly sample image_k.  Pixels failing any step are masked invalid.
    """
    if dm_c is None:
        dm_c = rasterize_depth(mesh, cam_c)
    if dm_k is None:
        dm_k = rasterize_depth(mesh, cam_k)
    h, w = cam_c.height, cam_c.width
    out = np.zeros((h, w), np.float32)
    valid = dm_c.mask.copy()
    if not valid.any():
        return ImageBuffer(out, valid)

    dirs = cam_c.pixel_rays_grid()[valid]
    zc = dm_c.depth[valid].astype(np.float64)
    vals = np.zeros(len(zc), np.float32)
    ok = np.zeros(len(zc), bool)
    _warp_kernel(dirs, zc, cam_c.C, cam_k.R, cam_k.K, cam_k.C,
                 image_k.data, image_k.mask,
                 np.asarray(dm_k.depth, np.float64), dm_k.mask,
                 OCCLUSION_TOL, vals, ok)
    out[valid] = np.where(ok, vals, 0.0)
    vmask = np.zeros((h, w), bool)
    vmask[valid] = ok
    return ImageBuffer(out, vmask)


def render_textured(mesh, cam, texture):
    """Render the mesh with a world-space texture function.

    `texture` maps an (n,3) array of world points to intensities in [0,1].
    Background pixels are masked invalid.
    """
    dm = rasterize_depth(mesh, cam)
    h, w = cam.height, cam.width
    out = np.zeros((h, w), np.float32)
    if dm.mask.any():
        X = surface_points(dm, cam)[dm.mask]
        out[dm.mask] = np.clip(texture(X), 0.0, 1.0)
    return ImageBuffer(out, dm.mask.copy()), dm


def raycast_depth(mesh, cam):
    """Per-pixel ray-cast depth map (Moeller-Trumbore, used as the oracle
    against the rasterizer in tests; independent of the z-buffer path)."""
    h, w = cam.height, cam.width
    dirs = cam.pixel_rays_grid().reshape(-1, 3)
    V, F = mesh.vertices, mesh.triangles
    best = np.full(dirs.shape[0], np.inf)
    tid = np.full(dirs.shape[0], -1, np.int32)
    for t in range(len(F)):
        v0, v1, v2 = V[F[t, 0]], V[F[t, 1]], V[F[t, 2]]
        e1 = v1 - v0
        e2 = v2 - v0
        p = np.cross(dirs, e2)
        det = p @ e1
        good = np.abs(det) > 1e-300
        inv = np.where(good, 1.0 / np.where(good, det, 1.0), 0.0)
        s = cam.C - v0
        u = (p @ s) * inv
        q = np.cross(s, e1)
        v = (dirs @ q) * inv
        z = (q @ e2) * inv   # parameter along dirs; dirs have unit cam-z
        hit = good & (u >= 0) & (v >= 0) & (u + v <= 1) & (z > 1e-9)
        closer = hit & (z < best)
        best[closer] = z[closer]
        tid[closer] = t
    mask = np.isfinite(best)
    best[~mask] = 0.0
    return DepthMap(best.reshape(h, w).astype(np.float32), mask.reshape(h, w),
                    tid.reshape(h, w))
