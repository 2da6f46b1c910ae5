"""Scene ingestion (cameras + images + sparse points + visibility) and the
synthetic pyramid generator used by the test rig.

Scene file schema (JSON, paths relative to the file):
  { "cameras": [ { "K": [9 reals], "R": [9 reals], "C": [3 reals],
                   "image": "path.png", "width": int, "height": int } ],
    "points":  [ { "xyz": [3 reals], "cams": [int, ...] } ],
    "ground_truth_mesh": "path.ply" (optional) }
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraView, look_at
from .render import TriangleMesh, rasterize_depth, render_textured
from . import fileio

DOWNWARD = "downward"
UPWARD = "upward"

# Base corners get alternating sub-micron z offsets so the four seed points
# are affinely independent (the triangulation rejects a fully flat start)
# while staying inside the 1e-6 m base-plane band the bootstrap promises.
CORNER_Z_JITTER = 5e-7


class SceneError(ValueError):
    """Scene file failed to parse or violated an invariant."""


@dataclass
class Scene:
    cameras: list
    points: np.ndarray                 # (n, 3) float64
    visibility: list                   # per point: list of camera indices
    gt_mesh: TriangleMesh = None
    _gt_depths: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, np.float64).reshape(-1, 3)
        if len(self.visibility) != len(self.points):
            raise SceneError("visibility list length != point count")
        for i, cams in enumerate(self.visibility):
            for c in cams:
                if not 0 <= c < len(self.cameras):
                    raise SceneError(
                        f"points[{i}]: camera index {c} out of range "
                        f"(have {len(self.cameras)} cameras)")

    @property
    def n_cameras(self):
        return len(self.cameras)

    def gt_depth(self, cam_index):
        """Ground-truth depth map for a camera, rendered from gt_mesh
        (cached)."""
        if self.gt_mesh is None:
            raise SceneError("scene has no ground-truth mesh")
        if cam_index not in self._gt_depths:
            self._gt_depths[cam_index] = rasterize_depth(
                self.gt_mesh, self.cameras[cam_index])
        return self._gt_depths[cam_index]


def load_scene(path):
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise SceneError(f"{path}: cannot read scene file: {e}") from e
    except json.JSONDecodeError as e:
        raise SceneError(f"{path}: invalid JSON: {e}") from e

    cams = []
    for i, c in enumerate(doc.get("cameras", [])):
        where = f"{path}: cameras[{i}]"
        try:
            img_path = os.path.join(base, c["image"])
            img = fileio.load_image(img_path)
            cam = CameraView(np.array(c["K"], float).reshape(3, 3),
                             np.array(c["R"], float).reshape(3, 3),
                             np.array(c["C"], float),
                             int(c["width"]), int(c["height"]), image=img)
        except KeyError as e:
            raise SceneError(f"{where}: missing field {e}") from e
        except (OSError, ValueError) as e:
            raise SceneError(f"{where}: {e}") from e
        if img.data.shape != (cam.height, cam.width):
            raise SceneError(
                f"{where}: image {c['image']} is {img.data.shape[1]}x"
                f"{img.data.shape[0]}, camera declares "
                f"{cam.width}x{cam.height}")
        cams.append(cam)
    if len(cams) < 3:
        raise SceneError(f"{path}: need at least 3 cameras, got {len(cams)}")

    pts, vis = [], []
    for i, p in enumerate(doc.get("points", [])):
        try:
            pts.append([float(x) for x in p["xyz"]])
            vis.append([int(c) for c in p["cams"]])
        except (KeyError, TypeError, ValueError) as e:
            raise SceneError(f"{path}: points[{i}]: {e}") from e

    gt = None
    if doc.get("ground_truth_mesh"):
        gt = fileio.load_ply(os.path.join(base, doc["ground_truth_mesh"]))

    try:
        return Scene(cams, np.array(pts, float).reshape(-1, 3), vis, gt)
    except SceneError as e:
        raise SceneError(f"{path}: {e}") from e


def save_scene(scene, out_dir, write_gt_depth=True):
    """Write scene.json plus images, ground-truth PLY and depth PFMs into
    out_dir; returns the scene.json path."""
    os.makedirs(out_dir, exist_ok=True)
    doc = {"cameras": [], "points": []}
    for i, cam in enumerate(scene.cameras):
        name = f"cam{i:03d}.png"
        fileio.save_image(os.path.join(out_dir, name), cam.image)
        doc["cameras"].append({
            "K": [float(x) for x in cam.K.ravel()],
            "R": [float(x) for x in cam.R.ravel()],
            "C": [float(x) for x in cam.C],
            "image": name, "width": cam.width, "height": cam.height,
        })
    for xyz, cams in zip(scene.points, scene.visibility):
        doc["points"].append({"xyz": [float(x) for x in xyz],
                              "cams": [int(c) for c in cams]})
    if scene.gt_mesh is not None:
        fileio.save_ply(os.path.join(out_dir, "gt.ply"), scene.gt_mesh)
        doc["ground_truth_mesh"] = "gt.ply"
        if write_gt_depth:
            for i in range(scene.n_cameras):
                dm = scene.gt_depth(i)
                fileio.save_pfm(os.path.join(out_dir, f"cam{i:03d}_gt.pfm"),
                                dm.depth, dm.mask)
    out = os.path.join(out_dir, "scene.json")
    with open(out, "w") as f:
        json.dump(doc, f, indent=1)
    return out


# ---------------------------------------------------------------------------
# Synthetic pyramid scenes


class ValueNoise:
    """Seeded 3D value noise: random values on an integer lattice, smoothstep
    trilinear interpolation, summed over a few octaves.  Evaluated in world
    space so every camera sees the same surface pattern."""

    def __init__(self, seed, scale=0.03, octaves=3):
        self.scale = scale
        self.octaves = octaves
        rng = np.random.default_rng(seed)
        self.perm = rng.permutation(1024).astype(np.int64)

    def _lattice(self, ix, iy, iz):
        p = self.perm
        h = p[(ix + p[(iy + p[iz & 1023]) & 1023]) & 1023]
        return h / 1023.0

    def _octave(self, q):
        i = np.floor(q).astype(np.int64)
        f = q - i
        f = f * f * (3.0 - 2.0 * f)
        acc = np.zeros(q.shape[:-1])
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    v = self._lattice(i[..., 0] + dx, i[..., 1] + dy,
                                      i[..., 2] + dz)
                    w = (np.where(dx, f[..., 0], 1 - f[..., 0])
                         * np.where(dy, f[..., 1], 1 - f[..., 1])
                         * np.where(dz, f[..., 2], 1 - f[..., 2]))
                    acc += w * v
        return acc

    def __call__(self, pts):
        pts = np.asarray(pts, np.float64)
        out = np.zeros(pts.shape[:-1])
        amp, freq, norm = 1.0, 1.0 / self.scale, 0.0
        for _ in range(self.octaves):
            out += amp * self._octave(pts * freq)
            norm += amp
            amp *= 0.5
            freq *= 2.0
        out /= norm
        # Stretch toward full [0, 1] range: NCC needs contrast.
        lo, hi = 0.25, 0.75
        return np.clip((out - lo) / (hi - lo), 0.0, 1.0)


def pyramid_mesh(variant):
    """Four lateral triangles of a 2x2 m base, 0.3 m tall pyramid; no base
    facet.  DOWNWARD puts the apex below the base plane (away from the
    cameras on the +z side), UPWARD toward them."""
    if variant not in (DOWNWARD, UPWARD):
        raise ValueError(f"unknown pyramid variant {variant!r}")
    apex_z = -0.3 if variant == DOWNWARD else 0.3
    verts = np.array([
        [-1.0, -1.0, CORNER_Z_JITTER],
        [+1.0, -1.0, -CORNER_Z_JITTER],
        [+1.0, +1.0, CORNER_Z_JITTER],
        [-1.0, +1.0, -CORNER_Z_JITTER],
        [0.0, 0.0, apex_z],
    ])
    # Wound so normals face the cameras (+z side) for both variants: the
    # same base-edge order works whether the apex is above or below.
    tris = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]], np.int32)
    return TriangleMesh(verts, tris)


def arc_cameras(n_cameras, width, height, focal=500.0, radius=3.0,
                arc_deg=60.0, elevation_deg=55.0):
    """Cameras spread over a horizontal arc on the +z side, all looking at
    the origin."""
    cams = []
    az = (np.linspace(-arc_deg / 2, arc_deg / 2, n_cameras)
          if n_cameras > 1 else np.array([0.0]))
    el = np.radians(elevation_deg)
    K = np.array([[focal, 0.0, width / 2.0],
                  [0.0, focal, height / 2.0],
                  [0.0, 0.0, 1.0]])
    for a in np.radians(az):
        C = radius * np.array([np.cos(el) * np.cos(a),
                               np.cos(el) * np.sin(a),
                               np.sin(el)])
        cams.append(CameraView(K, look_at(C, np.zeros(3)), C, width, height))
    return cams


def generate_pyramid(variant, n_cameras=12, width=640, height=480, seed=0):
    """Synthetic pyramid scene: textured images rendered from the
    ground-truth mesh, SfM points = the 4 base corners visible everywhere."""
    if n_cameras < 3:
        raise SceneError(f"need at least 3 cameras, got {n_cameras}")
    mesh = pyramid_mesh(variant)
    cams = arc_cameras(n_cameras, width, height)
    texture = ValueNoise(seed)
    for cam in cams:
        img, _ = render_textured(mesh, cam, texture)
        # Quantize to 8 bits so in-memory and round-tripped scenes match.
        q = np.round(np.clip(img.data, 0, 1) * 255.0) / np.float32(255.0)
        img.data = np.where(img.mask, q, 0.0).astype(np.float32)
        cam.image = img
    corners = mesh.vertices[:4]
    vis = [list(range(n_cameras)) for _ in range(4)]
    return Scene(cams, corners.copy(), vis, gt_mesh=mesh)
