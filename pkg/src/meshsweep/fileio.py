"""File formats: ASCII PLY meshes, PFM float rasters, PNG/PGM images."""

import numpy as np
import cv2

from .camera import ImageBuffer
from .render import TriangleMesh


def save_ply(path, mesh):
    V, F = mesh.vertices, mesh.triangles
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(V)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write(f"element face {len(F)}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for v in V:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in F:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def load_ply(path):
    with open(path, "r") as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n_vert = n_face = None
        elements = []  # (name, count) in declaration order
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise ValueError(f"{path}: only ASCII PLY supported")
            if tok[0] == "element":
                elements.append((tok[1], int(tok[2])))
            if tok[0] == "end_header":
                break
        counts = dict(elements)
        n_vert = counts.get("vertex", 0)
        n_face = counts.get("face", 0)
        V = np.zeros((n_vert, 3))
        for i in range(n_vert):
            parts = fh.readline().split()
            V[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        F = np.zeros((n_face, 3), np.int32)
        for i in range(n_face):
            parts = fh.readline().split()
            if int(parts[0]) != 3:
                raise ValueError(f"{path}: non-triangle face")
            F[i] = [int(parts[1]), int(parts[2]), int(parts[3])]
    return TriangleMesh(V, F)


def save_pfm(path, data, mask=None):
    """Grayscale PFM, little-endian (negative scale).  Invalid pixels are
    written as 0; PFM rows run bottom-to-top."""
    arr = np.asarray(data, np.float32)
    if mask is not None:
        arr = np.where(mask, arr, np.float32(0.0))
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(arr[::-1].astype("<f4").tobytes())


def load_pfm(path):
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM")
        w, h = map(int, fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(w * h * 4), dtype).reshape(h, w)
    return np.ascontiguousarray(data[::-1]).astype(np.float32)


def save_image(path, img):
    """8-bit grayscale PNG or PGM from an ImageBuffer."""
    arr = np.clip(np.asarray(img.data, np.float32), 0.0, 1.0)
    cv2.imwrite(str(path), np.round(arr * 255.0).astype(np.uint8))


def load_image(path):
    """Load PNG/PGM as grayscale luminance in [0, 1], fully valid mask."""
    arr = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if arr is None:
        raise FileNotFoundError(f"cannot read image: {path}")
    return ImageBuffer(arr.astype(np.float32) / 255.0)
