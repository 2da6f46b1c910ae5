"""Depth-map comparison of a reconstructed mesh against ground truth:
MAE / MRE / RMS over pixels valid in both maps, plus the cumulative
fraction of ground-truth pixels with error below m * sigma_eval."""

import json
import math
from dataclasses import dataclass

import numpy as np

from .render import rasterize_depth

SIGMA_EVAL = 0.06  # meters


@dataclass
class ErrorReport:
    mae: float           # meters; NaN when no pixel is valid in both maps
    mre: float           # dimensionless
    rms: float           # meters
    cumulative: list     # fraction with error < m*sigma, m in 1..10
    valid_fraction: float
    n_vertices: int
    n_triangles: int

    def __post_init__(self):
        c = self.cumulative
        assert len(c) == 10 and all(0 <= x <= 1 for x in c)
        assert all(a <= b + 1e-12 for a, b in zip(c, c[1:]))
        if not math.isnan(self.mae):
            assert self.rms >= self.mae - 1e-12  # power-mean inequality

    @property
    def defined(self):
        return not math.isnan(self.mae)

    def to_dict(self):
        return {
            "mae": None if math.isnan(self.mae) else self.mae,
            "mre": None if math.isnan(self.mre) else self.mre,
            "rms": None if math.isnan(self.rms) else self.rms,
            "cumulative": list(self.cumulative),
            "valid_fraction": self.valid_fraction,
            "n_vertices": self.n_vertices,
            "n_triangles": self.n_triangles,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def compare_depth(mesh, gt_depth, cam, sigma_eval=SIGMA_EVAL):
    """Render `mesh` from `cam` and compare with the ground-truth depth map.

    MAE/MRE/RMS are means over pixels valid in both maps.  cumulative_m is
    the fraction of ground-truth-valid pixels with |d - d_gt| < m*sigma_eval;
    pixels the reconstruction misses count as failures there.
    """
    if gt_depth.depth.shape != (cam.height, cam.width):
        raise ValueError("ground-truth depth dimensions do not match camera")
    dm = rasterize_depth(mesh, cam)
    return compare_depth_maps(dm, gt_depth, sigma_eval,
                              n_vertices=mesh.n_vertices,
                              n_triangles=mesh.n_triangles)


def compare_depth_maps(dm, gt_depth, sigma_eval=SIGMA_EVAL,
                       n_vertices=0, n_triangles=0):
    both = dm.mask & gt_depth.mask
    n_gt = int(gt_depth.mask.sum())
    n_both = int(both.sum())

    if n_both == 0:
        nan = float("nan")
        return ErrorReport(nan, nan, nan, [0.0] * 10, 0.0,
                           n_vertices, n_triangles)

    e = np.abs(dm.depth[both].astype(np.float64)
               - gt_depth.depth[both].astype(np.float64))
    mae = float(e.mean())
    mre = float((e / gt_depth.depth[both]).mean())
    rms = float(np.sqrt((e * e).mean()))
    cumulative = [float((e < m * sigma_eval).sum() / n_gt)
                  for m in range(1, 11)]
    return ErrorReport(mae, mre, rms, cumulative,
                       n_both / n_gt if n_gt else 0.0,
                       n_vertices, n_triangles)
