"""Guaranteed-manifold surface reconstruction from sparse 3D points with
camera visibility, refined by mesh-sweeping photometric matching."""

from .camera import CameraView, ImageBuffer, look_at
from .delaunay import (DegenerateInput, DuplicatePoint, INFINITE,
                       Triangulation, build)
from .evaluate import ErrorReport, compare_depth
from .manifold import ManifoldInvariantError, ManifoldState, seed_initial
from .pipeline import PipelineConfig, PipelineState, bootstrap, iterate, run
from .render import (DepthMap, TriangleMesh, rasterize_depth, raycast_depth,
                     render_textured, reproject, visible_triangles)
from .scenes import (Scene, SceneError, generate_pyramid, load_scene,
                     save_scene)
from .sweep import (MatchPoint, SweepConfig, SweptMeshFamily, extract_points,
                    ncc_image, nearest_cameras, sweep_facets)
from .visibility import RayStore, WeightConfig, is_free, trace

__version__ = "0.1.0"

__all__ = [
    "CameraView", "ImageBuffer", "look_at",
    "DegenerateInput", "DuplicatePoint", "INFINITE", "Triangulation", "build",
    "ErrorReport", "compare_depth",
    "ManifoldInvariantError", "ManifoldState", "seed_initial",
    "PipelineConfig", "PipelineState", "bootstrap", "iterate", "run",
    "DepthMap", "TriangleMesh", "rasterize_depth", "raycast_depth",
    "render_textured", "reproject", "visible_triangles",
    "Scene", "SceneError", "generate_pyramid", "load_scene", "save_scene",
    "MatchPoint", "SweepConfig", "SweptMeshFamily", "extract_points",
    "ncc_image", "nearest_cameras", "sweep_facets",
    "RayStore", "WeightConfig", "is_free", "trace",
]
