"""Orchestration: bootstrap (sparse points -> first manifold) and the
iteration loop sweep -> point filtering -> incremental insertion until
convergence."""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import delaunay
from .delaunay import DegenerateInput, DuplicatePoint
from .manifold import ManifoldState, seed_initial
from .sweep import SweepConfig, sweep_facets, extract_points, nearest_cameras
from .visibility import RayStore, WeightConfig, mark_blind


@dataclass
class PipelineConfig:
    it_max: int = 15
    min_new_points: int = 10
    dedup_radius: float = None     # defaults to alpha / 2
    weight: WeightConfig = field(default_factory=WeightConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    threads: int = None

    def __post_init__(self):
        if self.it_max < 1:
            raise ValueError("it_max must be >= 1")
        if self.dedup_radius is None:
            self.dedup_radius = self.sweep.alpha / 2.0
        if self.dedup_radius <= 0:
            raise ValueError("dedup_radius must be positive")
        if self.threads is None:
            self.threads = os.cpu_count() or 1


class PipelineState:
    """Triangulation + rays + outside-set labels for one reconstruction."""

    def __init__(self, scene, tri, rays, manifold):
        self.scene = scene
        self.tri = tri
        self.rays = rays
        self.manifold = manifold


def bootstrap(scene, cfg=None):
    """Build the triangulation of the scene points, trace every visibility
    ray, and grow the first manifold from the max-weight cell."""
    cfg = cfg or PipelineConfig()
    if scene.n_cameras < 3:
        raise DegenerateInput(
            f"need at least 3 cameras, got {scene.n_cameras}")
    tri = delaunay.build(scene.points)
    rays = RayStore(tri, cfg.weight)
    for pidx, cams in enumerate(scene.visibility):
        vid = tri.vertex_of_input[pidx]
        for c in cams:
            rays.add_ray(c, vid, scene.cameras[c].C)
    ms = ManifoldState(tri)
    mark_blind(tri, [c.C for c in scene.cameras])
    ms.grow(cfg.weight, seed_initial(tri))
    _absorb_unbounded(ms)
    ms.check_manifold()
    return PipelineState(scene, tri, rays, ms)


def _dedup(candidates, existing, radius):
    """Greedy filter: drop points within `radius` of an existing vertex or
    of an already-kept, higher-NCC candidate.  Returns (kept, n_dropped)."""
    order = sorted(candidates, key=lambda m: -m.ncc)
    existing = np.asarray(existing, float).reshape(-1, 3)
    kept = []
    dropped = 0
    r2 = radius * radius
    for m in order:
        p = m.position
        near = np.sum((existing - p) ** 2, axis=1).min() < r2 \
            if len(existing) else False
        if not near:
            for k in kept:
                if np.sum((k.position - p) ** 2) < r2:
                    near = True
                    break
        if near:
            dropped += 1
        else:
            kept.append(m)
    return kept, dropped


def _one_ring(tri, cells):
    """cells plus every cell sharing at least one vertex with them."""
    out = {t.id: t for t in cells}
    verts = set()
    for t in cells:
        verts.update(v for v in t.verts if v != delaunay.INFINITE)
    for v in verts:
        for t in tri.incident_or_all(v):
            out.setdefault(t.id, t)
    return list(out.values())


def _absorb_unbounded(ms):
    """Fold the remaining unbounded cells into O where that is
    manifold-safe.

    Every observed point is a triangulation vertex, so the unbounded cells
    beyond the hull contain no scene matter; labeling them outside closes
    the extracted surface along the hull instead of leaving boundary edges
    where it would otherwise run through infinite facets.  Single adds can
    deadlock pairwise (each flip alone pinches a vertex that the partner
    flip repairs), so stuck cells are retried jointly with each unbounded
    neighbor.  Cells that still cannot be absorbed stay inside, so the
    materialized mesh may keep boundary edges along the outer hull.
    Skipped while O is empty (no evidence, no surface)."""
    if ms.size == 0:
        return
    changed = True
    while changed:
        changed = False
        for t in ms.tri.live_cells():
            if t.infinite and not t.outside and ms.try_add(t):
                changed = True
        if changed:
            continue
        for t in ms.tri.live_cells():
            if not t.infinite or t.outside:
                continue
            for n in t.neighbors:
                if n.infinite and not n.outside and n.alive \
                        and ms.try_add_pair(t, n):
                    changed = True
                    break


def iterate(state, cfg):
    """One cycle: extract surface, sweep every camera, filter the matched
    points, insert the survivors (shrink / insert / retrace), re-grow."""
    scene, tri, ms = state.scene, state.tri, state.manifold

    t0 = time.perf_counter()
    mesh = ms.extract_surface()
    proposed = []
    if mesh.n_triangles:
        def work(i):
            fam = sweep_facets(mesh, scene.cameras[i], cfg.sweep, i)
            return extract_points(scene, fam, cfg.sweep,
                                  neighbors=nearest_cameras(scene, i, 2))
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            # Merge in camera order: results independent of thread timing.
            for pts in ex.map(work, range(scene.n_cameras)):
                proposed.extend(pts)
    t1 = time.perf_counter()

    kept, n_dup = _dedup(proposed, tri.points, cfg.dedup_radius)
    accepted = 0
    n_conflict = 0
    for m in kept:
        try:
            region = tri.conflict_region(m.position)
        except DuplicatePoint:
            n_dup += 1
            continue
        ms.shrink(_one_ring(tri, region))
        if any(t.outside for t in region):
            n_conflict += 1
            continue
        vid, destroyed, _ = tri.insert(m.position, conflict=region)
        state.rays.retrace_after_insert(destroyed)
        for c in (m.camera, m.neighbor):
            state.rays.add_ray(c, vid, scene.cameras[c].C)
        accepted += 1
    seeds = ms.boundary_adjacent_cells()
    if not seeds:
        # Shrinking may have emptied O entirely; restart growth from the
        # global max-weight cell as in the bootstrap.
        seeds = seed_initial(tri)
    mark_blind(tri, [c.C for c in scene.cameras])
    ms.grow(cfg.weight, seeds)
    _absorb_unbounded(ms)
    ms.check_manifold()
    t2 = time.perf_counter()

    return {
        "proposed": len(proposed),
        "accepted": accepted,
        "discarded_conflict": n_conflict,
        "discarded_duplicate": n_dup,
        "vertices": len(tri.points),
        "surface_triangles": ms.extract_surface().n_triangles,
        "seconds_sweep": t1 - t0,
        "seconds_reconstruction": t2 - t1,
    }


def run(scene, cfg=None):
    """Full reconstruction: bootstrap, then iterate until fewer than
    min_new_points are accepted or it_max is reached.

    Returns (final TriangleMesh, run report dict, PipelineState).
    """
    cfg = cfg or PipelineConfig()
    state = bootstrap(scene, cfg)
    iterations = []
    converged = False
    for _ in range(cfg.it_max):
        rep = iterate(state, cfg)
        iterations.append(rep)
        if rep["accepted"] < cfg.min_new_points:
            converged = True
            break
    mesh = state.manifold.extract_surface()
    report = {
        "iterations": iterations,
        "converged": converged,
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
    }
    return mesh, report, state
