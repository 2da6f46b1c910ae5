"""Command-line interface: scene synthesis, reconstruction, evaluation and
mesh checking.

Exit codes: 0 success, 1 runtime failure, 2 usage/input error, 3 internal
invariant violation.
"""

import json
import os
import sys

import click
import numpy as np

from . import fileio
from .delaunay import DegenerateInput
from .evaluate import compare_depth
from .manifold import ManifoldInvariantError
from .pipeline import PipelineConfig
from .render import TriangleMesh
from .scenes import SceneError, generate_pyramid, load_scene, save_scene
from .sweep import SweepConfig
from .visibility import WeightConfig

EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INVARIANT = 3


def _fail(code, msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Manifold surface reconstruction from sparse points with mesh-sweeping
    refinement."""


@main.command()
@click.option("--variant", type=click.Choice(["downward", "upward"]),
              default="downward", show_default=True)
@click.option("--cameras", default=12, show_default=True)
@click.option("--width", default=640, show_default=True)
@click.option("--height", default=480, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth(variant, cameras, width, height, seed, out):
    """Generate a synthetic pyramid scene (images, scene.json, ground
    truth)."""
    if cameras < 3:
        _fail(EXIT_USAGE, "need at least 3 cameras")
    try:
        scene = generate_pyramid(variant, cameras, width, height, seed)
        save_scene(scene, out)
    except OSError as e:
        _fail(EXIT_RUNTIME, str(e))
    click.echo(f"wrote scene with {cameras} cameras to {out}")


def _param_options(f):
    opts = [
        click.option("--w1", default=4.0, show_default=True,
                     help="Weight added to ray-crossed cells (default from "
                          "the reference constants)."),
        click.option("--w2", default=0.5, show_default=True,
                     help="Weight added to their neighbors."),
        click.option("--t-w", default=4.0, show_default=True,
                     help="Free-space weight threshold (strict)."),
        click.option("--alpha", default=0.03, show_default=True,
                     help="Sweep step in meters."),
        click.option("--sweeps", "n_sweeps", default=20, show_default=True,
                     help="Number of sweep steps N (N+1 offset meshes)."),
        click.option("--sigma", default=8.0, show_default=True,
                     help="Gaussian NCC kernel sigma in pixels."),
        click.option("--t-ncc", default=0.98, show_default=True,
                     help="NCC acceptance threshold."),
        click.option("--tile", default=100, show_default=True,
                     help="Extraction tile size in pixels."),
        click.option("--it-max", default=15, show_default=True,
                     help="Maximum refinement iterations."),
        click.option("--min-new-points", default=10, show_default=True),
        click.option("--threads", default=None, type=int,
                     help="Worker threads for the sweep phase "
                          "(default: hardware parallelism)."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path())
@click.option("--dump-diagnostics", "diag_dir", type=click.Path())
@_param_options
def reconstruct(scene_path, out, report_path, diag_dir, w1, w2, t_w, alpha,
                n_sweeps, sigma, t_ncc, tile, it_max, min_new_points,
                threads):
    """Reconstruct a manifold mesh from a scene file."""
    try:
        scene = load_scene(scene_path)
    except SceneError as e:
        _fail(EXIT_USAGE, str(e))
    try:
        cfg = PipelineConfig(
            it_max=it_max, min_new_points=min_new_points, threads=threads,
            weight=WeightConfig(w1=w1, w2=w2, t_w=t_w),
            sweep=SweepConfig(alpha=alpha, N=n_sweeps, sigma=sigma,
                              t_ncc=t_ncc, tile=tile))
    except ValueError as e:
        _fail(EXIT_USAGE, str(e))
    from . import pipeline as pl
    try:
        if diag_dir:
            os.makedirs(diag_dir, exist_ok=True)
        state = pl.bootstrap(scene, cfg)
        iterations = []
        converged = False
        for it in range(cfg.it_max):
            rep = pl.iterate(state, cfg)
            iterations.append(rep)
            if diag_dir:
                fileio.save_ply(
                    os.path.join(diag_dir, f"iter{it:02d}.ply"),
                    state.manifold.extract_surface())
            if rep["accepted"] < cfg.min_new_points:
                converged = True
                break
        mesh = state.manifold.extract_surface()
        state.manifold.check_manifold()
    except DegenerateInput as e:
        _fail(EXIT_USAGE, str(e))
    except ManifoldInvariantError as e:
        _fail(EXIT_INVARIANT, f"internal invariant violated: {e}")
    except OSError as e:
        _fail(EXIT_RUNTIME, str(e))
    fileio.save_ply(out, mesh)
    problems = mesh_manifold_problems(mesh)
    if problems:
        # The label boundary is manifold, but where it runs through the
        # triangulation's unbounded cells the materialized mesh keeps
        # boundary edges along the outer hull.
        click.echo(f"warning: written mesh has {len(problems)} boundary/"
                   "irregular elements along the outer hull", err=True)
    report = {"iterations": iterations, "converged": converged,
              "boundary_elements": len(problems),
              "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles}
    if report_path:
        with open(report_path, "w") as f:
            json.dump(report, f, indent=1)
    click.echo(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles "
               f"after {len(iterations)} iterations -> {out}")


@main.command()
@click.option("--mesh", "mesh_path", required=True, type=click.Path())
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--view", default=0, show_default=True,
              help="Camera index to evaluate from.")
@click.option("--sigma", default=0.06, show_default=True,
              help="Cumulative-error bucket size in meters.")
@click.option("--out", "out_path", type=click.Path())
def evaluate(mesh_path, scene_path, view, sigma, out_path):
    """Compare a mesh against the scene's ground-truth depth."""
    try:
        scene = load_scene(scene_path)
        mesh = fileio.load_ply(mesh_path)
    except (SceneError, OSError, ValueError) as e:
        _fail(EXIT_USAGE, str(e))
    if not 0 <= view < scene.n_cameras:
        _fail(EXIT_USAGE, f"view index {view} out of range "
                          f"(scene has {scene.n_cameras} cameras)")
    try:
        gt = scene.gt_depth(view)
    except SceneError as e:
        _fail(EXIT_USAGE, str(e))
    report = compare_depth(mesh, gt, scene.cameras[view], sigma_eval=sigma)
    text = report.to_json(indent=1)
    click.echo(text)
    if out_path:
        with open(out_path, "w") as f:
            f.write(text + "\n")


@main.command("check-mesh")
@click.argument("mesh_path", type=click.Path())
def check_mesh(mesh_path):
    """Verify that a PLY mesh is a closed, consistently oriented
    2-manifold."""
    try:
        mesh = fileio.load_ply(mesh_path)
    except (OSError, ValueError) as e:
        _fail(EXIT_USAGE, str(e))
    problems = mesh_manifold_problems(mesh)
    if problems:
        for p in problems:
            click.echo(p, err=True)
        sys.exit(1)
    click.echo("manifold: OK")


def mesh_manifold_problems(mesh):
    """List of human-readable manifold violations; empty iff the mesh is a
    closed, consistently oriented 2-manifold with every vertex regular."""
    problems = []
    edges = {}
    for t, (a, b, c) in enumerate(np.asarray(mesh.triangles)):
        for u, v in ((a, b), (b, c), (c, a)):
            edges.setdefault((min(u, v), max(u, v)), []).append((int(u),
                                                                 int(v)))
    for (u, v), uses in edges.items():
        if len(uses) != 2:
            problems.append(f"edge ({u},{v}) bounds {len(uses)} faces, "
                            "expected 2")
        elif uses[0] == uses[1]:
            problems.append(f"edge ({u},{v}) traversed twice in the same "
                            "direction (inconsistent orientation)")
    if problems:
        return problems
    # Vertex regularity: the edges opposite each vertex must form one cycle.
    star = {}
    for a, b, c in np.asarray(mesh.triangles):
        star.setdefault(int(a), []).append((int(b), int(c)))
        star.setdefault(int(b), []).append((int(c), int(a)))
        star.setdefault(int(c), []).append((int(a), int(b)))
    for v, opp in star.items():
        nxt = dict(opp)
        if len(nxt) != len(opp):
            problems.append(f"vertex {v} is not regular")
            continue
        start = opp[0][0]
        cur = nxt.get(start)
        n = 1
        while cur is not None and cur != start and n <= len(opp):
            cur = nxt.get(cur)
            n += 1
        if cur != start or n != len(opp):
            problems.append(f"vertex {v} is not regular")
    return problems


if __name__ == "__main__":
    main()
