"""Outside-set / manifold-surface tests: vertex regularity fixtures, growing
and shrinking, surface extraction, and the full-sweep checker."""

import numpy as np
import pytest

from meshsweep.delaunay import build
from meshsweep.manifold import (ManifoldInvariantError, ManifoldState,
                                seed_initial)
from meshsweep.visibility import RayStore, WeightConfig
from conftest import random_points


def find_cell(tri, input_indices):
    want = {tri.vertex_of_input[i] for i in input_indices}
    for t in tri.live_cells():
        if set(t.verts) == want:
            return t
    raise AssertionError(f"no cell on input points {input_indices}")


def brute_force_surface_ok(ms):
    """Oracle: collect all surface facets globally, then check every edge
    bounds exactly 2 of them and every vertex link is one simple cycle."""
    facets = [t.facet(i) for t, i in ms.iter_surface_facets()]
    edges = {}
    for f in facets:
        for k in range(3):
            e = frozenset((f[k], f[(k + 1) % 3]))
            edges[e] = edges.get(e, 0) + 1
    if any(c != 2 for c in edges.values()):
        return False
    verts = {v for f in facets for v in f}
    for v in verts:
        ring = [(f[(f.index(v) + 1) % 3], f[(f.index(v) + 2) % 3])
                for f in facets if v in f]
        succ = {}
        for a, b in ring:
            if a in succ:
                return False
            succ[a] = b
        if len(succ) != len(ring):
            return False
        start = ring[0][0]
        cur, n = succ[start], 1
        while cur != start:
            if n > len(ring) or cur not in succ:
                return False
            cur = succ[cur]
            n += 1
        if n != len(ring):
            return False
    return True


def test_one_cell_surface():
    tri = build([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
    ms = ManifoldState(tri)
    t = next(iter(tri.finite_cells()))
    assert ms.try_add(t)
    for v in t.verts:
        assert ms.vertex_regular(v)
    mesh = ms.extract_surface()
    assert mesh.n_triangles == 4 and mesh.n_vertices == 4
    assert mesh.signed_volume() > 0
    assert brute_force_surface_ok(ms)
    ms.check_manifold()


def test_two_cells_sharing_vertex_rejected():
    # Two tetrahedra meeting only at the origin: adding the second must be
    # rejected (the shared vertex link would split into two cycles).
    pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
           (-1, 0, 0), (0, -1, 0), (0, 0, -1)]
    tri = build(pts)
    ms = ManifoldState(tri)
    a = find_cell(tri, (0, 1, 2, 3))
    b = find_cell(tri, (0, 4, 5, 6))
    assert ms.try_add(a)
    assert not ms.try_add(b)
    assert not b.outside            # rejection leaves state unchanged
    assert brute_force_surface_ok(ms)


def test_two_cells_sharing_face_accepted(rng):
    pts = random_points(rng, 12)
    tri = build(pts)
    ms = ManifoldState(tri)
    t = next(iter(tri.finite_cells()))
    assert ms.try_add(t)
    n = next(n for n in t.neighbors if not n.infinite)
    assert ms.try_add(n)
    assert brute_force_surface_ok(ms)
    mesh = ms.extract_surface()
    assert mesh.n_triangles == 6    # two tetras glued on a face


def test_try_remove_inverse(rng):
    pts = random_points(rng, 10)
    tri = build(pts)
    ms = ManifoldState(tri)
    t = next(iter(tri.finite_cells()))
    ms.try_add(t)
    assert ms.try_remove(t)
    assert ms.size == 0
    assert ms.extract_surface().n_triangles == 0


def test_grow_all_free_covers_hull(rng):
    """With uniform high weight, growing fills (almost) everything and the
    surface stays manifold throughout."""
    pts = random_points(rng, 25)
    tri = build(pts)
    for t in tri.live_cells():
        t.weight = 10.0
    ms = ManifoldState(tri)
    ms.grow(WeightConfig(), seed_initial(tri))
    assert ms.size > 0
    ms.check_manifold()
    assert brute_force_surface_ok(ms)


def test_grow_respects_threshold(rng):
    pts = random_points(rng, 15)
    tri = build(pts)
    ms = ManifoldState(tri)
    ms.grow(WeightConfig(), seed_initial(tri))   # all weights 0
    assert ms.size == 0
    assert ms.extract_surface().n_triangles == 0


def test_shrink_removes_low_weight_first(rng):
    pts = random_points(rng, 15)
    tri = build(pts)
    for t in tri.live_cells():
        t.weight = 10.0
    ms = ManifoldState(tri)
    ms.grow(WeightConfig(), seed_initial(tri))
    before = ms.size
    target = [t for t in tri.live_cells() if t.outside][:3]
    ms.shrink(target)
    assert ms.size <= before
    ms.check_manifold()
    assert brute_force_surface_ok(ms)


def test_shrink_last_cell():
    tri = build([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
    ms = ManifoldState(tri)
    t = next(iter(tri.finite_cells()))
    ms.try_add(t)
    ms.shrink([t])
    assert ms.size == 0


def test_surface_oriented_outward(rng):
    pts = random_points(rng, 20)
    tri = build(pts)
    for t in tri.finite_cells():
        t.weight = 10.0
    ms = ManifoldState(tri)
    ms.grow(WeightConfig(), seed_initial(tri))
    mesh = ms.extract_surface()
    if mesh.n_triangles:
        # Outward orientation: positive enclosed volume.
        assert mesh.signed_volume() > 0


def test_cannot_absorb_entire_triangulation(rng):
    """O must stay a strict subset; a surface always remains."""
    pts = random_points(rng, 8)
    tri = build(pts)
    for t in tri.live_cells():
        t.weight = 100.0
    ms = ManifoldState(tri)
    ms.grow(WeightConfig(), seed_initial(tri))
    n_live = len(list(tri.live_cells()))
    assert 0 < ms.size < n_live
    assert len(list(ms.iter_surface_facets())) > 0


def test_check_manifold_detects_corruption(rng):
    pts = random_points(rng, 12)
    tri = build(pts)
    ms = ManifoldState(tri)
    a = find_cell_pair_sharing_vertex_only(tri)
    if a is None:
        pytest.skip("no vertex-only pair in this triangulation")
    c1, c2 = a
    c1.outside = True
    c2.outside = True
    ms.size = 2
    with pytest.raises(ManifoldInvariantError):
        ms.check_manifold()


def find_cell_pair_sharing_vertex_only(tri):
    cells = list(tri.finite_cells())
    for i, a in enumerate(cells):
        for b in cells[i + 1:]:
            if len(set(a.verts) & set(b.verts)) == 1:
                return a, b
    return None


def test_boundary_adjacent_cells(rng):
    pts = random_points(rng, 15)
    tri = build(pts)
    for t in tri.live_cells():
        t.weight = 10.0
    ms = ManifoldState(tri)
    ms.grow(WeightConfig(), seed_initial(tri))
    adj = ms.boundary_adjacent_cells()
    surface_verts = {v for t, i in ms.iter_surface_facets()
                     for v in t.facet(i)}
    for t in adj:
        assert not t.outside
        assert set(t.verts) & surface_verts
