"""Camera-to-point ray tracing through the triangulation and tetrahedron
weighting.

Each viewing ray adds w1 to every traversed cell and w2 (once per ray) to
face neighbors of traversed cells.  A cell belongs to free space when its
accumulated weight strictly exceeds t_w.

Traversal definition.  A finite cell is traversed when the open segment
(camera, point) intersects its interior.  An infinite cell is traversed
when the segment crosses the interior of its hull facet, plus the
deterministically chosen incident infinite cell when the segment leaves the
endpoint vertex directly into the hull exterior.  Degenerate passes through
facets/edges are resolved by deterministic tie-breaks (lowest cell id,
first facet in index order), so tracing always terminates; a visited-set
guard falls back to a direct per-cell membership scan.
"""

from dataclasses import dataclass

import numpy as np

from .delaunay import INFINITE
from .predicates import orient3d


@dataclass
class WeightConfig:
    w1: float = 4.0      # weight added to traversed cells
    w2: float = 0.5      # weight added to their face neighbors
    t_w: float = 4.0     # free-space threshold (strict)

    def __post_init__(self):
        if not (self.w1 > self.w2 > 0):
            raise ValueError("need w1 > w2 > 0")
        if self.t_w <= 0:
            raise ValueError("t_w must be positive")


def is_free(cell, cfg):
    """Strict free-space test: weight > t_w."""
    return cell.weight > cfg.t_w


def mark_blind(tri, centers):
    """Flag unbounded cells no camera center can look into.

    An unbounded cell lies beyond one hull facet.  When every camera sits
    on the inner side of that facet's plane, nothing can ever observe the
    region as free space, so the cell must stay inside O's complement; the
    flag bars it from O during growing.  Called before each growing pass
    because hull facets change as points are inserted."""
    pts = tri.points
    for t in tri.live_cells():
        if not t.infinite:
            continue
        f = t.facet(t.inf_index())
        a, b, c = pts[f[0]], pts[f[1]], pts[f[2]]
        t.blind = all(orient3d(a, b, c, C) <= 0 for C in centers)


class Ray:
    """One camera-to-point viewing ray and its recorded weight deposits."""

    __slots__ = ("id", "cam", "point", "origin", "traversed", "fringe")

    def __init__(self, rid, cam_index, point_index, origin):
        self.id = rid
        self.cam = cam_index
        self.point = point_index
        self.origin = tuple(float(c) for c in origin)
        self.traversed = []
        self.fringe = []


class RayStore:
    """Owns all rays and keeps cell weights consistent with them."""

    def __init__(self, tri, cfg=None):
        self.tri = tri
        self.cfg = cfg or WeightConfig()
        self.rays = []

    def add_ray(self, cam_index, point_index, origin):
        ray = Ray(len(self.rays), cam_index, point_index, origin)
        self.rays.append(ray)
        self._apply(ray)
        return ray

    def _apply(self, ray):
        cells = trace(self.tri, ray.origin, ray.point)
        ray.traversed = cells
        fringe = []
        seen = {t.id for t in cells}
        for t in cells:
            t.weight += self.cfg.w1
            t.touch_ray(ray.id)
            for n in t.neighbors:
                if n.id not in seen:
                    seen.add(n.id)
                    fringe.append(n)
        for n in fringe:
            n.weight += self.cfg.w2
            n.touch_ray(ray.id)
        ray.fringe = fringe

    def _unapply(self, ray):
        for t in ray.traversed:
            if t.alive:
                t.weight -= self.cfg.w1
            t.untouch_ray(ray.id)
        for t in ray.fringe:
            if t.alive:
                t.weight -= self.cfg.w2
            t.untouch_ray(ray.id)
        ray.traversed = []
        ray.fringe = []

    def retrace_after_insert(self, destroyed):
        """Re-trace every ray that deposited weight on a destroyed cell."""
        affected = set()
        for t in destroyed:
            if t.rays:
                affected.update(t.rays)
        for rid in sorted(affected):
            ray = self.rays[rid]
            self._unapply(ray)
            self._apply(ray)

    def total_weight(self):
        return sum(t.weight for t in self.tri.live_cells())

    def expected_total_weight(self):
        return sum(self.cfg.w1 * len(r.traversed) + self.cfg.w2 * len(r.fringe)
                   for r in self.rays)


def trace(tri, origin, point_index):
    """Ordered cells traversed by the open segment from `origin` (camera
    center) to vertex `point_index`, walking facet to facet from the point
    toward the camera.
    """
    P = tri.points[point_index]
    C = tuple(float(c) for c in origin)
    if _dist2(P, C) == 0.0:
        return []

    t = _start_cell(tri, point_index, C)
    if t is None:
        return []

    # Infinite cells count as traversed only when the segment crosses their
    # hull facet (or they are the start cell); wedge-to-wedge hops are walk
    # plumbing, not traversal.
    cells = []
    recorded = set()

    def rec(c):
        if c.id not in recorded:
            recorded.add(c.id)
            cells.append(c)

    rec(t)
    entry = -1  # start cell has no entry facet; the segment leaves vertex p
    visited = set()
    while True:
        if t.id in visited:
            return _trace_bruteforce(tri, C, point_index)
        visited.add(t.id)
        if _contains_camera(tri, t, C):
            return cells
        step = _exit_step(tri, t, entry, P, C)
        if step is None:
            return cells
        n, nentry, k = step
        if t.infinite and k == t.inf_index():
            rec(t)
        if not (n.infinite and t.infinite):
            rec(n)
        t, entry = n, nentry


def _start_cell(tri, pidx, C):
    """Cell whose region the segment enters when leaving vertex pidx."""
    pts = tri.points
    P = pts[pidx]
    Q = C  # any point along the open segment works for the facet planes at P
    best = None
    best_rank = None
    for t in sorted(tri.incident[pidx], key=lambda c: c.id):
        i = t.index_of(pidx)
        if t.infinite:
            j = t.inf_index()
            if j == i:
                continue
            f = t.facet(j)
            s = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], Q)
            ok, strict = s >= 0, s > 0
        else:
            ok, strict = True, True
            for j in range(4):
                if j == i:
                    continue
                f = t.facet(j)
                s = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], Q)
                if s < 0:
                    ok = False
                    break
                if s == 0:
                    strict = False
        if ok:
            rank = (not t.infinite, strict)
            if best is None or rank > best_rank:
                best, best_rank = t, rank
    return best


def _contains_camera(tri, t, C):
    pts = tri.points
    if t.infinite:
        f = t.facet(t.inf_index())
        return orient3d(pts[f[0]], pts[f[1]], pts[f[2]], C) > 0
    for i in range(4):
        f = t.facet(i)
        if orient3d(pts[f[0]], pts[f[1]], pts[f[2]], C) < 0:
            return False
    return True


def _side_tests(pts, f, A, B):
    a, b, c = pts[f[0]], pts[f[1]], pts[f[2]]
    return (orient3d(A, B, a, b), orient3d(A, B, b, c), orient3d(A, B, c, a))


def _consistent(signs):
    pos = any(s > 0 for s in signs)
    neg = any(s < 0 for s in signs)
    return not (pos and neg)


def _exit_step(tri, t, entry, P, C):
    """(next cell, its entry facet, exit facet index) for segment P->C
    leaving cell t, or None when the traversal ends in t."""
    pts = tri.points
    if t.infinite:
        j = t.inf_index()
        f = t.facet(j)
        sC = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], C)
        if sC > 0:
            return None  # camera in this wedge; contains check handles it
        side = _side_tests(pts, f, P, C)
        if _consistent(side) and j != entry:
            n = t.neighbors[j]
            return n, t.mirror_index(j), j
        # The segment leaves the wedge sideways: hop across the hull edge on
        # whose far side the plane crossing lies (minority side-test sign).
        maj = _majority(side)
        for k in range(3):
            if side[k] == 0 or side[k] == maj:
                continue
            edge = (f[k], f[(k + 1) % 3])
            kh = _infinite_facet_index(t, edge)
            if kh is None or kh == entry:
                continue
            n = t.neighbors[kh]
            return n, t.mirror_index(kh), kh
        return None
    # Finite cell: among facets the segment exits through, prefer the one
    # crossed cleanly (no zero side tests), then lowest facet index.
    best = None
    for k in range(4):
        if k == entry:
            continue
        f = t.facet(k)
        sC = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], C)
        if sC >= 0:
            continue
        side = _side_tests(pts, f, P, C)
        if not _consistent(side):
            continue
        zeros = sum(1 for s in side if s == 0)
        if best is None or zeros < best[0]:
            best = (zeros, k)
    if best is None:
        return None
    k = best[1]
    n = t.neighbors[k]
    return n, t.mirror_index(k), k


def _majority(signs):
    s = sum(1 for x in signs if x > 0) - sum(1 for x in signs if x < 0)
    return 1 if s >= 0 else -1


def _infinite_facet_index(t, edge):
    for k in range(4):
        fk = t.facet(k)
        if INFINITE in fk and edge[0] in fk and edge[1] in fk:
            return k
    return None


def _trace_bruteforce(tri, C, pidx):
    """Fallback for degenerate walks: direct membership per cell."""
    cells = [t for t in tri.live_cells()
             if segment_intersects_cell(tri, t, C, pidx)]
    start = _start_cell(tri, pidx, C)
    if start is not None and start.infinite and start not in cells:
        cells.append(start)
    return cells


def segment_intersects_cell(tri, t, origin, point_index, eps=1e-12):
    """Direct (non-walking) traversal membership test used by the fallback
    path.  Finite cells: half-space interval clipping of the segment.
    Infinite cells: crossing of the hull facet interior.
    """
    pts = tri.points
    P = pts[point_index]
    C = origin
    if t.infinite:
        f = t.facet(t.inf_index())
        return _segment_crosses_triangle(pts[f[0]], pts[f[1]], pts[f[2]],
                                         C, P)
    A = np.asarray(C, float)
    B = np.asarray(P, float)
    d = B - A
    lo, hi = 0.0, 1.0
    for i in range(4):
        f = t.facet(i)
        a = np.asarray(pts[f[0]])
        n = np.cross(np.asarray(pts[f[1]]) - a, np.asarray(pts[f[2]]) - a)
        denom = float(n @ d)
        num = float(n @ (a - A))
        if denom == 0.0:
            if float(n @ (A - a)) < 0:
                return False
            continue
        tcross = num / denom
        if denom > 0:
            lo = max(lo, tcross)
        else:
            hi = min(hi, tcross)
    return hi - lo > eps


def _segment_crosses_triangle(a, b, c, A, B):
    an = np.asarray(a, float)
    n = np.cross(np.asarray(b, float) - an, np.asarray(c, float) - an)
    sa = float(n @ (np.asarray(A, float) - an))
    sb = float(n @ (np.asarray(B, float) - an))
    if sa * sb >= 0:
        return False
    s1 = orient3d(A, B, a, b)
    s2 = orient3d(A, B, b, c)
    s3 = orient3d(A, B, c, a)
    return _consistent((s1, s2, s3)) and bool(s1 or s2 or s3)


def _dist2(a, b):
    return ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)
