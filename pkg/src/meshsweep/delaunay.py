"""Incremental 3D Delaunay triangulation (Bowyer-Watson with conflict
region reporting).

The hull exterior is tiled by infinite cells through a distinguished
infinite vertex (index INFINITE = -1), so cells outside the convex hull can
carry visibility weights and outside/inside labels exactly like finite
ones.  Finite cells are kept positively oriented; an infinite cell stores
its hull facet opposite the infinite vertex, ordered so the virtual
orientation (infinite vertex far on the outward side) is positive.
"""

import numpy as np

from .predicates import orient3d, in_sphere, in_circumcircle

INFINITE = -1

# Facet i of a cell = the three vertices other than position i, ordered so
# that orient3d(facet, vertex_i) == +1 for a positively oriented cell.
_FACET_ORDER = (
    (1, 3, 2),
    (0, 2, 3),
    (0, 3, 1),
    (0, 1, 2),
)


class DegenerateInput(ValueError):
    """Fewer than 4 affinely independent input points."""


class DuplicatePoint(Exception):
    """Inserted point coincides with an existing vertex (within eps_dup)."""

    def __init__(self, vertex):
        super().__init__(f"duplicate of vertex {vertex}")
        self.vertex = vertex


class Tetra:
    """One cell of the triangulation (finite or infinite)."""

    __slots__ = ("verts", "neighbors", "weight", "outside", "id", "alive",
                 "rays", "blind")

    def __init__(self, verts, cid):
        self.verts = verts                  # tuple of 4 vertex ids (-1 = inf)
        self.neighbors = [None, None, None, None]
        self.weight = 0.0
        self.outside = False
        self.id = cid
        self.alive = True
        self.rays = None                    # set of ray ids touching this cell
        self.blind = False                  # unbounded cell facing no camera

    @property
    def infinite(self):
        return INFINITE in self.verts

    def inf_index(self):
        return self.verts.index(INFINITE)

    def facet(self, i):
        a, b, c = _FACET_ORDER[i]
        v = self.verts
        return (v[a], v[b], v[c])

    def index_of(self, vid):
        return self.verts.index(vid)

    def mirror_index(self, i):
        """Index in neighbors[i] of the facet shared with self."""
        n = self.neighbors[i]
        for j in range(4):
            if n.neighbors[j] is self:
                return j
        raise RuntimeError("asymmetric neighbor relation")

    def touch_ray(self, rid):
        if self.rays is None:
            self.rays = {rid}
        else:
            self.rays.add(rid)

    def untouch_ray(self, rid):
        if self.rays is not None:
            self.rays.discard(rid)


class Triangulation:
    """Growable Delaunay tetrahedralization over a point list."""

    def __init__(self, points, eps_dup=1e-9):
        pts = [tuple(float(c) for c in p) for p in points]
        if len(pts) < 4:
            raise DegenerateInput("need at least 4 points")
        self.eps_dup = float(eps_dup)
        self.points = []
        self.vertex_of_input = [None] * len(pts)  # input index -> vertex id
        self.cells = []            # live + dead (dead have alive=False)
        self.incident = []         # vertex id -> set of live cells
        self.inf_incident = set()  # live cells incident to the infinite vertex
        self._next_cell_id = 0
        self._last_cell = None
        self._n_live = 0
        self._bootstrap(pts)

    # -- construction -----------------------------------------------------

    def _bootstrap(self, pts):
        i0 = 0
        i1 = next((i for i in range(1, len(pts))
                   if _dist2(pts[i], pts[i0]) > self.eps_dup ** 2), None)
        if i1 is None:
            raise DegenerateInput("all points coincident")
        i2 = next((i for i in range(len(pts))
                   if i not in (i0, i1) and not _collinear(pts[i0], pts[i1], pts[i])),
                  None)
        if i2 is None:
            raise DegenerateInput("all points collinear")
        i3 = next((i for i in range(len(pts))
                   if i not in (i0, i1, i2)
                   and orient3d(pts[i0], pts[i1], pts[i2], pts[i]) != 0),
                  None)
        if i3 is None:
            raise DegenerateInput("all points coplanar")

        order = [i0, i1, i2, i3]
        if orient3d(pts[i0], pts[i1], pts[i2], pts[i3]) < 0:
            order = [i0, i2, i1, i3]
        for k, i in enumerate(order):
            self.points.append(pts[i])
            self.incident.append(set())
            self.vertex_of_input[i] = k
        v = [0, 1, 2, 3]

        t = self._new_cell((v[0], v[1], v[2], v[3]))
        infs = []
        for i in range(4):
            f = t.facet(i)
            # Infinite cell over hull facet f, facing outward: reverse the
            # facet so the (virtual) infinite vertex sits on its positive side.
            it = self._new_cell((f[0], f[2], f[1], INFINITE))
            infs.append(it)
            self._link(t, i, it, 3)
        # Stitch infinite cells to each other across hull edges.
        self._stitch_infinite_ring(infs)

        remaining = [i for i in range(len(pts)) if i not in order]
        for i in remaining:
            try:
                vid, _, _ = self.insert(pts[i])
                self.vertex_of_input[i] = vid
            except DuplicatePoint as e:
                self.vertex_of_input[i] = e.vertex

    def _stitch_infinite_ring(self, new_inf_cells):
        """Link infinite cells sharing a hull edge (facets containing INF)."""
        open_facets = {}
        for t in new_inf_cells:
            for i in range(4):
                if t.verts[i] == INFINITE:
                    continue
                if t.neighbors[i] is not None:
                    continue
                key = tuple(sorted(t.facet(i)))
                if key in open_facets:
                    o, oi = open_facets.pop(key)
                    self._link(t, i, o, oi)
                else:
                    open_facets[key] = (t, i)
        if open_facets:
            raise RuntimeError("unmatched infinite facets")

    def _new_cell(self, verts):
        t = Tetra(tuple(verts), self._next_cell_id)
        self._next_cell_id += 1
        self.cells.append(t)
        self._n_live += 1
        for v in verts:
            if v != INFINITE:
                self.incident[v].add(t)
            else:
                self.inf_incident.add(t)
        return t

    def _kill_cell(self, t):
        t.alive = False
        self._n_live -= 1
        for v in t.verts:
            if v != INFINITE:
                self.incident[v].discard(t)
            else:
                self.inf_incident.discard(t)

    @staticmethod
    def _link(a, ia, b, ib):
        a.neighbors[ia] = b
        b.neighbors[ib] = a

    # -- queries ----------------------------------------------------------

    def live_cells(self):
        return [t for t in self.cells if t.alive]

    def finite_cells(self):
        return [t for t in self.cells if t.alive and not t.infinite]

    def n_vertices(self):
        return len(self.points)

    def incident_or_all(self, v):
        """Live cells incident to vertex v (v may be INFINITE)."""
        return self.inf_incident if v == INFINITE else self.incident[v]

    def cell_has_point(self, t, p):
        """True if p lies inside or on the boundary of cell t's region."""
        if t.infinite:
            f = t.facet(t.inf_index())
            return orient3d(self.points[f[0]], self.points[f[1]],
                            self.points[f[2]], p) >= 0
        for i in range(4):
            f = t.facet(i)
            if orient3d(self.points[f[0]], self.points[f[1]],
                        self.points[f[2]], p) < 0:
                return False
        return True

    def locate(self, p):
        """Walk to a cell whose region contains p (deterministic remembering
        walk with an exhaustive-scan fallback on degenerate loops)."""
        t = self._last_cell
        if t is None or not t.alive:
            t = next(c for c in reversed(self.cells) if c.alive)
        visited = set()
        prev = None
        while True:
            if t.id in visited:
                break  # degenerate cycle; fall back below
            visited.add(t.id)
            if t.infinite:
                f = t.facet(t.inf_index())
                s = orient3d(self.points[f[0]], self.points[f[1]],
                             self.points[f[2]], p)
                if s >= 0:
                    self._last_cell = t
                    return t
                nxt = t.neighbors[t.inf_index()]
                if nxt is prev:
                    break
                prev, t = t, nxt
                continue
            moved = False
            for i in range(4):
                if t.neighbors[i] is prev and prev is not None:
                    continue
                f = t.facet(i)
                if orient3d(self.points[f[0]], self.points[f[1]],
                            self.points[f[2]], p) < 0:
                    prev, t = t, t.neighbors[i]
                    moved = True
                    break
            if not moved:
                self._last_cell = t
                return t
        for t in self.cells:
            if t.alive and self.cell_has_point(t, p):
                self._last_cell = t
                return t
        raise RuntimeError("point location failed")

    def in_conflict(self, t, p):
        """Delaunay conflict test of point p against cell t."""
        if t.infinite:
            f = t.facet(t.inf_index())
            a, b, c = (self.points[f[0]], self.points[f[1]], self.points[f[2]])
            s = orient3d(a, b, c, p)
            if s > 0:
                return True
            if s < 0:
                return False
            return in_circumcircle(a, b, c, p) > 0
        v = t.verts
        return in_sphere(self.points[v[0]], self.points[v[1]],
                         self.points[v[2]], self.points[v[3]], p) > 0

    def conflict_region(self, p):
        """All cells in conflict with p (face-connected, nonempty).

        Raises DuplicatePoint if p is within eps_dup of an existing vertex.
        """
        p = tuple(float(c) for c in p)
        start = self.locate(p)
        self._check_duplicate(start, p)
        if not self.in_conflict(start, p):
            # On-boundary location can land in a just-outside cell; scan
            # its neighbors first, then everything (degenerate, rare).
            start = next((n for n in start.neighbors
                          if n is not None and self.in_conflict(n, p)), None)
            if start is None:
                start = next((t for t in self.cells
                              if t.alive and self.in_conflict(t, p)), None)
            if start is None:
                raise RuntimeError("no conflict cell found")
        region = {start.id: start}
        stack = [start]
        while stack:
            t = stack.pop()
            for n in t.neighbors:
                if n.id not in region and self.in_conflict(n, p):
                    self._check_duplicate(n, p)
                    region[n.id] = n
                    stack.append(n)
        return list(region.values())

    def _check_duplicate(self, t, p):
        for v in t.verts:
            if v != INFINITE and _dist2(self.points[v], p) < self.eps_dup ** 2:
                raise DuplicatePoint(v)

    # -- mutation ---------------------------------------------------------

    def insert(self, p, conflict=None):
        """Insert point p.  Returns (vertex id, destroyed cells, created
        cells).  Raises DuplicatePoint (no mutation) on coincident input.
        """
        p = tuple(float(c) for c in p)
        if conflict is None:
            conflict = self.conflict_region(p)
        region_ids = {t.id for t in conflict}

        vid = len(self.points)
        self.points.append(p)
        self.incident.append(set())

        # Cavity boundary: facets between a conflict cell and a survivor.
        created = []
        edge_map = {}
        for t in conflict:
            for i in range(4):
                n = t.neighbors[i]
                if n.id in region_ids:
                    continue
                ni = t.mirror_index(i)
                # Survivor-side facet: its positive side faces away from the
                # cavity, so reversing it and appending p gives a positively
                # oriented new cell.
                f = n.facet(ni)
                nc = self._new_cell((f[0], f[2], f[1], vid))
                self._link(nc, 3, n, ni)
                created.append(nc)
                for k in range(3):
                    fk = nc.facet(k)
                    edge = tuple(sorted(x for x in fk if x != vid))
                    if edge in edge_map:
                        oc, ok = edge_map.pop(edge)
                        self._link(nc, k, oc, ok)
                    else:
                        edge_map[edge] = (nc, k)
        if edge_map:
            raise RuntimeError("open cavity after star fill")

        for t in conflict:
            self._kill_cell(t)
        self._last_cell = created[0]
        return vid, conflict, created


def build(points, eps_dup=1e-9):
    """Delaunay triangulation of the given points (>=4, not all coplanar)."""
    return Triangulation(points, eps_dup=eps_dup)


def _dist2(a, b):
    return ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def _collinear(a, b, c):
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    return cx == 0 and cy == 0 and cz == 0
