"""Outside-set maintenance with a guaranteed-manifold boundary surface.

The outside set O is a set of cells (finite or infinite).  Its boundary
surface consists of the facets between a cell in O and one outside O,
oriented outward from O.  The surface is kept manifold at all times: every
vertex on it is regular (its link is a single simple closed cycle) and
every edge bounds exactly two surface facets.

The infinite vertex participates in these checks like any other vertex, so
the bookkeeping lives in the compactified triangulation; `extract_surface`
materializes the finite facets only (the mesh may therefore have a boundary
at the rim where claimed exterior meets unclaimed exterior).
"""

import heapq

import numpy as np

from .delaunay import INFINITE
from .render import TriangleMesh
from .visibility import is_free


class ManifoldInvariantError(RuntimeError):
    """The boundary surface failed a manifoldness check."""


class ManifoldState:
    """Tracks O and answers surface queries against the triangulation."""

    def __init__(self, tri):
        self.tri = tri
        self.size = 0

    # -- surface queries --------------------------------------------------

    def in_outside(self, cell):
        return cell.outside

    def surface_facets_at(self, v):
        """Oriented surface facets (cell, facet index) incident to vertex v,
        taken from the O side."""
        out = []
        for t in self.tri.incident_or_all(v):
            if not t.outside:
                continue
            for i in range(4):
                if t.verts[i] == v:
                    continue
                if not t.neighbors[i].outside:
                    out.append((t, i))
        return out

    def iter_surface_facets(self):
        for t in self.tri.live_cells():
            if not t.outside:
                continue
            for i in range(4):
                if not t.neighbors[i].outside:
                    yield t, i

    def vertex_on_surface(self, v):
        return bool(self.surface_facets_at(v))

    def vertex_regular(self, v):
        """True iff the link of v on the surface is one simple closed cycle."""
        facets = self.surface_facets_at(v)
        return _link_is_single_cycle(v, facets)

    # -- mutation ---------------------------------------------------------

    def try_add(self, cell):
        """Add cell to O iff the surface stays manifold.  Returns bool."""
        if cell.outside:
            raise ValueError("cell already in O")
        # Unbounded cells no camera can look into are never free space.
        if cell.blind:
            return False
        # O must stay a strict subset: with an empty inside set there is no
        # surface left to be manifold.
        if self.size + 1 >= self.tri._n_live:
            return False
        cell.outside = True
        if self._local_ok(cell):
            self.size += 1
            return True
        cell.outside = False
        return False

    def try_add_pair(self, a, b):
        """Add two adjacent cells to O as one move.

        Succeeds in some configurations where adding either cell alone
        leaves a non-regular vertex that the other cell's flip repairs."""
        if a.outside or b.outside:
            raise ValueError("cell already in O")
        if a.blind or b.blind:
            return False
        if self.size + 2 >= self.tri._n_live:
            return False
        a.outside = True
        b.outside = True
        if self._local_ok(a) and self._local_ok(b):
            self.size += 2
            return True
        a.outside = False
        b.outside = False
        return False

    def try_remove(self, cell):
        """Remove cell from O iff the surface stays manifold."""
        if not cell.outside:
            raise ValueError("cell not in O")
        cell.outside = False
        if self._local_ok(cell):
            self.size -= 1
            return True
        cell.outside = True
        return False

    def _local_ok(self, cell):
        """Manifoldness of the surface restricted to the elements a label
        flip of `cell` can affect: its 4 vertices and 6 edges."""
        for v in cell.verts:
            facets = self.surface_facets_at(v)
            if not facets:
                continue
            if not _link_is_single_cycle(v, facets):
                return False
        return True

    # -- growing / shrinking ----------------------------------------------

    def grow(self, cfg, seeds):
        """Greedy max-weight growth of O over free cells, manifold-safe.

        Rejected cells may re-enter the queue later when another neighbor
        joins O.
        """
        heap = []
        queued = set()

        def push(c):
            if c.id not in queued and not c.outside:
                queued.add(c.id)
                # Lexicographic max on (weight, creation id): newer cells
                # first on equal weight.
                heapq.heappush(heap, (-c.weight, -c.id, c))

        for s in seeds:
            push(s)
        while heap:
            _, _, c = heapq.heappop(heap)
            queued.discard(c.id)
            if c.outside or not c.alive:
                continue
            if not is_free(c, cfg):
                continue
            if self.try_add(c):
                for n in c.neighbors:
                    if not n.outside:
                        push(n)

    def shrink(self, cells):
        """Remove cells of E from O (lowest weight first) while the surface
        stays manifold; repeat passes until a fixpoint."""
        target = [c for c in cells if c.alive]
        while True:
            removed = False
            for c in sorted((c for c in target if c.outside),
                            key=lambda c: (c.weight, c.id)):
                if self.try_remove(c):
                    removed = True
            if not removed:
                return

    # -- extraction and validation ----------------------------------------

    def extract_surface(self):
        """Indexed triangle mesh of the finite surface facets, oriented
        outward from O, with vertices renumbered compactly."""
        tris = []
        for t, i in self.iter_surface_facets():
            f = t.facet(i)
            if INFINITE in f:
                continue
            # facet(i) has its positive side toward verts[i] inside the O
            # cell; flip so the triangle normal points out of O.
            tris.append((f[0], f[2], f[1]))
        if not tris:
            return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int32))
        used = sorted({v for f in tris for v in f})
        remap = {v: i for i, v in enumerate(used)}
        V = np.array([self.tri.points[v] for v in used], float)
        F = np.array([[remap[a], remap[b], remap[c]] for a, b, c in tris],
                     np.int32)
        return TriangleMesh(V, F)

    def boundary_adjacent_cells(self):
        """Cells not in O sharing at least a vertex with the surface."""
        verts = set()
        for t, i in self.iter_surface_facets():
            verts.update(t.facet(i))
        out = {}
        for v in verts:
            for t in self.tri.incident_or_all(v):
                if not t.outside:
                    out[t.id] = t
        return list(out.values())

    def check_manifold(self):
        """Full regularity sweep; raises ManifoldInvariantError on failure."""
        edge_count = {}
        verts = set()
        for t, i in self.iter_surface_facets():
            f = t.facet(i)
            verts.update(f)
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                key = (a, b) if a < b else (b, a)
                edge_count[key] = edge_count.get(key, 0) + 1
        for e, n in edge_count.items():
            if n != 2:
                raise ManifoldInvariantError(f"edge {e} bounds {n} facets")
        for v in verts:
            if not self.vertex_regular(v):
                raise ManifoldInvariantError(f"vertex {v} is not regular")


def _link_is_single_cycle(v, facets):
    """The edges opposite v over the given facets must form exactly one
    simple closed cycle (each link vertex of degree 2, one component)."""
    if not facets:
        return False
    adj = {}
    n_edges = 0
    for t, i in facets:
        a, b = [x for x in t.facet(i) if x != v]
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
        n_edges += 1
    for nbrs in adj.values():
        if len(nbrs) != 2:
            return False
    if n_edges != len(adj):
        return False
    # connectivity: walk the cycle
    start = next(iter(adj))
    prev, cur = None, start
    count = 0
    while True:
        a, b = adj[cur]
        nxt = b if a == prev else a
        prev, cur = cur, nxt
        count += 1
        if cur == start:
            break
        if count > n_edges:
            return False
    return count == n_edges


def seed_initial(tri):
    """Initial growing seed: the single highest-weight cell (highest id on
    ties, matching the grow queue order)."""
    best = None
    for t in tri.live_cells():
        if t.blind:
            continue
        if best is None or (t.weight, t.id) > (best.weight, best.id):
            best = t
    return [best] if best is not None else []
