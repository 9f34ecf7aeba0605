"""Finite metric trees, points on their edges, the path metric and collapses.

A tree is stored as vertices plus edges ``(id, u, v, length)``.  A point is an
edge id together with an arc-length offset measured from the edge's first
vertex ``u``.  Points that sit on a vertex are always normalised onto the
incident edge with the smallest id, so equal locations compare and hash
equal.

Coordinates are generic: with ``int``/``Fraction`` lengths every operation
is exact, with ``float`` lengths everything runs in double precision.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from treedyn.errors import InputError, TreeStructureError

Number = Union[int, float, Fraction]


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True, order=True)
class TreePoint:
    """A location on a tree: ``offset`` along edge ``edge`` from its first vertex."""

    edge: int
    offset: Number

    def __repr__(self) -> str:
        return f"TreePoint({self.edge}, {self.offset})"


class Edge(NamedTuple):
    id: int
    u: str
    v: str
    length: Number


class Segment(NamedTuple):
    """Oriented piece of a single edge, from offset ``start`` to ``end``."""

    edge: int
    start: Number
    end: Number

    @property
    def length(self) -> Number:
        return abs(self.end - self.start)


class MetricTree:
    """A finite tree with positive edge lengths.

    Args:
        vertices: vertex ids (coerced to ``str``).
        edges: ``Edge`` records or ``(id, u, v, length)`` tuples.

    Raises:
        TreeStructureError: duplicate ids, unknown endpoints, non-positive
            lengths, a cycle or a disconnected graph.
    """

    def __init__(self, vertices: Iterable, edges: Iterable) -> None:
        verts = [str(v) for v in vertices]
        if not verts:
            raise TreeStructureError("a tree needs at least one vertex")
        if len(set(verts)) != len(verts):
            raise TreeStructureError("vertex ids are not unique")
        self._vertices: Tuple[str, ...] = tuple(verts)
        vset = set(verts)

        self._edges: Dict[int, Edge] = {}
        for raw in edges:
            eid, u, v, length = raw
            eid = int(eid)
            u, v = str(u), str(v)
            if eid in self._edges:
                raise TreeStructureError(f"duplicate edge id {eid}")
            if u not in vset or v not in vset:
                raise TreeStructureError(f"edge {eid} references unknown vertex")
            if u == v:
                raise TreeStructureError(f"edge {eid} is a loop at {u}: not a tree")
            if not length > 0:
                raise TreeStructureError(f"edge {eid} has non-positive length {length}")
            self._edges[eid] = Edge(eid, u, v, length)

        if len(self._edges) != len(verts) - 1:
            raise TreeStructureError(
                f"not a tree: {len(self._edges)} edges for {len(verts)} vertices"
            )
        adj: Dict[str, List[int]] = {v: [] for v in verts}
        for e in self._edges.values():
            adj[e.u].append(e.id)
            adj[e.v].append(e.id)
        self._adj = {v: tuple(sorted(ids)) for v, ids in adj.items()}

        seen = {verts[0]}
        queue = deque([verts[0]])
        while queue:
            w = queue.popleft()
            for eid in self._adj[w]:
                x = self.other_end(eid, w)
                if x not in seen:
                    seen.add(x)
                    queue.append(x)
        if len(seen) != len(verts):
            raise TreeStructureError("not a tree: graph is disconnected (or has a cycle)")

        self.exact = all(is_exact(e.length) for e in self._edges.values())
        self._canon: Dict[str, TreePoint] = {}
        for v, ids in self._adj.items():
            if ids:
                e = self._edges[ids[0]]
                self._canon[v] = TreePoint(e.id, 0 if e.u == v else e.length)
        self._bfs_cache: Dict[str, Tuple[dict, dict]] = {}
        self._dmatrix = None

    # ------------------------------------------------------------------ access
    @property
    def vertices(self) -> Tuple[str, ...]:
        return self._vertices

    @property
    def edges(self) -> Dict[int, Edge]:
        return self._edges

    @property
    def numeric(self) -> str:
        return "rational" if self.exact else "float"

    def edge(self, eid: int) -> Edge:
        try:
            return self._edges[eid]
        except KeyError:
            raise InputError(f"unknown edge id {eid!r}") from None

    def incident(self, v: str) -> Tuple[int, ...]:
        try:
            return self._adj[v]
        except KeyError:
            raise InputError(f"unknown vertex id {v!r}") from None

    def other_end(self, eid: int, v: str) -> str:
        e = self._edges[eid]
        return e.v if e.u == v else e.u

    def total_length(self) -> Number:
        return sum(e.length for e in self._edges.values())

    def __repr__(self) -> str:
        return f"MetricTree({len(self._vertices)} vertices, {len(self._edges)} edges, {self.numeric})"

    # ------------------------------------------------------------------ points
    def point(self, edge: int, offset: Number) -> TreePoint:
        """Canonical point at ``offset`` along ``edge``."""
        e = self.edge(edge)
        if offset < 0 or offset > e.length:
            raise InputError(f"offset {offset} outside [0, {e.length}] on edge {edge}")
        if offset == 0:
            return self._canon[e.u]
        if offset == e.length:
            return self._canon[e.v]
        return TreePoint(edge, offset)

    def vertex_point(self, v: str) -> TreePoint:
        if v not in self._adj:
            raise InputError(f"unknown vertex id {v!r}")
        if v not in self._canon:
            raise InputError(f"vertex {v!r} has no incident edge")
        return self._canon[v]

    def vertex_at(self, p: TreePoint) -> Optional[str]:
        """The vertex located at ``p``, or None for an edge-interior point."""
        e = self.edge(p.edge)
        if p.offset == 0:
            return e.u
        if p.offset == e.length:
            return e.v
        return None

    def check_point(self, p: TreePoint) -> TreePoint:
        """Validate ``p`` and return its canonical form."""
        if not isinstance(p, TreePoint):
            raise InputError(f"expected TreePoint, got {type(p).__name__}")
        return self.point(p.edge, p.offset)

    def convert_point(self, p: TreePoint) -> TreePoint:
        """Re-express ``p`` in this tree's numeric mode."""
        off = Fraction(p.offset) if self.exact else float(p.offset)
        return self.point(p.edge, off)

    # ---------------------------------------------------------------- metric
    def _bfs(self, source: str) -> Tuple[dict, dict]:
        cached = self._bfs_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        parent: Dict[str, int] = {}
        queue = deque([source])
        while queue:
            w = queue.popleft()
            for eid in self._adj[w]:
                x = self.other_end(eid, w)
                if x not in dist:
                    dist[x] = dist[w] + self._edges[eid].length
                    parent[x] = eid
                    queue.append(x)
        self._bfs_cache[source] = (dist, parent)
        return dist, parent

    def vertex_distance(self, a: str, b: str) -> Number:
        return self._bfs(a)[0][b]

    def _vertex_edge_path(self, a: str, b: str) -> List[Segment]:
        _, parent = self._bfs(a)
        segs: List[Segment] = []
        w = b
        while w != a:
            eid = parent[w]
            e = self._edges[eid]
            # walking backwards from b: the forward step enters w
            segs.append(Segment(eid, 0, e.length) if e.v == w else Segment(eid, e.length, 0))
            w = self.other_end(eid, w)
        segs.reverse()
        return segs

    def _exits(self, p: TreePoint):
        e = self._edges[p.edge]
        return ((e.u, p.offset, 0), (e.v, e.length - p.offset, e.length))

    def _best_route(self, p: TreePoint, q: TreePoint):
        best = None
        for a, da, aoff in self._exits(p):
            dist_a = self._bfs(a)[0]
            for b, db, boff in self._exits(q):
                total = da + dist_a[b] + db
                if best is None or total < best[0]:
                    best = (total, a, aoff, b, boff)
        return best

    def distance(self, p: TreePoint, q: TreePoint) -> Number:
        """Length of the unique arc from ``p`` to ``q``."""
        p = self.check_point(p)
        q = self.check_point(q)
        if p.edge == q.edge:
            return abs(p.offset - q.offset)
        return self._best_route(p, q)[0]

    def path_between(self, p: TreePoint, q: TreePoint) -> List[Segment]:
        """The arc from ``p`` to ``q`` as oriented edge segments (empty if p == q)."""
        p = self.check_point(p)
        q = self.check_point(q)
        if p.edge == q.edge:
            return [Segment(p.edge, p.offset, q.offset)] if p.offset != q.offset else []
        _, a, aoff, b, boff = self._best_route(p, q)
        segs: List[Segment] = []
        if p.offset != aoff:
            segs.append(Segment(p.edge, p.offset, aoff))
        segs.extend(self._vertex_edge_path(a, b))
        if boff != q.offset:
            segs.append(Segment(q.edge, boff, q.offset))
        return segs

    def point_along(self, path: Sequence[Segment], s: Number) -> TreePoint:
        """Point at arc length ``s`` along ``path`` (clamped to the path)."""
        if not path:
            raise InputError("empty path has no interior points")
        for seg in path:
            ln = seg.length
            if s <= ln:
                step = s if seg.end >= seg.start else -s
                return self._clamped(seg.edge, seg.start + step)
            s -= ln
        last = path[-1]
        return self.point(last.edge, last.end)

    def _clamped(self, edge: int, offset: Number) -> TreePoint:
        length = self._edges[edge].length
        if offset < 0:
            offset = 0
        elif offset > length:
            offset = length
        return self.point(edge, offset)

    def valence(self, p: TreePoint) -> int:
        """Number of components of the tree minus ``p``."""
        v = self.vertex_at(self.check_point(p))
        return 2 if v is None else len(self._adj[v])

    def endpoints_and_branchpoints(self) -> Tuple[frozenset, frozenset]:
        ends, branches = set(), set()
        for v, ids in self._adj.items():
            if len(ids) == 1:
                ends.add(self._canon[v])
            elif len(ids) > 2:
                branches.add(self._canon[v])
        return frozenset(ends), frozenset(branches)

    def ball_intervals(self, p: TreePoint, radius: Number) -> List[Segment]:
        """Closed edge intervals whose union is the closed ball ``B[p, radius]``.

        Returned segments have ``start <= end``.  Degenerate intervals at
        vertices may appear more than once.
        """
        p = self.check_point(p)
        e = self._edges[p.edge]
        out = [Segment(e.id, max(0, p.offset - radius), min(e.length, p.offset + radius))]
        stack = []
        if radius - p.offset >= 0:
            stack.append((e.u, radius - p.offset, e.id))
        if radius - (e.length - p.offset) >= 0:
            stack.append((e.v, radius - (e.length - p.offset), e.id))
        while stack:
            w, rem, came = stack.pop()
            for eid in self._adj[w]:
                if eid == came:
                    continue
                f = self._edges[eid]
                if f.u == w:
                    out.append(Segment(eid, 0, min(rem, f.length)))
                else:
                    out.append(Segment(eid, max(0, f.length - rem), f.length))
                if rem - f.length >= 0:
                    stack.append((self.other_end(eid, w), rem - f.length, eid))
        return out

    # ------------------------------------------------------------ conversion
    def to_float(self) -> "MetricTree":
        if not self.exact:
            return self
        return MetricTree(
            self._vertices,
            [(e.id, e.u, e.v, float(e.length)) for e in self._edges.values()],
        )

    def vertex_index(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self._vertices)}

    def distance_matrix(self) -> np.ndarray:
        """All-pairs vertex distances as a float array ordered like ``vertices``."""
        if self._dmatrix is None:
            n = len(self._vertices)
            mat = np.zeros((n, n))
            idx = self.vertex_index()
            for v in self._vertices:
                dist, _ = self._bfs(v)
                row = mat[idx[v]]
                for w, d in dist.items():
                    row[idx[w]] = float(d)
            self._dmatrix = mat
            self._bfs_cache.clear()
        return self._dmatrix


# Spec-level operations as free functions.

def distance(tree: MetricTree, p: TreePoint, q: TreePoint) -> Number:
    return tree.distance(p, q)


def path_between(tree: MetricTree, p: TreePoint, q: TreePoint) -> List[Segment]:
    return tree.path_between(p, q)


def valence(tree: MetricTree, p: TreePoint) -> int:
    return tree.valence(p)


def endpoints_and_branchpoints(tree: MetricTree) -> Tuple[frozenset, frozenset]:
    return tree.endpoints_and_branchpoints()


# ----------------------------------------------------------------- collapse

class QuotientProjection:
    """Monotone projection of ``source`` onto the tree obtained by collapsing
    a closed connected subset ``collapsed`` to the single vertex ``vertex``.

    Outside the collapsed set the projection keeps each point on the same
    edge (shifted by a constant offset), so it is an isometry there.
    """

    def __init__(self, source, target, collapsed, vertex, collapsed_vertices, portions):
        self.source: MetricTree = source
        self.target: MetricTree = target
        # merged closed intervals (edge, lo, hi), lo <= hi
        self.collapsed: Tuple[Segment, ...] = collapsed
        self.vertex: str = vertex
        self.collapsed_vertices: frozenset = collapsed_vertices
        # source edge -> [(lo, hi, target edge, shift)]
        self.portions: Dict[int, List[Tuple[Number, Number, int, Number]]] = portions
        self._by_edge: Dict[int, List[Segment]] = {}
        for seg in collapsed:
            self._by_edge.setdefault(seg.edge, []).append(seg)

    def collapsed_on(self, edge: int) -> List[Segment]:
        return self._by_edge.get(edge, [])

    def contains(self, p: TreePoint) -> bool:
        """True when ``p`` lies in the collapsed set."""
        p = self.source.check_point(p)
        v = self.source.vertex_at(p)
        if v is not None:
            return v in self.collapsed_vertices
        return any(s.start <= p.offset <= s.end for s in self._by_edge.get(p.edge, ()))

    def project(self, p: TreePoint) -> TreePoint:
        if self.contains(p):
            return self.target.vertex_point(self.vertex)
        p = self.source.check_point(p)
        for lo, hi, te, shift in self.portions.get(p.edge, ()):
            if lo <= p.offset <= hi:
                return self.target.point(te, p.offset - shift)
        raise InputError(f"point {p} not covered by projection data")

    def __call__(self, p: TreePoint) -> TreePoint:
        return self.project(p)


def _normalise_subtree(tree: MetricTree, subtree) -> List[Segment]:
    if isinstance(subtree, TreePoint):
        p = tree.check_point(subtree)
        return [Segment(p.edge, p.offset, p.offset)]
    raw: Dict[int, List[Tuple[Number, Number]]] = {}
    for item in subtree:
        if isinstance(item, TreePoint):
            p = tree.check_point(item)
            eid, lo, hi = p.edge, p.offset, p.offset
        elif isinstance(item, (int, np.integer)):
            eid = int(item)
            lo, hi = 0, tree.edge(eid).length
        else:
            eid, lo, hi = item
            if lo > hi:
                lo, hi = hi, lo
        length = tree.edge(eid).length
        if lo < 0 or hi > length:
            raise InputError(f"interval [{lo}, {hi}] outside edge {eid}")
        raw.setdefault(eid, []).append((lo, hi))
    if not raw:
        raise InputError("subtree to collapse is empty")
    merged: List[Segment] = []
    for eid in sorted(raw):
        ivals = sorted(raw[eid])
        cur_lo, cur_hi = ivals[0]
        for lo, hi in ivals[1:]:
            if lo <= cur_hi:
                cur_hi = max(cur_hi, hi)
            else:
                merged.append(Segment(eid, cur_lo, cur_hi))
                cur_lo, cur_hi = lo, hi
        merged.append(Segment(eid, cur_lo, cur_hi))
    return merged


def collapse(tree: MetricTree, subtree) -> QuotientProjection:
    """Collapse a closed connected subset of ``tree`` to one vertex.

    ``subtree`` is a ``TreePoint`` or an iterable whose items are full edge
    ids, ``TreePoint``s, or ``(edge, lo, hi)`` intervals.

    Raises:
        InputError: the subset is empty or disconnected.
    """
    segs = _normalise_subtree(tree, subtree)

    # union-find over intervals, joined through the vertices they touch
    parent = list(range(len(segs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    touched: Dict[str, int] = {}
    cverts = set()
    for i, s in enumerate(segs):
        e = tree.edge(s.edge)
        ends = []
        if s.start == 0:
            ends.append(e.u)
        if s.end == e.length:
            ends.append(e.v)
        for v in ends:
            cverts.add(v)
            if v in touched:
                parent[find(i)] = find(touched[v])
            else:
                touched[v] = i
    if len({find(i) for i in range(len(segs))}) != 1:
        raise InputError("subtree to collapse is not connected")

    if cverts:
        cv = min(cverts)
    else:
        cv = f"c{segs[0].edge}"
        while cv in tree.vertices:
            cv += "'"

    by_edge = {s.edge: s for s in segs}
    new_id = max(tree.edges) + 1
    t_edges = []
    portions: Dict[int, List[Tuple[Number, Number, int, Number]]] = {}

    def rename(v):
        return cv if v in cverts else v

    for e in tree.edges.values():
        s = by_edge.get(e.id)
        if s is None:
            t_edges.append((e.id, rename(e.u), rename(e.v), e.length))
            portions[e.id] = [(0, e.length, e.id, 0)]
        elif s.start == 0 and s.end == e.length:
            portions[e.id] = []
        elif s.start == 0:
            t_edges.append((e.id, cv, e.v, e.length - s.end))
            portions[e.id] = [(s.end, e.length, e.id, s.end)]
        elif s.end == e.length:
            t_edges.append((e.id, e.u, cv, s.start))
            portions[e.id] = [(0, s.start, e.id, 0)]
        else:
            t_edges.append((e.id, e.u, cv, s.start))
            t_edges.append((new_id, cv, e.v, e.length - s.end))
            portions[e.id] = [(0, s.start, e.id, 0), (s.end, e.length, new_id, s.end)]
    t_vertices = [v for v in tree.vertices if v not in cverts] + [cv]
    target = MetricTree(t_vertices, t_edges)
    return QuotientProjection(tree, target, tuple(segs), cv, frozenset(cverts), portions)
