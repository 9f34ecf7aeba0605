"""Continuous piecewise-linear self-maps of a metric tree.

Each edge carries an ordered list of pieces.  A piece maps its domain
interval ``[lo, hi]`` affinely, by arc length, onto the arc from
``start`` to ``end``; the arc is stored explicitly as edge segments with a
prefix-length table so that evaluation is a bisection plus one affine step.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from treedyn.errors import ConsistencyError, InputError, PartitionError, PreconditionError
from treedyn.space import MetricTree, Number, QuotientProjection, Segment, TreePoint

FLOAT_TOL = 1e-12


@dataclass(frozen=True)
class Piece:
    lo: Number
    hi: Number
    start: TreePoint
    end: TreePoint
    path: Tuple[Segment, ...]
    prefix: Tuple[Number, ...] = field(repr=False)

    @property
    def length(self) -> Number:
        """Arc length of the image path."""
        return self.prefix[-1]

    @property
    def slope(self) -> Number:
        return self.length / (self.hi - self.lo)


def make_piece(tree: MetricTree, lo, hi, start: TreePoint, end: TreePoint,
               path: Optional[Sequence[int]] = None) -> Piece:
    """Build a piece, computing its image arc.

    ``path`` (edge ids of the arc, in order) is optional; when given it must
    agree with the unique arc from ``start`` to ``end``.
    """
    start = tree.check_point(start)
    end = tree.check_point(end)
    segs = tuple(tree.path_between(start, end))
    if path is not None and [s.edge for s in segs] != list(path):
        raise InputError(
            f"image path {list(path)} is not the arc from {start} to {end} "
            f"(expected {[s.edge for s in segs]})"
        )
    prefix = [0]
    for s in segs:
        prefix.append(prefix[-1] + s.length)
    return Piece(lo, hi, start, end, segs, tuple(prefix))


@dataclass(frozen=True)
class MapStats:
    lipschitz: Number
    piece_count: int
    breakpoints: Dict[int, Tuple[Number, ...]]


@dataclass(frozen=True)
class ContinuityViolation:
    location: str
    left: TreePoint
    right: TreePoint
    gap: Number


class PLTreeMap:
    """A piecewise-linear self-map of ``tree``.

    Args:
        tree: the underlying metric tree.
        pieces: edge id -> pieces covering ``[0, length]`` in order.
        name: optional label carried into serialised output.

    Raises:
        PartitionError: a missing edge, gaps, overlaps or empty pieces.
    """

    def __init__(self, tree: MetricTree, pieces: Mapping[int, Sequence[Piece]], name: str = "") -> None:
        self.tree = tree
        self.name = name
        self.pieces: Dict[int, Tuple[Piece, ...]] = {}
        for eid, edge in tree.edges.items():
            plist = sorted(pieces.get(eid, ()), key=lambda pc: (pc.lo, pc.hi))
            if not plist:
                raise PartitionError(f"edge {eid} has no pieces")
            if plist[0].lo != 0:
                raise PartitionError(f"edge {eid}: pieces start at {plist[0].lo}, not 0")
            if plist[-1].hi != edge.length:
                raise PartitionError(f"edge {eid}: pieces end at {plist[-1].hi}, not {edge.length}")
            for a, b in zip(plist, plist[1:]):
                if b.lo < a.hi:
                    raise PartitionError(f"edge {eid}: overlapping pieces [{a.lo}, {a.hi}] and [{b.lo}, {b.hi}]")
                if b.lo > a.hi:
                    raise PartitionError(f"edge {eid}: gap between {a.hi} and {b.lo}")
            for pc in plist:
                if not pc.lo < pc.hi:
                    raise PartitionError(f"edge {eid}: empty piece [{pc.lo}, {pc.hi}]")
            self.pieces[eid] = tuple(plist)
        extra = set(pieces) - set(tree.edges)
        if extra:
            raise PartitionError(f"pieces given for unknown edges {sorted(extra)}")
        self._los = {eid: [pc.lo for pc in pl] for eid, pl in self.pieces.items()}
        self.exact = tree.exact and all(
            isinstance(pc.lo, (int, Fraction)) and isinstance(pc.hi, (int, Fraction))
            for pl in self.pieces.values() for pc in pl
        )
        self._kernel = None

    def __repr__(self) -> str:
        n = sum(len(p) for p in self.pieces.values())
        return f"PLTreeMap({self.name or 'unnamed'}, {n} pieces, {self.tree!r})"

    # -------------------------------------------------------------- evaluation
    def piece_at(self, edge: int, offset: Number) -> Piece:
        plist = self.pieces[edge]
        k = bisect.bisect_right(self._los[edge], offset) - 1
        if k < 0 or offset > plist[k].hi:
            raise ConsistencyError(f"offset {offset} on edge {edge} is outside every piece")
        return plist[k]

    def evaluate_piece(self, pc: Piece, offset: Number) -> TreePoint:
        if not pc.path:
            return pc.start
        s = (offset - pc.lo) * pc.length / (pc.hi - pc.lo)
        k = bisect.bisect_right(pc.prefix, s) - 1
        if k >= len(pc.path):
            return pc.end
        if k < 0:
            k = 0
        seg = pc.path[k]
        step = s - pc.prefix[k]
        off = seg.start + step if seg.end >= seg.start else seg.start - step
        return self.tree._clamped(seg.edge, off)

    def __call__(self, p: TreePoint) -> TreePoint:
        return self.evaluate_piece(self.piece_at(p.edge, p.offset), p.offset)

    def evaluate(self, p: TreePoint) -> TreePoint:
        """Image of ``p`` (validated); exact when the map is rational."""
        p = self.tree.check_point(p)
        return self(p)

    def iterate(self, p: TreePoint, n: int) -> TreePoint:
        if n < 0:
            raise InputError("iterate needs n >= 0")
        p = self.tree.check_point(p)
        for _ in range(n):
            p = self(p)
        return p

    # ----------------------------------------------------------- validation
    def endpoint_images(self, edge: int):
        plist = self.pieces[edge]
        return plist[0].start, plist[-1].end

    def validate_continuity(self) -> List[ContinuityViolation]:
        """Breakpoint and vertex mismatches; empty when the map is continuous."""
        tol = 0 if self.exact else FLOAT_TOL
        out: List[ContinuityViolation] = []
        for eid, plist in self.pieces.items():
            for a, b in zip(plist, plist[1:]):
                gap = self.tree.distance(a.end, b.start)
                if gap > tol:
                    out.append(ContinuityViolation(f"edge {eid} at {a.hi}", a.end, b.start, gap))
        for v in self.tree.vertices:
            images = []
            for eid in self.tree.incident(v):
                first, last = self.endpoint_images(eid)
                images.append((eid, first if self.tree.edge(eid).u == v else last))
            e0, ref = images[0]
            for e1, img in images[1:]:
                gap = self.tree.distance(ref, img)
                if gap > tol:
                    out.append(ContinuityViolation(f"vertex {v} (edges {e0}, {e1})", ref, img, gap))
        return out

    def lipschitz_bound(self) -> MapStats:
        slopes = [pc.slope for pl in self.pieces.values() for pc in pl]
        bps = {eid: tuple(pc.lo for pc in pl) + (pl[-1].hi,) for eid, pl in self.pieces.items()}
        return MapStats(max(slopes), len(slopes), bps)

    # ------------------------------------------------------------ conversion
    def to_float(self) -> "PLTreeMap":
        if not self.tree.exact:
            return self
        ft = self.tree.to_float()
        pieces = {}
        for eid, pl in self.pieces.items():
            pieces[eid] = [
                make_piece(ft, float(pc.lo), float(pc.hi), ft.convert_point(pc.start), ft.convert_point(pc.end))
                for pc in pl
            ]
        return PLTreeMap(ft, pieces, self.name)

    def kernel(self) -> "FloatKernel":
        if self._kernel is None:
            self._kernel = FloatKernel(self.to_float())
        return self._kernel

    def compose(self, n: int) -> "IteratedMap":
        return IteratedMap(self, n)


class IteratedMap:
    """Pointwise ``n``-fold composition, exposing the evaluation interface."""

    def __init__(self, base: PLTreeMap, n: int) -> None:
        if n < 1:
            raise InputError("composition power must be >= 1")
        self.base = base
        self.n = n
        self.tree = base.tree
        self.exact = base.exact

    def __call__(self, p: TreePoint) -> TreePoint:
        for _ in range(self.n):
            p = self.base(p)
        return p

    def evaluate(self, p: TreePoint) -> TreePoint:
        return self(self.tree.check_point(p))

    def iterate(self, p: TreePoint, k: int) -> TreePoint:
        return self.base.iterate(p, k * self.n)

    def lipschitz_bound(self) -> MapStats:
        base = self.base.lipschitz_bound()
        return MapStats(base.lipschitz ** self.n, base.piece_count, base.breakpoints)

    def kernel(self) -> "FloatKernel":
        return _PowerKernel(self.base.kernel(), self.n)


# ------------------------------------------------------------ free functions

def evaluate(fmap: PLTreeMap, p: TreePoint) -> TreePoint:
    return fmap.evaluate(p)


def iterate(fmap: PLTreeMap, p: TreePoint, n: int) -> TreePoint:
    return fmap.iterate(p, n)


def validate_continuity(fmap: PLTreeMap) -> List[ContinuityViolation]:
    return fmap.validate_continuity()


def lipschitz_bound(fmap: PLTreeMap) -> MapStats:
    return fmap.lipschitz_bound()


# ------------------------------------------------------------------ factor

def _inside_parts(proj: QuotientProjection, seg: Segment) -> List[Tuple[Number, Number]]:
    """Sub-intervals (as distances from ``seg.start``) of ``seg`` inside the collapsed set."""
    lo, hi = min(seg.start, seg.end), max(seg.start, seg.end)
    parts = []
    for c in proj.collapsed_on(seg.edge):
        a, b = max(lo, c.start), min(hi, c.end)
        if a < b:
            if seg.end >= seg.start:
                parts.append((a - seg.start, b - seg.start))
            else:
                parts.append((seg.start - b, seg.start - a))
    parts.sort()
    return parts


def _arc_splits(proj: QuotientProjection, path: Sequence[Segment]):
    """Split an arc into (from, to, inside) runs of arc-length positions."""
    runs = []
    pos = 0
    for seg in path:
        cur = 0
        for a, b in _inside_parts(proj, seg):
            if a > cur:
                runs.append((pos + cur, pos + a, False))
            runs.append((pos + a, pos + b, True))
            cur = b
        if cur < seg.length:
            runs.append((pos + cur, pos + seg.length, False))
        pos += seg.length
    merged = []
    for r in runs:
        if merged and merged[-1][2] == r[2] and merged[-1][1] == r[0]:
            merged[-1] = (merged[-1][0], r[1], r[2])
        else:
            merged.append(r)
    return merged


def _sub_arc(fmap: PLTreeMap, pc: Piece, s: Number, t: Number):
    a, b = fmap.evaluate_piece(pc, s), fmap.evaluate_piece(pc, t)
    return a, b, fmap.tree.path_between(a, b)


def check_invariant(fmap: PLTreeMap, proj: QuotientProjection) -> None:
    """Raise PreconditionError unless the map sends the collapsed set into itself."""
    tree = fmap.tree
    for v in sorted(proj.collapsed_vertices):
        p = tree.vertex_point(v)
        if not proj.contains(fmap(p)):
            raise PreconditionError(f"collapsed set is not invariant: {p} maps outside it", witness=p)
    for c in proj.collapsed:
        if c.start == c.end:
            p = tree.point(c.edge, c.start)
            if not proj.contains(fmap(p)):
                raise PreconditionError(f"collapsed set is not invariant: {p} maps outside it", witness=p)
            continue
        for pc in fmap.pieces[c.edge]:
            s, t = max(pc.lo, c.start), min(pc.hi, c.end)
            if not s < t:
                continue
            img_s, _, arc = _sub_arc(fmap, pc, s, t)
            if not proj.contains(img_s):
                witness = tree.point(c.edge, s)
                raise PreconditionError(f"collapsed set is not invariant: {witness} maps outside it", witness=witness)
            total = sum(seg.length for seg in arc)
            for a, b, inside in _arc_splits(proj, arc):
                if not inside:
                    mid = (a + b) / 2
                    witness = tree.point(c.edge, s + (t - s) * mid / total)
                    raise PreconditionError(
                        f"collapsed set is not invariant: {witness} maps outside it", witness=witness)


def factor(fmap: PLTreeMap, proj: QuotientProjection) -> PLTreeMap:
    """The induced map ``g`` on ``proj.target`` with ``proj . f == g . proj``.

    Raises:
        PreconditionError: the collapsed set is not mapped into itself; the
            error's ``witness`` is a point whose image leaves it.
    """
    if proj.source is not fmap.tree:
        raise InputError("projection was built on a different tree")
    check_invariant(fmap, proj)
    target = proj.target
    collapsed_point = target.vertex_point(proj.vertex)
    pieces: Dict[int, List[Piece]] = {}
    for eid, portions in proj.portions.items():
        for klo, khi, te, shift in portions:
            out = pieces.setdefault(te, [])
            for pc in fmap.pieces[eid]:
                s, t = max(pc.lo, klo), min(pc.hi, khi)
                if not s < t:
                    continue
                img_s, img_t, arc = _sub_arc(fmap, pc, s, t)
                total = sum(seg.length for seg in arc)
                if total == 0:
                    q = proj.project(img_s)
                    out.append(make_piece(target, s - shift, t - shift, q, q))
                    continue
                for a, b, inside in _arc_splits(proj, arc):
                    ds = s if a == 0 else s + (t - s) * a / total
                    dt = t if b == total else s + (t - s) * b / total
                    if inside:
                        out.append(make_piece(target, ds - shift, dt - shift, collapsed_point, collapsed_point))
                    else:
                        qa = proj.project(fmap.evaluate_piece(pc, ds))
                        qb = proj.project(fmap.evaluate_piece(pc, dt))
                        out.append(make_piece(target, ds - shift, dt - shift, qa, qb))
    return PLTreeMap(target, pieces, name=f"{fmap.name}/factor" if fmap.name else "factor")


# ------------------------------------------------------------ float kernel

class FloatKernel:
    """Vectorised float evaluation over arrays of ``(edge index, offset)``.

    Edges are indexed by position in ``edge_ids``; results are canonical
    (vertex points land on the vertex's smallest incident edge).
    """

    def __init__(self, fmap: PLTreeMap) -> None:
        tree = fmap.tree
        self.fmap = fmap
        self.tree = tree
        self.edge_ids = np.array(sorted(tree.edges), dtype=np.int64)
        self.edge_pos = {int(e): i for i, e in enumerate(self.edge_ids)}
        edges = [tree.edge(int(e)) for e in self.edge_ids]
        self.lengths = np.array([e.length for e in edges], dtype=float)
        vidx = tree.vertex_index()
        self.u_idx = np.array([vidx[e.u] for e in edges], dtype=np.int64)
        self.v_idx = np.array([vidx[e.v] for e in edges], dtype=np.int64)

        def canon(v):
            p = tree.vertex_point(v)
            return self.edge_pos[p.edge], float(p.offset)

        cu = [canon(e.u) for e in edges]
        cv = [canon(e.v) for e in edges]
        self.cu_edge = np.array([c[0] for c in cu], dtype=np.int64)
        self.cu_off = np.array([c[1] for c in cu])
        self.cv_edge = np.array([c[0] for c in cv], dtype=np.int64)
        self.cv_off = np.array([c[1] for c in cv])

        pkeys, plo, phi, plen, pseg0 = [], [], [], [], []
        skeys, sedge, sstart, sdir, sprefix = [], [], [], [], []
        for ei, eid in enumerate(self.edge_ids):
            L = self.lengths[ei]
            for pc in fmap.pieces[int(eid)]:
                k = len(plo)
                pkeys.append(2 * ei + float(pc.lo) / L)
                plo.append(float(pc.lo))
                phi.append(float(pc.hi))
                ln = float(pc.length)
                plen.append(ln)
                pseg0.append(len(sedge))
                if not pc.path:
                    skeys.append(2 * k)
                    p = pc.start
                    sedge.append(self.edge_pos[p.edge])
                    sstart.append(float(p.offset))
                    sdir.append(0.0)
                    sprefix.append(0.0)
                for seg, pre in zip(pc.path, pc.prefix):
                    skeys.append(2 * k + float(pre) / ln)
                    sedge.append(self.edge_pos[seg.edge])
                    sstart.append(float(seg.start))
                    sdir.append(1.0 if seg.end >= seg.start else -1.0)
                    sprefix.append(float(pre))
        self.pkeys = np.array(pkeys)
        self.plo = np.array(plo)
        self.phi = np.array(phi)
        self.plen = np.array(plen)
        self.skeys = np.array(skeys)
        self.sedge = np.array(sedge, dtype=np.int64)
        self.sstart = np.array(sstart)
        self.sdir = np.array(sdir)
        self.sprefix = np.array(sprefix)
        self._dmat = None

    # --------------------------------------------------------------- points
    def encode(self, points: Iterable[TreePoint]) -> Tuple[np.ndarray, np.ndarray]:
        pts = list(points)
        e = np.array([self.edge_pos[p.edge] for p in pts], dtype=np.int64)
        o = np.array([float(p.offset) for p in pts], dtype=float)
        return self.canonical(e, o)

    def decode(self, e: np.ndarray, o: np.ndarray) -> List[TreePoint]:
        return [self.tree.point(int(self.edge_ids[a]), float(b)) for a, b in zip(e, o)]

    def canonical(self, e: np.ndarray, o: np.ndarray):
        L = self.lengths[e]
        o = np.clip(o, 0.0, L)
        at_u = o <= 0.0
        at_v = o >= L
        e2 = np.where(at_u, self.cu_edge[e], np.where(at_v, self.cv_edge[e], e))
        o2 = np.where(at_u, self.cu_off[e], np.where(at_v, self.cv_off[e], o))
        return e2, o2

    # ----------------------------------------------------------- evaluation
    def step(self, e: np.ndarray, o: np.ndarray):
        key = 2 * e + o / self.lengths[e]
        k = np.searchsorted(self.pkeys, key, side="right") - 1
        lo, hi, ln = self.plo[k], self.phi[k], self.plen[k]
        s = (o - lo) * ln / (hi - lo)
        frac = np.divide(s, ln, out=np.zeros_like(s), where=ln > 0)
        j = np.searchsorted(self.skeys, 2 * k + np.minimum(frac, 1.0), side="right") - 1
        # a position exactly at the end of a segment may select the next piece's first segment
        j = np.minimum(j, np.searchsorted(self.skeys, 2 * k + 1.0, side="left") - 1)
        new_o = self.sstart[j] + self.sdir[j] * (s - self.sprefix[j])
        return self.canonical(self.sedge[j], new_o)

    def orbit_at(self, e: np.ndarray, o: np.ndarray, times: Sequence[int]):
        """Positions at the given increasing times, as arrays of shape (len(e), len(times))."""
        times = list(times)
        E = np.empty((len(e), len(times)), dtype=np.int64)
        O = np.empty((len(e), len(times)))
        t = 0
        col = 0
        for target in times:
            while t < target:
                e, o = self.step(e, o)
                t += 1
            E[:, col] = e
            O[:, col] = o
            col += 1
        return E, O

    # -------------------------------------------------------------- metric
    def distance(self, e1, o1, e2, o2) -> np.ndarray:
        """Tree distance between paired point arrays (broadcasting)."""
        if self._dmat is None:
            self._dmat = self.tree.distance_matrix()
        D = self._dmat
        L1, L2 = self.lengths[e1], self.lengths[e2]
        u1, v1, u2, v2 = self.u_idx[e1], self.v_idx[e1], self.u_idx[e2], self.v_idx[e2]
        r1, r2 = L1 - o1, L2 - o2
        cross = np.minimum(
            np.minimum(o1 + D[u1, u2] + o2, o1 + D[u1, v2] + r2),
            np.minimum(r1 + D[v1, u2] + o2, r1 + D[v1, v2] + r2),
        )
        return np.where(e1 == e2, np.abs(o1 - o2), cross)


class _PowerKernel:
    """Kernel view of an n-fold composition."""

    def __init__(self, base: FloatKernel, n: int) -> None:
        self.base = base
        self.n = n
        self.tree = base.tree
        self.lengths = base.lengths
        self.edge_ids = base.edge_ids

    def __getattr__(self, name):
        return getattr(self.base, name)

    def step(self, e, o):
        for _ in range(self.n):
            e, o = self.base.step(e, o)
        return e, o

    def orbit_at(self, e, o, times):
        return self.base.orbit_at(e, o, [t * self.n for t in times])
