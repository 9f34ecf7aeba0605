"""Brute-force reference implementations used only by the tests.

None of these import the code under test beyond plain data (edge lists and
sample coordinates), so agreement is evidence of correctness rather than of
self-consistency.
"""

from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np


# ------------------------------------------------------------ chain recurrence

def transitive_closure_recurrent(succ: Sequence[Sequence[int]]) -> frozenset:
    """Cells ``u`` with a path ``u -> ... -> u`` of length >= 1, by boolean
    matrix squaring of the adjacency relation."""
    n = len(succ)
    reach = np.zeros((n, n), dtype=bool)
    for u, vs in enumerate(succ):
        reach[u, list(vs)] = True
    while True:
        nxt = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
        if (nxt == reach).all():
            break
        reach = nxt
    return frozenset(int(u) for u in np.flatnonzero(np.diag(reach)))


# ------------------------------------------------------------ tree distances

def subdivided_distance(edges, p: Tuple[int, object], q: Tuple[int, object]):
    """Distance between two points given as (edge, offset) by inserting them
    as extra vertices and running Dijkstra on the subdivided graph."""
    g = nx.Graph()
    cuts: Dict[int, List] = {}
    for name, (e, off) in (("P", p), ("Q", q)):
        cuts.setdefault(e, []).append((off, name))
    for eid, u, v, length in edges:
        marks = [(0, ("v", u))] + sorted(cuts.get(eid, []), key=lambda t: t[0]) + [(length, ("v", v))]
        for (a, na), (b, nb) in zip(marks, marks[1:]):
            if na != nb:
                g.add_edge(na, nb, weight=b - a)
    if p == q:
        return 0
    return nx.shortest_path_length(g, "P", "Q", weight="weight")


def enumerate_paths_distance(edges, a, b):
    """Vertex distance via enumeration of all simple paths (exactly one in a tree)."""
    g = nx.Graph()
    for eid, u, v, length in edges:
        g.add_edge(u, v, weight=length)
    if a == b:
        return 0
    paths = list(nx.all_simple_paths(g, a, b))
    assert len(paths) == 1
    path = paths[0]
    return sum(g[x][y]["weight"] for x, y in zip(path, path[1:]))


# ------------------------------------------------------------ dendrite model

class DendriteModel:
    """Coordinate model of the truncated counterexample map.

    A point is ``(x, None, 0)`` on the baseline or ``(x, (n, i, side), h)``
    at height ``h`` on the spike of level ``n`` above (``side = +1``) or below
    (``side = -1``) the junction ``x = (2i - 1) / 2**n``.
    """

    def __init__(self, N: int):
        self.N = N

    @staticmethod
    def junction(n, i):
        return Fraction(2 * i - 1, 2 ** n)

    @staticmethod
    def target(n, i, side):
        last = 2 ** (n - 1)
        if side == 1:
            return (n, i + 1, 1) if i < last else (n, last, -1)
        return (n, i - 1, -1) if i > 1 else (n, 1, 1)

    def f(self, pt):
        x, spike, h = pt
        if spike is None or h == 0:
            return (x, None, 0)
        n, i, side = spike
        m, j, s2 = self.target(n, i, side)
        dx = self.junction(m, j) - x
        arc = abs(dx) + Fraction(1, m)
        pos = h * n * arc
        if pos <= abs(dx):
            return (x + (pos if dx > 0 else -pos), None, 0)
        return (self.junction(m, j), (m, j, s2), pos - abs(dx))

    @staticmethod
    def distance(a, b):
        if a[1] is not None and a[1] == b[1]:
            return abs(a[2] - b[2])
        return a[2] + abs(a[0] - b[0]) + b[2]

    def preperiod_and_period(self, pt, max_steps=10 ** 4):
        seen = {}
        for t in range(max_steps + 1):
            key = pt if pt[1] is not None else (pt[0], None, 0)
            if key in seen:
                return seen[key], t - seen[key]
            seen[key] = t
            pt = self.f(pt)
        return None

    @staticmethod
    def from_tree_point(spec, p):
        """Translate a library point of ``spec`` into model coordinates."""
        if p.edge in spec.baseline_edges:
            return (Fraction(p.edge, 2 ** spec.level) + p.offset, None, 0)
        for (n, i), e in spec.top_edge.items():
            if e == p.edge:
                return (DendriteModel.junction(n, i), (n, i, 1), p.offset)
        for (n, i), e in spec.bottom_edge.items():
            if e == p.edge:
                return (DendriteModel.junction(n, i), (n, i, -1), p.offset)
        raise KeyError(p.edge)


def model_itineraries(model: DendriteModel, points, U, V, horizon):
    """Rows of symbols 0 (in U), 1 (in V), 2 for times 1..horizon; U and V are
    (model point, radius) pairs with open balls."""
    rows = []
    for pt in points:
        row = []
        for _ in range(horizon):
            pt = model.f(pt)
            if model.distance(pt, U[0]) < U[1]:
                row.append(0)
            elif model.distance(pt, V[0]) < V[1]:
                row.append(1)
            else:
                row.append(2)
        rows.append(tuple(row))
    return rows


# ------------------------------------------------------------ independence

def exhaustive_independence(rows, k_max: int) -> int:
    """Largest ``|J| <= k_max`` with every U/V pattern on ``J`` realised,
    trying every subset; returns 0 when no set of size >= 2 exists."""
    horizon = len(rows[0]) if rows else 0
    best = 0
    for k in range(1, k_max + 1):
        found = False
        for J in combinations(range(horizon), k):
            patterns = {tuple(r[t] for t in J) for r in rows}
            if all(p in patterns for p in _patterns(k)):
                found = True
                break
        if not found:
            break
        best = k
    return best if best >= 2 else 0


def _patterns(k):
    return [tuple((m >> (k - 1 - b)) & 1 for b in range(k)) for m in range(2 ** k)]


# ------------------------------------------------------------ interval maps

def tent(x: Fraction, slope=2) -> Fraction:
    return slope * x if x <= Fraction(1, 2) else slope * (1 - x)


def max_separated_clique(points: List[Fraction], f, n: int, eps) -> int:
    """Maximum eps-separated subset for ``d_n(x, y) = max_{1 <= t <= n} |f^t x - f^t y|``
    by exact maximum-clique search on the separation graph."""
    orbits = []
    for x in points:
        row = []
        for _ in range(n):
            x = f(x)
            row.append(x)
        orbits.append(row)
    g = nx.Graph()
    g.add_nodes_from(range(len(points)))
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            if max(abs(p - q) for p, q in zip(orbits[a], orbits[b])) > eps:
                g.add_edge(a, b)
    return max(len(c) for c in nx.find_cliques(g))


def lap_count(f, n: int, turning=(Fraction(1, 2),)) -> int:
    """Number of maximal monotone pieces of ``f^n`` on [0, 1] for a
    piecewise-linear ``f`` with the given turning points.

    The turning points of ``f^(k+1)`` are those of ``f^k`` plus the
    ``f^k``-preimages of the turning points of ``f``; ``f^k`` is affine
    between consecutive ones, so preimages are exact interpolations.
    """
    pts = [Fraction(0), Fraction(1)]
    for k in range(n):
        new = set(pts)
        for a, b in zip(pts, pts[1:]):
            fa, fb = _iter(f, a, k), _iter(f, b, k)
            for c in turning:
                if min(fa, fb) < c < max(fa, fb):
                    new.add(a + (c - fa) * (b - a) / (fb - fa))
        pts = sorted(new)
    return len(pts) - 1


def _iter(f, x, k):
    for _ in range(k):
        x = f(x)
    return x


def transition_spectral_entropy() -> float:
    """log of the spectral radius of the two-lap tent's Markov transition matrix."""
    m = np.array([[1.0, 1.0], [1.0, 1.0]])
    return float(np.log(max(abs(np.linalg.eigvals(m)))))
