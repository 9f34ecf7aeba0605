"""Example maps: the dendrite counterexample truncated at level N, a small
library of zero/positive-entropy control maps, and random generators.

Counterexample geometry: the baseline is ``[0, 1]``, subdivided at every
``x_{i,n} = (2i - 1) / 2**n`` with ``n <= N``.  Each lattice point carries a
top spike ``I_{n,i}`` and a bottom spike ``J_{n,i}`` of length ``1/n``,
oriented from the baseline (offset 0) to the tip (offset ``1/n``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from treedyn.errors import InputError, PreconditionError
from treedyn.orbits import PeriodicityReport, detect_period
from treedyn.plmap import PLTreeMap, make_piece
from treedyn.space import MetricTree, TreePoint

TOP, BOTTOM = "top", "bottom"


class LatticePoint(NamedTuple):
    n: int
    i: int
    side: str

    @property
    def x(self) -> Fraction:
        return Fraction(2 * self.i - 1, 2 ** self.n)

    @property
    def height(self) -> Fraction:
        h = Fraction(1, self.n)
        return h if self.side == TOP else -h


def _check_lattice(n: int, i: int, side: str) -> None:
    if n < 1 or not 1 <= i <= 2 ** (n - 1):
        raise InputError(f"lattice index out of range: n={n}, i={i}")
    if side not in (TOP, BOTTOM):
        raise InputError(f"side must be {TOP!r} or {BOTTOM!r}, got {side!r}")


def counterexample_g(n: int, i: int, side: str) -> LatticePoint:
    """Image of the tip ``(x_{i,n}, +-1/n)`` under the cyclic permutation of Y_n."""
    _check_lattice(n, i, side)
    last = 2 ** (n - 1)
    if side == TOP:
        return LatticePoint(n, i + 1, TOP) if i < last else LatticePoint(n, last, BOTTOM)
    return LatticePoint(n, i - 1, BOTTOM) if i > 1 else LatticePoint(n, 1, TOP)


@dataclass
class CounterexampleSpec:
    level: int
    tree: MetricTree
    fmap: PLTreeMap
    baseline_edges: Tuple[int, ...]
    top_edge: Dict[Tuple[int, int], int]
    bottom_edge: Dict[Tuple[int, int], int]
    junction: Dict[Tuple[int, int], str]

    def tip(self, n: int, i: int, side: str) -> TreePoint:
        _check_lattice(n, i, side)
        if n > self.level:
            raise InputError(f"level {n} is above the truncation level {self.level}")
        eid = self.top_edge[n, i] if side == TOP else self.bottom_edge[n, i]
        return self.tree.point(eid, Fraction(1, n))

    def lattice_tip(self, lp: LatticePoint) -> TreePoint:
        return self.tip(lp.n, lp.i, lp.side)

    def tips(self, n: int) -> List[TreePoint]:
        """All 2**n tips of Y_n."""
        return [self.tip(n, i, s) for s in (TOP, BOTTOM) for i in range(1, 2 ** (n - 1) + 1)]

    def spike_point(self, n: int, i: int, side: str, height) -> TreePoint:
        eid = self.top_edge[n, i] if side == TOP else self.bottom_edge[n, i]
        return self.tree.point(eid, Fraction(height))

    def baseline_point(self, x) -> TreePoint:
        x = Fraction(x)
        if not 0 <= x <= 1:
            raise InputError(f"baseline coordinate {x} outside [0, 1]")
        step = Fraction(1, 2 ** self.level)
        k = min(int(x / step), len(self.baseline_edges) - 1)
        return self.tree.point(self.baseline_edges[k], x - k * step)

    def level_edges(self, n: int) -> List[int]:
        """Edge ids of every spike of level ``n``."""
        return [e for (m, _), e in sorted(self.top_edge.items()) if m == n] + \
               [e for (m, _), e in sorted(self.bottom_edge.items()) if m == n]


def build_counterexample(N: int, literal_rule_iii: bool = False) -> CounterexampleSpec:
    """Exact construction of the truncated dendrite map f_N on D_N.

    With ``literal_rule_iii`` the bottom spike ``J_{n,i}`` (i >= 2) is sent
    onto the arc ending at the top tip of ``I_{n,i-1}`` instead of the bottom
    tip of ``J_{n,i-1}``; the default keeps the restriction to the tips equal
    to :func:`counterexample_g`.
    """
    if N < 1:
        raise InputError(f"truncation level must be >= 1, got {N}")
    M = 2 ** N
    step = Fraction(1, M)

    def baseline_vertex(k: int) -> str:
        if k == 0:
            return "B0"
        if k == M:
            return "B1"
        n = N
        while k % 2 == 0:
            k //= 2
            n -= 1
        return f"X{n}_{(k + 1) // 2}"

    vertices = [baseline_vertex(k) for k in range(M + 1)]
    edges = [(k, baseline_vertex(k), baseline_vertex(k + 1), step) for k in range(M)]
    baseline_edges = tuple(range(M))
    top_edge, bottom_edge, junction = {}, {}, {}
    eid = M
    for n in range(1, N + 1):
        for i in range(1, 2 ** (n - 1) + 1):
            x = baseline_vertex((2 * i - 1) * 2 ** (N - n))
            junction[n, i] = x
            vertices += [f"U{n}_{i}", f"D{n}_{i}"]
            edges.append((eid, x, f"U{n}_{i}", Fraction(1, n)))
            edges.append((eid + 1, x, f"D{n}_{i}", Fraction(1, n)))
            top_edge[n, i], bottom_edge[n, i] = eid, eid + 1
            eid += 2
    tree = MetricTree(vertices, edges)

    def tip(n, i, side):
        return tree.point(top_edge[n, i] if side == TOP else bottom_edge[n, i], Fraction(1, n))

    pieces = {}
    for k in baseline_edges:
        pieces[k] = [make_piece(tree, 0, step, tree.point(k, 0), tree.point(k, step))]
    for n in range(1, N + 1):
        last = 2 ** (n - 1)
        h = Fraction(1, n)
        for i in range(1, last + 1):
            base = tree.vertex_point(junction[n, i])
            # top spike: rules (i) and the first half of (ii)
            end = tip(n, i + 1, TOP) if i < last else tip(n, last, BOTTOM)
            pieces[top_edge[n, i]] = [make_piece(tree, 0, h, base, end)]
            # bottom spike: second half of (ii) and rule (iii)
            if i == 1:
                end = tip(n, 1, TOP)
            else:
                end = tip(n, i - 1, TOP if literal_rule_iii else BOTTOM)
            pieces[bottom_edge[n, i]] = [make_piece(tree, 0, h, base, end)]
    name = f"counterexample-N{N}" + ("-literal" if literal_rule_iii else "")
    fmap = PLTreeMap(tree, pieces, name=name)
    return CounterexampleSpec(N, tree, fmap, baseline_edges, top_edge, bottom_edge, junction)


@dataclass(frozen=True)
class EventualPeriodicityReport:
    reports: Tuple[PeriodicityReport, ...]
    unresolved: Tuple[int, ...]
    max_preperiod: int
    max_period: int

    @property
    def resolved(self) -> bool:
        return not self.unresolved


def verify_eventual_periodicity(spec: CounterexampleSpec, samples: Sequence[TreePoint],
                                step_bound: int) -> EventualPeriodicityReport:
    """Exact iteration of every sample until a repeat (or ``step_bound`` steps)."""
    if not spec.fmap.exact:
        raise PreconditionError("eventual periodicity is only decidable in rational mode")
    reports, unresolved = [], []
    for k, p in enumerate(samples):
        if not isinstance(p.offset, (int, Fraction)):
            raise PreconditionError(f"sample {k} has a float coordinate")
        rep = detect_period(spec.fmap, p, step_bound)
        reports.append(rep)
        if rep.status == "undetermined":
            unresolved.append(k)
    resolved = [r for r in reports if r.status != "undetermined"]
    return EventualPeriodicityReport(
        tuple(reports), tuple(unresolved),
        max((r.preperiod for r in resolved), default=0),
        max((r.period for r in resolved), default=0),
    )


# ------------------------------------------------------------------ library

def unit_edge(length=Fraction(1)) -> MetricTree:
    return MetricTree(["a", "b"], [(0, "a", "b", length)])


def star_tree(k: int, leg=Fraction(1)) -> MetricTree:
    """Star with centre ``c`` and legs ``0..k-1`` oriented centre -> leaf."""
    return MetricTree(["c"] + [f"l{j}" for j in range(k)], [(j, "c", f"l{j}", leg) for j in range(k)])


def path_tree(m: int, length=Fraction(1)) -> MetricTree:
    return MetricTree([f"p{j}" for j in range(m + 1)], [(j, f"p{j}", f"p{j + 1}", length) for j in range(m)])


def identity_map(tree: MetricTree) -> PLTreeMap:
    pieces = {eid: [make_piece(tree, 0, e.length, tree.point(eid, 0), tree.point(eid, e.length))]
              for eid, e in tree.edges.items()}
    return PLTreeMap(tree, pieces, name="identity")


def tent_map(slope=2) -> PLTreeMap:
    """Symmetric tent on a unit edge: x -> slope * min(x, 1 - x)."""
    slope = Fraction(slope) if not isinstance(slope, float) else slope
    if not 0 < slope <= 2:
        raise InputError(f"tent slope must lie in (0, 2], got {slope}")
    one = Fraction(1) if isinstance(slope, Fraction) else 1.0
    tree = unit_edge(one)
    half = one / 2
    peak = tree.point(0, slope * half)
    pieces = {0: [make_piece(tree, 0, half, tree.point(0, 0), peak),
                  make_piece(tree, half, one, peak, tree.point(0, 0))]}
    return PLTreeMap(tree, pieces, name=f"tent({slope})")


def contraction_map(factor=Fraction(1, 2), tree: Optional[MetricTree] = None,
                    vertex: Optional[str] = None) -> PLTreeMap:
    """Radial contraction by ``factor`` toward ``vertex`` (default: first vertex)."""
    if not isinstance(factor, float):
        factor = Fraction(factor)
    if not 0 < factor < 1:
        raise InputError(f"contraction factor must lie in (0, 1), got {factor}")
    tree = tree or unit_edge()
    vertex = vertex or tree.vertices[0]
    centre = tree.vertex_point(vertex)
    pieces = {}
    for eid, e in tree.edges.items():
        du, dv = tree.vertex_distance(vertex, e.u), tree.vertex_distance(vertex, e.v)
        far = tree.point(eid, e.length) if dv > du else tree.point(eid, 0)
        arc = tree.path_between(centre, far)
        pieces[eid] = [make_piece(tree, 0, e.length,
                                  tree.point_along(arc, factor * du) if du else centre,
                                  tree.point_along(arc, factor * dv) if dv else centre)]
    return PLTreeMap(tree, pieces, name=f"contraction({factor})")


def star_rotation_map(k: int = 3, leg=Fraction(1)) -> PLTreeMap:
    """Isometric cyclic permutation of the legs of a k-star."""
    if k < 3:
        raise InputError(f"star rotation needs k >= 3, got {k}")
    tree = star_tree(k, leg)
    pieces = {j: [make_piece(tree, 0, leg, tree.vertex_point("c"), tree.point((j + 1) % k, leg))]
              for j in range(k)}
    return PLTreeMap(tree, pieces, name=f"star_rotation({k})")


LIBRARY = ("identity", "tent", "contraction", "star_rotation")


def make_library_map(name: str, **params) -> PLTreeMap:
    """Library control map by name.

    ``identity(tree=unit edge)``, ``tent(slope=2)``,
    ``contraction(factor=1/2, tree=unit edge, vertex=None)``,
    ``star_rotation(k=3)``.
    """
    try:
        if name == "identity":
            return identity_map(params.get("tree") or unit_edge())
        if name == "tent":
            return tent_map(params.get("slope", 2))
        if name == "contraction":
            return contraction_map(params.get("factor", Fraction(1, 2)), params.get("tree"), params.get("vertex"))
        if name == "star_rotation":
            return star_rotation_map(int(params.get("k", 3)))
    except TypeError as exc:
        raise InputError(str(exc)) from None
    raise InputError(f"unknown library map {name!r}; choose from {', '.join(LIBRARY)}")


# ------------------------------------------------------------ random maps

def random_tree(rng: random.Random, n_edges: int) -> MetricTree:
    """Random exact tree: each new vertex hangs off a uniformly chosen older one."""
    verts = ["v0"]
    edges = []
    for j in range(1, n_edges + 1):
        parent = rng.choice(verts)
        verts.append(f"v{j}")
        edges.append((j - 1, parent, f"v{j}", Fraction(rng.randint(1, 4), 2)))
    return MetricTree(verts, edges)


def random_point(rng: random.Random, tree: MetricTree, denominator: int = 8) -> TreePoint:
    eid = rng.choice(sorted(tree.edges))
    length = tree.edge(eid).length
    return tree.point(eid, length * Fraction(rng.randint(0, denominator), denominator))


def random_pl_map(rng: random.Random, tree: MetricTree, max_pieces: int = 3) -> PLTreeMap:
    """Random continuous PL self-map: random vertex and breakpoint images,
    joined by arcs."""
    vimg = {v: random_point(rng, tree) for v in tree.vertices}
    pieces = {}
    for eid, e in tree.edges.items():
        k = rng.randint(1, max_pieces)
        cuts = sorted({Fraction(rng.randint(1, 15), 16) for _ in range(k - 1)})
        bps = [0] + [e.length * c for c in cuts] + [e.length]
        imgs = [vimg[e.u]] + [random_point(rng, tree) for _ in cuts] + [vimg[e.v]]
        pieces[eid] = [make_piece(tree, a, b, p, q) for a, b, p, q in zip(bps, bps[1:], imgs, imgs[1:])]
    return PLTreeMap(tree, pieces, name="random")
