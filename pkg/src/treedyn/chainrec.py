"""Finite-resolution chain recurrence.

Cells of a :class:`SampleGrid` are joined by an arc ``u -> v`` when
``d(f(center(u)), center(v)) < epsilon``.  Cells lying on a directed cycle of
that graph form the chain-recurrent approximation.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from treedyn.errors import InputError
from treedyn.space import MetricTree, Number, TreePoint


def _as_number(tree: MetricTree, x) -> Number:
    if tree.exact:
        return x if isinstance(x, (int, Fraction)) else Fraction(x)
    return float(x)


class SampleGrid:
    """Cell centres along every edge at arc-length steps of at most ``mesh / 2``;
    every vertex is a centre.  Cells are ordered by ``(edge, offset)``."""

    def __init__(self, tree: MetricTree, mesh: Number, cells: Sequence[TreePoint]) -> None:
        self.tree = tree
        self.mesh = mesh
        self.radius = mesh / 2
        self.cells: Tuple[TreePoint, ...] = tuple(cells)
        self.index_of = {c: k for k, c in enumerate(self.cells)}
        self._by_edge: Dict[int, Tuple[list, list]] = {}
        for eid, e in tree.edges.items():
            entries = []
            for c in self.cells:
                if c.edge == eid:
                    entries.append((c.offset, self.index_of[c]))
            for off in (0, e.length):
                entries.append((off, self.index_of[tree.point(eid, off)]))
            entries = sorted(set(entries))
            self._by_edge[eid] = ([o for o, _ in entries], [k for _, k in entries])

    def __len__(self) -> int:
        return len(self.cells)

    def nearest_cell(self, p: TreePoint) -> int:
        """Index of the closest centre; ties go to the smallest (edge, offset)."""
        offs, ids = self._by_edge[p.edge]
        j = bisect.bisect_left(offs, p.offset)
        best = None
        for k in (j - 1, j):
            if 0 <= k < len(offs):
                key = (abs(offs[k] - p.offset), self.cells[ids[k]])
                if best is None or key < best[0]:
                    best = (key, ids[k])
        return best[1]

    def cells_within(self, p: TreePoint, r: Number) -> List[int]:
        """Indices of centres at distance strictly less than ``r`` from ``p``."""
        found = set()
        for seg in self.tree.ball_intervals(p, r):
            offs, ids = self._by_edge[seg.edge]
            a = bisect.bisect_left(offs, seg.start)
            b = bisect.bisect_right(offs, seg.end)
            found.update(ids[a:b])
        return sorted(k for k in found if self.tree.distance(self.cells[k], p) < r)

    def cell_samples(self, k: int) -> List[TreePoint]:
        """The centre of cell ``k`` and points half a radius away in each direction."""
        tree = self.tree
        c = self.cells[k]
        h = self.radius / 2
        out = [c]
        v = tree.vertex_at(c)
        if v is None:
            length = tree.edge(c.edge).length
            for off in (c.offset - h, c.offset + h):
                if 0 <= off <= length:
                    out.append(tree.point(c.edge, off))
        else:
            for eid in tree.incident(v):
                e = tree.edge(eid)
                if h <= e.length:
                    out.append(tree.point(eid, h if e.u == v else e.length - h))
        return out


def build_grid(tree: MetricTree, mesh) -> SampleGrid:
    if not mesh > 0:
        raise InputError(f"mesh must be positive, got {mesh}")
    mesh = _as_number(tree, mesh)
    shortest = min(e.length for e in tree.edges.values())
    if mesh > shortest:
        warnings.warn(f"mesh {mesh} exceeds the shortest edge ({shortest}); vertices are still cells",
                      stacklevel=2)
    cells = set()
    for eid, e in tree.edges.items():
        m = max(1, math.ceil(e.length / (mesh / 2)))
        for j in range(m + 1):
            off = e.length if j == m else e.length * j / m
            cells.add(tree.point(eid, off))
    return SampleGrid(tree, mesh, sorted(cells))


class EpsChainGraph:
    """Directed epsilon-transition graph over the cells of a grid."""

    def __init__(self, grid: SampleGrid, epsilon: Number, succ: Sequence[Sequence[int]]) -> None:
        self.grid = grid
        self.epsilon = epsilon
        self.succ: Tuple[Tuple[int, ...], ...] = tuple(tuple(s) for s in succ)
        self._labels = None

    def __len__(self) -> int:
        return len(self.succ)

    def arcs(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((u, v) for u, vs in enumerate(self.succ) for v in vs)

    def adjacency(self) -> csr_matrix:
        n = len(self.succ)
        rows = [u for u, vs in enumerate(self.succ) for _ in vs]
        cols = [v for vs in self.succ for v in vs]
        return csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))

    @property
    def scc_labels(self) -> np.ndarray:
        if self._labels is None:
            _, self._labels = connected_components(self.adjacency(), directed=True, connection="strong")
        return self._labels


def build_eps_chain_graph(fmap, grid: SampleGrid, epsilon) -> EpsChainGraph:
    """Arcs ``u -> v`` for ``d(f(c_u), c_v) < epsilon``.

    ``epsilon`` below ``mesh / 2`` is rejected; below ``mesh`` it is accepted
    with a warning since the one-sided shadowing guarantee needs ``epsilon >= mesh``.
    """
    epsilon = _as_number(grid.tree, epsilon)
    if epsilon < grid.mesh / 2:
        raise InputError(f"epsilon {epsilon} < mesh/2 = {grid.mesh / 2}: below grid resolution")
    if epsilon < grid.mesh:
        warnings.warn(f"epsilon {epsilon} < mesh {grid.mesh}: cells may lack out-arcs", stacklevel=2)
    succ = [grid.cells_within(fmap(c), epsilon) for c in grid.cells]
    return EpsChainGraph(grid, epsilon, succ)


def chain_recurrent_cells(graph: EpsChainGraph) -> FrozenSet[int]:
    """Cells that return to themselves along a path of length >= 1."""
    labels = graph.scc_labels
    sizes = np.bincount(labels, minlength=labels.max() + 1 if len(labels) else 0)
    return frozenset(
        u for u, vs in enumerate(graph.succ) if sizes[labels[u]] > 1 or u in vs
    )


def nonwandering_estimate(fmap, grid: SampleGrid, horizon: int) -> FrozenSet[int]:
    """Cells with a sample returning within ``1.5 * mesh`` of the centre
    (the mesh-dilation of the cell) after some ``1 <= n <= horizon`` steps."""
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    tree = grid.tree
    reach = grid.radius + grid.mesh
    out = set()
    for k, c in enumerate(grid.cells):
        for s in grid.cell_samples(k):
            x = s
            hit = False
            for _ in range(horizon):
                x = fmap(x)
                if tree.distance(x, c) < reach:
                    hit = True
                    break
            if hit:
                out.add(k)
                break
    return frozenset(out)


def restrict_samples(grid: SampleGrid, cellset) -> List[TreePoint]:
    cellset = sorted(cellset)
    if cellset and (cellset[0] < 0 or cellset[-1] >= len(grid)):
        raise InputError("cell index outside the grid")
    return [grid.cells[k] for k in cellset]


def dilate(grid: SampleGrid, cellset, r) -> FrozenSet[int]:
    """Cells whose centre is within distance ``<= r`` of a centre in ``cellset``."""
    out = set()
    for k in cellset:
        for seg in grid.tree.ball_intervals(grid.cells[k], r):
            offs, ids = grid._by_edge[seg.edge]
            a = bisect.bisect_left(offs, seg.start)
            b = bisect.bisect_right(offs, seg.end)
            out.update(ids[a:b])
    return frozenset(out)


@dataclass
class RecurrenceReport:
    mesh: Number
    epsilons: Tuple[Number, ...]
    chain_recurrent: Dict[Number, FrozenSet[int]]
    nonwandering: FrozenSet[int]
    horizon: int
    grid: SampleGrid = field(repr=False)

    def to_json(self) -> dict:
        from treedyn.fileformat import format_number

        return {
            "mesh": format_number(self.mesh),
            "horizon": self.horizon,
            "cell_count": len(self.grid),
            "chain_recurrent": [
                {"epsilon": format_number(eps), "count": len(self.chain_recurrent[eps]),
                 "cells": sorted(self.chain_recurrent[eps])}
                for eps in self.epsilons
            ],
            "nonwandering": {"count": len(self.nonwandering), "cells": sorted(self.nonwandering)},
        }


def recurrence_report(fmap, mesh, epsilons: Sequence = (4, 2, 1), horizon: int = 32,
                      relative: bool = True) -> RecurrenceReport:
    """Chain-recurrent cells for each epsilon (multiples of ``mesh`` when
    ``relative``) plus the non-wandering estimate."""
    grid = build_grid(fmap.tree, mesh)
    eps_values = tuple(grid.mesh * _as_number(grid.tree, e) if relative else _as_number(grid.tree, e)
                       for e in epsilons)
    cr = {eps: chain_recurrent_cells(build_eps_chain_graph(fmap, grid, eps)) for eps in eps_values}
    nw = nonwandering_estimate(fmap, grid, horizon)
    return RecurrenceReport(grid.mesh, eps_values, cr, nw, horizon, grid)
