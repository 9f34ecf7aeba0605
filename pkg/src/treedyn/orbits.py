"""Orbits, period detection, omega-limit cells, pair classification and the
equicontinuity probe."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from treedyn.errors import InputError, PreconditionError
from treedyn.space import TreePoint

PERIOD_TOL = 1e-9

PERIODIC = "periodic"
EVENTUALLY_PERIODIC = "eventually-periodic"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class OrbitRecord:
    base: TreePoint
    horizon: int
    points: Tuple[TreePoint, ...]


@dataclass(frozen=True)
class PeriodicityReport:
    status: str
    period: Optional[int] = None
    preperiod: Optional[int] = None
    cycle: Tuple[TreePoint, ...] = field(default=(), repr=False)

    def to_json(self) -> dict:
        return {"status": self.status, "period": self.period, "preperiod": self.preperiod}


def orbit(fmap, p: TreePoint, horizon: int) -> OrbitRecord:
    if horizon < 0:
        raise InputError("horizon must be >= 0")
    p = fmap.tree.check_point(p)
    pts = [p]
    for _ in range(horizon):
        pts.append(fmap(pts[-1]))
    return OrbitRecord(p, horizon, tuple(pts))


def _exact_point(p: TreePoint) -> bool:
    return isinstance(p.offset, (int, Fraction))


def detect_period(fmap, p: TreePoint, max_steps: int, tol: float = PERIOD_TOL) -> PeriodicityReport:
    """Find the minimal preperiod and period of ``p`` within ``max_steps`` iterates.

    Exact maps and points use point equality.  Otherwise a repeat means
    distance below ``tol``, and a period is only reported when ``tol`` is
    below half the minimal pairwise distance of the candidate cycle.
    """
    if max_steps < 1:
        raise InputError("max_steps must be >= 1")
    tree = fmap.tree
    p = tree.check_point(p)
    if fmap.exact and _exact_point(p):
        seen = {p: 0}
        pts = [p]
        x = p
        for j in range(1, max_steps + 1):
            x = fmap(x)
            i = seen.get(x)
            if i is not None:
                status = PERIODIC if i == 0 else EVENTUALLY_PERIODIC
                return PeriodicityReport(status, j - i, i, tuple(pts[i:]))
            seen[x] = j
            pts.append(x)
        return PeriodicityReport(UNDETERMINED)

    pts = [p]
    x = p
    for j in range(1, max_steps + 1):
        x = fmap(x)
        for i, y in enumerate(pts):
            if tree.distance(x, y) < tol:
                cycle = pts[i:]
                sep = min((tree.distance(a, b) for k, a in enumerate(cycle) for b in cycle[k + 1:]),
                          default=math.inf)
                if tol < sep / 2:
                    status = PERIODIC if i == 0 else EVENTUALLY_PERIODIC
                    return PeriodicityReport(status, j - i, i, tuple(cycle))
                return PeriodicityReport(UNDETERMINED)
        pts.append(x)
    return PeriodicityReport(UNDETERMINED)


def omega_limit_estimate(fmap, p: TreePoint, burn_in: int, window: int, mesh, grid=None) -> frozenset:
    """Centres of the mesh cells visited by iterates ``burn_in .. burn_in + window``.

    A heuristic: for a large enough window the true omega-limit set lies in
    the mesh-dilation of the returned cells.
    """
    from treedyn.chainrec import build_grid

    if burn_in < 1 or window < 1:
        raise InputError("burn_in and window must be >= 1")
    grid = grid or build_grid(fmap.tree, mesh)
    x = fmap.iterate(p, burn_in) if hasattr(fmap, "iterate") else p
    cells = set()
    for _ in range(window + 1):
        cells.add(grid.cells[grid.nearest_cell(x)])
        x = fmap(x)
    return frozenset(cells)


@dataclass(frozen=True)
class PairClassification:
    label: str
    liminf_proxy: float
    limsup_proxy: float


ASYMPTOTIC = "asymptotic-candidate"
LI_YORKE = "li-yorke-candidate"
DISTAL = "distal-candidate"


def classify_pair(fmap, x: TreePoint, y: TreePoint, horizon: int, tol: float) -> PairClassification:
    """Finite-horizon proxy for proximal/asymptotic behaviour of ``(x, y)``.

    ``m`` and ``M`` are the min and max of ``d(f^n x, f^n y)`` over the second
    half of the horizon.  Labels are candidates only; ``undetermined`` covers
    ``m < tol <= M <= 2 tol`` and exact ties.
    """
    if horizon < 1 or not tol > 0:
        raise InputError("need horizon >= 1 and tol > 0")
    tree = fmap.tree
    a, b = tree.check_point(x), tree.check_point(y)
    start = horizon // 2
    dists = []
    for n in range(horizon + 1):
        if n >= start:
            dists.append(float(tree.distance(a, b)))
        a, b = fmap(a), fmap(b)
    m, M = min(dists), max(dists)
    if M < tol:
        label = ASYMPTOTIC
    elif m < tol and M > 2 * tol:
        label = LI_YORKE
    elif m > tol:
        label = DISTAL
    else:
        label = UNDETERMINED
    return PairClassification(label, m, M)


@dataclass(frozen=True)
class ProbeRow:
    radius: float
    samples: int
    max_diameter: float


def equicontinuity_probe(fmap, p: TreePoint, radii: Sequence[float], horizon: int,
                         sample_set: Sequence[TreePoint], max_steps: int = 4096) -> List[ProbeRow]:
    """For each radius, the largest diameter of ``f^n(S)`` for ``n <= horizon``,
    where ``S`` is ``p`` plus the samples in the open ball of that radius.

    Raises:
        PreconditionError: ``p`` is not verified periodic within ``max_steps``.
    """
    if not sample_set:
        raise InputError("sample_set must be nonempty")
    rep = detect_period(fmap, p, max_steps)
    if rep.status != PERIODIC:
        raise PreconditionError(f"{p} is not verified periodic ({rep.status})", witness=p)
    kern = fmap.kernel()
    tree = fmap.tree
    e_all, o_all = kern.encode(list(sample_set))
    pe, po = kern.encode([p])
    d0 = kern.distance(e_all, o_all, np.full_like(e_all, pe[0]), np.full_like(o_all, po[0]))
    rows = []
    for r in radii:
        mask = d0 < r
        e = np.concatenate([pe, e_all[mask]])
        o = np.concatenate([po, o_all[mask]])
        worst = 0.0
        for n in range(horizon + 1):
            if n:
                e, o = kern.step(e, o)
            d = kern.distance(e[:, None], o[:, None], e[None, :], o[None, :])
            worst = max(worst, float(d.max()))
        rows.append(ProbeRow(float(r), int(mask.sum()) + 1, worst))
    return rows
