"""Sequence entropy estimates via separated sets, and independence
certificates.

For a time sequence ``a_1 < a_2 < ...`` the Bowen pseudo-metric on samples is
``d_n(x, y) = max_{i <= n} d(f^{a_i} x, f^{a_i} y)``.  ``s(n, eps)`` is the
size of a greedy maximal eps-separated subset of the samples (pairwise
``d_n > eps``); being maximal it is also eps-spanning, and ``r(n, eps)`` is the
smallest spanning set found among two greedy orders.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from treedyn.errors import ConsistencyError, InputError
from treedyn.space import Number, TreePoint

DEFAULT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class TimeSequence:
    """Strictly increasing positive times: ``full`` is 1, 2, 3, ...,
    ``powers_of_two`` is 1, 2, 4, ..., ``custom`` is a given finite list."""

    kind: str
    custom: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("full", "powers_of_two", "custom"):
            raise InputError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "custom":
            c = self.custom
            if not c or c[0] < 1 or any(b <= a for a, b in zip(c, c[1:])):
                raise InputError("custom sequence must be strictly increasing positive integers")

    @classmethod
    def parse(cls, text: str) -> "TimeSequence":
        if text == "full":
            return cls("full")
        if text in ("pow2", "powers_of_two"):
            return cls("powers_of_two")
        if text.startswith("custom:"):
            try:
                terms = tuple(int(t) for t in text[len("custom:"):].split(",") if t.strip())
            except ValueError:
                raise InputError(f"bad custom sequence {text!r}") from None
            return cls("custom", terms)
        raise InputError(f"sequence must be full, pow2 or custom:<list>, got {text!r}")

    def terms(self, n: int) -> List[int]:
        if self.kind == "full":
            return list(range(1, n + 1))
        if self.kind == "powers_of_two":
            return [2 ** i for i in range(n)]
        if n > len(self.custom):
            raise InputError(f"custom sequence has only {len(self.custom)} terms, {n} needed")
        return list(self.custom[:n])

    @property
    def descriptor(self) -> str:
        if self.kind == "custom":
            return "custom:" + ",".join(map(str, self.custom))
        return "pow2" if self.kind == "powers_of_two" else "full"


FULL = TimeSequence("full")
POW2 = TimeSequence("powers_of_two")


class Trajectories:
    """Sample positions at times ``a_1 .. a_n`` (float), deduplicated."""

    def __init__(self, fmap, samples: Sequence[TreePoint], seq: TimeSequence, n_max: int) -> None:
        if not samples:
            raise InputError("samples must be nonempty")
        self.kernel = fmap.kernel()
        self.times = seq.terms(n_max)
        e0, o0 = self.kernel.encode(samples)
        E, O = self.kernel.orbit_at(e0, o0, self.times)
        rows = np.concatenate([E.astype(float), O], axis=1)
        _, first = np.unique(rows, axis=0, return_index=True)
        keep = np.sort(first)
        self.sample_count = len(samples)
        self.sample_index = keep
        self.E = E[keep]
        self.O = O[keep]
        self._tree = self.kernel.tree

    def __len__(self) -> int:
        return len(self.E)

    def dn(self, i: int, js: np.ndarray, n: int) -> np.ndarray:
        k = self.kernel
        d = k.distance(self.E[i, :n][None, :], self.O[i, :n][None, :], self.E[js, :n], self.O[js, :n])
        return d.max(axis=1)

    def greedy_separated(self, n: int, eps: float, reverse: bool = False) -> List[int]:
        """Greedy maximal subset pairwise ``d_n > eps`` (indices into the
        deduplicated rows, in insertion order)."""
        tree = self._tree
        edge_ids = self.kernel.edge_ids
        col = n - 1
        index: Dict[int, Tuple[list, list]] = {}
        chosen: List[int] = []
        order = range(len(self) - 1, -1, -1) if reverse else range(len(self))
        for i in order:
            p = TreePoint(int(edge_ids[self.E[i, col]]), float(self.O[i, col]))
            near = []
            for seg in tree.ball_intervals(p, eps):
                slot = index.get(seg.edge)
                if slot:
                    a = bisect.bisect_left(slot[0], seg.start)
                    b = bisect.bisect_right(slot[0], seg.end)
                    near.extend(slot[1][a:b])
            if near and (self.dn(i, np.unique(near), n) <= eps).any():
                continue
            chosen.append(i)
            offs, ids = index.setdefault(p.edge, ([], []))
            j = bisect.bisect_right(offs, p.offset)
            offs.insert(j, p.offset)
            ids.insert(j, i)
        return chosen


def separated_count(fmap, samples: Sequence[TreePoint], seq: TimeSequence, n: int, epsilon) -> Tuple[int, List[TreePoint]]:
    """Size and members of a greedy maximal (seq, n, epsilon)-separated subset."""
    if n < 1:
        raise InputError("n must be >= 1")
    traj = Trajectories(fmap, samples, seq, n)
    chosen = traj.greedy_separated(n, float(epsilon))
    return len(chosen), [samples[traj.sample_index[i]] for i in chosen]


@dataclass
class CountRow:
    n: int
    epsilon: float
    separated: int
    spanning: int
    separated_2eps: int
    saturated: bool

    @property
    def sandwich_ok(self) -> bool:
        return self.spanning <= self.separated and self.separated_2eps <= self.spanning


@dataclass
class EntropyEstimate:
    sequence: str
    epsilons: Tuple[float, ...]
    n_values: Tuple[int, ...]
    rows: List[CountRow]
    slopes: Dict[float, float]
    fit_window: Dict[float, Tuple[int, ...]]
    headline: float
    sample_count: int
    distinct_trajectories: int

    def count(self, n: int, eps: float) -> CountRow:
        for r in self.rows:
            if r.n == n and r.epsilon == eps:
                return r
        raise KeyError((n, eps))

    @property
    def sandwich_ok(self) -> bool:
        return all(r.sandwich_ok for r in self.rows)

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "epsilons": list(self.epsilons),
            "n_values": list(self.n_values),
            "headline": self.headline,
            "slopes": [{"epsilon": e, "slope": self.slopes[e], "fit_n": list(self.fit_window[e])}
                       for e in self.epsilons],
            "sample_count": self.sample_count,
            "distinct_trajectories": self.distinct_trajectories,
            "sandwich_ok": self.sandwich_ok,
            "counts": [
                {"n": r.n, "epsilon": r.epsilon, "separated": r.separated, "spanning": r.spanning,
                 "separated_2eps": r.separated_2eps, "saturated": r.saturated}
                for r in self.rows
            ],
        }

    def csv_rows(self) -> List[Tuple]:
        return [(r.n, r.epsilon, r.separated, r.spanning, r.separated_2eps, int(r.saturated)) for r in self.rows]


CSV_HEADER = ("n", "epsilon", "separated", "spanning", "separated_2eps", "saturated")


def _lsq_slope(ns: Sequence[int], ys: Sequence[float]) -> float:
    if len(ns) < 2:
        return 0.0
    return float(np.polyfit(np.asarray(ns, dtype=float), np.asarray(ys, dtype=float), 1)[0])


def fit_window(n_values: Sequence[int], saturated: Sequence[bool]) -> Tuple[int, ...]:
    """Top half (at least two points) of the unsaturated n-range.

    A count is saturated once it reaches half the number of distinct
    trajectories: from there on the sample, not the dynamics, bounds it.
    When fewer than two counts are unsaturated the first saturated one is
    admitted; if even that is impossible the whole range is used.
    """
    usable = [n for n, sat in zip(n_values, saturated) if not sat]
    if len(usable) < 2:
        usable = list(n_values[:max(2, len(usable) + 1)])
    mid = (usable[0] + usable[-1] + 1) // 2
    window = [n for n in usable if n >= mid]
    if len(window) < 2:
        window = usable[-2:]
    return tuple(window)


def h_A_estimate(fmap, samples: Sequence[TreePoint], seq: TimeSequence, n_max: int,
                 epsilon_list: Sequence, n_min: int = 2) -> EntropyEstimate:
    """Counts for ``n = n_min .. n_max`` and each epsilon, with the headline
    slope of ``log s(n, eps)`` against ``n`` fitted over the top half of the
    unsaturated n-range and maximised over epsilon."""
    if n_max < 4:
        raise InputError("n_max must be >= 4")
    eps_list = tuple(float(e) for e in epsilon_list)
    if not eps_list or min(eps_list) <= 0:
        raise InputError("epsilon_list must contain positive values")
    traj = Trajectories(fmap, samples, seq, n_max)
    distinct = len(traj)
    ns = tuple(range(n_min, n_max + 1))
    rows: List[CountRow] = []
    slopes, windows = {}, {}
    for eps in eps_list:
        sat_flags, logs = [], []
        for n in ns:
            s = len(traj.greedy_separated(n, eps))
            r = min(s, len(traj.greedy_separated(n, eps, reverse=True)))
            s2 = len(traj.greedy_separated(n, 2 * eps))
            sat = 2 * s >= distinct and distinct > 1
            rows.append(CountRow(n, eps, s, r, s2, sat))
            sat_flags.append(sat)
            logs.append(math.log(s))
        win = fit_window(ns, sat_flags)
        windows[eps] = win
        slopes[eps] = _lsq_slope(win, [logs[ns.index(n)] for n in win])
    headline = max(slopes.values())
    return EntropyEstimate(seq.descriptor, eps_list, ns, rows, slopes, windows, headline,
                           len(samples), distinct)


def entropy_on_restriction(fmap, cellset, grid, seq: TimeSequence, n_max: int,
                           epsilon_list: Sequence, n_min: int = 2) -> EntropyEstimate:
    """Estimate restricted to the sample proxy of a cell set (for example the
    chain-recurrent cells); orbits are still those of the full map."""
    from treedyn.chainrec import restrict_samples

    samples = restrict_samples(grid, cellset)
    if not samples:
        raise InputError("cell set is empty")
    return h_A_estimate(fmap, samples, seq, n_max, epsilon_list, n_min)


# ------------------------------------------------------------ independence

@dataclass(frozen=True)
class Ball:
    center: TreePoint
    radius: Number

    def to_json(self) -> dict:
        from treedyn.fileformat import format_number

        return {"edge": self.center.edge, "offset": format_number(self.center.offset),
                "radius": format_number(self.radius)}


@dataclass
class IndependenceCertificate:
    """Times ``J`` and, for each of the ``2**|J|`` U/V patterns, a sample whose
    iterates at the times in ``J`` follow that pattern.

    ``size`` is 0 (no certificate) unless ``|J| >= 2``: a single time is
    witnessed by any pair of samples lying in U and in V.
    """

    U: Ball
    V: Ball
    horizon: int
    times: Tuple[int, ...]
    witnesses: Dict[str, TreePoint]
    budget_exhausted: bool
    checks: int
    transcript: List[dict] = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return len(self.times)

    @property
    def found(self) -> bool:
        return self.size >= 2

    def verify(self, fmap) -> bool:
        """Re-iterate every witness; fills ``transcript``."""
        self.transcript = []
        ok = True
        tree = fmap.tree
        for pattern, w in sorted(self.witnesses.items()):
            x, t = w, 0
            hits = []
            for tj, sym in zip(self.times, pattern):
                while t < tj:
                    x = fmap(x)
                    t += 1
                ball = self.U if sym == "U" else self.V
                inside = tree.distance(x, ball.center) < ball.radius
                hits.append(inside)
            self.transcript.append({"pattern": pattern, "witness": [w.edge, str(w.offset)], "ok": all(hits)})
            ok = ok and all(hits)
        return ok

    def to_json(self) -> dict:
        return {
            "U": self.U.to_json(),
            "V": self.V.to_json(),
            "horizon": self.horizon,
            "size": self.size if self.found else 0,
            "certificate": None if not self.found else {
                "times": list(self.times),
                "witnesses": {k: [v.edge, str(v.offset)] for k, v in sorted(self.witnesses.items())},
            },
            "no_certificate": not self.found,
            "budget_exhausted": self.budget_exhausted,
            "checks": self.checks,
            "verification": self.transcript,
        }


def sample_orbits(fmap, samples: Sequence[TreePoint], horizon: int) -> List[List[TreePoint]]:
    """Iterates ``f^1 .. f^horizon`` of every sample (exact for rational maps)."""
    tree = fmap.tree
    out = []
    for p in samples:
        x = tree.check_point(p)
        row = []
        for _ in range(horizon):
            x = fmap(x)
            row.append(x)
        out.append(row)
    return out


def itineraries(fmap, samples: Sequence[TreePoint], U: Ball, V: Ball, horizon: int,
                orbits: Optional[List[List[TreePoint]]] = None) -> np.ndarray:
    """Symbol matrix (samples x horizon) for times 1..horizon: 0 in U, 1 in V, 2 elsewhere."""
    tree = fmap.tree
    if orbits is None:
        orbits = sample_orbits(fmap, samples, horizon)
    sym = np.full((len(orbits), horizon), 2, dtype=np.int8)
    seen: Dict[TreePoint, int] = {}
    for k, row in enumerate(orbits):
        for t, x in enumerate(row[:horizon]):
            s = seen.get(x)
            if s is None:
                s = 0 if tree.distance(x, U.center) < U.radius else 1 if tree.distance(x, V.center) < V.radius else 2
                seen[x] = s
            sym[k, t] = s
    return sym


def _check_balls(tree, U: Ball, V: Ball) -> None:
    if not (U.radius > 0 and V.radius > 0):
        raise InputError("ball radii must be positive")
    if tree.distance(U.center, V.center) < U.radius + V.radius:
        raise InputError("U and V overlap")


def max_independence(sym: np.ndarray, k_max: int, budget: int = DEFAULT_BUDGET):
    """Branch-and-bound for the largest time set with full U/V pattern coverage.

    Returns ``(times, checks, exhausted)`` with times 0-based columns.
    Coverage is hereditary, so a time set is only extended while covered.
    """
    rows = np.unique(sym, axis=0)
    horizon = sym.shape[1]
    best: List[int] = []
    checks = 0
    exhausted = False

    def dfs(J: List[int], active: np.ndarray, codes: np.ndarray, start: int):
        nonlocal best, checks, exhausted
        if len(J) > len(best):
            best = list(J)
        if len(best) >= k_max or exhausted:
            return
        for t in range(start, horizon):
            depth = len(J) + 1
            # remaining times and distinct active rows both bound the final size
            if len(J) + (horizon - t) <= len(best):
                return
            if len(active) < 2 ** (len(best) + 1 - len(J)) and len(active) < 2 ** depth:
                return
            col = rows[active, t]
            keep = col < 2
            new_active = active[keep]
            new_codes = codes[keep] * 2 + col[keep]
            checks += 1
            if checks > budget:
                exhausted = True
                return
            if np.count_nonzero(np.bincount(new_codes, minlength=2 ** depth)) == 2 ** depth:
                dfs(J + [t], new_active, new_codes, t + 1)
                if len(best) >= k_max or exhausted:
                    return

    dfs([], np.arange(len(rows)), np.zeros(len(rows), dtype=np.int64), 0)
    return best, checks, exhausted


def independence_search(fmap, samples: Sequence[TreePoint], U: Ball, V: Ball, horizon: int,
                        k_max: int, budget: int = DEFAULT_BUDGET,
                        orbits: Optional[List[List[TreePoint]]] = None) -> IndependenceCertificate:
    """Largest verified independence certificate for ``(U, V)`` up to ``k_max`` times.

    The result is re-verified by direct iteration before it is returned.

    Raises:
        InputError: overlapping balls or ``horizon >= k_max >= 2`` violated.
    """
    tree = fmap.tree
    if not horizon >= k_max >= 2:
        raise InputError("need horizon >= k_max >= 2")
    U = Ball(tree.check_point(U.center), U.radius)
    V = Ball(tree.check_point(V.center), V.radius)
    _check_balls(tree, U, V)
    samples = [tree.check_point(p) for p in samples]
    sym = itineraries(fmap, samples, U, V, horizon, orbits)
    cols, checks, exhausted = max_independence(sym, k_max, budget)
    if len(cols) < 2:
        cert = IndependenceCertificate(U, V, horizon, (), {}, exhausted, checks)
        cert.verify(fmap)
        return cert
    witnesses = {}
    sub = sym[:, cols]
    for k in range(len(samples)):
        row = sub[k]
        if (row < 2).all():
            pattern = "".join("U" if s == 0 else "V" for s in row)
            witnesses.setdefault(pattern, samples[k])
    cert = IndependenceCertificate(U, V, horizon, tuple(c + 1 for c in cols), witnesses, exhausted, checks)
    if len(witnesses) != 2 ** len(cols) or not cert.verify(fmap):
        raise ConsistencyError("independence certificate failed self-verification")
    return cert


def in_pair_scan(fmap, samples: Sequence[TreePoint], pair_candidates: Iterable[Tuple[TreePoint, TreePoint]],
                 horizon: int, k_min: int, radii_fractions: Sequence[float] = (1 / 4, 1 / 8, 1 / 16),
                 budget: int = DEFAULT_BUDGET) -> List[Tuple[Tuple[TreePoint, TreePoint], IndependenceCertificate]]:
    """Pairs whose balls of every tested radius (fractions of the pair's
    distance, shrinking) admit a certificate of size >= ``k_min``."""
    if k_min < 2:
        raise InputError("k_min must be >= 2")
    tree = fmap.tree
    samples = [tree.check_point(p) for p in samples]
    orbits = sample_orbits(fmap, samples, horizon)
    out = []
    for x, y in pair_candidates:
        d = tree.distance(x, y)
        if d == 0:
            continue
        cert = None
        for frac in sorted(radii_fractions, reverse=True):
            r = d * (Fraction(frac) if tree.exact else frac)
            cert = independence_search(fmap, samples, Ball(x, r), Ball(y, r), horizon, k_min, budget, orbits)
            if cert.size < k_min:
                break
        else:
            out.append(((x, y), cert))
    return out


def uniform_samples(tree, count: int) -> List[TreePoint]:
    """``count`` points at arc-length midpoints ``(j + 1/2) / count`` of the
    total length, walking edges in id order; exact for rational trees."""
    if count < 1:
        raise InputError("sample count must be >= 1")
    total = tree.total_length()
    out = []
    eids = sorted(tree.edges)
    k, base = 0, 0
    for j in range(count):
        s = (Fraction(2 * j + 1, 2 * count) if tree.exact else (j + 0.5) / count) * total
        while s > base + tree.edges[eids[k]].length:
            base += tree.edges[eids[k]].length
            k += 1
        out.append(tree.point(eids[k], s - base))
    return out


def random_samples(tree, count: int, seed: int) -> List[TreePoint]:
    """Seeded uniform points (by arc length); rational with denominator
    ``2**20`` on rational trees."""
    if count < 1:
        raise InputError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    eids = sorted(tree.edges)
    lengths = np.array([float(tree.edges[e].length) for e in eids])
    picks = rng.choice(len(eids), size=count, p=lengths / lengths.sum())
    fracs = rng.integers(0, 2 ** 20, size=count, endpoint=True)
    out = []
    for k, q in zip(picks, fracs):
        e = tree.edges[eids[k]]
        u = Fraction(int(q), 2 ** 20) if tree.exact else int(q) / 2 ** 20
        out.append(tree.point(e.id, e.length * u))
    return out
