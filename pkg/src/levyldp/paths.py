"""Cadlag paths on [0,1] and Skorokhod J1 geometry.

A path is stored as a piecewise-linear continuous part sampled on a uniform
grid plus an explicit registry of jump events.  Keeping the jumps symbolic
(rather than folding them into the grid) is what makes jump counting, jump
preservation under the solution map, and the step-function tests exact.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "JumpEvent",
    "CadlagPath",
    "TimeChange",
    "J1Bracket",
    "step_path",
    "zero_path",
    "identity_time_change",
    "path_extrema",
    "uniform_distance",
    "compose_time_change",
    "j1_distance",
    "j1_distance_step_exact",
    "distance_to_step_class",
    "time_change_displacement",
    "l1_distance",
]

DEFAULT_DELTA = 2.0 ** -12
JUMP_RESOLUTION = 1e-9


class DomainError(ValueError):
    """Argument outside the documented domain."""


@dataclass(frozen=True, order=True)
class JumpEvent:
    """A single jump: time in (0,1], nonzero size."""

    time: float
    size: float

    def __post_init__(self):
        if not (0.0 < self.time <= 1.0):
            raise DomainError(f"jump time {self.time} outside (0,1]")
        if self.size == 0.0 or abs(self.size) < JUMP_RESOLUTION:
            raise DomainError(f"jump size {self.size} below resolution floor")


class CadlagPath:
    """Right-continuous path with left limits on [0,1].

    value(t) = initial_value + cont(t) + sum of jump sizes at times <= t,
    where cont is piecewise linear through ``grid_values`` on the uniform
    grid of step ``delta`` and cont(0) = grid_values[0].
    """

    __slots__ = ("initial_value", "delta", "grid_values", "jumps", "_jump_times")

    def __init__(self, grid_values, jumps=(), initial_value=0.0, delta=None):
        gv = np.asarray(grid_values, dtype=float)
        if gv.ndim != 1 or gv.size < 2:
            raise DomainError("grid_values must be a 1-d array with >= 2 samples")
        if delta is None:
            delta = 1.0 / (gv.size - 1)
        if abs(delta * (gv.size - 1) - 1.0) > 1e-9:
            raise DomainError("grid must cover [0,1]: delta*(n-1) == 1")
        jumps = sorted(jumps)
        for a, b in zip(jumps, jumps[1:]):
            if b.time <= a.time:
                raise DomainError("jump times must be strictly increasing")
        self.grid_values = gv
        self.delta = float(delta)
        self.initial_value = float(initial_value)
        self.jumps = tuple(jumps)
        self._jump_times = [j.time for j in self.jumps]

    # -- evaluation ------------------------------------------------------

    def cont(self, t):
        """Continuous part at t (piecewise linear interpolation)."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.floor(t / self.delta).astype(int), 0, self.grid_values.size - 2)
        frac = t / self.delta - idx
        out = self.grid_values[idx] * (1.0 - frac) + self.grid_values[idx + 1] * frac
        return out if out.ndim else float(out)

    def _jump_sum(self, t, inclusive=True):
        side = "right" if inclusive else "left"
        k = np.searchsorted(self._jump_times, t, side=side)
        sizes = np.concatenate(([0.0], np.cumsum([j.size for j in self.jumps])))
        out = sizes[k]
        return out if np.ndim(out) else float(out)

    def eval(self, t):
        """Right-continuous value at t in [0,1]."""
        self._check_domain(t)
        return self.initial_value + self.cont(t) + self._jump_sum(t, inclusive=True)

    def eval_left(self, t):
        """Left limit at t in (0,1]; at t=0 returns the value at 0."""
        self._check_domain(t)
        return self.initial_value + self.cont(t) + self._jump_sum(t, inclusive=False)

    def _check_domain(self, t):
        t = np.asarray(t)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise DomainError("evaluation time outside [0,1]")

    __call__ = eval

    # -- structure -------------------------------------------------------

    @property
    def jump_times(self):
        return tuple(self._jump_times)

    @property
    def grid_times(self):
        return np.arange(self.grid_values.size) * self.delta

    def is_step(self, tol=0.0):
        """True when the continuous part is flat within tol and starts at 0."""
        osc = float(np.max(self.grid_values) - np.min(self.grid_values))
        return osc <= tol and abs(self.initial_value + self.grid_values[0]) <= tol

    def breakpoints(self):
        """Grid times merged with jump times, sorted, deduplicated."""
        return np.unique(np.concatenate([self.grid_times, self._jump_times]))

    def sup_norm(self):
        return uniform_distance(self, zero_path(delta=self.delta))

    def with_jumps(self, jumps):
        return CadlagPath(self.grid_values, jumps, self.initial_value, self.delta)

    def __repr__(self):
        return (f"CadlagPath(n_grid={self.grid_values.size}, "
                f"n_jumps={len(self.jumps)}, x0={self.initial_value})")

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        return {
            "initial_value": self.initial_value,
            "delta": self.delta,
            "grid_values": self.grid_values.tolist(),
            "jumps": [{"t": j.time, "size": j.size} for j in self.jumps],
        }

    @classmethod
    def from_dict(cls, d):
        jumps = [JumpEvent(j["t"], j["size"]) for j in d.get("jumps", [])]
        return cls(d["grid_values"], jumps, d.get("initial_value", 0.0), d.get("delta"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))

    def to_csv(self):
        """Two-column (t, value) sampling; jump rows duplicated (left, right)."""
        buf = io.StringIO()
        buf.write(f"# delta={self.delta!r}\n")
        w = csv.writer(buf)
        w.writerow(["t", "value"])
        times = self.breakpoints()
        jump_set = set(self._jump_times)
        for t in times:
            if t in jump_set:
                w.writerow([repr(float(t)), repr(float(self.eval_left(t)))])
            w.writerow([repr(float(t)), repr(float(self.eval(t)))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Rebuild a path from its ``to_csv`` output.

        Duplicated time rows mark jumps (left then right value); the grid
        spacing is recovered as the largest gap between breakpoints.
        """
        delta = None
        lines = text.splitlines()
        while lines and lines[0].startswith("#"):
            head = lines.pop(0)
            if "delta=" in head:
                delta = float(head.split("delta=", 1)[1].strip())
        rows = list(csv.reader(io.StringIO("\n".join(lines))))
        if not rows or rows[0] != ["t", "value"]:
            raise DomainError("path CSV must start with a 't,value' header")
        ts = np.array([float(r[0]) for r in rows[1:]])
        vs = np.array([float(r[1]) for r in rows[1:]])
        jumps = []
        keep = np.ones(ts.size, dtype=bool)
        for i in range(1, ts.size):
            if ts[i] == ts[i - 1]:
                jumps.append(JumpEvent(float(ts[i]), float(vs[i] - vs[i - 1])))
                keep[i - 1] = False  # drop the left-limit row
        ts, vs = ts[keep], vs[keep]
        jcum = np.zeros(ts.size)
        for j in jumps:
            jcum[ts >= j.time] += j.size
        cont = vs - jcum
        if delta is None:  # older files: widest breakpoint gap is the spacing
            delta = float(np.max(np.diff(ts)))
        n = round(1.0 / delta)
        delta = 1.0 / n
        grid = np.arange(n + 1) * delta
        x0 = cont[0]
        return cls(np.interp(grid, ts, cont) - x0, jumps, x0, delta)


def zero_path(delta=DEFAULT_DELTA):
    n = round(1.0 / delta) + 1
    return CadlagPath(np.zeros(n), (), 0.0, delta)


def step_path(jumps, delta=DEFAULT_DELTA):
    """Step path vanishing at the origin: cont == 0, initial value 0.

    ``jumps`` is an iterable of (time, size) pairs or JumpEvent.
    """
    evs = [j if isinstance(j, JumpEvent) else JumpEvent(*j) for j in jumps]
    return zero_path(delta).with_jumps(evs)


class TimeChange:
    """Increasing piecewise-linear bijection of [0,1].

    ``knots`` are (s, lambda(s)) pairs; (0,0) and (1,1) are implied.
    """

    def __init__(self, knots=()):
        pts = [(0.0, 0.0)] + sorted((float(s), float(v)) for s, v in knots) + [(1.0, 1.0)]
        # drop duplicated endpoint knots
        dedup = [pts[0]]
        for p in pts[1:]:
            if p != dedup[-1]:
                dedup.append(p)
        for (s0, v0), (s1, v1) in zip(dedup, dedup[1:]):
            if s1 <= s0 or v1 <= v0:
                raise DomainError("time change knots must be strictly increasing in both coordinates")
        self.knots = tuple(dedup)
        self._s = np.array([p[0] for p in self.knots])
        self._v = np.array([p[1] for p in self.knots])

    def __call__(self, s):
        out = np.interp(np.asarray(s, dtype=float), self._s, self._v)
        return out if out.ndim else float(out)

    def inverse(self, v):
        out = np.interp(np.asarray(v, dtype=float), self._v, self._s)
        return out if out.ndim else float(out)

    def displacement(self):
        """sup |lambda - e|; attained at a knot for piecewise-linear lambda."""
        return float(np.max(np.abs(self._v - self._s)))


def identity_time_change():
    return TimeChange()


def time_change_displacement(lam: TimeChange) -> float:
    return lam.displacement()


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def _eval_many(p: CadlagPath, times):
    return p.initial_value + p.cont(times) + p._jump_sum(times, inclusive=True)


def uniform_distance(x: CadlagPath, y: CadlagPath) -> float:
    """sup_t |x(t) - y(t)| on the merged grid + jump times.

    Exact for piecewise-linear-plus-jumps paths: the sup is attained at a
    breakpoint of one of the paths, approached from the right or the left.
    """
    times = np.unique(np.concatenate([x.breakpoints(), y.breakpoints()]))
    d = float(np.max(np.abs(_eval_many(x, times) - _eval_many(y, times))))
    jt = sorted(set(x.jump_times) | set(y.jump_times))
    for t in jt:
        d = max(d, abs(x.eval_left(t) - y.eval_left(t)))
    return d


def l1_distance(x: CadlagPath, y: CadlagPath) -> float:
    """Integral of |x - y| over [0,1], exact piecewise computation.

    Between breakpoints the difference is linear, so the integral over each
    cell is the trapezoid of |diff| unless the sign changes, which is handled
    by splitting at the root.
    """
    times = np.unique(np.concatenate([x.breakpoints(), y.breakpoints()]))
    vals = _eval_many(x, times) - _eval_many(y, times)
    total = 0.0
    for i in range(times.size - 1):
        h = times[i + 1] - times[i]
        a = vals[i]
        # right-continuous: the cell [t_i, t_{i+1}) starts at vals[i]; the
        # left limit at t_{i+1} is the linear continuation of cont plus jumps
        # strictly before t_{i+1}.
        b_left = (x.eval_left(times[i + 1]) - y.eval_left(times[i + 1]))
        if a * b_left >= 0:
            total += 0.5 * (abs(a) + abs(b_left)) * h
        else:
            # linear sign change inside the cell
            r = abs(a) / (abs(a) + abs(b_left))
            total += 0.5 * (abs(a) * r + abs(b_left) * (1 - r)) * h
    return float(total)


def path_extrema(x: CadlagPath):
    """(sup, inf) of x over [0,1], exact for piecewise-linear-plus-jumps."""
    times = x.breakpoints()
    vals = _eval_many(x, times)
    hi, lo = float(vals.max()), float(vals.min())
    for t in x.jump_times:
        v = x.eval_left(t)
        hi, lo = max(hi, v), min(lo, v)
    return hi, lo


def compose_time_change(x: CadlagPath, lam: TimeChange) -> CadlagPath:
    """x composed with lambda: jumps relocate to lambda^{-1}(jump time)."""
    new_jumps = [JumpEvent(lam.inverse(j.time), j.size) for j in x.jumps]
    grid_t = x.grid_times
    new_cont = x.cont(np.clip(lam(grid_t), 0.0, 1.0))
    return CadlagPath(new_cont, new_jumps, x.initial_value, x.delta)


@dataclass
class J1Bracket:
    """Certified bracket on the Skorokhod J1 distance."""

    lower: float
    upper: float
    converged: bool
    exact: bool = False

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def __contains__(self, v):
        return self.lower - 1e-12 <= v <= self.upper + 1e-12


def _step_data(p: CadlagPath):
    """(times, cumulative values incl. leading 0) of a step path."""
    t = np.array(p.jump_times)
    cum = np.concatenate(([0.0], np.cumsum([j.size for j in p.jumps])))
    return t, cum


def _step_match_feasible(t, X, s, Y, r, eps=1e-12):
    """Feasibility of J1 radius r between two step paths.

    Dynamic program over monotone interleavings of the jump sequences.
    State (i, j): i jumps of x placed (at chosen times u_1<...<u_i with
    |u_a - t_a| <= r), j jumps of y passed.  A state entered for positive
    dwell time must satisfy |X_i - Y_j| <= r; a simultaneous move (u = s_j)
    skips the intermediate states.  c[i][j] tracks the minimal feasible time
    of the last event, which is monotone-optimal for later placements.
    """
    p, q = len(t), len(s)
    INF = float("inf")
    c = [[INF] * (q + 1) for _ in range(p + 1)]
    c[0][0] = 0.0
    ok_val = lambda i, j: abs(X[i] - Y[j]) <= r + eps
    for i in range(p + 1):
        for j in range(q + 1):
            cur = c[i][j]
            if cur == INF:
                continue
            # place x-jump i+1 before y-jump j+1
            if i < p:
                lo = max(t[i] - r, cur)
                hi = min(t[i] + r, 1.0, (s[j] if j < q else 1.0))
                if lo <= hi + eps and ok_val(i + 1, j):
                    c[i + 1][j] = min(c[i + 1][j], lo)
            # pass y-jump j+1
            if j < q:
                if s[j] >= cur - eps and ok_val(i, j + 1):
                    c[i][j + 1] = min(c[i][j + 1], s[j])
            # simultaneous
            if i < p and j < q:
                if abs(s[j] - t[i]) <= r + eps and s[j] >= cur - eps and ok_val(i + 1, j + 1):
                    c[i + 1][j + 1] = min(c[i + 1][j + 1], s[j])
    return c[p][q] < INF and ok_val(p, q)


def j1_distance_step_exact(x: CadlagPath, y: CadlagPath, tol=1e-9) -> float:
    """Exact J1 distance between two step paths, by bisection on the radius.

    Feasibility at a radius is decided by the monotone-matching dynamic
    program; the infimum over time changes is attained for step paths.
    """
    if not (x.is_step(tol=0.0) and y.is_step(tol=0.0)):
        raise DomainError("exact J1 requires pure step paths")
    t, X = _step_data(x)
    s, Y = _step_data(y)
    hi = uniform_distance(x, y)
    if hi == 0.0:
        return 0.0
    lo = 0.0
    # bisection: feasible(r) is monotone increasing in r
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _step_match_feasible(t, X, s, Y, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _largest_jump_pair(p: CadlagPath):
    up = max((j.size for j in p.jumps if j.size > 0), default=0.0)
    dn = max((-j.size for j in p.jumps if j.size < 0), default=0.0)
    return up, dn


def _greedy_time_change(x: CadlagPath, y: CadlagPath, radius):
    """Candidate lambda matching jumps of x to nearest compatible jumps of y.

    Earlier jumps of x are matched first; among candidates within radius the
    smallest time displacement wins, then the smallest size mismatch.
    Returns knots (u, t) such that lambda(u) = t, i.e. x-jump at t relocates
    to the matched y-jump time u.
    """
    knots = []
    used = set()
    last_u = 0.0
    last_t = 0.0
    for jx in x.jumps:
        best = None
        for idx, jy in enumerate(y.jumps):
            if idx in used or jy.time <= last_u or jy.size * jx.size <= 0:
                continue
            dt = abs(jy.time - jx.time)
            if dt > radius:
                continue
            key = (dt, abs(jy.size - jx.size))
            if best is None or key < best[0]:
                best = (key, idx, jy.time)
        if best is not None and jx.time > last_t:
            _, idx, u = best
            used.add(idx)
            if 0.0 < u < 1.0 and 0.0 < jx.time < 1.0:
                knots.append((u, jx.time))
                last_u, last_t = u, jx.time
    try:
        return TimeChange(knots)
    except DomainError:
        return identity_time_change()


def _candidate_objective(x, y, lam):
    return max(lam.displacement(), uniform_distance(compose_time_change(x, lam), y))


def j1_distance(x: CadlagPath, y: CadlagPath, tol=1e-6, max_iter=60) -> J1Bracket:
    """Certified bracket on the Skorokhod J1 distance.

    Pure step paths get the exact matching value.  General paths get an
    upper bound from candidate time changes (identity, greedy jump matching,
    coordinate descent on knots) and a lower bound from time-change
    invariants; the bracket is flagged not-converged when wider than tol.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if x.is_step(0.0) and y.is_step(0.0):
        v = j1_distance_step_exact(x, y, tol=min(tol, 1e-9))
        return J1Bracket(max(v - tol, 0.0), v + tol, True, exact=True)

    # lower bounds invariant under time change: endpoints, extrema, largest jumps
    lo = abs(x.eval(1.0) - y.eval(1.0))
    lo = max(lo, abs(x.eval(0.0) - y.eval(0.0)))
    (sx, ix), (sy, iy) = path_extrema(x), path_extrema(y)
    lo = max(lo, abs(sx - sy), abs(ix - iy))
    pux, pdx = _largest_jump_pair(x)
    puy, pdy = _largest_jump_pair(y)
    lo = max(lo, 0.5 * abs(pux - puy), 0.5 * abs(pdx - pdy))

    up = uniform_distance(x, y)  # lambda = e
    lam = _greedy_time_change(x, y, radius=min(1.0, up + tol))
    up = min(up, _candidate_objective(x, y, lam))
    # coordinate descent on the greedy knots
    knots = list(lam.knots[1:-1])
    if knots:
        for _ in range(max_iter):
            improved = False
            for i, (u, v) in enumerate(knots):
                lo_u = knots[i - 1][0] if i > 0 else 0.0
                hi_u = knots[i + 1][0] if i + 1 < len(knots) else 1.0
                for cand in np.linspace(lo_u, hi_u, 9)[1:-1]:
                    trial = knots.copy()
                    trial[i] = (float(cand), v)
                    try:
                        lam_t = TimeChange(trial)
                    except DomainError:
                        continue
                    obj = _candidate_objective(x, y, lam_t)
                    if obj < up - 1e-12:
                        up = obj
                        knots = trial
                        improved = True
            if not improved:
                break
    up = max(up, lo)
    return J1Bracket(lo, up, converged=(up - lo <= tol))


def _projection_step_path(x: CadlagPath, l: int, m: int) -> CadlagPath:
    """Step path keeping the l largest up-jumps and m largest down-jumps."""
    ups = sorted((j for j in x.jumps if j.size > 0), key=lambda j: -j.size)[:l]
    dns = sorted((j for j in x.jumps if j.size < 0), key=lambda j: j.size)[:m]
    return step_path(sorted(ups + dns), delta=x.delta)


def distance_to_step_class(x: CadlagPath, pairs, tol=1e-6) -> J1Bracket:
    """Bracket on the J1 distance from x to the union of step classes.

    ``pairs`` is a finite nonempty collection of (l, m) jump-count pairs.
    Upper bound: project x onto its largest jumps for each (l, m).  Lower
    bound: unmatched-jump obligations (the (l+1)-th largest up jump must be
    split, costing half its size) plus the exact distance when the class is
    the zero path alone.
    """
    pairs = sorted(set((int(l), int(m)) for l, m in pairs))
    if not pairs:
        raise DomainError("step class must be nonempty")
    for l, m in pairs:
        if l < 0 or m < 0:
            raise DomainError("jump counts must be nonnegative")

    ups = sorted((j.size for j in x.jumps if j.size > 0), reverse=True)
    dns = sorted((-j.size for j in x.jumps if j.size < 0), reverse=True)

    best_lo = math.inf
    best_up = math.inf
    for (l, m) in pairs:
        # lower bound: jumps beyond the class capacity cannot be matched
        lo = 0.0
        if len(ups) > l:
            lo = max(lo, 0.5 * ups[l])
        if len(dns) > m:
            lo = max(lo, 0.5 * dns[m])
        if (l, m) == (0, 0):
            b = j1_distance(x, zero_path(delta=x.delta), tol=tol)
            lo = max(lo, b.lower)
            up = b.upper
        else:
            proj = _projection_step_path(x, l, m)
            up = j1_distance(x, proj, tol=tol).upper
        best_lo = min(best_lo, lo)
        best_up = min(best_up, up)
    best_up = max(best_up, best_lo)
    return J1Bracket(best_lo, best_up, converged=(best_up - best_lo <= tol))
