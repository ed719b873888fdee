"""Monte Carlo evaluation of the limiting cluster measures.

The (j,k)-cluster measure puts j upward and k downward jumps at i.i.d.
uniform times with power-law sizes; its mass near small jumps is infinite,
so estimation samples sizes conditioned above floors (delta_up, delta_down)
and multiplies by the floor mass.  This is exact precisely when the target
set is bounded away from the smaller-jump classes, i.e. when no contributing
configuration has a jump below the floors.

Tail weight constants (defaults 1, the normalized convention) can be set to
the model's tail constants so that estimates match ratios normalized by the
plain power tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .paths import CadlagPath, DomainError, step_path
from .solution import DriftSpec, SolverConfig, apply_F_batch

__all__ = [
    "ClusterSampleSpec",
    "MeasureEstimate",
    "sample_djk_path",
    "sample_djk_batch",
    "estimate_Cjk",
    "estimate_Cjk_tilde",
]

LEAKAGE_BAND = 1.10  # accepted jump within 10% above its floor -> flag


@dataclass(frozen=True)
class ClusterSampleSpec:
    j: int
    k: int
    floor_up: float = 0.5
    floor_down: float = 0.5
    n_samples: int = 100_000
    seed: int = 0
    alpha: float = 1.5
    beta: float = 1.5
    weight_up: float = 1.0    # tail constant multiplying x^{-alpha}
    weight_down: float = 1.0

    def __post_init__(self):
        if self.j < 0 or self.k < 0:
            raise DomainError("jump counts must be nonnegative")
        if self.floor_up <= 0 or self.floor_down <= 0:
            raise DomainError("floors must be positive")
        if self.alpha <= 1 or self.beta <= 1:
            raise DomainError("tail indices must exceed 1")
        if self.n_samples < 1:
            raise DomainError("need at least one sample")

    @property
    def mass_factor(self):
        return ((self.weight_up * self.floor_up ** -self.alpha) ** self.j
                * (self.weight_down * self.floor_down ** -self.beta) ** self.k)


@dataclass
class MeasureEstimate:
    value: float
    std_error: float
    ci95: tuple
    floor_leakage_flag: bool
    n_samples: int = 0
    acceptance_rate: float = 0.0

    def to_dict(self, spec: ClusterSampleSpec = None):
        d = {
            "value": self.value,
            "se": self.std_error,
            "ci95": list(self.ci95),
            "leakage": self.floor_leakage_flag,
            "N": self.n_samples,
        }
        if spec is not None:
            d.update(j=spec.j, k=spec.k,
                     floors=[spec.floor_up, spec.floor_down])
        return d


def sample_djk_batch(spec: ClusterSampleSpec, rng, n=None):
    """(times, sizes) arrays of shape (n, j+k): uniform times, Pareto sizes.

    Up-jumps occupy the first j columns before time-sorting; each row is
    then sorted by time with sizes carried along.  Colliding times are
    re-drawn (law-preserving null event).
    """
    n = spec.n_samples if n is None else n
    m = spec.j + spec.k
    if m == 0:
        return np.empty((n, 0)), np.empty((n, 0))
    times = rng.uniform(size=(n, m))
    # re-draw rows with collisions or zero times
    for _ in range(100):
        bad = np.any(np.diff(np.sort(times, axis=1), axis=1) == 0.0, axis=1) | np.any(times == 0.0, axis=1)
        if not bad.any():
            break
        times[bad] = rng.uniform(size=(int(bad.sum()), m))
    u = rng.uniform(size=(n, m))
    u[u == 0.0] = 1.0
    sizes = np.empty((n, m))
    sizes[:, :spec.j] = spec.floor_up * u[:, :spec.j] ** (-1.0 / spec.alpha)
    sizes[:, spec.j:] = -spec.floor_down * u[:, spec.j:] ** (-1.0 / spec.beta)
    order = np.argsort(times, axis=1)
    rows = np.arange(n)[:, None]
    return times[rows, order], sizes[rows, order]


def sample_djk_path(spec: ClusterSampleSpec, rng, delta=2.0 ** -8) -> CadlagPath:
    """One step path sampled from the floored (j,k) cluster construction."""
    times, sizes = sample_djk_batch(spec, rng, n=1)
    return step_path(zip(times[0], sizes[0]), delta=delta)


def _wilson_interval(hits, n):
    """95% Wilson score interval for a binomial proportion."""
    z = 1.959963984540054
    if n == 0:
        return 0.0, (0.0, 1.0)
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return p, (max(0.0, center - half), min(1.0, center + half))


def _estimate_from_indicator(spec, accept, leakage):
    n = accept.size
    hits = int(accept.sum())
    p, (lo, hi) = _wilson_interval(hits, n)
    mf = spec.mass_factor
    se = mf * math.sqrt(max(p * (1 - p), 0.0) / n) if n else 0.0
    return MeasureEstimate(value=mf * p, std_error=se,
                           ci95=(mf * lo, mf * hi),
                           floor_leakage_flag=bool(leakage),
                           n_samples=n, acceptance_rate=p)


def _leakage(spec, sizes, accept):
    """Accepted sample with a jump within 10% above its floor: the floored
    construction may be missing contributing mass below the floor."""
    if sizes.shape[1] == 0 or not accept.any():
        return False
    s = sizes[accept]
    near_up = (s > 0) & (s < spec.floor_up * LEAKAGE_BAND)
    near_dn = (s < 0) & (-s < spec.floor_down * LEAKAGE_BAND)
    return bool(np.any(near_up | near_dn))


def estimate_Cjk(oracle, spec: ClusterSampleSpec, rng=None, outer=False,
                 batch_contains=None) -> MeasureEstimate:
    """Floored-importance Monte Carlo estimate of the (j,k) cluster mass.

    ``oracle`` is a path predicate (the inner or outer set test, chosen by
    ``outer``); ``batch_contains(times, sizes, outer)`` may be supplied to
    vectorize membership for step paths.  The caller asserts the set is
    bounded away from the cheaper jump classes; violations show up in the
    leakage flag.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.j == 0 and spec.k == 0:
        z = step_path(())
        inside = bool(oracle(z))
        return MeasureEstimate(value=float(inside), std_error=0.0,
                               ci95=(float(inside), float(inside)),
                               floor_leakage_flag=False, n_samples=1,
                               acceptance_rate=float(inside))
    times, sizes = sample_djk_batch(spec, rng)
    if batch_contains is not None:
        accept = np.asarray(batch_contains(times, sizes, outer), dtype=bool)
    else:
        accept = np.fromiter(
            (bool(oracle(step_path(zip(t, s), delta=0.5)))
             for t, s in zip(times, sizes)),
            dtype=bool, count=spec.n_samples)
    return _estimate_from_indicator(spec, accept, _leakage(spec, sizes, accept))


def estimate_Cjk_tilde(oracle, drift: DriftSpec, spec: ClusterSampleSpec,
                       solver_cfg: SolverConfig = SolverConfig(step=2.0 ** -10),
                       rng=None, outer=False, batch_solution_contains=None,
                       path_delta=2.0 ** -10) -> MeasureEstimate:
    """Pushforward cluster mass: indicator of F(sample) in the target set.

    Membership is tested on the solution path; the sampled step path drives
    the solution map.  ``batch_solution_contains(paths, outer)`` may
    vectorize membership over already-solved paths.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.j == 0 and spec.k == 0:
        from .solution import apply_F
        z = apply_F(drift, step_path((), delta=path_delta), solver_cfg)
        inside = bool(oracle(z))
        return MeasureEstimate(value=float(inside), std_error=0.0,
                               ci95=(float(inside), float(inside)),
                               floor_leakage_flag=False, n_samples=1,
                               acceptance_rate=float(inside))
    times, sizes = sample_djk_batch(spec, rng)
    accept = np.zeros(spec.n_samples, dtype=bool)
    failures = 0
    chunk = 4096
    for start in range(0, spec.n_samples, chunk):
        t_blk = times[start:start + chunk]
        s_blk = sizes[start:start + chunk]
        drivers = [step_path(zip(t, s), delta=path_delta) for t, s in zip(t_blk, s_blk)]
        try:
            sols = apply_F_batch(drift, drivers, solver_cfg)
        except Exception:
            failures += len(drivers)
            if failures > 0.001 * spec.n_samples:
                raise
            continue
        if batch_solution_contains is not None:
            accept[start:start + len(sols)] = batch_solution_contains(sols, outer)
        else:
            accept[start:start + len(sols)] = [bool(oracle(f)) for f in sols]
    return _estimate_from_indicator(spec, accept, _leakage(spec, sizes, accept))
