"""Jump-counting rate functions, the cost order, and argmin searches.

The decay cost of a path with j upward and k downward jumps is
(alpha-1)*j + (beta-1)*k; a path that is not a step function starting at 0
(equivalently, whose driver is not) has infinite rate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .paths import CadlagPath, DomainError, step_path
from .solution import DriftSpec, SolverConfig, apply_F, apply_F_inverse

__all__ = [
    "JumpProfile",
    "CostPair",
    "WitnessSearchConfig",
    "ArgminResult",
    "jump_counts",
    "rate_I",
    "rate_I_tilde",
    "cost_jk",
    "enumerate_cost_order",
    "argmin_jk",
    "largest_jumps_pi",
    "rate_pi_induced",
    "inf_rate_over_set",
]

DEFAULT_STEP_TOL = 1e-6


@dataclass(frozen=True)
class JumpProfile:
    up_count: int
    down_count: int

    def as_tuple(self):
        return (self.up_count, self.down_count)


@dataclass(frozen=True)
class CostPair:
    j: int
    k: int
    cost: float
    tied: bool = False

    def as_tuple(self):
        return (self.j, self.k)


def jump_counts(path: CadlagPath, eta: float = 0.0) -> JumpProfile:
    """Count registry jumps with size > eta (up) and size < -eta (down)."""
    if eta < 0:
        raise DomainError("eta must be nonnegative")
    up = sum(1 for j in path.jumps if j.size > eta)
    down = sum(1 for j in path.jumps if j.size < -eta)
    return JumpProfile(up, down)


def rate_I(path: CadlagPath, alpha: float, beta: float,
           tol_step: float = DEFAULT_STEP_TOL, eta: float = 0.0) -> float:
    """Jump-count rate: infinite unless the path is a step function at 0.

    "Is a step function" is decided up to tol_step on the continuous part;
    the exact notion is undecidable on sampled data.
    """
    if alpha <= 1 or beta <= 1:
        raise DomainError("tail indices must exceed 1")
    if not path.is_step(tol=tol_step):
        return math.inf
    prof = jump_counts(path, eta)
    return (alpha - 1.0) * prof.up_count + (beta - 1.0) * prof.down_count


def rate_I_tilde(path: CadlagPath, drift: DriftSpec, alpha: float, beta: float,
                 cfg: SolverConfig = SolverConfig(),
                 tol_step: float = DEFAULT_STEP_TOL, eta: float = 0.0) -> float:
    """Rate of the solution path: pull back through the solution map."""
    g = apply_F_inverse(drift, path, cfg)
    return rate_I(g, alpha, beta, tol_step=tol_step, eta=eta)


def cost_jk(j: int, k: int, alpha: float, beta: float) -> float:
    if j < 0 or k < 0 or j != int(j) or k != int(k):
        raise DomainError("jump counts must be nonnegative integers")
    return (alpha - 1.0) * j + (beta - 1.0) * k


def enumerate_cost_order(alpha: float, beta: float, cost_bound: float):
    """All (j,k) with cost <= bound, sorted by cost; ties ordered by down
    count then up count (pure-up pairs come before pairs spending on down
    jumps at equal cost)."""
    if cost_bound < 0:
        raise DomainError("cost bound must be nonnegative")
    jmax = int(cost_bound / (alpha - 1.0)) + 1
    kmax = int(cost_bound / (beta - 1.0)) + 1
    pairs = []
    for j in range(jmax + 1):
        for k in range(kmax + 1):
            c = cost_jk(j, k, alpha, beta)
            if c <= cost_bound + 1e-12:
                pairs.append((c, k, j))
    pairs.sort()
    pairs = [(c, j, k) for c, k, j in pairs]
    out = []
    for c, j, k in pairs:
        tied = any(abs(c - c2) <= 1e-12 for c2, j2, k2 in pairs if (j2, k2) != (j, k))
        out.append(CostPair(j, k, c, tied=tied))
    return out


def largest_jumps_pi(path: CadlagPath):
    """(largest upward jump size, largest downward jump size), 0 if none."""
    up = max((j.size for j in path.jumps if j.size > 0), default=0.0)
    down = max((-j.size for j in path.jumps if j.size < 0), default=0.0)
    return (up, down)


def rate_pi_induced(y, alpha: float, beta: float) -> float:
    """Rate induced by the largest-jump map.

    The cheapest step path realizing largest jumps (y1, y2) spends one jump
    per nonzero component.
    """
    y1, y2 = y
    if y1 < 0 or y2 < 0:
        raise DomainError("largest-jump components must be nonnegative")
    return (alpha - 1.0) * (y1 > 0) + (beta - 1.0) * (y2 > 0)


# ---------------------------------------------------------------------------
# witness search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessSearchConfig:
    n_multistarts: int = 64
    max_evals: int = 1000
    seed: int = 0
    size_scale: float = 4.0  # sampling scale for initial jump sizes
    # witness drivers are step paths: a coarse grid is exact for them and a
    # coarse RK4 step keeps the search cheap (global error ~ step^4)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(step=2.0 ** -7))
    path_delta: float = 2.0 ** -7


@dataclass
class ArgminResult:
    pairs: list            # all feasible CostPair at the minimal cost level
    cost: float            # the minimal cost, inf when nothing found in bound
    witnesses: dict        # (j,k) -> witness step path (driver space)
    searched: list         # every pair scanned, in cost order
    proven: bool = False   # witnesses verify; infeasibility is never proven

    @property
    def empty(self):
        return not self.pairs


def _params_to_step_path(theta, j, k, delta):
    """Decode raw optimizer parameters into a (j,k) step path.

    Times go through a logistic squash into (0,1); sizes through softplus to
    keep the sign pattern fixed at j ups and k downs.
    """
    theta = np.asarray(theta, dtype=float)
    times_raw = theta[: j + k]
    sizes_raw = theta[j + k:]
    times = 1.0 / (1.0 + np.exp(-np.clip(times_raw, -500.0, 500.0)))
    times = np.clip(times, 1e-6, 1.0)
    mags = np.logaddexp(0.0, sizes_raw)  # softplus, > 0
    mags = np.maximum(mags, 1e-6)
    signs = np.array([1.0] * j + [-1.0] * k)
    order = np.argsort(times)
    times = times[order]
    # separate colliding times deterministically
    for i in range(1, times.size):
        if times[i] <= times[i - 1]:
            times[i] = min(1.0, times[i - 1] + 1e-9)
    sizes = (signs * mags)[order]
    return step_path(zip(times, sizes), delta=delta)


def _feasibility_search(oracle_score, j, k, drift, cfg: WitnessSearchConfig):
    """Try to drive F(step path with (j,k) jumps) into the target set.

    oracle_score(path) must be <= 0 inside the (open) set; the search
    minimizes it by random multistart Nelder--Mead over 2(j+k) parameters.
    Returns the witness driver path or None ("not proven infeasible").
    """
    if j == 0 and k == 0:
        eta = step_path((), delta=cfg.path_delta)
        if oracle_score(apply_F(drift, eta, cfg.solver)) <= 0:
            return eta
        return None
    rng = np.random.default_rng(cfg.seed)
    n_par = 2 * (j + k)

    def objective(theta):
        eta = _params_to_step_path(theta, j, k, cfg.path_delta)
        return oracle_score(apply_F(drift, eta, cfg.solver))

    best = None
    for _ in range(cfg.n_multistarts):
        theta0 = np.concatenate([rng.normal(0.0, 1.5, size=j + k),
                                 rng.normal(0.0, cfg.size_scale, size=j + k)])
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxfev": cfg.max_evals, "xatol": 1e-4, "fatol": 1e-9})
        if res.fun <= 0:
            eta = _params_to_step_path(res.x, j, k, cfg.path_delta)
            if oracle_score(apply_F(drift, eta, cfg.solver)) <= 0:
                return eta
        if best is None or res.fun < best:
            best = res.fun
    return None


def argmin_jk(feasibility, alpha: float, beta: float, cost_bound: float,
              drift: DriftSpec = None, cfg: WitnessSearchConfig = WitnessSearchConfig()):
    """Scan (j,k) in cost order; return all feasible pairs at the first
    feasible cost level.

    ``feasibility`` is either a callable (j,k) -> witness-step-path-or-None,
    or an object with a ``score(path)`` method (<= 0 inside the set), in
    which case the automated witness search is used and ``drift`` is
    required.  Ties are reported, never collapsed: uniqueness only holds
    under the bounded-away hypothesis, which is not certified here.
    """
    pairs = enumerate_cost_order(alpha, beta, cost_bound)
    score = getattr(feasibility, "score", None)
    if callable(score):
        if drift is None:
            raise DomainError("automated witness search needs a drift")

        def probe(j, k):
            return _feasibility_search(score, j, k, drift, cfg)
    elif callable(feasibility):
        probe = feasibility
    else:
        raise DomainError("feasibility must be callable or carry a score method")

    result = ArgminResult(pairs=[], cost=math.inf, witnesses={}, searched=[])
    level = None
    for cp in pairs:
        if level is not None and cp.cost > level + 1e-12:
            break
        result.searched.append(cp)
        w = probe(cp.j, cp.k)
        if w is not None:
            if level is None:
                level = cp.cost
                result.cost = cp.cost
            result.pairs.append(cp)
            result.witnesses[cp.as_tuple()] = w
    result.proven = bool(result.pairs)
    return result


def inf_rate_over_set(oracle, drift: DriftSpec, alpha: float, beta: float,
                      cost_bound: float = 3.0,
                      cfg: WitnessSearchConfig = WitnessSearchConfig()):
    """Infimum of the solution-path rate over a set, by witness search.

    Returns (value, witness driver path); value is inf with witness None
    when nothing is found within the cost bound (reported as a bound, not a
    certificate).
    """
    res = argmin_jk(oracle, alpha, beta, cost_bound, drift=drift, cfg=cfg)
    if res.empty:
        return math.inf, None
    pair = res.pairs[0].as_tuple()
    return res.cost, res.witnesses[pair]
