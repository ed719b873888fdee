"""Rare-event experiments: probability estimation over an epsilon grid,
log-log slope studies, and normalized-ratio studies with cluster brackets.

The Monte Carlo engine is a vectorized transcription of the forward Euler
scheme in ``euler_solve_sde``: paths advance in shards of ~2^16 on a shared
uniform grid, with truncated compound-Poisson jumps bucketed into grid
cells and applied atomically.  Shards draw from independent, stream-indexed
RNGs and reduce by integer sums, so results are bit-identical across thread
counts.  A small audit subsample is re-solved with both scalar integrators
(``euler_solve_sde`` and ``apply_F``) on the reconstructed noise paths;
membership disagreement above 0.5% aborts the run.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .paths import CadlagPath, DomainError, JumpEvent, path_extrema, JUMP_RESOLUTION
from .levy import (TailModel, stable_preset, tail_upper, tail_lower,
                   truncated_mean, small_jump_variance, expected_jump_count,
                   GAUSS_INNER_FLOOR, MAX_EXPECTED_JUMPS)
from .solution import DriftSpec, SolverConfig, make_drift, apply_F, euler_solve_sde
from .sets import SetOracle, BatchStats, make_set
from .cluster import ClusterSampleSpec, estimate_Cjk, estimate_Cjk_tilde, _wilson_interval
from .rate import WitnessSearchConfig, argmin_jk, cost_jk
from .config import ConfigError, get as cfg_get, section as cfg_section

__all__ = [
    "EngineConfig", "ProbabilityEstimate", "ResultRecord", "IntegratorError",
    "estimate_probability", "run_slope_experiment", "run_ratio_experiment",
    "write_results", "build_model", "build_drift", "build_oracle",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


class IntegratorError(RuntimeError):
    """The two integrators disagree on too many audited paths."""


@dataclass(frozen=True)
class EngineConfig:
    """Vectorized Monte Carlo engine settings."""

    grid_n: int = 1024            # uniform Euler grid cells on [0,1]
    shard_size: int = 1 << 16
    path_floor: float = 0.02      # smallest retained jump, path units
    gaussian_smalljump: bool = True
    trunc_tau: float = None       # override: truncation in z units
    audit_fraction: float = 0.01
    audit_max: int = 256
    audit_tolerance: float = 0.005

    def __post_init__(self):
        if self.grid_n < 2 or self.shard_size < 1:
            raise DomainError("grid_n >= 2 and shard_size >= 1 required")
        if self.path_floor <= 0:
            raise DomainError("path_floor must be positive")


@dataclass
class ProbabilityEstimate:
    eps: float
    n: int
    hits_inner: int
    hits_outer: int
    out_of_ball: int
    audited: int
    audit_disagreements: int

    @property
    def p_inner(self):
        return self.hits_inner / self.n

    @property
    def p_outer(self):
        return self.hits_outer / self.n

    @property
    def ci_inner(self):
        return _wilson_interval(self.hits_inner, self.n)[1]

    @property
    def ci_outer(self):
        return _wilson_interval(self.hits_outer, self.n)[1]

    def to_dict(self):
        return {"eps": self.eps, "n": self.n,
                "hits_inner": self.hits_inner, "hits_outer": self.hits_outer,
                "p_inner": self.p_inner, "p_outer": self.p_outer,
                "ci_inner": list(self.ci_inner), "ci_outer": list(self.ci_outer),
                "out_of_ball": self.out_of_ball,
                "audited": self.audited,
                "audit_disagreements": self.audit_disagreements}


@dataclass
class ResultRecord:
    """Per-epsilon estimates plus derived slope/ratio quantities."""

    experiment: str
    records: list = field(default_factory=list)   # ProbabilityEstimate list
    derived: dict = field(default_factory=dict)
    ratios: list = field(default_factory=list)
    normalizers: list = field(default_factory=list)
    passed: bool = None


# ---------------------------------------------------------------------------
# shard engine


def _resolve_engine_tau(model, eps, eng: EngineConfig):
    tau = eng.trunc_tau if eng.trunc_tau is not None else eng.path_floor / eps
    while expected_jump_count(model, eps, tau) > MAX_EXPECTED_JUMPS / 10:
        tau *= 2.0
    return tau


def _is_zero_drift(drift: DriftSpec):
    return drift is None or drift.name == "zero"


def _simulate_shard(model, drift, oracle, eps, shard_n, rng, eng, audit_k):
    """Advance one shard of paths; return integer hit counts and audit data.

    Returns dict with hits_in, hits_out, out_ball (ints) and, when
    audit_k > 0, the raw noise data (Gaussian increments per grid step and
    exact-time jumps) of the first audit_k paths for external re-solving.
    """
    n_steps = eng.grid_n
    dt = 1.0 / n_steps
    tau = _resolve_engine_tau(model, eps, eng)
    mean_jumps = expected_jump_count(model, eps, tau)

    counts = rng.poisson(mean_jumps, size=shard_n)
    total = int(counts.sum())
    times = rng.random(total)
    times[times == 0.0] = 0.5  # zero-probability endpoint, keep times in (0,1)
    up_mass = tail_upper(model, tau) if model.c_plus > 0 else 0.0
    dn_mass = tail_lower(model, tau) if model.c_minus > 0 else 0.0
    frac_up = up_mass / (up_mass + dn_mass) if up_mass + dn_mass > 0 else 0.0
    sides_up = rng.random(total) < frac_up
    u = rng.random(total)
    u[u == 0.0] = 1.0
    sizes = eps * np.where(sides_up,
                           tau * u ** (-1.0 / model.alpha),
                           -tau * u ** (-1.0 / model.beta))
    path_idx = np.repeat(np.arange(shard_n), counts)

    gauss_var = eps * model.sigma ** 2
    if eng.gaussian_smalljump:
        z_lo = GAUSS_INNER_FLOOR / eps
        if z_lo < tau:
            gauss_var += eps * small_jump_variance(model, tau, z_lo=z_lo)
    sd = math.sqrt(gauss_var * dt) if gauss_var > 0 else 0.0
    mu = -truncated_mean(model, tau)  # compensator drift rate, path units

    # bucket jumps by grid cell; a jump in cell i lands at the end of step i
    cell = np.minimum((times / dt).astype(np.int64), n_steps - 1)
    order = np.argsort(cell, kind="stable")
    cell_s, pj, sz = cell[order], path_idx[order], sizes[order]
    starts = np.searchsorted(cell_s, np.arange(n_steps + 1))

    y = np.zeros(shard_n)
    runmax = np.zeros(shard_n)
    runmin = np.zeros(shard_n)
    zero_drift = _is_zero_drift(drift)
    b = None if zero_drift else drift.b
    audit_gauss = np.zeros((audit_k, n_steps)) if audit_k else None

    for i in range(n_steps):
        if sd > 0:
            noise = rng.normal(0.0, sd, size=shard_n)
            if audit_k:
                audit_gauss[:, i] = noise[:audit_k]
            if zero_drift:
                y += noise
                if mu:
                    y += mu * dt
            else:
                y += b(y) * dt + mu * dt + noise
        else:
            if not zero_drift:
                y += b(y) * dt + mu * dt
            elif mu:
                y += mu * dt
        s, e = starts[i], starts[i + 1]
        if e > s:
            np.maximum(runmax, y, out=runmax)  # pre-jump left limits
            np.minimum(runmin, y, out=runmin)
            np.add.at(y, pj[s:e], sz[s:e])
        np.maximum(runmax, y, out=runmax)
        np.minimum(runmin, y, out=runmin)

    stats = BatchStats(sup=runmax, inf=runmin, final=y)
    if oracle.jump_threshold is not None:
        thr = oracle.jump_threshold
        stats.up_counts = np.bincount(path_idx[sizes > thr], minlength=shard_n)
        stats.up_counts_closed = np.bincount(path_idx[sizes >= thr], minlength=shard_n)
        stats.down_counts = np.bincount(path_idx[sizes < -thr], minlength=shard_n)
        stats.down_counts_closed = np.bincount(path_idx[sizes <= -thr], minlength=shard_n)

    norm = np.maximum(runmax, -runmin)  # J1 distance to the zero path
    M = oracle.declared_bound_M
    in_ball_open = norm < M
    in_ball_closed = norm <= M
    member_in = oracle.batch_eval(stats, False) & in_ball_open
    member_out = oracle.batch_eval(stats, True) & in_ball_closed

    out = {
        "hits_in": int(member_in.sum()),
        "hits_out": int(member_out.sum()),
        "out_ball": int((~in_ball_closed).sum()),
    }
    if audit_k:
        keep = path_idx < audit_k
        out["audit"] = {
            "gauss": audit_gauss,
            "jump_path": path_idx[keep],
            "jump_time": times[keep],
            "jump_size": sizes[keep],
            "mu": mu,
        }
    return out



def _audit_noise_paths(audit_blobs, eng: EngineConfig, eps_unused=None):
    """Rebuild the audited noise paths as CadlagPath objects."""
    paths = []
    dt = 1.0 / eng.grid_n
    for blob in audit_blobs:
        gauss = blob["gauss"]
        mu = blob["mu"]
        k = gauss.shape[0]
        tgrid = np.arange(eng.grid_n + 1) * dt
        for i in range(k):
            cont = np.concatenate(([0.0], np.cumsum(gauss[i]))) + mu * tgrid
            mask = blob["jump_path"] == i
            jt, js = blob["jump_time"][mask], blob["jump_size"][mask]
            o = np.argsort(jt)
            jumps = [JumpEvent(float(t), float(s)) for t, s in zip(jt[o], js[o])
                     if abs(s) >= JUMP_RESOLUTION]
            paths.append(CadlagPath(cont, jumps, initial_value=0.0, delta=dt))
    return paths


def _audit_membership(oracle, path):
    hi, lo = path_extrema(path)
    return oracle.contains_outer(path) and max(hi, -lo) <= oracle.declared_bound_M


def _run_audit(drift, oracle, noise_paths, eng: EngineConfig):
    """Solve each audited noise path with both integrators, compare hits."""
    disagreements = 0
    dt = 1.0 / eng.grid_n
    cfg = SolverConfig(step=dt)
    the_drift = drift if drift is not None else make_drift("zero")
    for noise in noise_paths:
        y_euler = euler_solve_sde(the_drift, noise, step=dt)
        y_f = apply_F(the_drift, noise, cfg)
        if _audit_membership(oracle, y_euler) != _audit_membership(oracle, y_f):
            disagreements += 1
    return disagreements


def _shard_plan(n, shard_size):
    plan = []
    left, idx = n, 0
    while left > 0:
        take = min(shard_size, left)
        plan.append((idx, take))
        left -= take
        idx += 1
    return plan


def estimate_probability(model: TailModel, drift: DriftSpec, oracle: SetOracle,
                         eps: float, n: int, seed: int = 0,
                         eng: EngineConfig = EngineConfig(), threads: int = 1,
                         eps_index: int = 0) -> ProbabilityEstimate:
    """Monte Carlo estimate of P(solution path in A) at one epsilon.

    Counts contains_outer and contains_inner hits separately (each
    intersected with the declared radius-M ball); audits a subsample with
    both scalar integrators and raises IntegratorError on > 0.5%
    disagreement.  Deterministic given (seed, eps_index), independent of
    the thread count.
    """
    if n < 1000:
        raise DomainError("need n >= 1000 samples")
    if oracle.batch_eval is None:
        return _estimate_probability_scalar(model, drift, oracle, eps, n, seed,
                                            eng, eps_index)
    plan = _shard_plan(n, eng.shard_size)
    audit_total = min(eng.audit_max, max(1, math.ceil(eng.audit_fraction * n)))
    audit_total = min(audit_total, plan[0][1])

    tasks = [(idx, take, audit_total if idx == 0 else 0) for idx, take in plan]

    def run_shard(task):
        shard_idx, take, audit_k = task
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed,
                                   spawn_key=(eps_index, shard_idx)))
        return _simulate_shard(model, drift, oracle, eps, take,
                               rng, eng, audit_k)

    if threads > 1 and len(tasks) > 1:
        # Threads rather than worker processes: each shard is seeded from
        # (seed, eps_index, shard index) so the result is order- and
        # scheduling-independent, numpy releases the GIL on the bulk work,
        # and forking a long-lived parent (which can hold BLAS locks in
        # other threads) is avoided.
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_shard, tasks))
    else:
        results = [run_shard(t) for t in tasks]

    hits_in = sum(r["hits_in"] for r in results)
    hits_out = sum(r["hits_out"] for r in results)
    out_ball = sum(r["out_ball"] for r in results)
    audit_blobs = [r["audit"] for r in results if "audit" in r]
    noise_paths = _audit_noise_paths(audit_blobs, eng)
    disagreements = _run_audit(drift, oracle, noise_paths, eng)
    if disagreements > eng.audit_tolerance * max(1, len(noise_paths)):
        raise IntegratorError(
            f"integrators disagree on {disagreements}/{len(noise_paths)} audited paths")
    return ProbabilityEstimate(eps=eps, n=n, hits_inner=hits_in,
                               hits_outer=hits_out, out_of_ball=out_ball,
                               audited=len(noise_paths),
                               audit_disagreements=disagreements)


def _estimate_probability_scalar(model, drift, oracle, eps, n, seed, eng, eps_index):
    """Fallback for oracles without a vectorized stats test (e.g. J1 tubes)."""
    from .levy import SimConfig, sample_scaled_path

    the_drift = drift if drift is not None else make_drift("zero")
    dt = 1.0 / eng.grid_n
    tau = _resolve_engine_tau(model, eps, eng)
    sim = SimConfig(epsilon=eps, trunc_tau=tau,
                    gaussian_smalljump=eng.gaussian_smalljump, grid_delta=dt)
    audit_total = min(eng.audit_max, max(1, math.ceil(eng.audit_fraction * n)))
    hits_in = hits_out = out_ball = disagreements = 0
    zero = _is_zero_drift(drift)
    for i in range(n):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(eps_index, i)))
        noise = sample_scaled_path(model, sim, rng=rng)
        y = noise if zero else euler_solve_sde(the_drift, noise, step=dt)
        hi, lo = path_extrema(y)
        norm = max(hi, -lo)
        if norm > oracle.declared_bound_M:
            out_ball += 1
        if oracle.contains_inner(y) and norm < oracle.declared_bound_M:
            hits_in += 1
        outer_hit = oracle.contains_outer(y) and norm <= oracle.declared_bound_M
        if outer_hit:
            hits_out += 1
        if i < audit_total:
            y_f = apply_F(the_drift, noise, SolverConfig(step=dt))
            if _audit_membership(oracle, y_f) != outer_hit:
                disagreements += 1
    if disagreements > eng.audit_tolerance * max(1, audit_total):
        raise IntegratorError(
            f"integrators disagree on {disagreements}/{audit_total} audited paths")
    return ProbabilityEstimate(eps=eps, n=n, hits_inner=hits_in,
                               hits_outer=hits_out, out_of_ball=out_ball,
                               audited=min(audit_total, n),
                               audit_disagreements=disagreements)


# ---------------------------------------------------------------------------
# config -> objects


_MODEL_KEYS = {"stable", "alpha", "beta", "c_plus", "c_minus", "sigma"}


def build_model(cfg: dict) -> TailModel:
    m = cfg_section(cfg, "model")
    unknown = set(m) - _MODEL_KEYS
    if unknown:
        raise ConfigError("unknown config key model."
                          + ", model.".join(sorted(unknown)))
    if "stable" in m:
        return stable_preset(float(m["stable"]))
    try:
        return TailModel(alpha=float(m["alpha"]), beta=float(m["beta"]),
                         c_plus=float(m.get("c_plus", 1.0)),
                         c_minus=float(m.get("c_minus", 1.0)),
                         sigma=float(m.get("sigma", 0.0)))
    except KeyError as exc:
        raise ConfigError(f"missing required config key model.{exc.args[0]}") from exc


def build_drift(cfg: dict) -> DriftSpec:
    d = cfg_section(cfg, "drift")
    name = d.pop("name", "zero")
    return make_drift(name, **{k: float(v) for k, v in d.items()})


def build_oracle(cfg: dict) -> SetOracle:
    s = cfg_section(cfg, "set")
    if "name" not in s:
        raise ConfigError("missing required config key set.name")
    name = s.pop("name")
    kwargs = {}
    rename = {"bound_M": "bound_M", "margin": "margin"}
    for k, v in s.items():
        kwargs[rename.get(k, k)] = v
    try:
        return make_set(name, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for set {name!r}: {exc}") from exc


def build_engine(cfg: dict) -> EngineConfig:
    s = cfg_section(cfg, "sim")
    a = cfg_section(cfg, "audit")
    return EngineConfig(
        grid_n=int(s.get("grid_n", 1024)),
        shard_size=int(s.get("shard_size", 1 << 16)),
        path_floor=float(s.get("path_floor", 0.02)),
        gaussian_smalljump=bool(s.get("gaussian_smalljump", True)),
        trunc_tau=s.get("trunc_tau"),
        audit_fraction=float(a.get("fraction", 0.01)),
        audit_max=int(a.get("max", 256)),
        audit_tolerance=float(a.get("tolerance", 0.005)),
    )


def _epsilons(cfg):
    eps = cfg_get(cfg, "eps", required=True)
    eps = [float(e) for e in (eps if isinstance(eps, list) else [eps])]
    if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ConfigError("eps must be strictly decreasing")
    if any(not (0 < e <= 1) for e in eps):
        raise ConfigError("eps values must lie in (0,1]")
    return eps


def _samples_per_eps(cfg, n_eps):
    n = cfg_get(cfg, "n_samples", required=True)
    ns = [int(x) for x in (n if isinstance(n, list) else [n] * n_eps)]
    if len(ns) == 1:
        ns = ns * n_eps
    if len(ns) != n_eps:
        raise ConfigError("n_samples must be scalar or one entry per eps")
    if any(x < 1000 for x in ns):
        raise ConfigError("n_samples entries must be >= 1000")
    return ns


class _ScoreOnly:
    """Non-callable wrapper so argmin_jk uses the automated witness search."""

    def __init__(self, score):
        self.score = score


def _resolve_argmin(cfg, oracle, drift, model, prefix):
    sec = cfg_section(cfg, prefix)
    if "force_jk" in sec:
        jk = sec["force_jk"]
        if not (isinstance(jk, list) and len(jk) == 2):
            raise ConfigError(f"{prefix}.force_jk must be 'j,k'")
        j, k = int(jk[0]), int(jk[1])
        return (j, k), cost_jk(j, k, model.alpha, model.beta), False
    bound = float(sec.get("cost_bound", 3.0))
    wcfg = WitnessSearchConfig(seed=int(cfg_get(cfg, "seed", 0)))
    res = argmin_jk(_ScoreOnly(oracle.score), model.alpha, model.beta, bound,
                    drift=drift, cfg=wcfg)
    if res.empty:
        return None, math.inf, True
    pair = res.pairs[0]
    return (pair.j, pair.k), res.cost, False


def _collect_estimates(cfg, model, drift, oracle, eng, threads):
    eps_list = _epsilons(cfg)
    ns = _samples_per_eps(cfg, len(eps_list))
    seed = int(cfg_get(cfg, "seed", 0))
    return [estimate_probability(model, drift, oracle, e, n, seed=seed,
                                 eng=eng, threads=threads, eps_index=i)
            for i, (e, n) in enumerate(zip(eps_list, ns))]


def _normalizer(eps, jk, model):
    """(n nu[n, inf))^J (n nu(-inf, -n])^K at n = 1/eps for the limit
    power-law measures x^{-alpha}, |x|^{-beta}: eps^{(alpha-1)J + (beta-1)K}."""
    j, k = jk
    return eps ** ((model.alpha - 1.0) * j + (model.beta - 1.0) * k)


# ---------------------------------------------------------------------------
# slope experiment


def run_slope_experiment(cfg: dict, threads: int = 1) -> ResultRecord:
    """Fit the log p(eps) vs log(1/eps) slope and compare with the rate value.

    Points with fewer than slope.min_hits outer hits are excluded from the
    fit and flagged.  The fit is plain least squares (each usable grid point
    counts once, so the more asymptotic small-eps points are not drowned out
    by the high-precision large-eps ones); the delta-method variances of
    log p enter only through the error propagation for the slope CI.
    """
    model = build_model(cfg)
    drift = build_drift(cfg)
    oracle = build_oracle(cfg)
    eng = build_engine(cfg)
    sec = cfg_section(cfg, "slope")
    min_hits = int(sec.get("min_hits", 30))
    tol = float(sec.get("tol", 0.15))

    jk, cost, empty = _resolve_argmin(cfg, oracle, drift, model, "slope")
    theory_slope = -cost if not empty else -math.inf

    records = _collect_estimates(cfg, model, drift, oracle, eng, threads)

    xs, ys, ws, excluded = [], [], [], []
    for r in records:
        if r.hits_outer < min_hits:
            excluded.append(r.eps)
            continue
        p = r.p_outer
        xs.append(math.log(1.0 / r.eps))
        ys.append(math.log(p))
        ws.append((1.0 - p) / max(1e-300, r.n * p))  # Var[log p_hat]
    if len(xs) < 2:
        raise DomainError("fewer than two usable points for the slope fit")
    slope, slope_se = _ls_slope(np.array(xs), np.array(ys), np.array(ws))
    slope_ci = (slope - 1.96 * slope_se, slope + 1.96 * slope_se)

    passed = bool(not math.isinf(theory_slope)
                  and abs(slope - theory_slope) <= tol)
    norm_jk = jk if jk is not None else (0, 0)
    rec = ResultRecord(
        experiment="slope", records=records,
        ratios=[r.p_outer / _normalizer(r.eps, norm_jk, model) for r in records],
        normalizers=[_normalizer(r.eps, norm_jk, model) for r in records],
        derived={
            "slope": slope, "slope_se": slope_se, "slope_ci": list(slope_ci),
            "theory_slope": theory_slope, "argmin_jk": jk,
            "excluded_eps": excluded, "tol": tol,
            "hypotheses": _hypothesis_report(oracle),
        },
        passed=passed)
    return rec


def _ls_slope(x, y, var_y):
    """Ordinary least-squares slope; the standard error propagates the
    per-point variances of y through the closed-form slope estimator."""
    xbar = x.mean()
    sxx = ((x - xbar) ** 2).sum()
    slope = ((x - xbar) * (y - y.mean())).sum() / sxx
    se = math.sqrt((((x - xbar) / sxx) ** 2 * var_y).sum())
    return slope, se


def _hypothesis_report(oracle):
    return {"declared_bound_M": oracle.declared_bound_M,
            "declared_margin": oracle.declared_margin,
            "status": "asserted by the oracle; spot-checked by sampling, not certified"}


# ---------------------------------------------------------------------------
# ratio experiment


def _cluster_bracket(cfg, model, drift, oracle, jk, seed):
    """MC bracket [inner estimate, outer estimate] of the limiting cluster
    mass of the set, with tail-constant weights from the model."""
    sec = cfg_section(cfg, "ratio")
    n_cluster = int(sec.get("n_cluster", 200_000))
    floor = float(sec.get("floor", 0.5))
    spec = ClusterSampleSpec(j=jk[0], k=jk[1], floor_up=floor, floor_down=floor,
                             n_samples=n_cluster, seed=seed,
                             alpha=model.alpha, beta=model.beta,
                             weight_up=model.c_plus, weight_down=model.c_minus)
    ests = {}
    for label, outer in (("inner", False), ("outer", True)):
        if _is_zero_drift(drift) and oracle.batch_steps is not None:
            est = estimate_Cjk(lambda p, o=outer: oracle(p, o), spec,
                               outer=outer, batch_contains=oracle.batch_steps)
        else:
            def batch(paths, o, flag=None):
                fn = oracle.contains_outer if o else oracle.contains_inner
                return np.array([fn(p) for p in paths], dtype=bool)
            est = estimate_Cjk_tilde(lambda p, o=outer: oracle(p, o), drift, spec,
                                     outer=outer, batch_solution_contains=batch)
        ests[label] = est
    return ests


def run_ratio_experiment(cfg: dict, threads: int = 1) -> ResultRecord:
    """Track p(eps) / normalizer against the cluster-measure bracket.

    Normal branch: PASS when the final ratio CI intersects the bracket
    [inner estimate, outer estimate] inflated by both estimates' CIs, and
    the last three ratios are not diverging from it.  When the argmin is
    empty within the cost bound, switches to the vanishing-ratio branch:
    PASS when ratios decrease monotonically to below the configured
    fraction of the initial ratio.
    """
    model = build_model(cfg)
    drift = build_drift(cfg)
    oracle = build_oracle(cfg)
    eng = build_engine(cfg)
    sec = cfg_section(cfg, "ratio")
    seed = int(cfg_get(cfg, "seed", 0))

    jk, cost, empty = _resolve_argmin(cfg, oracle, drift, model, "ratio")
    vanishing = empty or bool(sec.get("vanishing", False))
    if vanishing:
        forced = sec.get("norm_jk")
        if not (isinstance(forced, list) and len(forced) == 2):
            raise ConfigError("vanishing-ratio branch needs ratio.norm_jk=j,k "
                              "to fix the normalizer order")
        jk = (int(forced[0]), int(forced[1]))

    records = _collect_estimates(cfg, model, drift, oracle, eng, threads)
    normalizers = [_normalizer(r.eps, jk, model) for r in records]
    ratios = [r.p_outer / nz for r, nz in zip(records, normalizers)]
    ratio_cis = [(r.ci_outer[0] / nz, r.ci_outer[1] / nz)
                 for r, nz in zip(records, normalizers)]

    derived = {"argmin_jk": None if vanishing else list(jk),
               "norm_jk": list(jk), "cost": cost,
               "vanishing_branch": vanishing,
               "ratio_cis": [list(c) for c in ratio_cis],
               "hypotheses": _hypothesis_report(oracle)}

    if vanishing:
        slack = float(sec.get("mono_slack", 0.02))
        frac = float(sec.get("vanish_fraction", 0.1))
        mono = all(r2 <= r1 * (1.0 + slack) for r1, r2 in zip(ratios, ratios[1:]))
        final_ok = ratios[-1] < frac * ratios[0] if ratios[0] > 0 else False
        derived.update({"monotone": mono, "vanish_fraction": frac,
                        "final_over_initial": (ratios[-1] / ratios[0]
                                               if ratios[0] > 0 else math.inf)})
        passed = bool(mono and final_ok)
    else:
        bracket = _cluster_bracket(cfg, model, drift, oracle, jk, seed)
        lo = bracket["inner"].ci95[0]
        hi = bracket["outer"].ci95[1]
        f_lo, f_hi = ratio_cis[-1]
        intersects = f_lo <= hi and f_hi >= lo
        trend_factor = float(sec.get("trend_factor", 1.5))
        mid = 0.5 * (bracket["inner"].value + bracket["outer"].value)

        def dist(r):
            if lo <= r <= hi:
                return 0.0
            return min(abs(r - lo), abs(r - hi))

        tail3 = ratios[-3:]
        trend_ok = (len(tail3) < 3
                    or dist(tail3[-1]) <= dist(tail3[0]) * trend_factor + 1e-12)
        derived.update({
            "bracket": {k: v.to_dict() for k, v in bracket.items()},
            "bracket_interval": [lo, hi], "bracket_mid": mid,
            "intersects": intersects, "trend_ok": trend_ok,
            "last_three_ratios": tail3,
        })
        passed = bool(intersects and trend_ok)

    return ResultRecord(experiment="ratio", records=records, ratios=ratios,
                        normalizers=normalizers, derived=derived, passed=passed)


# ---------------------------------------------------------------------------
# persistence

CSV_HEADER = "eps,n,hits_inner,hits_outer,p_inner,p_outer,ci_lo,ci_hi,ratio,normalizer"


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def results_csv(record: ResultRecord) -> str:
    lines = [CSV_HEADER]
    for r, ratio, nz in zip(record.records, record.ratios, record.normalizers):
        ci = r.ci_outer
        lines.append(",".join(_fmt(v) for v in (
            r.eps, r.n, r.hits_inner, r.hits_outer, r.p_inner, r.p_outer,
            ci[0], ci[1], ratio, nz)))
    return "\n".join(lines) + "\n"


def results_json(record: ResultRecord) -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "experiment": record.experiment,
        "pass": record.passed,
        "records": [r.to_dict() for r in record.records],
        "ratios": record.ratios,
        "normalizers": record.normalizers,
        "derived": _jsonable(record.derived),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def gnuplot_script(record: ResultRecord, csv_name: str) -> str:
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel '1/epsilon'",
        "set ylabel 'probability / ratio'",
        "set key left top",
    ]
    if record.experiment == "slope":
        slope = record.derived.get("slope", 0.0)
        theory = record.derived.get("theory_slope", 0.0)
        lines.append(
            f"plot '{csv_name}' using (1/$1):6 with linespoints title 'p_outer', \\")
        lines.append(f"     x**({_fmt(slope)}) title 'fit slope {_fmt(slope)}', \\")
        lines.append(f"     x**({_fmt(theory)}) title 'theory slope {_fmt(theory)}'")
    else:
        lines.append(
            f"plot '{csv_name}' using (1/$1):9 with linespoints title 'ratio'")
        interval = record.derived.get("bracket_interval")
        if interval:
            lines.append(f"replot {_fmt(interval[0])} title 'bracket lo'")
            lines.append(f"replot {_fmt(interval[1])} title 'bracket hi'")
    return "\n".join(lines) + "\n"


def write_results(record: ResultRecord, out_dir: str, basename: str,
                  fmt: str = "csv") -> list:
    """Write basename.csv/.json/.gp into out_dir; returns the file list."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    csv_name = basename + ".csv"
    targets = {
        csv_name: results_csv(record),
        basename + ".json": results_json(record),
        basename + ".gp": gnuplot_script(record, csv_name),
    }
    if fmt == "json":
        targets.pop(csv_name)
        targets.pop(basename + ".gp")
    for name, text in targets.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)
    return written
