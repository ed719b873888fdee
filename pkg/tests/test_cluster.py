"""Monte Carlo evaluation of the limit measures C_{j,k} and pushforwards."""
import math

import numpy as np
import pytest
from scipy import stats

from levyldp import (
    ClusterSampleSpec,
    SolverConfig,
    estimate_Cjk,
    estimate_Cjk_tilde,
    make_drift,
    make_set,
    sample_djk_batch,
    sample_djk_path,
    step_path,
)


def _joint_ci_overlap(e1, e2):
    return e1.ci95[0] <= e2.ci95[1] and e2.ci95[0] <= e1.ci95[1]


# ---------------------------------------------------------------- sampler law

def test_zero_jump_sample_is_zero_path():
    spec = ClusterSampleSpec(j=0, k=0)
    p = sample_djk_path(spec, np.random.default_rng(0))
    assert p.is_step() and len(p.jumps) == 0 and p.eval(1.0) == 0.0


def test_sample_sizes_ks_pareto():
    spec = ClusterSampleSpec(j=1, k=0, floor_up=1.0, alpha=1.5, n_samples=10 ** 5)
    rng = np.random.default_rng(1)
    times, sizes = sample_djk_batch(spec, rng, n=10 ** 5)
    up = sizes.ravel()
    res = stats.kstest(up, lambda x: 1.0 - np.clip(x, 1.0, None) ** -1.5)
    assert res.pvalue > 0.01


def test_sample_times_uniform():
    spec = ClusterSampleSpec(j=1, k=1, floor_up=1.0, floor_down=1.0)
    rng = np.random.default_rng(2)
    times, sizes = sample_djk_batch(spec, rng, n=10 ** 5)
    res = stats.kstest(times.ravel(), "uniform")
    assert res.pvalue > 0.01


def test_sample_path_structure():
    spec = ClusterSampleSpec(j=2, k=1, floor_up=0.5, floor_down=0.25,
                             alpha=1.5, beta=2.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = sample_djk_path(spec, rng)
        ups = [j for j in p.jumps if j.size > 0]
        downs = [j for j in p.jumps if j.size < 0]
        assert len(ups) == 2 and len(downs) == 1
        assert all(j.size >= 0.5 for j in ups)
        assert all(-j.size >= 0.25 for j in downs)


# ---------------------------------------------------------------- estimate_Cjk

def _single_up_jump_at_least(a):
    """Set of paths whose single up-jump is >= a, via the jump registry."""
    oracle = make_set("sup_exceed", c=a)
    return oracle


def test_dirac_at_zero():
    spec = ClusterSampleSpec(j=0, k=0, n_samples=100)
    inside = estimate_Cjk(make_set("terminal_in", a=-0.5, b=0.5), spec)
    assert inside.value == 1.0 and inside.std_error == 0.0
    outside = estimate_Cjk(make_set("sup_exceed", c=1.0), spec)
    assert outside.value == 0.0 and outside.std_error == 0.0


def test_single_jump_tail_analytic():
    # C_{1,0}({single up-jump >= 2}) = 2^{-1.5}
    spec = ClusterSampleSpec(j=1, k=0, floor_up=1.0, alpha=1.5,
                             n_samples=10 ** 6, seed=10)
    def contains(times, sizes, outer):
        # columns are time-ordered; take the largest positive entry per row
        return np.where(sizes > 0, sizes, 0.0).max(axis=1) >= 2.0
    est = estimate_Cjk(make_set("sup_exceed", c=2.0), spec,
                       batch_contains=contains)
    assert est.value == pytest.approx(2.0 ** -1.5, rel=0.02)
    assert est.ci95[0] <= est.value <= est.ci95[1]
    assert not est.floor_leakage_flag


def test_two_jump_product_analytic():
    # C_{1,1}({up >= 2 and down >= 2}) = 2^{-1.5} * 2^{-2}
    spec = ClusterSampleSpec(j=1, k=1, floor_up=1.0, floor_down=1.0,
                             alpha=1.5, beta=2.0, n_samples=10 ** 6, seed=11)
    def contains(times, sizes, outer):
        up = np.where(sizes > 0, sizes, 0.0).max(axis=1)
        down = np.where(sizes < 0, -sizes, 0.0).max(axis=1)
        return (up >= 2.0) & (down >= 2.0)
    est = estimate_Cjk(make_set("two_sided", c=2.0, c2=2.0), spec,
                       batch_contains=contains)
    assert est.value == pytest.approx(2.0 ** -1.5 * 2.0 ** -2, rel=0.03)


def test_mass_factor_identity():
    spec = ClusterSampleSpec(j=1, k=0, floor_up=0.5, alpha=1.5,
                             n_samples=10 ** 4, seed=12)
    est = estimate_Cjk(make_set("sup_exceed", c=1.0), spec)
    mass = 0.5 ** -1.5
    assert est.value == pytest.approx(mass * est.acceptance_rate, rel=1e-12)


def test_floor_halving_invariance():
    base = dict(j=1, k=0, alpha=1.5, n_samples=4 * 10 ** 5, seed=13)
    # single up jump: the sup of the path equals the jump size
    batch = lambda t, s, o: s[:, 0] >= 1.0
    e1 = estimate_Cjk(make_set("sup_exceed", c=1.0),
                      ClusterSampleSpec(floor_up=0.5, **base),
                      batch_contains=batch)
    e2 = estimate_Cjk(make_set("sup_exceed", c=1.0),
                      ClusterSampleSpec(floor_up=0.25, **base),
                      batch_contains=batch)
    assert not e1.floor_leakage_flag and not e2.floor_leakage_flag
    assert _joint_ci_overlap(e1, e2)


def test_floor_leakage_flagged():
    # floor at the set boundary: accepted samples sit within 10% of the floor
    spec = ClusterSampleSpec(j=1, k=0, floor_up=1.0, alpha=1.5,
                             n_samples=10 ** 4, seed=14)
    est = estimate_Cjk(make_set("sup_exceed", c=1.0), spec)
    assert est.floor_leakage_flag


def test_product_factorization():
    base = dict(alpha=1.5, beta=2.0, n_samples=4 * 10 ** 5, seed=15)
    joint = estimate_Cjk(
        make_set("two_sided", c=2.0, c2=2.0),
        ClusterSampleSpec(j=1, k=1, floor_up=1.0, floor_down=1.0, **base),
        batch_contains=lambda t, s, o: (
            (np.where(s > 0, s, 0.0).max(axis=1) >= 2.0)
            & (np.where(s < 0, -s, 0.0).max(axis=1) >= 2.0)))
    up = estimate_Cjk(
        make_set("sup_exceed", c=2.0),
        ClusterSampleSpec(j=1, k=0, floor_up=1.0, **base),
        batch_contains=lambda t, s, o: s[:, 0] >= 2.0)  # single up column
    down = estimate_Cjk(
        make_set("sup_exceed", c=2.0),
        ClusterSampleSpec(j=0, k=1, floor_down=1.0, **base),
        batch_contains=lambda t, s, o: -s[:, 0] >= 2.0)
    prod = up.value * down.value
    slack = 3.0 * (up.value * down.std_error + down.value * up.std_error
                   + joint.std_error)
    assert abs(joint.value - prod) <= slack


# ---------------------------------------------------------------- pushforward

def test_tilde_zero_drift_matches_plain():
    spec = ClusterSampleSpec(j=1, k=0, floor_up=0.5, alpha=1.5,
                             n_samples=2 * 10 ** 4, seed=16)
    oracle = make_set("sup_exceed", c=1.0)
    plain = estimate_Cjk(oracle, spec)
    pushed = estimate_Cjk_tilde(oracle, make_drift("zero"), spec,
                                solver_cfg=SolverConfig(step=2 ** -7),
                                path_delta=2 ** -7)
    assert _joint_ci_overlap(plain, pushed)


def test_tilde_zero_drift_random_sets():
    rng = np.random.default_rng(17)
    for _ in range(5):
        c = float(rng.uniform(0.8, 2.5))
        spec = ClusterSampleSpec(j=1, k=0, floor_up=min(0.5, c / 2),
                                 alpha=1.5, n_samples=10 ** 4,
                                 seed=int(rng.integers(1 << 30)))
        oracle = make_set("sup_exceed", c=c)
        plain = estimate_Cjk(oracle, spec)
        pushed = estimate_Cjk_tilde(oracle, make_drift("zero"), spec,
                                    solver_cfg=SolverConfig(step=2 ** -7),
                                    path_delta=2 ** -7)
        assert _joint_ci_overlap(plain, pushed)


def test_tilde_drift_sandwich():
    """A drift bounded by 0.2 can shift the sup by at most 0.2, so the
    pushed measure of {sup > 1} sits between the plain measures of
    {jump >= 1.2} and {jump >= 0.8}."""
    drift = make_drift("cos_scaled", a=0.2)
    spec = ClusterSampleSpec(j=1, k=0, floor_up=0.4, alpha=1.5,
                             n_samples=2 * 10 ** 4, seed=18)
    pushed = estimate_Cjk_tilde(make_set("sup_exceed", c=1.0), drift, spec,
                                solver_cfg=SolverConfig(step=2 ** -7),
                                path_delta=2 ** -7)
    hi = estimate_Cjk(make_set("sup_exceed", c=0.8), spec)
    lo = estimate_Cjk(make_set("sup_exceed", c=1.2), spec)
    assert pushed.value <= hi.ci95[1] + 3.0 * pushed.std_error
    assert pushed.value >= lo.ci95[0] - 3.0 * pushed.std_error


def test_monotonicity_in_the_set():
    spec = ClusterSampleSpec(j=1, k=0, floor_up=0.5, alpha=1.5,
                             n_samples=10 ** 5, seed=19)
    small = estimate_Cjk(make_set("sup_exceed", c=2.0), spec,
                         batch_contains=lambda t, s, o: s[:, 0] >= 2.0)
    large = estimate_Cjk(make_set("sup_exceed", c=1.0), spec,
                         batch_contains=lambda t, s, o: s[:, 0] >= 1.0)
    assert small.value <= large.value + small.std_error + large.std_error
