"""Rate functions I and I-tilde, the (j,k) cost lattice, and witness search."""
import itertools
import math

import numpy as np
import pytest

from levyldp import (
    CadlagPath,
    SolverConfig,
    WitnessSearchConfig,
    apply_F,
    argmin_jk,
    cost_jk,
    enumerate_cost_order,
    inf_rate_over_set,
    jump_counts,
    largest_jumps_pi,
    make_drift,
    make_set,
    rate_I,
    rate_I_tilde,
    rate_pi_induced,
    step_path,
    zero_path,
)
from conftest import random_step_path

COARSE = SolverConfig(step=2 ** -8)
FAST_SEARCH = WitnessSearchConfig(n_multistarts=16, max_evals=400,
                                  solver=SolverConfig(step=2 ** -7),
                                  path_delta=2 ** -7)

THREE_JUMPS = step_path([(0.3, 2.0), (0.6, -1.0), (0.8, 0.5)])


# ---------------------------------------------------------------- jump counts

def test_jump_counts_with_threshold():
    p = jump_counts(THREE_JUMPS, eta=0.1)
    assert (p.up_count, p.down_count) == (2, 1)


def test_jump_counts_continuous_path():
    ramp = CadlagPath(0.2 * np.linspace(0, 1, 2 ** 8 + 1), [], delta=2 ** -8)
    p = jump_counts(ramp)
    assert (p.up_count, p.down_count) == (0, 0)


def test_jump_counts_high_threshold():
    p = jump_counts(THREE_JUMPS, eta=1.5)
    assert (p.up_count, p.down_count) == (1, 0)


# ---------------------------------------------------------------- rate_I

def test_rate_I_zero_path():
    assert rate_I(zero_path(), 1.5, 2.0) == 0.0


def test_rate_I_two_jumps():
    p = step_path([(0.3, 1.0), (0.7, -2.0)])
    assert rate_I(p, 1.5, 2.0) == pytest.approx(1.5)


def test_rate_I_ramp_infinite():
    ramp = CadlagPath(0.2 * np.linspace(0, 1, 2 ** 8 + 1), [], delta=2 ** -8)
    assert rate_I(ramp, 1.5, 2.0) == math.inf


def test_rate_I_nonzero_start_infinite():
    p = CadlagPath(np.zeros(2 ** 8 + 1), [], initial_value=0.5, delta=2 ** -8)
    assert rate_I(p, 1.5, 2.0) == math.inf


# ---------------------------------------------------------------- rate_I_tilde

def test_rate_tilde_zero_drift_equals_I():
    rng = np.random.default_rng(41)
    drift = make_drift("zero")
    for _ in range(20):
        g = random_step_path(rng)
        assert rate_I_tilde(g, drift, 1.5, 2.0, COARSE) == rate_I(g, 1.5, 2.0)


def test_rate_tilde_roundtrip_example():
    g = step_path([(0.3, 1.0), (0.7, -2.0)])
    drift = make_drift("cos_scaled", a=0.2)
    f = apply_F(drift, g)
    assert rate_I_tilde(f, drift, 1.5, 2.0) == pytest.approx(1.5)


def test_rate_tilde_rough_path_infinite():
    rng = np.random.default_rng(43)
    rough = CadlagPath(np.cumsum(rng.normal(0, 0.02, 2 ** 8 + 1)) * 1.0,
                       [], delta=2 ** -8)
    rough = CadlagPath(rough.grid_values - rough.grid_values[0], [],
                       delta=2 ** -8)
    drift = make_drift("cos_scaled", a=0.2)
    assert rate_I_tilde(rough, drift, 1.5, 2.0, COARSE) == math.inf


def test_tilde_compose_F_equals_I_corpus():
    """I-tilde(F(g)) = I(g) exactly on a corpus of random step paths."""
    rng = np.random.default_rng(47)
    drift = make_drift("cos_scaled", a=0.2)
    cfg = SolverConfig(step=2 ** -7)
    for _ in range(200):
        g = random_step_path(rng, delta=2 ** -7)
        # coarse solver: loosen the step-classification tolerance to match
        # the quadrature error so the count comparison stays exact
        assert rate_I_tilde(apply_F(drift, g, cfg), drift, 1.5, 2.0, cfg,
                            tol_step=1e-4) == rate_I(g, 1.5, 2.0)


def test_tilde_drift_independent_on_step_images():
    rng = np.random.default_rng(53)
    drifts = [make_drift("zero"), make_drift("const", c=0.3),
              make_drift("cos_scaled", a=0.2), make_drift("tanh_scaled", a=0.2)]
    for _ in range(10):
        g = random_step_path(rng, delta=2 ** -7)
        vals = [rate_I_tilde(apply_F(d, g, COARSE), d, 1.5, 2.0, COARSE,
                             tol_step=1e-4) for d in drifts]
        assert len(set(vals)) == 1


# ---------------------------------------------------------------- cost lattice

def test_cost_jk_values():
    assert cost_jk(1, 1, 1.5, 2.0) == pytest.approx(1.5)
    assert cost_jk(0, 0, 1.5, 2.0) == 0.0
    assert cost_jk(2, 0, 1.5, 2.0) == pytest.approx(1.0)


def test_enumerate_cost_order_example():
    pairs = enumerate_cost_order(1.5, 2.0, 1.0)
    assert [(p.j, p.k) for p in pairs] == [(0, 0), (1, 0), (2, 0), (0, 1)]
    assert [p.cost for p in pairs] == pytest.approx([0.0, 0.5, 1.0, 1.0])


def test_enumerate_cost_order_zero_bound():
    pairs = enumerate_cost_order(1.5, 2.0, 0.0)
    assert [(p.j, p.k) for p in pairs] == [(0, 0)]


def test_enumerate_cost_order_symmetric_ties():
    pairs = enumerate_cost_order(1.5, 1.5, 1.0)
    # alpha = beta: cost depends only on j + k; all sum-2 pairs tie at 1.0
    at_one = [(p.j, p.k) for p in pairs if p.cost == pytest.approx(1.0)]
    assert set(at_one) == {(2, 0), (1, 1), (0, 2)}


# ---------------------------------------------------------------- largest jumps

def test_pi_on_three_jumps():
    assert largest_jumps_pi(THREE_JUMPS) == (2.0, 1.0)


def test_pi_no_jumps():
    assert largest_jumps_pi(zero_path()) == (0.0, 0.0)


def test_pi_commutes_with_F():
    rng = np.random.default_rng(59)
    drift = make_drift("cos_scaled", a=0.2)
    for _ in range(100):
        g = random_step_path(rng, delta=2 ** -7)
        f = apply_F(drift, g, SolverConfig(step=2 ** -7))
        assert largest_jumps_pi(f) == largest_jumps_pi(g)


# ---------------------------------------------------------------- induced rate

def test_rate_pi_induced_values():
    assert rate_pi_induced((0.0, 0.0), 1.5, 2.0) == 0.0
    assert rate_pi_induced((2.0, 0.0), 1.5, 2.0) == pytest.approx(0.5)
    assert rate_pi_induced((2.0, 1.0), 1.5, 2.0) == pytest.approx(1.5)


def test_rate_pi_induced_brute_force():
    """Brute-force inf of I over step paths achieving pi = (2, 0): enumerate
    candidate jump-size combinations on a grid and minimize."""
    alpha, beta = 1.5, 2.0
    times = (0.25, 0.5, 0.75)
    sizes = (-1.0, -0.5, 0.5, 1.0, 2.0)
    best = math.inf
    for n in range(1, 4):
        for zs in itertools.product(sizes, repeat=n):
            ups = [z for z in zs if z > 0]
            downs = [-z for z in zs if z < 0]
            if (max(ups, default=0.0), max(downs, default=0.0)) != (2.0, 0.0):
                continue
            p = step_path(list(zip(times[:n], zs)))
            best = min(best, rate_I(p, alpha, beta))
    assert best == pytest.approx(rate_pi_induced((2.0, 0.0), alpha, beta))


def test_rate_pi_lower_bounds_tilde():
    rng = np.random.default_rng(61)
    drift = make_drift("cos_scaled", a=0.2)
    for _ in range(30):
        g = random_step_path(rng, delta=2 ** -7)
        f = apply_F(drift, g, SolverConfig(step=2 ** -7))
        assert rate_pi_induced(largest_jumps_pi(f), 1.5, 2.0) <= \
               rate_I_tilde(f, drift, 1.5, 2.0, SolverConfig(step=2 ** -7),
                            tol_step=1e-4) + 1e-12


# ---------------------------------------------------------------- argmin / witness search

def test_argmin_single_up_jump():
    drift = make_drift("cos_scaled", a=0.2)
    res = argmin_jk(make_set("sup_exceed", c=1.0), 1.5, 2.0, cost_bound=1.2,
                    drift=drift, cfg=FAST_SEARCH)
    assert [(q.j, q.k) for q in res.pairs] == [(1, 0)]
    assert res.cost == pytest.approx(0.5)
    w = res.witnesses[(1, 0)]
    assert len(w.jumps) == 1 and w.jumps[0].size > 0.8


def test_argmin_contains_zero_path():
    drift = make_drift("cos_scaled", a=0.2)
    res = argmin_jk(make_set("terminal_in", a=-0.5, b=0.5), 1.5, 2.0,
                    cost_bound=1.0, drift=drift, cfg=FAST_SEARCH)
    assert [(q.j, q.k) for q in res.pairs] == [(0, 0)] and res.cost == 0.0


def test_argmin_empty_within_bound():
    drift = make_drift("zero")
    res = argmin_jk(make_set("jump_count", min_up=3, size=0.4), 1.5, 2.0,
                    cost_bound=0.9, drift=drift, cfg=FAST_SEARCH)
    assert res.pairs == []


def test_inf_rate_sup_exceed():
    drift = make_drift("cos_scaled", a=0.2)
    cost, witness = inf_rate_over_set(make_set("sup_exceed", c=1.0), drift,
                                      1.5, 2.0, cost_bound=1.2, cfg=FAST_SEARCH)
    assert cost == pytest.approx(0.5)
    assert witness is not None


def test_inf_rate_whole_space_zero():
    drift = make_drift("cos_scaled", a=0.2)
    cost, witness = inf_rate_over_set(make_set("whole_space"), drift,
                                      1.5, 2.0, cost_bound=1.0, cfg=FAST_SEARCH)
    assert cost == 0.0


def test_inf_rate_terminal_below():
    drift = make_drift("cos_scaled", a=0.2)
    cost, _ = inf_rate_over_set(make_set("terminal_in", a=-50.0, b=-1.001),
                                drift, 1.5, 2.0, cost_bound=1.4,
                                cfg=FAST_SEARCH)
    assert cost == pytest.approx(1.0)  # one down jump, beta - 1


def test_argmin_two_sided():
    drift = make_drift("cos_scaled", a=0.2)
    res = argmin_jk(make_set("two_sided", c=1.0, c2=1.0), 1.5, 2.0,
                    cost_bound=1.6, drift=drift, cfg=FAST_SEARCH)
    assert (1, 1) in [(q.j, q.k) for q in res.pairs]
    assert res.cost == pytest.approx(1.5)
