"""Regularly varying Levy measure model and sampling of the scaled driver.

The driving noise is the small-parameter process
    eps * L^eps_t = sqrt(eps) * B_t + eps * (compensated jump integral)
whose jump intensity is eps^{-1} ds x nu, with two-sided power tails
    nu([x, inf)) = c_plus * L_plus(x) * x^{-alpha},
    nu((-inf,-x]) = c_minus * L_minus(x) * x^{-beta}.

Sampling truncates jumps below tau in z-space: the surviving jumps form a
compound Poisson process (uniform times, Pareto sizes), the deterministic
compensator of the truncated big jumps is added to the continuous part, and
the sub-tau compensated jumps are either dropped or replaced by a Brownian
motion with matched variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .paths import CadlagPath, JumpEvent, DomainError, JUMP_RESOLUTION

__all__ = [
    "TailModel",
    "SimConfig",
    "tail_upper",
    "tail_lower",
    "sample_jump_size",
    "sample_scaled_path",
    "stable_preset",
    "default_truncation",
    "small_jump_variance",
    "truncated_mean",
    "expected_jump_count",
]

MAX_EXPECTED_JUMPS = 1e8
DEFAULT_MAX_JUMPS_PER_PATH = 1e4
# inner z-cutoff (in path units, i.e. eps*z) for the matched-variance
# Gaussian when the idealized power law has no second moment near 0
GAUSS_INNER_FLOOR = 1e-6


def _const_one(x):
    return 1.0


@dataclass(frozen=True)
class TailModel:
    """Two-sided regularly varying tail model with optional Brownian part."""

    alpha: float
    beta: float
    c_plus: float = 1.0
    c_minus: float = 1.0
    sigma: float = 0.0
    L_plus: callable = _const_one
    L_minus: callable = _const_one
    constant_L_beyond: float = 0.0  # L_{+/-} assumed constant for x >= this

    def __post_init__(self):
        if self.alpha <= 1.0 or self.beta <= 1.0:
            raise DomainError("tail indices must exceed 1")
        if self.c_plus < 0 or self.c_minus < 0 or self.sigma < 0:
            raise DomainError("tail constants and sigma must be nonnegative")

    def is_symmetric(self):
        return self.alpha == self.beta and self.c_plus == self.c_minus


def tail_upper(model: TailModel, x: float) -> float:
    """nu([x, inf)) = c_plus * L_plus(x) * x^{-alpha}."""
    if x <= 0:
        raise DomainError("tail evaluated at nonpositive x")
    return model.c_plus * model.L_plus(x) * x ** (-model.alpha)


def tail_lower(model: TailModel, x: float) -> float:
    """nu((-inf, -x]) = c_minus * L_minus(x) * x^{-beta}."""
    if x <= 0:
        raise DomainError("tail evaluated at nonpositive x")
    return model.c_minus * model.L_minus(x) * x ** (-model.beta)


def sample_jump_size(model: TailModel, side: str, floor: float, u) -> float:
    """Inverse-CDF Pareto sample conditioned on size >= floor.

    With constant slowly varying factor, P(size > x | size >= floor)
    = (x/floor)^{-alpha}, so size = floor * u^{-1/alpha}.
    """
    if floor <= 0:
        raise DomainError("floor must be positive")
    idx = model.alpha if side == "up" else model.beta
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or np.any(u > 1):
        raise DomainError("u must lie in (0,1]")
    out = floor * u ** (-1.0 / idx)
    return out if out.ndim else float(out)


def stable_preset(alpha: float) -> TailModel:
    """Symmetric alpha-stable model: nu(dz) = |z|^{-1-alpha} dz.

    Integrating the density gives tails x^{-alpha} / alpha on both sides.
    """
    if not (1.0 < alpha < 2.0):
        raise DomainError("stable preset requires alpha in (1,2)")
    return TailModel(alpha=alpha, beta=alpha, c_plus=1.0 / alpha,
                     c_minus=1.0 / alpha, sigma=0.0)


@dataclass(frozen=True)
class SimConfig:
    """One-path simulation settings for the scaled driver."""

    epsilon: float
    trunc_tau: float | None = None   # z-space truncation; None = default rule
    gaussian_smalljump: bool = True
    grid_delta: float = 2.0 ** -12
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise DomainError("epsilon must lie in (0,1]")
        if self.trunc_tau is not None and self.trunc_tau <= 0:
            raise DomainError("trunc_tau must be positive")
        if self.grid_delta <= 0:
            raise DomainError("grid_delta must be positive")


def _check_constant_L(model):
    # the inverse-CDF sampler needs constant slowly varying factors in the tail
    for L, x_star in ((model.L_plus, model.constant_L_beyond),
                      (model.L_minus, model.constant_L_beyond)):
        probe = max(x_star, 1.0)
        if abs(L(probe) - L(10 * probe)) > 1e-12:
            raise DomainError("sampling requires slowly varying factors constant beyond x*")


def small_jump_variance(model: TailModel, tau: float, z_lo: float = 0.0) -> float:
    """integral of z^2 nu(dz) over z_lo < |z| <= tau (constant L).

    The per-side density is c * idx * z^{-idx-1}; for idx >= 2 the integral
    diverges at 0, so a positive inner cutoff is required there.
    """
    if tau <= 0:
        raise DomainError("tau must be positive")
    total = 0.0
    for c, idx in ((model.c_plus, model.alpha), (model.c_minus, model.beta)):
        if c == 0:
            continue
        if idx < 2.0:
            lo_part = z_lo ** (2.0 - idx) if z_lo > 0 else 0.0
            total += c * idx * (tau ** (2.0 - idx) - lo_part) / (2.0 - idx)
        else:
            if z_lo <= 0:
                raise DomainError("small-jump variance diverges at 0 for index >= 2; "
                                  "need a positive inner cutoff")
            if idx == 2.0:
                total += 2.0 * c * math.log(tau / z_lo)
            else:
                total += c * idx * (z_lo ** (2.0 - idx) - tau ** (2.0 - idx)) / (idx - 2.0)
    return total


def truncated_mean(model: TailModel, tau: float) -> float:
    """integral of z nu(dz) over |z| > tau (finite since alpha, beta > 1)."""
    up = model.c_plus * model.alpha * tau ** (1.0 - model.alpha) / (model.alpha - 1.0)
    dn = model.c_minus * model.beta * tau ** (1.0 - model.beta) / (model.beta - 1.0)
    return up - dn


def expected_jump_count(model: TailModel, eps: float, tau: float) -> float:
    """Mean number of simulated (above-truncation) jumps: nu(|z|>tau)/eps."""
    mass = 0.0
    if model.c_plus > 0:
        mass += tail_upper(model, tau)
    if model.c_minus > 0:
        mass += tail_lower(model, tau)
    return mass / eps

def default_truncation(model: TailModel, eps: float, target_var: float = 1e-4,
                       floor: float = 1e-3) -> float:
    """Truncation tau keeping the dropped-jump variance eps*var <= target.

    Solves eps * integral_{|z|<=tau} z^2 nu = target when both indices are
    below 2; otherwise falls back to a fixed path-space floor (tau = floor/eps),
    since the idealized power law has no second moment near the origin.
    """
    if model.c_plus == 0 and model.c_minus == 0:
        return 1.0
    if model.alpha < 2.0 and model.beta < 2.0:
        # bisection on tau; variance is increasing in tau
        lo, hi = 1e-12, 1e6
        f = lambda tau: eps * small_jump_variance(model, tau) - target_var
        if f(hi) < 0:
            return hi
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if f(mid) <= 0:
                lo = mid
            else:
                hi = mid
        tau = lo
    else:
        tau = floor / eps
    # keep the expected jump count simulable for a scalar sampler; the
    # Gaussian surrogate absorbs whatever the larger truncation drops
    while expected_jump_count(model, eps, tau) > DEFAULT_MAX_JUMPS_PER_PATH:
        tau *= 1.5
    return tau


def _resolve_tau(model, cfg):
    return cfg.trunc_tau if cfg.trunc_tau is not None else default_truncation(model, cfg.epsilon)


def sample_scaled_path(model: TailModel, cfg: SimConfig, rng=None) -> CadlagPath:
    """One sample path of eps * L^eps on [0,1] as a CadlagPath.

    Continuous part: Brownian piece sigma*sqrt(eps)*B, the compensator drift
    of the truncated big jumps, and (optionally) the matched-variance
    Gaussian surrogate for the sub-truncation jumps.  Jumps: compound
    Poisson, uniform times, Pareto sizes, scaled by eps.
    """
    _check_constant_L(model)
    tau = _resolve_tau(model, cfg)
    eps = cfg.epsilon
    mean_jumps = expected_jump_count(model, eps, tau)
    if mean_jumps > MAX_EXPECTED_JUMPS:
        raise DomainError(f"truncation too small: expected jump count {mean_jumps:.3g}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed,
                                                           spawn_key=(cfg.stream_id,)))

    n_grid = round(1.0 / cfg.grid_delta) + 1
    cont = np.zeros(n_grid)

    # Compound Poisson big jumps are drawn first so that toggling the
    # Gaussian small-jump surrogate does not perturb the jump draws for a
    # fixed seed (the surrogate only changes the continuous part).
    n_jumps = rng.poisson(mean_jumps)
    jumps = []
    if n_jumps > 0:
        up_mass = tail_upper(model, tau) if model.c_plus > 0 else 0.0
        total = up_mass + (tail_lower(model, tau) if model.c_minus > 0 else 0.0)
        times = rng.uniform(0.0, 1.0, size=n_jumps)
        # re-draw collisions (zero-probability event, preserved law)
        while np.unique(times).size != times.size or np.any(times == 0.0):
            times = rng.uniform(0.0, 1.0, size=n_jumps)
        sides_up = rng.uniform(size=n_jumps) < (up_mass / total if total > 0 else 0.0)
        u = rng.uniform(size=n_jumps)
        u = np.where(u == 0.0, 1.0, u)
        sizes = np.where(sides_up,
                         tau * u ** (-1.0 / model.alpha),
                         -tau * u ** (-1.0 / model.beta))
        for t, z in sorted(zip(times, sizes)):
            s = eps * z
            if abs(s) >= JUMP_RESOLUTION:
                jumps.append(JumpEvent(float(t), float(s)))

    # Brownian part sqrt(eps) * sigma * B on the grid, plus the matched
    # variance of the dropped sub-truncation jumps when the surrogate is on.
    gauss_var = eps * model.sigma ** 2
    if cfg.gaussian_smalljump:
        z_lo = GAUSS_INNER_FLOOR / eps
        if z_lo < tau:
            gauss_var += eps ** 2 * (1.0 / eps) * small_jump_variance(model, tau, z_lo=z_lo)
    if gauss_var > 0:
        incr = rng.normal(0.0, math.sqrt(gauss_var * cfg.grid_delta), size=n_grid - 1)
        cont[1:] = np.cumsum(incr)

    # compensator drift of the retained (uncompensated) big jumps
    drift_rate = -eps * (1.0 / eps) * truncated_mean(model, tau)
    cont += drift_rate * np.arange(n_grid) * cfg.grid_delta

    return CadlagPath(cont, jumps, initial_value=0.0, delta=cfg.grid_delta)
