"""Path-set oracles: membership predicates with open/closed variants.

Each oracle tests a set A of solution paths: ``contains_inner`` is the
open-version test (used for the liminf side) and ``contains_outer`` the
closed-version test (limsup side).  ``score`` is a continuous surrogate
(<= 0 strictly inside) consumed by the witness search.  Vectorized hooks
let the Monte Carlo engine evaluate membership from per-path summary
statistics without materializing path objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .paths import CadlagPath, DomainError, path_extrema, j1_distance, zero_path

__all__ = ["SetOracle", "BatchStats", "make_set", "set_registry"]


@dataclass
class BatchStats:
    """Per-path summaries produced by the vectorized engine."""

    sup: np.ndarray = None
    inf: np.ndarray = None
    final: np.ndarray = None
    up_counts: np.ndarray = None    # jumps with size > / >= threshold
    up_counts_closed: np.ndarray = None
    down_counts: np.ndarray = None
    down_counts_closed: np.ndarray = None


@dataclass
class SetOracle:
    """Membership oracle for a path set with declared regularity data.

    declared_bound_M is the asserted J1 radius of the set around the zero
    path; declared_margin the asserted bounded-away distance.  Both are
    user assertions: the harness spot-checks but cannot certify them.
    """

    name: str
    contains_inner: callable
    contains_outer: callable
    score: callable = None
    declared_bound_M: float = 50.0
    declared_margin: float = 0.25
    jump_threshold: float = None   # engine tracks jump counts above this
    batch_eval: callable = None    # (BatchStats, outer) -> bool array
    batch_steps: callable = None   # (times, sizes, outer) -> bool array

    def __call__(self, path, outer=False):
        return self.contains_outer(path) if outer else self.contains_inner(path)


def _step_stats(times, sizes):
    if sizes.shape[1] == 0:
        n = sizes.shape[0]
        z = np.zeros(n)
        return z, z, z
    cums = np.cumsum(sizes, axis=1)
    sup = np.maximum(cums.max(axis=1), 0.0)
    inf = np.minimum(cums.min(axis=1), 0.0)
    return sup, inf, cums[:, -1]


def sup_exceed(c: float, margin=None, bound_M=50.0) -> SetOracle:
    """{paths with running supremum above c}."""

    def inner(p):
        return path_extrema(p)[0] > c

    def outer(p):
        return path_extrema(p)[0] >= c

    def batch(stats, outer_flag):
        return stats.sup >= c if outer_flag else stats.sup > c

    def batch_steps(times, sizes, outer_flag):
        sup, _, _ = _step_stats(times, sizes)
        return sup >= c if outer_flag else sup > c

    return SetOracle(name=f"sup_exceed(c={c})",
                     contains_inner=inner, contains_outer=outer,
                     score=lambda p: c - path_extrema(p)[0],
                     declared_bound_M=bound_M,
                     declared_margin=margin if margin is not None else c / 2,
                     batch_eval=batch, batch_steps=batch_steps)


def terminal_in(a: float, b: float, margin=0.1, bound_M=50.0) -> SetOracle:
    """{paths with terminal value in [a, b]}."""
    if b <= a:
        raise DomainError("terminal interval must have a < b")

    def inner(p):
        v = p.eval(1.0)
        return a < v < b

    def outer(p):
        v = p.eval(1.0)
        return a <= v <= b

    def batch(stats, outer_flag):
        if outer_flag:
            return (stats.final >= a) & (stats.final <= b)
        return (stats.final > a) & (stats.final < b)

    def batch_steps(times, sizes, outer_flag):
        _, _, fin = _step_stats(times, sizes)
        if outer_flag:
            return (fin >= a) & (fin <= b)
        return (fin > a) & (fin < b)

    return SetOracle(name=f"terminal_in({a},{b})",
                     contains_inner=inner, contains_outer=outer,
                     score=lambda p: max(a - p.eval(1.0), p.eval(1.0) - b),
                     declared_bound_M=bound_M, declared_margin=margin,
                     batch_eval=batch, batch_steps=batch_steps)


def two_sided(c: float, c2: float = None, margin=None, bound_M=50.0) -> SetOracle:
    """{paths exceeding c upward and -c2 downward}."""
    c2 = c if c2 is None else c2

    def inner(p):
        hi, lo = path_extrema(p)
        return hi > c and lo < -c2

    def outer(p):
        hi, lo = path_extrema(p)
        return hi >= c and lo <= -c2

    def batch(stats, outer_flag):
        if outer_flag:
            return (stats.sup >= c) & (stats.inf <= -c2)
        return (stats.sup > c) & (stats.inf < -c2)

    def batch_steps(times, sizes, outer_flag):
        sup, inf, _ = _step_stats(times, sizes)
        if outer_flag:
            return (sup >= c) & (inf <= -c2)
        return (sup > c) & (inf < -c2)

    def score(p):
        hi, lo = path_extrema(p)
        return max(c - hi, lo + c2)

    return SetOracle(name=f"two_sided(c={c},c2={c2})",
                     contains_inner=inner, contains_outer=outer, score=score,
                     declared_bound_M=bound_M,
                     declared_margin=margin if margin is not None else min(c, c2) / 2,
                     batch_eval=batch, batch_steps=batch_steps)


def jump_count_set(min_up: int, size: float, margin=None, bound_M=50.0) -> SetOracle:
    """{paths with at least min_up upward jumps of size above ``size``}."""
    if min_up < 1 or size <= 0:
        raise DomainError("need min_up >= 1 and a positive size threshold")

    def count(p, closed):
        if closed:
            return sum(1 for j in p.jumps if j.size >= size)
        return sum(1 for j in p.jumps if j.size > size)

    def score(p):
        ups = sorted((j.size for j in p.jumps if j.size > 0), reverse=True)
        ups += [0.0] * max(0, min_up - len(ups))
        return max(size - u for u in ups[:min_up])

    def batch(stats, outer_flag):
        cnt = stats.up_counts_closed if outer_flag else stats.up_counts
        return cnt >= min_up

    def batch_steps(times, sizes, outer_flag):
        if outer_flag:
            return (sizes >= size).sum(axis=1) >= min_up
        return (sizes > size).sum(axis=1) >= min_up

    return SetOracle(name=f"jump_count(min_up={min_up},size={size})",
                     contains_inner=lambda p: count(p, False) >= min_up,
                     contains_outer=lambda p: count(p, True) >= min_up,
                     score=score, declared_bound_M=bound_M,
                     declared_margin=margin if margin is not None else size / 2,
                     jump_threshold=size,
                     batch_eval=batch, batch_steps=batch_steps)


def j1_tube(ref: CadlagPath = None, radius: float = 0.5, margin=None,
            tol=1e-4, bound_M=None) -> SetOracle:
    """{paths within J1 distance ``radius`` of a reference path}.

    Conservative on both sides: the inner test uses the certified upper
    bound of the distance bracket, the outer test the lower bound.
    """
    if ref is None:
        ref = zero_path(delta=2.0 ** -8)
    if radius <= 0:
        raise DomainError("tube radius must be positive")

    def inner(p):
        return j1_distance(p, ref, tol=tol).upper < radius

    def outer(p):
        return j1_distance(p, ref, tol=tol).lower <= radius

    ref_norm = path_extrema(ref)
    M = bound_M if bound_M is not None else max(abs(ref_norm[0]), abs(ref_norm[1])) + radius

    return SetOracle(name=f"j1_tube(r={radius})",
                     contains_inner=inner, contains_outer=outer,
                     score=lambda p: j1_distance(p, ref, tol=tol).upper - radius,
                     declared_bound_M=M,
                     declared_margin=margin if margin is not None else radius / 2)


def whole_space(bound_M=float("inf")) -> SetOracle:
    return SetOracle(name="whole_space",
                     contains_inner=lambda p: True,
                     contains_outer=lambda p: True,
                     score=lambda p: -1.0,
                     declared_bound_M=bound_M, declared_margin=1.0,
                     batch_eval=lambda stats, o: np.ones(stats.sup.size, bool),
                     batch_steps=lambda t, s, o: np.ones(s.shape[0], bool))


def empty_set() -> SetOracle:
    return SetOracle(name="empty",
                     contains_inner=lambda p: False,
                     contains_outer=lambda p: False,
                     score=lambda p: 1.0,
                     declared_bound_M=0.0, declared_margin=1.0,
                     batch_eval=lambda stats, o: np.zeros(stats.sup.size, bool),
                     batch_steps=lambda t, s, o: np.zeros(s.shape[0], bool))


def set_registry():
    return {
        "sup_exceed": sup_exceed,
        "terminal_in": terminal_in,
        "two_sided": two_sided,
        "jump_count": jump_count_set,
        "j1_tube": j1_tube,
        "whole_space": whole_space,
        "empty": empty_set,
    }


def make_set(name, **params) -> SetOracle:
    reg = set_registry()
    if name not in reg:
        raise DomainError(f"unknown set {name!r}; choose from {sorted(reg)}")
    return reg[name](**params)
