"""Shared helpers for the test suite."""
import itertools

import numpy as np
import pytest

from levyldp import step_path


def random_step_path(rng, max_jumps=5, size_lo=-3.0, size_hi=3.0, delta=2 ** -8):
    """A random step path with up to `max_jumps` jumps, sizes in [lo, hi]."""
    n = int(rng.integers(0, max_jumps + 1))
    times = np.sort(rng.uniform(0.02, 0.98, size=n))
    while np.unique(times).size != n:
        times = np.sort(rng.uniform(0.02, 0.98, size=n))
    sizes = rng.uniform(size_lo, size_hi, size=n)
    sizes = np.where(np.abs(sizes) < 0.05, 0.05 * np.sign(sizes) + (sizes == 0) * 0.05, sizes)
    return step_path(list(zip(times.tolist(), sizes.tolist())), delta=delta)


def j1_corpus_paths(max_jumps=3):
    """The fixed step-path grid used for J1 oracle agreement: jumps at times
    in {0.2,...,0.8}, sizes in {±0.5, ±1, ±2}, at most `max_jumps` jumps."""
    times = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    sizes = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
    paths = [step_path([])]
    for n in range(1, max_jumps + 1):
        for ts in itertools.combinations(times, n):
            for zs in itertools.product(sizes, repeat=n):
                paths.append(step_path(list(zip(ts, zs))))
    return paths


def sampled_corpus_pairs(n_pairs, seed=20260826, max_jumps=3):
    """A seeded sample of pairs from the fixed grid (the full pair space is
    too large for the runtime budget; the sample is deterministic)."""
    paths = j1_corpus_paths(max_jumps=max_jumps)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(paths), size=(n_pairs, 2))
    return [(paths[i], paths[j]) for i, j in idx]


@pytest.fixture(scope="session")
def base_rng():
    return np.random.default_rng(12345)
