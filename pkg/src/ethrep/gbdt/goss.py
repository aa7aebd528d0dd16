"""Gradient-based one-side sampling."""

from __future__ import annotations

import math
import warnings

import numpy as np

_SEED_MASK = (1 << 64) - 1


class DegenerateRate(UserWarning):
    """b = 0 with a < 1: only the top rows are kept and nothing is amplified."""


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    """Independent stream per (seed, iteration), reproducible across platforms."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & _SEED_MASK, iteration])))


def _count(rate: float, n: int) -> int:
    # tolerate representation error, e.g. 0.3 * 10 == 3.0000000000000004
    return min(n, math.ceil(rate * n - 1e-9))


def goss_sample(gradients, a: float, b: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ceil(a*n) largest |gradient| rows, sample ceil(b*n) of the rest.

    Returns ascending selected row indices and the weight multiplier of each
    selected row: 1 for top rows, (1 - a) / b for sampled ones. ``rng`` is a
    Generator or an integer seed.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError("top rate a must be in (0, 1]")
    if not 0.0 <= b < 1.0:
        raise ValueError("other rate b must be in [0, 1)")
    if a + b > 1.0 + 1e-12:
        raise ValueError("a + b must not exceed 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    g = np.asarray(gradients, dtype=np.float64)
    n = len(g)
    if a >= 1.0:
        return np.arange(n), np.ones(n)
    if b == 0.0:
        warnings.warn("GOSS with b=0 keeps only top-gradient rows", DegenerateRate, stacklevel=2)

    n_top = _count(a, n)
    order = np.argsort(-np.abs(g), kind="stable")
    top, rest = order[:n_top], order[n_top:]
    n_other = min(len(rest), _count(b, n)) if b > 0 else 0
    other = rng.choice(rest, size=n_other, replace=False) if n_other else rest[:0]

    selected = np.concatenate([top, other])
    weights = np.concatenate([np.ones(len(top)), np.full(len(other), (1.0 - a) / b if b else 1.0)])
    perm = np.argsort(selected, kind="stable")
    return selected[perm], weights[perm]
