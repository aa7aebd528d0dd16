"""Exact t-SNE for 2-D/3-D views of the account feature space."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ethrep.dataset import Address, Dataset, Flag

MACHINE_EPS = np.finfo(np.float64).eps


class PerplexityTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class TsneConfig:
    output_dims: int = 2
    perplexity: float = 30.0
    learning_rate: float = 200.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum: float = 0.5
    final_momentum: float = 0.8
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.output_dims not in (2, 3):
            raise ValueError("output_dims must be 2 or 3")
        if not self.perplexity > 0:
            raise ValueError("perplexity must be positive")
        if not self.learning_rate > 0 or self.iterations < 1:
            raise ValueError("learning_rate and iterations must be positive")


@dataclass
class TsneEmbedding:
    coordinates: np.ndarray
    flags: list[Optional[Flag]]
    addresses: list[Address]
    kl_divergence: float
    kl_trace: np.ndarray = field(repr=False)


def standardize(X: np.ndarray) -> np.ndarray:
    """Z-score columns; constant columns become zero."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _row_entropy(D: np.ndarray, beta: np.ndarray):
    """Conditional distributions exp(-beta_i d_ij) and their entropies (nats)."""
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    # shift by the nearest-neighbour distance for stability; the diagonal is
    # masked to 0 so exp never sees a large positive argument there
    shifted = np.where(off, D - np.where(off, D, np.inf).min(axis=1, keepdims=True), 0.0)
    W = np.exp(-beta[:, None] * shifted) * off
    s = W.sum(axis=1, keepdims=True)
    P = W / s
    H = np.log(s[:, 0]) + beta * np.sum(shifted * P * off, axis=1)
    return P, H


def conditional_affinities(D: np.ndarray, perplexity: float, tol: float = 1e-5,
                           max_steps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise Gaussian kernels whose perplexity matches the target.

    Bisection on the precision beta_i per row, doubling or halving while a
    bound is still open. Returns (P_cond, achieved perplexity per row); rows
    whose perplexity cannot move (e.g. equidistant neighbours) keep the
    closest distribution found.
    """
    n = D.shape[0]
    mean_d = D.sum(axis=1) / max(n - 1, 1)
    beta = np.where(mean_d > 0, 1.0 / np.where(mean_d > 0, mean_d, 1.0), 1.0)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    P, H = _row_entropy(D, beta)
    for _ in range(max_steps):
        perp = np.exp(H)
        active = np.abs(perp - perplexity) >= tol
        if not active.any():
            break
        too_flat = active & (perp > perplexity)
        too_sharp = active & ~too_flat
        lo = np.where(too_flat, beta, lo)
        hi = np.where(too_sharp, beta, hi)
        beta = np.where(active, np.where(np.isinf(hi), beta * 2.0, (lo + hi) / 2.0), beta)
        P_new, H_new = _row_entropy(D, beta)
        P = np.where(active[:, None], P_new, P)
        H = np.where(active, H_new, H)
    return P, np.exp(H)


def _features(data) -> np.ndarray:
    return np.asarray(getattr(data, "X", data), dtype=np.float64)


def compute_affinities(data, perplexity: float = 30.0, standardize_features: bool = True) -> np.ndarray:
    """Symmetric joint probabilities p_ij = (p_j|i + p_i|j) / 2n."""
    X = _features(data)
    n = X.shape[0]
    if n < 4:
        raise ValueError("need at least 4 points")
    if not 0 < perplexity < n - 1:
        raise PerplexityTooLarge(f"perplexity {perplexity} not below n - 1 = {n - 1}")
    if standardize_features:
        X = standardize(X)
    Pc, _ = conditional_affinities(squared_distances(X), perplexity)
    P = (Pc + Pc.T) / (2.0 * n)
    return P


def _student_t(Y: np.ndarray):
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num, np.maximum(num / num.sum(), MACHINE_EPS)


def _kl(P: np.ndarray, Q: np.ndarray) -> float:
    pos = P > 0
    return float(np.sum(P[pos] * np.log(P[pos] / Q[pos])))


def _gradient(P: np.ndarray, Q: np.ndarray, num: np.ndarray, Y: np.ndarray) -> np.ndarray:
    W = (P - Q) * num
    np.fill_diagonal(W, 0.0)
    return 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)


def kl_and_gradient(P: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(P || Q) under the Student-t kernel and its gradient w.r.t. Y."""
    num, Q = _student_t(Y)
    return _kl(P, Q), _gradient(P, Q, num, Y)


def embed(data, config: TsneConfig = TsneConfig()) -> TsneEmbedding:
    """Gradient descent on KL(P || Q) with momentum, gains and early exaggeration."""
    X = _features(data)
    n = X.shape[0]
    if not config.perplexity < (n - 1) / 3.0:
        raise PerplexityTooLarge(
            f"perplexity {config.perplexity} must be below (n - 1) / 3 = {(n - 1) / 3:.3g}")
    P = compute_affinities(X, config.perplexity, config.standardize)

    rng = np.random.default_rng(config.seed & (2**64 - 1))
    Y = 1e-4 * rng.standard_normal((n, config.output_dims))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    # trace[i] is KL(P || Q) after i + 1 updates
    trace = np.empty(config.iterations)
    for it in range(config.iterations):
        exaggerate = it < config.exaggeration_iters
        if it == config.exaggeration_iters:
            # momentum and gains built up against the exaggerated P are stale
            # once it is removed; restart the optimizer state for the second phase
            update[:] = 0.0
            gains[:] = 1.0
        num, Q = _student_t(Y)
        if it:
            trace[it - 1] = _kl(P, Q)
        grad = _gradient(P * config.early_exaggeration if exaggerate else P, Q, num, Y)
        momentum = config.momentum if exaggerate else config.final_momentum
        same_sign = (grad > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    trace[-1] = _kl(P, _student_t(Y)[1])

    flags = [r.flag for r in data.rows] if isinstance(data, Dataset) else [None] * n
    addresses = data.addresses if isinstance(data, Dataset) else []
    return TsneEmbedding(Y, flags, addresses, float(trace[-1]), trace)


def write_embedding_csv(emb: TsneEmbedding, path) -> None:
    dims = emb.coordinates.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["address", "flag", *(f"y{i + 1}" for i in range(dims)), "final_kl"])
        for i, row in enumerate(emb.coordinates):
            addr = emb.addresses[i] if emb.addresses else ""
            flag = "" if emb.flags[i] is None else int(emb.flags[i])
            w.writerow([addr, flag, *(repr(float(v)) for v in row), repr(emb.kl_divergence)])
