import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, row_perplexity, silhouette, tsne_kl_loops
from ethrep.dataset import AccountFeatureVector, Address, Dataset, Flag
from ethrep.tsne import (
    PerplexityTooLarge,
    TsneConfig,
    compute_affinities,
    conditional_affinities,
    embed,
    kl_and_gradient,
    squared_distances,
    write_embedding_csv,
)


def two_clusters(n, dims=38, separation=3.0, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    X = rng.standard_normal((n, dims))
    X[labels == 1] += separation
    return X, labels


def as_dataset(X, labels):
    return Dataset(tuple(AccountFeatureVector(Address("0x" + f"{i + 1:040x}"), tuple(X[i]),
                                              Flag(int(labels[i]))) for i in range(len(X))))


def test_equidistant_points_get_uniform_conditionals():
    X = np.eye(4)  # all pairwise distances sqrt(2)
    Pc, _ = conditional_affinities(squared_distances(X), 2.0)
    off = ~np.eye(4, dtype=bool)
    np.testing.assert_allclose(Pc[off], 1 / 3, rtol=0, atol=1e-15)
    assert np.all(Pc[~off] == 0)


@given(st.integers(0, 2**32 - 1), st.integers(5, 40), st.floats(1.5, 3.5))
def test_joint_affinities_are_a_symmetric_distribution(seed, n, perp_frac):
    X = np.random.default_rng(seed).standard_normal((n, 5)) * 10.0 ** np.arange(5)
    perp = min(perp_frac, (n - 1) * 0.9)
    P = compute_affinities(X, perp)
    assert np.array_equal(P, P.T)
    assert np.all(P >= 0) and np.all(np.diag(P) == 0)
    assert abs(P.sum() - 1.0) < 1e-9


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("target", [2.0, 3.0, 5.0])
def test_row_perplexity_matches_target(seed, target):
    X = np.random.default_rng(seed).standard_normal((10, 4))
    Pc, achieved = conditional_affinities(squared_distances(X), target)
    for i in range(10):
        assert abs(row_perplexity(Pc[i]) - target) < 1e-4
        assert abs(achieved[i] - target) < 1e-4
        assert abs(Pc[i].sum() - 1.0) < 1e-12


def test_perplexity_limits():
    X = np.random.default_rng(0).standard_normal((10, 3))
    with pytest.raises(PerplexityTooLarge):
        compute_affinities(X, 9.0)
    with pytest.raises(PerplexityTooLarge):
        embed(X, TsneConfig(perplexity=3.0))  # needs perplexity < (10 - 1) / 3
    with pytest.raises(ValueError):
        compute_affinities(X[:3], 1.0)
    with pytest.raises(ValueError):
        TsneConfig(output_dims=4)


@pytest.mark.parametrize("seed", range(4))
def test_kl_and_gradient_match_oracle(seed):
    rng = np.random.default_rng(seed)
    P = compute_affinities(rng.standard_normal((10, 6)), 3.0)
    Y = rng.standard_normal((10, 2))
    kl, grad = kl_and_gradient(P, Y)
    assert kl == pytest.approx(tsne_kl_loops(P, Y), rel=1e-10)
    for i in range(10):
        for d in range(2):
            def f(v, i=i, d=d):
                Z = Y.copy()
                Z[i, d] = v
                return tsne_kl_loops(P, Z)
            assert abs(grad[i, d] - central_difference(f, Y[i, d])) < 1e-4


@pytest.fixture(scope="module")
def cluster_run():
    X, labels = two_clusters(60, seed=1)
    cfg = TsneConfig(learning_rate=50.0, perplexity=15.0, seed=3)
    return X, labels, embed(as_dataset(X, labels), cfg), cfg


def test_two_clusters_are_recovered(cluster_run):
    _, labels, emb, _ = cluster_run
    assert silhouette(emb.coordinates, labels) > 0.8


def test_kl_decreases_after_exaggeration(cluster_run):
    _, _, emb, cfg = cluster_run
    assert len(emb.kl_trace) == cfg.iterations
    assert emb.kl_divergence == emb.kl_trace[-1]
    assert emb.kl_divergence < emb.kl_trace[cfg.exaggeration_iters - 1]
    assert np.all(np.isfinite(emb.coordinates))


def test_rows_keep_input_order(cluster_run):
    X, labels, emb, _ = cluster_run
    ds = as_dataset(X, labels)
    assert emb.addresses == ds.addresses
    assert [int(f) for f in emb.flags] == labels.tolist()
    assert emb.coordinates.shape == (60, 2)


@settings(max_examples=3)
@given(st.integers(0, 2**32 - 1))
def test_embedding_is_deterministic(seed):
    X, _ = two_clusters(20, dims=5, seed=seed)
    cfg = TsneConfig(perplexity=4.0, iterations=120, seed=seed, output_dims=3)
    a, b = embed(X, cfg), embed(X, cfg)
    assert a.coordinates.tobytes() == b.coordinates.tobytes()
    assert a.coordinates.shape == (20, 3)


def test_embedding_csv(tmp_path, cluster_run):
    _, _, emb, _ = cluster_run
    write_embedding_csv(emb, tmp_path / "e.csv")
    with open(tmp_path / "e.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["address", "flag", "y1", "y2", "final_kl"]
    assert len(rows) == 61
    assert float(rows[1][2]) == emb.coordinates[0, 0]
