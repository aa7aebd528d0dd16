"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line through the ``criterion`` fixture; the
lines are printed in an "acceptance criteria" section at the end of the run.
"""

import os
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from oracles import (
    central_difference,
    exhaustive_root_split,
    logistic_loss,
    pair_auc,
    silhouette,
    tsne_kl_loops,
)
from test_cli import Explorer, digests, run
from builders import explorer_token, explorer_tx, random_records
from ethrep.dataset import Address, AccountFeatureVector, Dataset, Flag
from ethrep.evaluation import (
    ConfusionMatrix,
    UndefinedMetric,
    accuracy,
    cross_validate,
    mann_whitney_auc,
    roc_auc,
    sensitivity,
    specificity,
)
from ethrep.gbdt import GbdtConfig, save_model, train
from ethrep.gbdt.bundling import build_bundles
from ethrep.gbdt.model import gradients
from ethrep.repro import run_repro
from ethrep.synthetic import bundled_path
from ethrep.tsne import TsneConfig, compute_affinities, embed, kl_and_gradient

TOY = bundled_path("toy.csv")


# 1 -------------------------------------------------------------------------

def random_instance(rng):
    n = int(rng.integers(4, 201))
    f = int(rng.integers(1, 4))
    X = rng.integers(0, int(rng.integers(2, 20)), (n, f)).astype(float)
    y = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(float)
    y[0], y[1] = 0.0, 1.0
    return X, y


def test_c1_gbdt_oracle_equivalence(criterion):
    with criterion("C1 GBDT root split equals exhaustive oracle (200 instances, < 30 s)") as info:
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        matches = 0
        for _ in range(200):
            X, y = random_instance(rng)
            lam = int(rng.integers(0, 3))
            min_leaf = int(rng.integers(0, 6))
            cfg = GbdtConfig(n_estimators=1, max_depth=int(rng.integers(1, 3)),
                             max_bins=int(rng.integers(2, 17)), lambda_l2=lam,
                             min_data_in_leaf=min_leaf, goss_enabled=False)
            model = train(X, cfg, y=y)
            want = exhaustive_root_split(model.bin_mapper.transform(X), y,
                                         model.bin_mapper.n_bins, lam, min_leaf)
            tree = model.trees[0]
            got = None if tree.n_nodes == 1 else (int(tree.feature[0]),
                                                 int(tree.bin_threshold[0]))
            matches += got == (None if want is None else want[:2])
        elapsed = time.perf_counter() - start
        info.update(matches=f"{matches}/200", seconds=round(elapsed, 1))
        assert matches == 200
        assert elapsed < 30


# 2 -------------------------------------------------------------------------

def test_c2_goss_degeneracy(criterion, toy_dataset, tmp_path):
    with criterion("C2 GOSS a=1 and GOSS off give byte-identical model files (20 seeds)"):
        for seed in range(20):
            full = GbdtConfig(n_estimators=20, seed=seed, goss_top_rate=1.0, goss_other_rate=0.0)
            off = GbdtConfig(n_estimators=20, seed=seed, goss_enabled=False)
            save_model(train(toy_dataset, full), tmp_path / "a.json")
            save_model(train(toy_dataset, off), tmp_path / "b.json")
            assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


# 3 -------------------------------------------------------------------------

def one_hot(n, k, rng):
    X = np.zeros((n, k))
    X[np.arange(n), rng.integers(0, k, n)] = rng.uniform(0.5, 5.0, n)
    return X


def test_c3_efb_transparency(criterion):
    with criterion("C3 EFB on/off give identical predictions on 1000 probes (one-hot data)") as info:
        bundled_sizes = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            k = 4 + seed
            X = one_hot(400, k, rng)
            w = rng.standard_normal(k)
            y = (X @ w + 0.3 * rng.standard_normal(400) > 0).astype(float)
            y[0], y[1] = 0.0, 1.0
            probe = one_hot(1000, k, rng)
            cfg = dict(n_estimators=40, max_depth=3, min_data_in_leaf=5, seed=seed)
            on = train(X, GbdtConfig(**cfg), y=y)
            off = train(X, GbdtConfig(**cfg, efb_enabled=False), y=y)
            bundles = build_bundles(on.bin_mapper.transform(X), on.bin_mapper, 0.0)
            bundled_sizes.append(len(bundles))
            assert len(bundles) < k  # bundling really happened
            assert np.array_equal(on.predict_proba(probe), off.predict_proba(probe))
        info.update(bundles_per_dataset=bundled_sizes)


# 4 -------------------------------------------------------------------------

def test_c4_metric_exactness(criterion):
    with criterion("C4 metrics exact on 1000 confusion matrices; AUC identity on 1000 vectors"):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            cm = ConfusionMatrix(*(int(v) for v in rng.integers(0, 500, 4)))
            for fn, num, den in ((accuracy, cm.tp + cm.tn, cm.n),
                                 (sensitivity, cm.tp, cm.tp + cm.fn),
                                 (specificity, cm.tn, cm.tn + cm.fp)):
                if den == 0:
                    with pytest.raises(UndefinedMetric):
                        fn(cm)
                else:
                    assert fn(cm) == float(Fraction(num, den))
        for _ in range(1000):
            n = int(rng.integers(2, 80))
            scores = rng.integers(0, int(rng.integers(2, 30)), n) / 7.0  # many ties
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 0, 1
            trap, _ = roc_auc(scores, labels)
            mw = mann_whitney_auc(scores, labels)
            assert abs(trap - mw) < 1e-12
            assert abs(mw - pair_auc(scores, labels)) < 1e-12
        example = roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])[0]
        assert abs(example - 0.75) < 1e-12
        assert pair_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


# 5 -------------------------------------------------------------------------

def test_c5_gradient_checks(criterion):
    with criterion("C5 finite differences: logistic g/h within 1e-5, t-SNE KL within 1e-4") as info:
        worst_gh = 0.0
        for y in (0.0, 1.0):
            for score in np.linspace(-20, 20, 161):
                g, h = gradients(np.array([y]), np.array([score]))
                fd_g = central_difference(lambda s: logistic_loss(y, s), score)
                fd_h = central_difference(
                    lambda s: float(gradients(np.array([y]), np.array([s]))[0][0]), score)
                worst_gh = max(worst_gh, abs(g[0] - fd_g), abs(h[0] - fd_h))
        worst_kl = 0.0
        for seed in range(3):
            rng = np.random.default_rng(seed)
            P = compute_affinities(rng.standard_normal((12, 5)), 3.0)
            Y = rng.standard_normal((12, 2))
            _, grad = kl_and_gradient(P, Y)
            for i in range(12):
                for d in range(2):
                    def f(v, i=i, d=d):
                        Z = Y.copy()
                        Z[i, d] = v
                        return tsne_kl_loops(P, Z)
                    worst_kl = max(worst_kl, abs(grad[i, d] - central_difference(f, Y[i, d])))
        info.update(max_gh_error=f"{worst_gh:.1e}", max_kl_error=f"{worst_kl:.1e}")
        assert worst_gh < 1e-5
        assert worst_kl < 1e-4


# 6 -------------------------------------------------------------------------

TARGETS = {"avg_min_between_received_tnx", "received_tnx"}


def test_c6_scaled_down_reproduction(criterion, tmp_path):
    with criterion("C6 repro recipe on synthetic corpus: mean 10-fold AUC >= 0.95, "
                   "target feature in split top 3, < 5 min") as info:
        start = time.perf_counter()
        summary = run_repro(tmp_path / "repro", seed=0, threads=1)
        elapsed = time.perf_counter() - start
        info.update(auc=round(summary["cv_mean_auc"], 4), top3=summary["split_top"][:3],
                    seconds=round(elapsed, 1))
        assert summary["cv_mean_auc"] >= 0.95
        assert TARGETS & set(summary["split_top"][:3])
        assert elapsed < 300


# 7 -------------------------------------------------------------------------

def test_c7_convergence_shape(criterion, corpus):
    with criterion("C7 mean CV log-loss: iteration 100 < iteration 10, "
                   "|change 100 -> 150| < 1%") as info:
        cfg = GbdtConfig(learning_rate=0.2, max_depth=2, min_data_in_leaf=40, lambda_l2=5.0,
                         n_estimators=150, seed=0)
        curve = cross_validate(corpus, cfg, k=10, seed=0).mean_log_loss_curve
        c10, c100, c150 = curve[9], curve[99], curve[149]
        change = (c150 - c100) / c100
        info.update(loss_10=round(c10, 4), loss_100=round(c100, 4), loss_150=round(c150, 4),
                    change=f"{100 * change:+.2f}%")
        assert c100 < c10
        assert abs(change) < 0.01


# 8 -------------------------------------------------------------------------

def stage_runs(base: Path, threads: str, server):
    """Run every pipeline stage into ``base``; return the stage directories."""
    t = ["--threads", threads]
    fast = ["--n-estimators", "20", "--seed", "5"]
    synth = base / "synth"
    assert run("synth", "--run-dir", synth, "--n-accounts", "60", "--seed", "2") == 0
    assert run("extract", "--run-dir", base / "extract", "--tx-dump", synth / "transactions.csv",
               "--token-dump", synth / "token_transfers.csv", "--labels",
               synth / "labels.csv") == 0
    ds = base / "extract" / "dataset.csv"
    assert run("fetch", "--run-dir", base / "fetch", "--addresses", server.addresses_file,
               "--base-url", server.url, "--max-requests-per-second", "1000") == 0
    assert run("train", "--run-dir", base / "train", "--dataset", TOY, *fast) == 0
    assert run("cv", "--run-dir", base / "cv", "--dataset", TOY, "--k", "5", *fast, *t) == 0
    assert run("gridsearch", "--run-dir", base / "grid", "--dataset", TOY, "--k", "3",
               "--learning-rates", "0.1,0.3", "--n-estimators-grid", "5,15",
               "--max-depths", "2,3", "--seed", "5", *t) == 0
    assert run("report", "--run-dir", base / "report", "--cv-dir", base / "cv") == 0
    model = base / "train" / "model.json"
    assert run("predict", "--run-dir", base / "predict", "--model", model, "--dataset", ds) == 0
    assert run("importance", "--run-dir", base / "importance", "--model", model) == 0
    assert run("tsne", "--run-dir", base / "tsne", "--dataset", ds, "--perplexity", "8",
               "--iterations", "150", "--seed", "5") == 0
    assert run("catalog", "--run-dir", base / "catalog") == 0
    return sorted(p.name for p in base.iterdir())


@pytest.fixture
def fixture_server(tmp_path):
    rng = np.random.default_rng(8)
    accounts = [Address("0x" + f"{0xdd00 + i:040x}") for i in range(3)]
    records = {}
    for a in accounts:
        txs, tts = random_records(rng, 10, 3, me=a)
        records[a] = ([explorer_tx(x) for x in txs], [explorer_token(x) for x in tts])
    server = Explorer(records)
    server.addresses_file = tmp_path / "addrs.txt"
    server.addresses_file.write_text("\n".join(accounts))
    yield server
    server.close()


def test_c8_determinism(criterion, tmp_path, fixture_server):
    with criterion("C8 every stage byte-reproduces outputs with threads 1 vs 2") as info:
        stages = stage_runs(tmp_path / "one", "1", fixture_server)
        assert stage_runs(tmp_path / "two", "2", fixture_server) == stages
        for stage in stages:
            a, b = digests(tmp_path / "one" / stage), digests(tmp_path / "two" / stage)
            assert a and a == b, stage
        info.update(stages=len(stages))


# 9 -------------------------------------------------------------------------

def test_c9_tsne_recovery(criterion):
    with criterion("C9 t-SNE two-cluster benchmark at n=600: silhouette > 0.8, < 60 s") as info:
        rng = np.random.default_rng(9)
        labels = np.arange(600) % 2
        X = rng.standard_normal((600, 38))
        X[labels == 1] += 3.0
        ds = Dataset(tuple(AccountFeatureVector(Address("0x" + f"{i + 1:040x}"), tuple(X[i]),
                                                Flag(int(labels[i]))) for i in range(600)))
        start = time.perf_counter()
        emb = embed(ds, TsneConfig(seed=0))
        elapsed = time.perf_counter() - start
        score = silhouette(emb.coordinates, labels)
        info.update(silhouette=round(score, 3), seconds=round(elapsed, 1))
        assert score > 0.8
        assert elapsed < 60


# 10 ------------------------------------------------------------------------

def test_c10_original_corpus(criterion, tmp_path):
    """Optional: set ETHREP_ORIGINAL_CORPUS to a feature CSV of the labeled corpus."""
    with criterion("C10 original labeled corpus: mean 10-fold AUC >= 0.99 (optional)") as info:
        path = os.environ.get("ETHREP_ORIGINAL_CORPUS")
        if not path:
            pytest.skip("ETHREP_ORIGINAL_CORPUS not set")
        summary = run_repro(tmp_path / "original", dataset=Path(path), tsne=False)
        info.update(auc=round(summary["cv_mean_auc"], 4))
        assert summary["cv_mean_auc"] >= 0.99
