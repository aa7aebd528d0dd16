"""End-to-end reproduction recipe built from CLI stages.

extract -> gridsearch -> cv with the best cell -> report, then a full-data
model for importance, and a t-SNE view. Each stage is a normal CLI run with
its own run directory and manifest under the work directory.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

from ethrep import cli

GRID_LEARNING_RATES = (0.05, 0.1, 0.2, 0.3)
GRID_N_ESTIMATORS = (50, 100, 200, 400)
GRID_MAX_DEPTHS = (2, 3, 4, 6)


class StageFailed(RuntimeError):
    pass


def _run(stage: str, args: Sequence[str]) -> None:
    code = cli.main([stage, *map(str, args)])
    if code != 0:
        raise StageFailed(f"stage {stage!r} exited with status {code}")


def _csv_list(values) -> str:
    return ",".join("none" if v is None else str(v) for v in values)


def run_repro(work_dir, *, dataset: Optional[Path] = None, tx_dump: Optional[Path] = None,
              token_dump: Optional[Path] = None, labels: Optional[Path] = None,
              cutoff: Optional[str] = None, seed: int = 0, threads: int = 1,
              learning_rates=GRID_LEARNING_RATES, n_estimators=GRID_N_ESTIMATORS,
              max_depths=GRID_MAX_DEPTHS, k: int = 10, tsne: bool = True,
              synth_seed: int = 7, synth_accounts: int = 1000) -> dict:
    """Run the recipe and return a summary dict.

    Input is, in order of preference: a ready feature ``dataset`` CSV, bulk
    dumps with ``labels``, or (neither given) a freshly generated synthetic
    corpus that is then extracted like real dumps.
    """
    work = Path(work_dir)
    work.mkdir(parents=True, exist_ok=True)
    if dataset is None:
        if tx_dump is None:
            _run("synth", ["--run-dir", work / "synth", "--n-accounts", synth_accounts,
                           "--seed", synth_seed])
            tx_dump = work / "synth" / "transactions.csv"
            token_dump = work / "synth" / "token_transfers.csv"
            labels = work / "synth" / "labels.csv"
        if labels is None:
            raise ValueError("dump input needs a labels file")
        args = ["--run-dir", work / "extract", "--tx-dump", tx_dump, "--labels", labels]
        if token_dump is not None:
            args += ["--token-dump", token_dump]
        if cutoff is not None:
            args += ["--cutoff", cutoff]
        _run("extract", args)
        dataset = work / "extract" / "dataset.csv"

    common = ["--dataset", dataset, "--seed", seed]
    _run("gridsearch", ["--run-dir", work / "grid", *common, "--k", k, "--threads", threads,
                        "--learning-rates", _csv_list(learning_rates),
                        "--n-estimators-grid", _csv_list(n_estimators),
                        "--max-depths", _csv_list(max_depths)])
    best = json.loads((work / "grid" / "best.json").read_text(encoding="utf-8"))
    cell = ["--learning-rate", best["learning_rate"], "--n-estimators", best["n_estimators"],
            "--max-depth", "none" if best["max_depth"] is None else best["max_depth"]]

    _run("cv", ["--run-dir", work / "cv", *common, *cell, "--k", k, "--threads", threads])
    _run("report", ["--run-dir", work / "report", "--cv-dir", work / "cv"])
    _run("train", ["--run-dir", work / "train", *common, *cell])
    _run("importance", ["--run-dir", work / "importance", "--model", work / "train" / "model.json"])
    if tsne:
        _run("tsne", ["--run-dir", work / "tsne", "--dataset", dataset, "--seed", seed])

    with open(work / "cv" / "folds.csv", newline="", encoding="utf-8") as fh:
        aucs = [float(r["auc"]) for r in csv.DictReader(fh)]
    with open(work / "importance" / "importance.csv", newline="", encoding="utf-8") as fh:
        split_ranking = [r["feature"] for r in csv.DictReader(fh)]
    summary = {
        "best": best,
        "cv_mean_auc": sum(aucs) / len(aucs),
        "cv_fold_auc": aucs,
        "split_top": split_ranking[:10],
        "dataset": str(dataset),
    }
    (work / "summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    return summary
