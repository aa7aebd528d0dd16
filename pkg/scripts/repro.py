#!/usr/bin/env python3
"""Run the full reproduction recipe.

With no input options it generates the bundled synthetic corpus (1,000
accounts, seed 7) as raw dumps, extracts features from them and runs
grid search, 10-fold CV with the best cell, the report, importance and t-SNE.

    python3 scripts/repro.py --work-dir runs/repro
    python3 scripts/repro.py --work-dir runs/real --dataset my_features.csv
    python3 scripts/repro.py --work-dir runs/real --tx-dump tx.csv \\
        --token-dump tokens.csv --labels labels.csv --cutoff 2019-06-30
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from ethrep.repro import run_repro


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--work-dir", type=Path, default=Path("runs/repro"))
    p.add_argument("--dataset", type=Path)
    p.add_argument("--tx-dump", type=Path)
    p.add_argument("--token-dump", type=Path)
    p.add_argument("--labels", type=Path)
    p.add_argument("--cutoff")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--no-tsne", action="store_true")
    a = p.parse_args()
    t0 = time.perf_counter()
    summary = run_repro(a.work_dir, dataset=a.dataset, tx_dump=a.tx_dump,
                        token_dump=a.token_dump, labels=a.labels, cutoff=a.cutoff,
                        seed=a.seed, threads=a.threads, tsne=not a.no_tsne)
    summary["seconds"] = round(time.perf_counter() - t0, 1)
    print(json.dumps(summary, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
