"""Command-line entry point: ``ethrep <subcommand> --run-dir DIR [options]``.

Every subcommand writes its artifacts plus a ``manifest.json`` into the run
directory. Options may also come from a flat ``key = value`` file given with
``--config``; explicit flags win over the file. Exit status is 0 on success,
2 for a bad configuration and 1 for a failure while running.
"""

from __future__ import annotations

import argparse
import calendar
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from ethrep import __version__

logger = logging.getLogger("ethrep")

MANIFEST = "manifest.json"


class ConfigError(ValueError):
    """Invalid run configuration; reported with the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"--{field}: {message}")
        self.field = field


# ------------------------------------------------------------ value parsers

def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _depth(text) -> Optional[int]:
    if text is None or str(text).strip().lower() in ("none", "unlimited", "-1"):
        return None
    return int(text)


def _timestamp(text) -> int:
    """Unix seconds, or a YYYY-MM-DD date meaning the end of that day in UTC."""
    t = str(text).strip()
    try:
        return int(t)
    except ValueError:
        day = dt.date.fromisoformat(t)
        return calendar.timegm(day.timetuple()) + 86399


def _list_of(parse: Callable) -> Callable:
    def parse_list(text):
        if isinstance(text, (list, tuple)):
            items = [str(x) for x in text]
        else:
            items = str(text).split(",")
        items = [x.strip() for x in items if x.strip()]
        if not items:
            raise ValueError("empty list")
        return [parse(x) for x in items]
    return parse_list


def _path(text) -> Path:
    return Path(str(text)).expanduser()


@dataclass(frozen=True)
class Opt:
    name: str  # kebab-case flag name without dashes
    parse: Callable[[Any], Any]
    default: Any = None
    required: bool = False
    help: str = ""
    kind: str = "value"  # value | input | input_dir | paths

    @property
    def key(self) -> str:
        return self.name.replace("-", "_")


def _gbdt_opts() -> list[Opt]:
    from ethrep.gbdt import GbdtConfig
    d = GbdtConfig()
    return [
        Opt("learning-rate", float, d.learning_rate, help="shrinkage per tree"),
        Opt("n-estimators", int, d.n_estimators, help="number of boosting iterations"),
        Opt("max-depth", _depth, d.max_depth, help="tree depth cap ('none' for unlimited)"),
        Opt("max-bins", int, d.max_bins),
        Opt("min-data-in-leaf", int, d.min_data_in_leaf),
        Opt("lambda-l2", float, d.lambda_l2),
        Opt("goss", _bool, d.goss_enabled, help="gradient-based one-side sampling on/off"),
        Opt("goss-top-rate", float, d.goss_top_rate),
        Opt("goss-other-rate", float, d.goss_other_rate),
        Opt("efb", _bool, d.efb_enabled, help="exclusive feature bundling on/off"),
        Opt("efb-max-conflict-rate", float, d.efb_max_conflict_rate),
        Opt("seed", int, d.seed),
    ]


def _threads_opt() -> Opt:
    return Opt("threads", int, os.cpu_count() or 1,
               help="worker threads (results do not depend on it)")


def _subcommands() -> dict[str, tuple[str, list[Opt]]]:
    from ethrep.ingestion import API_KEY_ENV, EXPLORER_PAGE_CAP
    from ethrep.tsne import TsneConfig
    t = TsneConfig()
    return {
        "fetch": ("download account histories into the run directory (resumable)", [
            Opt("addresses", _path, required=True, kind="input", help="one address per line"),
            Opt("api-key", str, None, help=f"explorer API key (default: ${API_KEY_ENV})"),
            Opt("base-url", str, "https://api.etherscan.io/api"),
            Opt("max-requests-per-second", float, 5.0),
            Opt("page-size", int, EXPLORER_PAGE_CAP),
            Opt("cutoff", _timestamp, None, help="unix seconds or YYYY-MM-DD (end of day UTC)"),
        ]),
        "extract": ("turn account histories into the 38-feature dataset", [
            Opt("store", _path, None, kind="input_dir", help="history store written by fetch"),
            Opt("tx-dump", _path, None, kind="input", help="bulk transaction CSV"),
            Opt("token-dump", _path, None, kind="input", help="bulk token-transfer CSV"),
            Opt("labels", _path, None, kind="input", help="address,flag CSV"),
            Opt("addresses", _path, None, kind="input",
                help="addresses to extract when no labels are given (dump mode)"),
            Opt("cutoff", _timestamp, None),
        ]),
        "train": ("fit a boosted tree model on a dataset", [
            Opt("dataset", _path, required=True, kind="input"), *_gbdt_opts(),
        ]),
        "cv": ("k-fold cross-validation with curves and misclassifications", [
            Opt("dataset", _path, required=True, kind="input"),
            Opt("k", int, 10), Opt("threshold", float, 0.5), Opt("stratified", _bool, True),
            *_gbdt_opts(), _threads_opt(),
        ]),
        "gridsearch": ("grid search over learning rate, estimators and depth", [
            Opt("dataset", _path, required=True, kind="input"),
            Opt("learning-rates", _list_of(float), [0.05, 0.1, 0.2, 0.3]),
            Opt("n-estimators-grid", _list_of(int), [50, 100, 200, 400]),
            Opt("max-depths", _list_of(_depth), [2, 3, 4, 6]),
            Opt("k", int, 10), Opt("threshold", float, 0.5), Opt("stratified", _bool, True),
            *_gbdt_opts(), _threads_opt(),
        ]),
        "predict": ("score a dataset with a saved model", [
            Opt("model", _path, required=True, kind="input"),
            Opt("dataset", _path, required=True, kind="input"),
            Opt("threshold", float, 0.5),
        ]),
        "importance": ("split and gain importance of one or more models", [
            Opt("model", _list_of(_path), required=True, kind="paths"),
        ]),
        "tsne": ("2-D or 3-D t-SNE embedding of a dataset", [
            Opt("dataset", _path, required=True, kind="input"),
            Opt("dims", int, t.output_dims), Opt("perplexity", float, t.perplexity),
            Opt("learning-rate", float, t.learning_rate), Opt("iterations", int, t.iterations),
            Opt("early-exaggeration", float, t.early_exaggeration),
            Opt("exaggeration-iters", int, t.exaggeration_iters),
            Opt("standardize", _bool, t.standardize), Opt("seed", int, t.seed),
        ]),
        "report": ("classification report from a cv run", [
            Opt("cv-dir", _path, required=True, kind="input_dir"),
            Opt("threshold", float, 0.5),
        ]),
        "catalog": ("write the feature catalog CSV", []),
        "synth": ("generate the synthetic labelled corpus (dumps, labels, dataset)", [
            Opt("n-accounts", int, 1000), Opt("seed", int, 7), Opt("mimic-fraction", float, 0.0),
        ]),
    }


# ----------------------------------------------------------- configuration

@dataclass
class RunConfig:
    subcommand: str
    run_dir: Path
    options: dict[str, Any]
    threads: int = 1

    def __getattr__(self, key):
        try:
            return self.options[key]
        except KeyError:
            raise AttributeError(key) from None

    def recorded(self) -> dict:
        """Options as stored in the manifest (thread count is not a result input)."""
        out = {}
        for k, v in sorted(self.options.items()):
            if isinstance(v, Path):
                v = str(v)
            elif isinstance(v, list):
                v = [str(x) if isinstance(x, Path) else x for x in v]
            out[k] = v
        return out


def read_config_file(path: Path) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment; keys may use - or _."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("_", "-")
            if key in values:
                raise ConfigError("config", f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ethrep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ethrep {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name, (help_text, opts) in _subcommands().items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--run-dir", required=True, help="output directory for all artifacts")
        p.add_argument("--config", help="flat key = value options file (flags override it)")
        for o in opts:
            suffix = " (required)" if o.required else f" (default: {o.default})"
            kwargs = {"nargs": "+"} if o.kind == "paths" else {}
            p.add_argument(f"--{o.name}", dest=o.key, default=None, help=o.help + suffix, **kwargs)
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over the config file over defaults, parse and validate."""
    opts = _subcommands()[args.subcommand][1]
    from_file = {}
    if args.config is not None:
        cfg_path = _path(args.config)
        if not cfg_path.is_file():
            raise ConfigError("config", f"file not found: {cfg_path}")
        from_file = read_config_file(cfg_path)
        known = {o.name for o in opts}
        unknown = sorted(set(from_file) - known)
        if unknown:
            raise ConfigError("config", f"unknown keys for {args.subcommand}: {', '.join(unknown)}")

    values = {}
    for o in opts:
        raw = getattr(args, o.key)
        if raw is None:
            raw = from_file.get(o.name)
        if raw is None:
            if o.required:
                raise ConfigError(o.name, "is required")
            values[o.key] = o.default
            continue
        try:
            values[o.key] = o.parse(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(o.name, f"invalid value {raw!r}: {exc}") from None

    for o in opts:
        v = values[o.key]
        if v is None:
            continue
        if o.kind == "input" and not v.is_file():
            raise ConfigError(o.name, f"file not found: {v}")
        if o.kind == "input_dir" and not v.is_dir():
            raise ConfigError(o.name, f"directory not found: {v}")
        if o.kind == "paths":
            for p in v:
                if not p.is_file():
                    raise ConfigError(o.name, f"file not found: {p}")

    run_dir = _path(args.run_dir)
    if run_dir.exists() and not run_dir.is_dir():
        raise ConfigError("run-dir", f"not a directory: {run_dir}")
    threads = values.pop("threads", 1)
    if threads < 1:
        raise ConfigError("threads", "must be at least 1")
    cfg = RunConfig(args.subcommand, run_dir, values, threads)
    _VALIDATORS.get(args.subcommand, lambda c: None)(cfg)
    return cfg


def gbdt_config(cfg: RunConfig, **override):
    from ethrep.gbdt import GbdtConfig
    fields = dict(
        learning_rate=cfg.learning_rate, n_estimators=cfg.n_estimators, max_depth=cfg.max_depth,
        max_bins=cfg.max_bins, min_data_in_leaf=cfg.min_data_in_leaf, lambda_l2=cfg.lambda_l2,
        goss_enabled=cfg.goss, goss_top_rate=cfg.goss_top_rate,
        goss_other_rate=cfg.goss_other_rate, efb_enabled=cfg.efb,
        efb_max_conflict_rate=cfg.efb_max_conflict_rate, seed=cfg.seed,
    )
    fields.update(override)
    try:
        return GbdtConfig(**fields)
    except ValueError as exc:
        raise ConfigError("gbdt", str(exc)) from None


def _validate_gbdt(cfg: RunConfig) -> None:
    gbdt_config(cfg)
    if "k" in cfg.options and cfg.k < 2:
        raise ConfigError("k", "must be at least 2")
    if "threshold" in cfg.options and not 0.0 <= cfg.threshold <= 1.0:
        raise ConfigError("threshold", "must be in [0, 1]")


def _validate_grid(cfg: RunConfig) -> None:
    _validate_gbdt(cfg)
    for lr in cfg.learning_rates:
        gbdt_config(cfg, learning_rate=lr)
    for n in cfg.n_estimators_grid:
        gbdt_config(cfg, n_estimators=n)
    for d in cfg.max_depths:
        gbdt_config(cfg, max_depth=d)


def _validate_extract(cfg: RunConfig) -> None:
    if (cfg.store is None) == (cfg.tx_dump is None):
        raise ConfigError("store", "give exactly one of --store or --tx-dump")
    if cfg.tx_dump is not None and cfg.labels is None and cfg.addresses is None:
        raise ConfigError("addresses", "dump mode needs --labels or --addresses")


def _validate_tsne(cfg: RunConfig) -> None:
    try:
        tsne_config(cfg)
    except ValueError as exc:
        raise ConfigError("tsne", str(exc)) from None


def _validate_threshold(cfg: RunConfig) -> None:
    if not 0.0 <= cfg.threshold <= 1.0:
        raise ConfigError("threshold", "must be in [0, 1]")


_VALIDATORS: dict[str, Callable[[RunConfig], None]] = {
    "train": _validate_gbdt, "cv": _validate_gbdt, "gridsearch": _validate_grid,
    "extract": _validate_extract, "tsne": _validate_tsne, "predict": _validate_threshold,
    "report": _validate_threshold,
}


def tsne_config(cfg: RunConfig):
    from ethrep.tsne import TsneConfig
    return TsneConfig(output_dims=cfg.dims, perplexity=cfg.perplexity,
                      learning_rate=cfg.learning_rate, iterations=cfg.iterations,
                      early_exaggeration=cfg.early_exaggeration,
                      exaggeration_iters=cfg.exaggeration_iters,
                      standardize=cfg.standardize, seed=cfg.seed)


# ---------------------------------------------------------------- manifest

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_dir(path: Path, pattern: str = "*") -> str:
    """Digest of a directory's matching files: names and contents in sorted order."""
    h = hashlib.sha256()
    for p in sorted(Path(path).glob(pattern)):
        if p.is_file() and p.name != MANIFEST:
            h.update(p.name.encode() + b"\0" + sha256_file(p).encode() + b"\n")
    return h.hexdigest()


def _input_digests(cfg: RunConfig) -> dict[str, Any]:
    out = {}
    for o in _subcommands()[cfg.subcommand][1]:
        v = cfg.options.get(o.key)
        if v is None:
            continue
        if o.kind == "input":
            out[o.name] = {"path": str(v), "sha256": sha256_file(v)}
        elif o.kind == "input_dir":
            out[o.name] = {"path": str(v), "sha256": sha256_dir(v)}
        elif o.kind == "paths":
            out[o.name] = [{"path": str(p), "sha256": sha256_file(p)} for p in v]
    return out


def write_manifest(cfg: RunConfig, outputs: Sequence[str], seed: Optional[int] = None) -> Path:
    doc = {
        "toolkit": "ethrep",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "config": cfg.recorded(),
        "seed": seed,
        "inputs": _input_digests(cfg),
        "outputs": {name: sha256_file(cfg.run_dir / name) for name in sorted(outputs)},
    }
    path = cfg.run_dir / MANIFEST
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ------------------------------------------------------------- subcommands

def read_address_list(path: Path) -> list:
    """Addresses from a text or CSV file: first field per line, header and '#' lines skipped."""
    from ethrep.dataset import Address
    out, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            first = text.split(",", 1)[0].strip()
            if first.lower() == "address":
                continue
            try:
                a = Address(first)
            except ValueError as exc:
                raise ConfigError("addresses", f"{path}:{lineno}: {exc}") from None
            if a not in seen:
                seen.add(a)
                out.append(a)
    return out


def cmd_fetch(cfg: RunConfig) -> list[str]:
    from ethrep.ingestion import (
        API_KEY_ENV, ExplorerClient, ExplorerConfig, IngestionError, history_path, save_history,
    )
    addresses = read_address_list(cfg.addresses)
    api_key = cfg.api_key if cfg.api_key is not None else os.environ.get(API_KEY_ENV, "")
    try:
        xcfg = ExplorerConfig(base_url=cfg.base_url, api_key=api_key,
                              max_requests_per_second=cfg.max_requests_per_second,
                              page_size=cfg.page_size, cutoff_timestamp=cfg.cutoff)
    except ValueError as exc:
        raise ConfigError("fetch", str(exc)) from None
    if not addresses:
        logger.info("address list is empty; nothing to fetch")
        return []
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    client = ExplorerClient(xcfg)
    fetched = skipped = 0
    for i, address in enumerate(addresses, start=1):
        if history_path(cfg.run_dir, address).exists():
            skipped += 1
            continue
        try:
            history = client.fetch_account_history(address)
        except IngestionError as exc:
            raise RuntimeError(f"fetch failed for {address} after {fetched} new histories: {exc}") from exc
        if history.truncated:
            logger.warning("%s: history truncated at %d records per list", address, xcfg.page_size)
        save_history(history, cfg.run_dir)
        fetched += 1
        logger.info("[%d/%d] %s: %d transactions, %d token transfers", i, len(addresses),
                    address, len(history.transactions), len(history.token_transfers))
    logger.info("fetched %d, skipped %d already present", fetched, skipped)
    return [p.name for p in sorted(cfg.run_dir.glob("0x*.json"))]


def _load_histories(cfg: RunConfig, wanted: Optional[list]):
    from ethrep.ingestion import load_history, load_history_dumps, make_history
    if cfg.store is not None:
        paths = sorted(cfg.store.glob("0x*.json"))
        by_addr = {}
        for p in paths:
            h = load_history(p)
            by_addr[h.address] = h
        if wanted is None:
            wanted = sorted(by_addr)
        missing = [a for a in wanted if a not in by_addr]
        if missing:
            raise RuntimeError(f"{len(missing)} labelled addresses have no history in the store, "
                               f"e.g. {missing[0]}")
        histories = [by_addr[a] for a in wanted]
        if cfg.cutoff is not None:
            histories = [make_history(h.address, h.transactions, h.token_transfers,
                                      truncated=h.truncated, cutoff_timestamp=cfg.cutoff)
                         for h in histories]
        return histories
    by_addr = load_history_dumps(cfg.tx_dump, wanted, cfg.token_dump, cfg.cutoff)
    return [by_addr[a] for a in wanted]


def cmd_extract(cfg: RunConfig) -> list[str]:
    from ethrep.catalog import FEATURE_NAMES
    from ethrep.dataset import AccountFeatureVector, Dataset, read_labels_csv, write_dataset_csv
    from ethrep.features import extract_batch, extract_features
    labels = read_labels_csv(cfg.labels) if cfg.labels is not None else None
    if labels is not None:
        wanted = list(labels)
    elif cfg.addresses is not None:
        wanted = read_address_list(cfg.addresses)
    else:
        wanted = None
    histories = _load_histories(cfg, wanted)
    if labels is not None:
        dataset = extract_batch(histories, labels)
    else:
        dataset = Dataset(tuple(AccountFeatureVector(v.address, v.features, None)
                                for v in map(extract_features, histories)), FEATURE_NAMES)
    n_trunc = sum(h.truncated for h in histories)
    if n_trunc:
        logger.warning("%d of %d histories were truncated at fetch time", n_trunc, len(histories))
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(dataset, cfg.run_dir / "dataset.csv")
    logger.info("extracted %d accounts", len(dataset))
    return ["dataset.csv"]


def _labelled_dataset(path: Path):
    from ethrep.dataset import read_dataset_csv
    ds = read_dataset_csv(path)
    ds.y  # noqa: B018 - raises early on unlabeled rows
    return ds


def cmd_train(cfg: RunConfig) -> list[str]:
    from ethrep.gbdt import save_model, train
    ds = _labelled_dataset(cfg.dataset)
    model = train(ds, gbdt_config(cfg))
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, cfg.run_dir / "model.json")
    with open(cfg.run_dir / "train_loss.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration,train_log_loss\n")
        for i, v in enumerate(model.train_loss, start=1):
            fh.write(f"{i},{float(v)!r}\n")
    logger.info("trained %d trees on %d rows; final training log-loss %.5f",
                len(model.trees), len(ds), model.train_loss[-1])
    return ["model.json", "train_loss.csv"]


def cmd_cv(cfg: RunConfig) -> list[str]:
    from ethrep.evaluation import cross_validate
    from ethrep.evaluation import reports
    from ethrep.evaluation.metrics import roc_auc
    ds = _labelled_dataset(cfg.dataset)
    res = cross_validate(ds, gbdt_config(cfg), k=cfg.k, seed=cfg.seed, threshold=cfg.threshold,
                         stratified=cfg.stratified, threads=cfg.threads)
    d = cfg.run_dir
    d.mkdir(parents=True, exist_ok=True)
    reports.write_folds_csv(res, d / "folds.csv")
    reports.write_curves_csv(res, d / "curves.csv")
    reports.write_oof_csv(res, d / "oof.csv")
    reports.write_misclassified_csv(res, d / "misclassified.csv")
    reports.write_roc_csv(res.oof_probabilities, res.labels, d / "roc.csv")
    pooled_auc, _ = roc_auc(res.oof_probabilities, res.labels)
    text = reports.summary_text(res.confusion, res.fold_auc, res.fold_accuracy, pooled_auc)
    (d / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return ["folds.csv", "curves.csv", "oof.csv", "misclassified.csv", "roc.csv", "summary.txt"]


def cmd_gridsearch(cfg: RunConfig) -> list[str]:
    from ethrep.evaluation import grid_search
    from ethrep.evaluation.reports import write_grid_csv
    ds = _labelled_dataset(cfg.dataset)
    res = grid_search(ds, cfg.learning_rates, cfg.n_estimators_grid, cfg.max_depths, k=cfg.k,
                      seed=cfg.seed, base_config=gbdt_config(cfg), threshold=cfg.threshold,
                      stratified=cfg.stratified, threads=cfg.threads)
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    write_grid_csv(res, cfg.run_dir / "grid.csv")
    b = res.best
    best = {"learning_rate": b.learning_rate, "n_estimators": b.n_estimators,
            "max_depth": b.max_depth, "mean_auc": b.mean_auc, "std_auc": b.std_auc,
            "mean_accuracy": b.mean_accuracy}
    (cfg.run_dir / "best.json").write_text(json.dumps(best, indent=1, sort_keys=True) + "\n",
                                           encoding="utf-8")
    print(f"best: learning_rate={b.learning_rate} n_estimators={b.n_estimators} "
          f"max_depth={b.max_depth} mean AUC={b.mean_auc:.4f} (+/- {b.std_auc:.4f})")
    return ["grid.csv", "best.json"]


def cmd_predict(cfg: RunConfig) -> list[str]:
    from ethrep.dataset import read_dataset_csv
    from ethrep.gbdt import load_model
    model = load_model(cfg.model)
    ds = read_dataset_csv(cfg.dataset)
    if tuple(ds.feature_names) != tuple(model.feature_names):
        raise RuntimeError("dataset feature columns do not match the model")
    p = model.predict_proba(ds.X)
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.run_dir / "predictions.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("address,probability_illicit,predicted_flag\n")
        for a, q in zip(ds.addresses, p):
            fh.write(f"{a},{float(q)!r},{int(q >= cfg.threshold)}\n")
    return ["predictions.csv"]


def cmd_importance(cfg: RunConfig) -> list[str]:
    from ethrep.gbdt import feature_importance, load_model
    imp = feature_importance([load_model(p) for p in cfg.model])
    gain_rank = {name: r for r, (name, _) in enumerate(imp.ranking("gain"), start=1)}
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.run_dir / "importance.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("feature,split,gain,split_rank,gain_rank\n")
        for r, (name, _) in enumerate(imp.ranking("split"), start=1):
            j = imp.feature_names.index(name)
            fh.write(f"{name},{int(imp.split_count[j])},{float(imp.total_gain[j])!r},"
                     f"{r},{gain_rank[name]}\n")
    for name, count in imp.ranking("split")[:5]:
        print(f"{name}: {int(count)} splits")
    return ["importance.csv"]


def cmd_tsne(cfg: RunConfig) -> list[str]:
    from ethrep.dataset import read_dataset_csv
    from ethrep.tsne import embed, write_embedding_csv
    ds = read_dataset_csv(cfg.dataset)
    emb = embed(ds, tsne_config(cfg))
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    write_embedding_csv(emb, cfg.run_dir / "embedding.csv")
    with open(cfg.run_dir / "kl_trace.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration,kl_divergence\n")
        for i, v in enumerate(emb.kl_trace, start=1):
            fh.write(f"{i},{float(v)!r}\n")
    logger.info("final KL divergence %.5f", emb.kl_divergence)
    return ["embedding.csv", "kl_trace.csv"]


def cmd_report(cfg: RunConfig) -> list[str]:
    from ethrep.evaluation.reports import report_from_oof
    oof = cfg.cv_dir / "oof.csv"
    if not oof.is_file():
        raise ConfigError("cv-dir", f"no oof.csv in {cfg.cv_dir}")
    _, text = report_from_oof(oof, cfg.threshold)
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    (cfg.run_dir / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return ["report.txt"]


def cmd_catalog(cfg: RunConfig) -> list[str]:
    from ethrep.catalog import write_catalog_csv
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    write_catalog_csv(cfg.run_dir / "feature_catalog.csv")
    return ["feature_catalog.csv"]


def cmd_synth(cfg: RunConfig) -> list[str]:
    from ethrep.dataset import write_dataset_csv
    from ethrep.features import extract_batch
    from ethrep.ingestion import write_history_dumps
    from ethrep.synthetic import generate_corpus
    if cfg.n_accounts < 20:
        raise ConfigError("n-accounts", "must be at least 20")
    if not 0.0 <= cfg.mimic_fraction < 1.0:
        raise ConfigError("mimic-fraction", "must be in [0, 1)")
    histories, labels = generate_corpus(cfg.n_accounts, mimic_fraction=cfg.mimic_fraction,
                                        seed=cfg.seed)
    d = cfg.run_dir
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "labels.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("address,flag\n")
        for a, f in labels.items():
            fh.write(f"{a},{int(f)}\n")
    write_history_dumps(histories, d / "transactions.csv", d / "token_transfers.csv")
    write_dataset_csv(extract_batch(histories, labels), d / "dataset.csv")
    return ["labels.csv", "transactions.csv", "token_transfers.csv", "dataset.csv"]


COMMANDS: dict[str, Callable[[RunConfig], list[str]]] = {
    "fetch": cmd_fetch, "extract": cmd_extract, "train": cmd_train, "cv": cmd_cv,
    "gridsearch": cmd_gridsearch, "predict": cmd_predict, "importance": cmd_importance,
    "tsne": cmd_tsne, "report": cmd_report, "catalog": cmd_catalog, "synth": cmd_synth,
}


def _seed_of(cfg: RunConfig) -> Optional[int]:
    return cfg.options.get("seed")


def main(argv: Optional[Sequence[str]] = None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                            stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit 2, --help/--version exit 0
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        outputs = COMMANDS[cfg.subcommand](cfg)
        if outputs:
            write_manifest(cfg, outputs, _seed_of(cfg))
    except ConfigError as exc:
        print(f"ethrep {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any failure after validation is a runtime failure
        logger.error("%s failed: %s: %s", args.subcommand, type(exc).__name__, exc)
        return 1
    return 0


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
