"""Domain types shared across the toolkit and the dataset CSV format."""

from __future__ import annotations

import csv
import enum
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ethrep.catalog import FEATURE_NAMES, N_FEATURES

_ADDRESS_RE = re.compile(r"^0x[0-9a-f]{40}$")
_HASH_RE = re.compile(r"^0x[0-9a-f]{64}$")


class DatasetError(Exception):
    pass


class MissingColumn(DatasetError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


class DuplicateAddress(DatasetError):
    pass


class Address(str):
    """A 20-byte account identifier, canonicalized to lowercase ``0x`` hex."""

    __slots__ = ()

    def __new__(cls, value: str) -> "Address":
        if isinstance(value, Address):
            return value
        canon = str(value).strip().lower()
        if not _ADDRESS_RE.match(canon):
            raise ValueError(f"not a 20-byte hex address: {value!r}")
        return super().__new__(cls, canon)


def tx_hash(value: str) -> str:
    canon = str(value).strip().lower()
    if not _HASH_RE.match(canon):
        raise ValueError(f"not a 32-byte hex hash: {value!r}")
    return canon


class Flag(enum.IntEnum):
    LIKELY_REPUTABLE = 0
    ILLICIT = 1

    @property
    def label(self) -> str:
        return "likely-reputable" if self is Flag.LIKELY_REPUTABLE else "illicit"


@dataclass(frozen=True)
class TransactionRecord:
    hash: str
    from_: Address
    to: Optional[Address]
    value: int  # wei
    timestamp: int
    is_contract_creation: bool = False
    is_error: bool = False
    # address of the contract created by this transaction, when known
    contract_address: Optional[Address] = None

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("transaction value must be non-negative")
        if (self.to is None) != self.is_contract_creation:
            raise ValueError("'to' must be absent exactly for contract creations")


@dataclass(frozen=True)
class TokenTransferRecord:
    hash: str
    from_: Address
    to: Address
    value: int  # smallest token unit
    token_decimals: int
    token_name: str
    token_contract: Address
    timestamp: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("token value must be non-negative")
        if not 0 <= self.token_decimals <= 77:
            raise ValueError(f"token_decimals out of range: {self.token_decimals}")


@dataclass(frozen=True)
class AccountLabel:
    address: Address
    flag: Flag


def labels_to_dict(labels: Iterable[AccountLabel]) -> dict[Address, Flag]:
    out: dict[Address, Flag] = {}
    for lab in labels:
        if lab.address in out:
            raise DuplicateAddress(lab.address)
        out[lab.address] = lab.flag
    return out


def read_labels_csv(path: str | Path) -> dict[Address, Flag]:
    """Read an ``address,flag`` file into a mapping; duplicates are rejected."""
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in ("address", "flag"):
            if reader.fieldnames is None or col not in reader.fieldnames:
                raise MissingColumn(col)
        for i, rec in enumerate(reader, start=2):
            try:
                labels.append(AccountLabel(Address(rec["address"]), _parse_flag(rec["flag"])))
            except ValueError as exc:
                raise ParseError(str(exc), row=i) from None
    return labels_to_dict(labels)


@dataclass(frozen=True)
class AccountFeatureVector:
    address: Address
    features: tuple[float, ...]
    flag: Optional[Flag] = None

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {len(self.features)}")
        if not all(math.isfinite(v) for v in self.features):
            raise ValueError(f"non-finite feature value for {self.address}")


@dataclass(frozen=True)
class Dataset:
    rows: tuple[AccountFeatureVector, ...]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        seen: dict[Address, int] = {}
        for i, row in enumerate(self.rows):
            if row.address in seen:
                raise DuplicateAddress(row.address)
            seen[row.address] = i
        object.__setattr__(self, "_index", seen)

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def X(self) -> np.ndarray:
        X = np.array([r.features for r in self.rows], dtype=np.float64)
        X.shape = (len(self.rows), len(self.feature_names))
        X.flags.writeable = False
        return X

    @cached_property
    def y(self) -> np.ndarray:
        """Labels as 0/1 floats; raises if any row is unlabeled."""
        if any(r.flag is None for r in self.rows):
            raise ValueError("dataset contains unlabeled rows")
        y = np.array([int(r.flag) for r in self.rows], dtype=np.float64)
        y.flags.writeable = False
        return y

    @property
    def addresses(self) -> list[Address]:
        return [r.address for r in self.rows]

    def class_counts(self) -> dict[Flag, int]:
        counts = Counter(r.flag for r in self.rows if r.flag is not None)
        return {flag: counts.get(flag, 0) for flag in Flag}

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(tuple(self.rows[i] for i in indices), self.feature_names)

    def index_of(self, address: str) -> int:
        return self._index[Address(address)]


def _parse_flag(text: str) -> Optional[Flag]:
    text = text.strip()
    if text == "":
        return None
    try:
        return Flag(int(text))
    except ValueError:
        raise ValueError(f"flag must be 0 or 1, got {text!r}") from None


def read_dataset_csv(path: str | Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("empty file: no header row") from None
        col = {name: i for i, name in enumerate(header)}
        for name in ("address", "flag", *FEATURE_NAMES):
            if name not in col:
                raise MissingColumn(name)
        feat_cols = [col[name] for name in FEATURE_NAMES]

        rows = []
        seen = set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", row=lineno)
            try:
                address = Address(rec[col["address"]])
            except ValueError as exc:
                raise ParseError(str(exc), row=lineno, column="address") from None
            if address in seen:
                raise DuplicateAddress(f"{address} (row {lineno})")
            seen.add(address)
            try:
                flag = _parse_flag(rec[col["flag"]])
            except ValueError as exc:
                raise ParseError(str(exc), row=lineno, column="flag") from None
            values = []
            for name, j in zip(FEATURE_NAMES, feat_cols):
                # float() is locale-independent and only accepts '.' decimals
                try:
                    v = float(rec[j])
                except ValueError:
                    raise ParseError(f"not a number: {rec[j]!r}", row=lineno, column=name) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value: {rec[j]!r}", row=lineno, column=name)
                values.append(v)
            rows.append(AccountFeatureVector(address, tuple(values), flag))
    return Dataset(tuple(rows), FEATURE_NAMES)


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["address", "flag", *dataset.feature_names])
        for row in dataset.rows:
            flag = "" if row.flag is None else str(int(row.flag))
            # repr() gives the shortest string that round-trips exactly
            writer.writerow([row.address, flag, *(repr(float(v)) for v in row.features)])
