"""The versioned 38-entry account feature catalog."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

CATALOG_VERSION = 1


class Family(str, enum.Enum):
    COUNT = "Count"
    TIME_STAT = "TimeStat"
    VALUE_STAT = "ValueStat"
    ERC20_STAT = "Erc20Stat"
    BALANCE = "Balance"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    unit: str
    family: Family


_C, _T, _V, _E, _B = (
    Family.COUNT,
    Family.TIME_STAT,
    Family.VALUE_STAT,
    Family.ERC20_STAT,
    Family.BALANCE,
)

# Order is part of the on-disk contract (CSV columns, model feature indices).
# Changing it requires bumping CATALOG_VERSION.
FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec("avg_min_between_sent_tnx", "minutes", _T),
    FeatureSpec("avg_min_between_received_tnx", "minutes", _T),
    FeatureSpec("time_diff_first_last_mins", "minutes", _T),
    FeatureSpec("sent_tnx", "count", _C),
    FeatureSpec("received_tnx", "count", _C),
    FeatureSpec("number_of_created_contracts", "count", _C),
    FeatureSpec("unique_received_from_addresses", "count", _C),
    FeatureSpec("unique_sent_to_addresses", "count", _C),
    FeatureSpec("min_value_received", "ether", _V),
    FeatureSpec("max_value_received", "ether", _V),
    FeatureSpec("avg_value_received", "ether", _V),
    FeatureSpec("min_value_sent", "ether", _V),
    FeatureSpec("max_value_sent", "ether", _V),
    FeatureSpec("avg_value_sent", "ether", _V),
    FeatureSpec("min_value_sent_to_contract", "ether", _V),
    FeatureSpec("max_value_sent_to_contract", "ether", _V),
    FeatureSpec("avg_value_sent_to_contract", "ether", _V),
    FeatureSpec("total_transactions_incl_contract_creation", "count", _C),
    FeatureSpec("total_ether_sent", "ether", _V),
    FeatureSpec("total_ether_received", "ether", _V),
    FeatureSpec("total_ether_sent_contracts", "ether", _V),
    FeatureSpec("total_ether_balance", "ether", _B),
    FeatureSpec("total_erc20_tnxs", "count", _E),
    FeatureSpec("erc20_total_ether_received", "token", _E),
    FeatureSpec("erc20_total_ether_sent", "token", _E),
    FeatureSpec("erc20_uniq_sent_addr", "count", _E),
    FeatureSpec("erc20_uniq_rec_addr", "count", _E),
    FeatureSpec("erc20_uniq_rec_contract_addr", "count", _E),
    FeatureSpec("erc20_avg_time_between_sent_tnx", "minutes", _E),
    FeatureSpec("erc20_avg_time_between_rec_tnx", "minutes", _E),
    FeatureSpec("erc20_min_val_rec", "token", _E),
    FeatureSpec("erc20_max_val_rec", "token", _E),
    FeatureSpec("erc20_avg_val_rec", "token", _E),
    FeatureSpec("erc20_min_val_sent", "token", _E),
    FeatureSpec("erc20_max_val_sent", "token", _E),
    FeatureSpec("erc20_avg_val_sent", "token", _E),
    FeatureSpec("erc20_uniq_sent_token_name", "count", _E),
    FeatureSpec("erc20_uniq_rec_token_name", "count", _E),
)

FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in FEATURES)
N_FEATURES = len(FEATURES)
INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

assert N_FEATURES == 38 and len(INDEX) == N_FEATURES


def catalog() -> tuple[FeatureSpec, ...]:
    return FEATURES


def write_catalog_csv(path: str | Path) -> None:
    """Write the catalog as ``name,unit,family,index`` rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "unit", "family", "index"])
        for i, spec in enumerate(FEATURES):
            writer.writerow([spec.name, spec.unit, spec.family.value, i])
