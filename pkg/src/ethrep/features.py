"""The 38-feature account fingerprint computed from a raw history."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ethrep.catalog import FEATURE_NAMES, INDEX, N_FEATURES, catalog  # noqa: F401
from ethrep.dataset import AccountFeatureVector, Address, Dataset, Flag
from ethrep.ingestion import AccountHistory

WEI_PER_ETHER = 10**18


class MissingLabel(KeyError):
    pass


def _avg_gap_minutes(timestamps: Sequence[int]) -> float:
    # mean consecutive gap telescopes to (last - first) / (k - 1)
    if len(timestamps) < 2:
        return 0.0
    return (max(timestamps) - min(timestamps)) / (len(timestamps) - 1) / 60.0


def _wei_stats(values: Sequence[int]) -> tuple[float, float, float]:
    """(min, max, avg) in Ether; zeros for an empty set.

    Each value is one correctly rounded integer division, so min <= avg <= max
    holds exactly after conversion.
    """
    if not values:
        return 0.0, 0.0, 0.0
    return (min(values) / WEI_PER_ETHER, max(values) / WEI_PER_ETHER,
            sum(values) / (len(values) * WEI_PER_ETHER))


def _token_stats(values: Sequence[Fraction]) -> tuple[float, float, float]:
    if not values:
        return 0.0, 0.0, 0.0
    return float(min(values)), float(max(values)), float(sum(values) / len(values))


def extract_features(history: AccountHistory) -> AccountFeatureVector:
    """Compute the catalog features for one account.

    Totals are accumulated as exact integers (wei) or fractions (token units) and
    converted to floats once, so the result does not depend on record order.
    Failed transactions count toward transaction counts but not value aggregates.
    """
    me = history.address
    txs = history.transactions
    contracts = set(history.known_contracts)
    contracts.update(t.contract_address for t in txs if t.contract_address is not None)

    received = [t for t in txs if t.to == me]
    sent = [t for t in txs if t.from_ == me and not t.is_contract_creation]
    created = [t for t in txs if t.from_ == me and t.is_contract_creation]

    recv_vals = [t.value for t in received if not t.is_error]
    sent_plain = [t.value for t in sent if not t.is_error and t.to not in contracts]
    sent_contract = [t.value for t in sent if not t.is_error and t.to in contracts]
    sent_contract += [t.value for t in created if not t.is_error]

    involved = [t.timestamp for t in txs]
    f = [0.0] * N_FEATURES
    f[INDEX["avg_min_between_sent_tnx"]] = _avg_gap_minutes([t.timestamp for t in sent])
    f[INDEX["avg_min_between_received_tnx"]] = _avg_gap_minutes([t.timestamp for t in received])
    f[INDEX["time_diff_first_last_mins"]] = (
        (max(involved) - min(involved)) / 60.0 if involved else 0.0)
    f[INDEX["sent_tnx"]] = float(len(sent))
    f[INDEX["received_tnx"]] = float(len(received))
    f[INDEX["number_of_created_contracts"]] = float(len(created))
    f[INDEX["unique_received_from_addresses"]] = float(len({t.from_ for t in received}))
    f[INDEX["unique_sent_to_addresses"]] = float(len({t.to for t in sent}))

    (f[INDEX["min_value_received"]], f[INDEX["max_value_received"]],
     f[INDEX["avg_value_received"]]) = _wei_stats(recv_vals)
    (f[INDEX["min_value_sent"]], f[INDEX["max_value_sent"]],
     f[INDEX["avg_value_sent"]]) = _wei_stats(sent_plain)
    (f[INDEX["min_value_sent_to_contract"]], f[INDEX["max_value_sent_to_contract"]],
     f[INDEX["avg_value_sent_to_contract"]]) = _wei_stats(sent_contract)

    f[INDEX["total_transactions_incl_contract_creation"]] = float(
        len(sent) + len(received) + len(created))
    tot_recv, tot_sent, tot_sentc = sum(recv_vals), sum(sent_plain), sum(sent_contract)
    f[INDEX["total_ether_sent"]] = tot_sent / WEI_PER_ETHER
    f[INDEX["total_ether_received"]] = tot_recv / WEI_PER_ETHER
    f[INDEX["total_ether_sent_contracts"]] = tot_sentc / WEI_PER_ETHER
    f[INDEX["total_ether_balance"]] = (tot_recv - tot_sent - tot_sentc) / WEI_PER_ETHER

    tts = history.token_transfers
    t_recv = [t for t in tts if t.to == me]
    t_sent = [t for t in tts if t.from_ == me]
    recv_amt = [Fraction(t.value, 10**t.token_decimals) for t in t_recv]
    sent_amt = [Fraction(t.value, 10**t.token_decimals) for t in t_sent]

    f[INDEX["total_erc20_tnxs"]] = float(len(tts))
    f[INDEX["erc20_total_ether_received"]] = float(sum(recv_amt, Fraction(0)))
    f[INDEX["erc20_total_ether_sent"]] = float(sum(sent_amt, Fraction(0)))
    f[INDEX["erc20_uniq_sent_addr"]] = float(len({t.to for t in t_sent}))
    f[INDEX["erc20_uniq_rec_addr"]] = float(len({t.from_ for t in t_recv}))
    f[INDEX["erc20_uniq_rec_contract_addr"]] = float(len({t.token_contract for t in t_recv}))
    f[INDEX["erc20_avg_time_between_sent_tnx"]] = _avg_gap_minutes([t.timestamp for t in t_sent])
    f[INDEX["erc20_avg_time_between_rec_tnx"]] = _avg_gap_minutes([t.timestamp for t in t_recv])
    (f[INDEX["erc20_min_val_rec"]], f[INDEX["erc20_max_val_rec"]],
     f[INDEX["erc20_avg_val_rec"]]) = _token_stats(recv_amt)
    (f[INDEX["erc20_min_val_sent"]], f[INDEX["erc20_max_val_sent"]],
     f[INDEX["erc20_avg_val_sent"]]) = _token_stats(sent_amt)
    f[INDEX["erc20_uniq_sent_token_name"]] = float(len({t.token_name for t in t_sent}))
    f[INDEX["erc20_uniq_rec_token_name"]] = float(len({t.token_name for t in t_recv}))

    return AccountFeatureVector(me, tuple(f))


def extract_batch(histories: Iterable[AccountHistory],
                  labels: Mapping[Address, Flag]) -> Dataset:
    rows = []
    for h in histories:
        if h.address not in labels:
            raise MissingLabel(f"no label for {h.address}")
        vec = extract_features(h)
        rows.append(AccountFeatureVector(vec.address, vec.features, Flag(labels[h.address])))
    return Dataset(tuple(rows), FEATURE_NAMES)
