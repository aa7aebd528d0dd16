"""Synthetic labelled account histories for offline end-to-end runs.

Reputable accounts receive often (mean gaps of a few minutes) and send
little; illicit accounts receive every few tens of minutes and forward more
of what they take in. Per-account gap and volume rates are lognormal, so the
two classes overlap and the corpus is not perfectly separable. Optionally a
fraction of accounts is drawn from the other class's process (mimics).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
import numpy as np

from ethrep.dataset import Address, Dataset, Flag, TokenTransferRecord, TransactionRecord
from ethrep.features import extract_batch
from ethrep.ingestion import AccountHistory, make_history

START = 1451606400  # 2016-01-01T00:00:00Z
CUTOFF = 1561939199  # 2019-06-30T23:59:59Z

TOKEN_NAMES = ("Tether USD", "Maker", "Basic Attention Token", "OmiseGO", "Golem",
               "Augur", "Status", "0x Protocol", "Kyber", "Bancor", "Aragon", "Civic")


@dataclass(frozen=True)
class ClassProcess:
    log_received: float     # log of median received-transaction count
    received_sigma: float
    mean_gap_s: float       # mean gap between received transactions
    gap_sigma: float        # per-account spread of that mean (lognormal)
    sender_pool: float      # distinct senders as a fraction of received count
    send_ratio: float       # expected sent / received
    token_ratio: float      # expected token transfers / received
    log_value: float        # log of median received value in ether


REPUTABLE = ClassProcess(np.log(120), 1.0, 165.5, 1.0, 0.7, 0.30, 0.3, 0.0)
ILLICIT = ClassProcess(np.log(30), 1.0, 47 * 60.0, 1.0, 0.7, 0.45, 0.2, 0.0)


def _address(rng: np.random.Generator) -> Address:
    return Address("0x" + rng.bytes(20).hex())


def _hash(rng: np.random.Generator) -> str:
    return "0x" + rng.bytes(32).hex()


def _ether(rng, log_median, size) -> list[int]:
    return [int(v * 1e6) * 10**12 for v in rng.lognormal(log_median, 0.6, size)]


def generate_history(rng: np.random.Generator, proc: ClassProcess,
                     contracts: list[Address]) -> AccountHistory:
    me = _address(rng)
    n_recv = int(np.clip(round(rng.lognormal(proc.log_received, proc.received_sigma)), 1, 3000))
    mean_gap = proc.mean_gap_s * rng.lognormal(0.0, proc.gap_sigma)
    gaps = rng.exponential(mean_gap, n_recv)
    t0 = int(rng.integers(START, CUTOFF - 86400 * 30))
    recv_times = t0 + np.cumsum(gaps).astype(np.int64)

    n_senders = max(1, int(round(n_recv * proc.sender_pool * rng.uniform(0.5, 1.0))))
    senders = [_address(rng) for _ in range(n_senders)]
    txs = []
    for ts, v in zip(recv_times, _ether(rng, proc.log_value, n_recv)):
        txs.append(TransactionRecord(_hash(rng), senders[int(rng.integers(n_senders))], me,
                                     v, int(ts), is_error=bool(rng.random() < 0.01)))

    received_total = sum(t.value for t in txs)
    n_sent = int(rng.poisson(n_recv * proc.send_ratio))
    if n_sent:
        span_end = int(recv_times[-1]) + int(mean_gap)
        sent_times = np.sort(rng.integers(t0, span_end + 1, n_sent))
        budget = received_total * rng.uniform(0.3, 0.98)
        shares = rng.dirichlet(np.ones(n_sent))
        recipients = [_address(rng) for _ in range(max(1, n_sent // 3))]
        for ts, share in zip(sent_times, shares):
            to = (contracts[int(rng.integers(len(contracts)))] if rng.random() < 0.2
                  else recipients[int(rng.integers(len(recipients)))])
            txs.append(TransactionRecord(_hash(rng), me, to, int(budget * share), int(ts)))
    if rng.random() < 0.05:
        created = _address(rng)
        txs.append(TransactionRecord(_hash(rng), me, None, 0, int(t0), is_contract_creation=True,
                                     contract_address=created))

    tts = []
    n_tok = int(rng.poisson(n_recv * proc.token_ratio))
    if n_tok:
        tok_times = np.sort(rng.integers(t0, int(recv_times[-1]) + 1, n_tok))
        peers = [_address(rng) for _ in range(max(1, n_tok // 2))]
        for ts in tok_times:
            k = int(rng.integers(len(TOKEN_NAMES)))
            decimals = 6 if k == 0 else 18
            amount = int(rng.lognormal(3.0, 2.0) * 10**decimals)
            peer = peers[int(rng.integers(len(peers)))]
            incoming = rng.random() < 0.7
            tts.append(TokenTransferRecord(_hash(rng), peer if incoming else me,
                                           me if incoming else peer, amount, decimals,
                                           TOKEN_NAMES[k], contracts[k], int(ts)))
    return make_history(me, txs, tts, cutoff_timestamp=CUTOFF)


def generate_corpus(n_accounts: int = 1000, illicit_fraction: float = 0.354,
                    mimic_fraction: float = 0.0, seed: int = 7
                    ) -> tuple[list[AccountHistory], dict[Address, Flag]]:
    """Histories and labels for ``n_accounts`` accounts, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    contracts = [_address(rng) for _ in TOKEN_NAMES]
    n_illicit = int(round(n_accounts * illicit_fraction))
    flags = [Flag.ILLICIT] * n_illicit + [Flag.LIKELY_REPUTABLE] * (n_accounts - n_illicit)
    flags = [flags[i] for i in rng.permutation(n_accounts)]
    histories, labels = [], {}
    for flag in flags:
        proc = ILLICIT if flag is Flag.ILLICIT else REPUTABLE
        if rng.random() < mimic_fraction:
            proc = REPUTABLE if proc is ILLICIT else ILLICIT
        h = generate_history(rng, proc, contracts)
        histories.append(h)
        labels[h.address] = flag
    return histories, labels


def synthetic_dataset(n_accounts: int = 1000, seed: int = 7, mimic_fraction: float = 0.0) -> Dataset:
    histories, labels = generate_corpus(n_accounts, seed=seed, mimic_fraction=mimic_fraction)
    return extract_batch(histories, labels)


def bundled_path(name: str = "synthetic_corpus.csv") -> Path:
    """Path of a bundled dataset: ``synthetic_corpus.csv`` (1,000 accounts, seed 7)
    or ``toy.csv`` (300 accounts, seed 11)."""
    return Path(str(resources.files("ethrep") / "data" / name))
