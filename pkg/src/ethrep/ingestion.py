"""Raw transaction histories from an Etherscan-compatible API or local dumps."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import httpx

from ethrep.dataset import (
    Address,
    ParseError,
    TokenTransferRecord,
    TransactionRecord,
    tx_hash,
)

logger = logging.getLogger(__name__)

EXPLORER_PAGE_CAP = 10_000
API_KEY_ENV = "ETHERSCAN_API_KEY"
MAX_ATTEMPTS = 5


class IngestionError(Exception):
    pass


class RateLimited(IngestionError):
    pass


class HttpError(IngestionError):
    pass


class MalformedResponse(IngestionError):
    pass


@dataclass(frozen=True)
class ExplorerConfig:
    base_url: str = "https://api.etherscan.io/api"
    api_key: str = ""
    max_requests_per_second: float = 5.0
    page_size: int = EXPLORER_PAGE_CAP
    cutoff_timestamp: Optional[int] = None
    backoff_base: float = 1.0

    def __post_init__(self):
        if not self.max_requests_per_second > 0:
            raise ValueError("max_requests_per_second must be positive")
        if not 1 <= self.page_size <= EXPLORER_PAGE_CAP:
            raise ValueError(f"page_size must be in [1, {EXPLORER_PAGE_CAP}]")


@dataclass(frozen=True)
class AccountHistory:
    address: Address
    transactions: tuple[TransactionRecord, ...] = ()
    token_transfers: tuple[TokenTransferRecord, ...] = ()
    truncated: bool = False
    # addresses the source marked as contracts (created contracts, token contracts)
    known_contracts: frozenset[Address] = field(default_factory=frozenset)

    def __post_init__(self):
        for records in (self.transactions, self.token_transfers):
            for r in records:
                if self.address not in (r.from_, r.to):
                    raise ValueError(f"record {r.hash} does not involve {self.address}")
            if any(a.timestamp > b.timestamp for a, b in zip(records, records[1:])):
                raise ValueError("records must be in ascending timestamp order")


def _sort_key(r):
    return (r.timestamp, r.hash)


def make_history(
    address: Address,
    transactions: Iterable[TransactionRecord],
    token_transfers: Iterable[TokenTransferRecord],
    *,
    truncated: bool = False,
    cutoff_timestamp: Optional[int] = None,
) -> AccountHistory:
    """Sort, filter by cutoff, and collect contract markers into a history."""
    txs = [t for t in transactions if cutoff_timestamp is None or t.timestamp <= cutoff_timestamp]
    tts = [t for t in token_transfers if cutoff_timestamp is None or t.timestamp <= cutoff_timestamp]
    txs.sort(key=_sort_key)
    tts.sort(key=_sort_key)
    contracts = {t.contract_address for t in txs if t.contract_address is not None}
    contracts.update(t.token_contract for t in tts)
    return AccountHistory(address, tuple(txs), tuple(tts), truncated, frozenset(contracts))


class RateLimiter:
    """Token bucket of capacity one: consecutive grants are >= 1/rate apart.

    That spacing bounds any 1-second window to ceil(rate) grants. The spacing
    is padded by a relative 1e-6 so float round-off in the accumulated grant
    times can never squeeze an extra grant into a window.
    """

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = (1.0 + 1e-6) / rate
        self.clock = clock
        self.sleep = sleep
        self._next = -math.inf
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            now = self.clock()
            if now < self._next:
                self.sleep(self._next - now)
                now = self._next
            self._next = now + self.interval
            return now


# ---------------------------------------------------------------- parsing

def _as_bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true"):
        return True
    if s in ("0", "false", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_address(text) -> Optional[Address]:
    text = (text or "").strip()
    return Address(text) if text else None


def parse_explorer_tx(item: dict) -> TransactionRecord:
    to = _opt_address(item.get("to"))
    created = _opt_address(item.get("contractAddress"))
    return TransactionRecord(
        hash=tx_hash(item["hash"]),
        from_=Address(item["from"]),
        to=to,
        value=int(item["value"]),
        timestamp=int(item["timeStamp"]),
        is_contract_creation=to is None,
        is_error=_as_bool(item.get("isError", "0")),
        contract_address=created if to is None else None,
    )


def parse_explorer_token_transfer(item: dict) -> TokenTransferRecord:
    decimals = str(item.get("tokenDecimal", "")).strip()
    return TokenTransferRecord(
        hash=tx_hash(item["hash"]),
        from_=Address(item["from"]),
        to=Address(item["to"]),
        value=int(item["value"]),
        token_decimals=int(decimals) if decimals else 0,
        token_name=item.get("tokenName", ""),
        token_contract=Address(item["contractAddress"]),
        timestamp=int(item["timeStamp"]),
    )


# ----------------------------------------------------------------- client

class ExplorerClient:
    """Minimal Etherscan v1 account-endpoint client with a shared rate budget."""

    def __init__(self, config: ExplorerConfig, http: Optional[httpx.Client] = None,
                 limiter: Optional[RateLimiter] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.http = http or httpx.Client(timeout=30.0)
        self.limiter = limiter or RateLimiter(config.max_requests_per_second)
        self.sleep = sleep
        self.requests_issued = 0

    def _get(self, params: dict) -> list:
        cfg = self.config
        for attempt in range(MAX_ATTEMPTS):
            self.limiter.acquire()
            self.requests_issued += 1
            try:
                resp = self.http.get(cfg.base_url, params=params)
            except httpx.HTTPError as exc:
                raise HttpError(str(exc)) from exc
            if resp.status_code == 429 or _is_rate_limit_body(resp):
                delay = cfg.backoff_base * 2**attempt
                logger.warning("rate limited (attempt %d/%d), backing off %.1fs",
                               attempt + 1, MAX_ATTEMPTS, delay)
                if attempt + 1 < MAX_ATTEMPTS:
                    self.sleep(delay)
                continue
            if resp.status_code != 200:
                raise HttpError(f"HTTP {resp.status_code} from {cfg.base_url}")
            return _unwrap(resp)
        raise RateLimited(f"still rate limited after {MAX_ATTEMPTS} attempts")

    def _list(self, action: str, address: Address) -> list:
        params = {
            "module": "account",
            "action": action,
            "address": str(address),
            "page": 1,
            "offset": self.config.page_size,
            "sort": "desc",
            "apikey": self.config.api_key,
        }
        return self._get(params)

    def fetch_account_history(self, address: Address) -> AccountHistory:
        address = Address(address)
        cap = self.config.page_size
        raw_txs = self._list("txlist", address)
        raw_tts = self._list("tokentx", address)
        truncated = len(raw_txs) >= cap or len(raw_tts) >= cap
        try:
            txs = [parse_explorer_tx(it) for it in raw_txs[:cap]]
            tts = [parse_explorer_token_transfer(it) for it in raw_tts[:cap]]
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedResponse(f"bad record for {address}: {exc}") from exc
        return make_history(address, txs, tts, truncated=truncated,
                            cutoff_timestamp=self.config.cutoff_timestamp)


def _is_rate_limit_body(resp: httpx.Response) -> bool:
    try:
        body = resp.json()
    except ValueError:
        return False
    return (isinstance(body, dict) and str(body.get("status")) == "0"
            and "rate limit" in str(body.get("result", "")).lower())


def _unwrap(resp: httpx.Response) -> list:
    try:
        body = resp.json()
    except ValueError as exc:
        raise MalformedResponse("response is not JSON") from exc
    if not isinstance(body, dict) or not {"status", "message", "result"} <= body.keys():
        raise MalformedResponse("missing status/message/result envelope")
    result = body["result"]
    if str(body["status"]) == "1":
        if not isinstance(result, list):
            raise MalformedResponse("result is not a list")
        return result
    # status 0 with an empty list is how the explorer reports "no transactions"
    if isinstance(result, list) and not result:
        return []
    if "no transactions found" in str(body["message"]).lower():
        return []
    raise HttpError(f"explorer error: {body['message']}: {result}")


def fetch_account_history(address: Address, config: ExplorerConfig,
                          http: Optional[httpx.Client] = None) -> AccountHistory:
    return ExplorerClient(config, http=http).fetch_account_history(address)


# ------------------------------------------------------------------ dumps

TX_DUMP_COLUMNS = ("hash", "from", "to", "value_wei", "timestamp",
                   "is_contract_creation", "is_error")
TOKEN_DUMP_COLUMNS = ("hash", "from", "to", "value_raw", "token_decimals",
                      "token_name", "token_contract", "timestamp")


def _read_dump(path, columns, parse):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"missing columns {missing} in {path}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                out.append(parse(rec))
            except (ValueError, TypeError) as exc:
                raise ParseError(str(exc), row=lineno) from None
    return out


def _parse_dump_tx(rec: dict) -> TransactionRecord:
    return TransactionRecord(
        hash=tx_hash(rec["hash"]),
        from_=Address(rec["from"]),
        to=_opt_address(rec["to"]),
        value=int(rec["value_wei"]),
        timestamp=int(rec["timestamp"]),
        is_contract_creation=_as_bool(rec["is_contract_creation"]),
        is_error=_as_bool(rec["is_error"]),
        contract_address=_opt_address(rec.get("contract_address")),
    )


def _parse_dump_token(rec: dict) -> TokenTransferRecord:
    return TokenTransferRecord(
        hash=tx_hash(rec["hash"]),
        from_=Address(rec["from"]),
        to=Address(rec["to"]),
        value=int(rec["value_raw"]),
        token_decimals=int(rec["token_decimals"]),
        token_name=rec["token_name"],
        token_contract=Address(rec["token_contract"]),
        timestamp=int(rec["timestamp"]),
    )


def load_history_dumps(tx_path, addresses: Iterable[str], token_path=None,
                       cutoff_timestamp: Optional[int] = None) -> dict[Address, AccountHistory]:
    """Split bulk dumps into per-address histories in a single pass."""
    wanted = {Address(a): ([], []) for a in addresses}
    for tx in _read_dump(tx_path, TX_DUMP_COLUMNS, _parse_dump_tx):
        for a in {tx.from_, tx.to}:
            if a in wanted:
                wanted[a][0].append(tx)
    if token_path is not None:
        for tt in _read_dump(token_path, TOKEN_DUMP_COLUMNS, _parse_dump_token):
            for a in {tt.from_, tt.to}:
                if a in wanted:
                    wanted[a][1].append(tt)
    return {a: make_history(a, txs, tts, cutoff_timestamp=cutoff_timestamp)
            for a, (txs, tts) in wanted.items()}


def load_history_dump(path, address: str, token_path=None,
                      cutoff_timestamp: Optional[int] = None) -> AccountHistory:
    address = Address(address)
    return load_history_dumps(path, [address], token_path, cutoff_timestamp)[address]


def write_history_dumps(histories: Iterable[AccountHistory], tx_path, token_path) -> None:
    """Write histories in the dump schema; records shared by two histories appear once."""
    seen_tx, seen_tt = set(), set()
    with open(tx_path, "w", newline="", encoding="utf-8") as ftx, \
            open(token_path, "w", newline="", encoding="utf-8") as ftt:
        wtx = csv.writer(ftx, lineterminator="\n")
        wtt = csv.writer(ftt, lineterminator="\n")
        wtx.writerow([*TX_DUMP_COLUMNS, "contract_address"])
        wtt.writerow(TOKEN_DUMP_COLUMNS)
        for h in histories:
            for t in h.transactions:
                key = (t.hash, t.from_, t.to)
                if key in seen_tx:
                    continue
                seen_tx.add(key)
                wtx.writerow([t.hash, t.from_, t.to or "", t.value, t.timestamp,
                              int(t.is_contract_creation), int(t.is_error),
                              t.contract_address or ""])
            for t in h.token_transfers:
                key = (t.hash, t.from_, t.to, t.token_contract)
                if key in seen_tt:
                    continue
                seen_tt.add(key)
                wtt.writerow([t.hash, t.from_, t.to, t.value, t.token_decimals,
                              t.token_name, t.token_contract, t.timestamp])


# ---------------------------------------------------------- history store

def history_to_json(h: AccountHistory) -> dict:
    return {
        "address": h.address,
        "truncated": h.truncated,
        "known_contracts": sorted(h.known_contracts),
        "transactions": [
            {"hash": t.hash, "from": t.from_, "to": t.to, "value_wei": str(t.value),
             "timestamp": t.timestamp, "is_contract_creation": t.is_contract_creation,
             "is_error": t.is_error, "contract_address": t.contract_address}
            for t in h.transactions
        ],
        "token_transfers": [
            {"hash": t.hash, "from": t.from_, "to": t.to, "value_raw": str(t.value),
             "token_decimals": t.token_decimals, "token_name": t.token_name,
             "token_contract": t.token_contract, "timestamp": t.timestamp}
            for t in h.token_transfers
        ],
    }


def history_from_json(doc: dict) -> AccountHistory:
    txs = tuple(
        TransactionRecord(
            hash=t["hash"], from_=Address(t["from"]), to=_opt_address(t["to"]),
            value=int(t["value_wei"]), timestamp=int(t["timestamp"]),
            is_contract_creation=bool(t["is_contract_creation"]), is_error=bool(t["is_error"]),
            contract_address=_opt_address(t.get("contract_address")),
        )
        for t in doc["transactions"]
    )
    tts = tuple(
        TokenTransferRecord(
            hash=t["hash"], from_=Address(t["from"]), to=Address(t["to"]),
            value=int(t["value_raw"]), token_decimals=int(t["token_decimals"]),
            token_name=t["token_name"], token_contract=Address(t["token_contract"]),
            timestamp=int(t["timestamp"]),
        )
        for t in doc["token_transfers"]
    )
    return AccountHistory(Address(doc["address"]), txs, tts, bool(doc["truncated"]),
                          frozenset(Address(a) for a in doc.get("known_contracts", ())))


def history_path(store: Path, address: str) -> Path:
    return Path(store) / f"{Address(address)}.json"


def save_history(h: AccountHistory, store: Path) -> Path:
    """Atomically write one history file into the store directory."""
    path = history_path(store, h.address)
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(history_to_json(h), fh, indent=1)
    os.replace(tmp, path)
    return path


def load_history(path: Path) -> AccountHistory:
    with open(path, encoding="utf-8") as fh:
        return history_from_json(json.load(fh))
