import math

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import (
    ME,
    FakeExplorer,
    addr,
    explorer_token,
    explorer_tx,
    random_records,
    recv,
    send,
)
from ethrep.dataset import Address, ParseError, TransactionRecord
from ethrep.ingestion import (
    AccountHistory,
    ExplorerClient,
    ExplorerConfig,
    HttpError,
    MalformedResponse,
    RateLimited,
    RateLimiter,
    history_from_json,
    history_to_json,
    load_history,
    load_history_dump,
    load_history_dumps,
    make_history,
    save_history,
    write_history_dumps,
)

CUTOFF = 1561939199  # 2019-06-30T23:59:59Z


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.now += dt


def client(explorer, **cfg):
    clock = FakeClock()
    config = ExplorerConfig(base_url="http://explorer.test/api", api_key="k", **cfg)
    return ExplorerClient(config, http=explorer.client(),
                          limiter=RateLimiter(config.max_requests_per_second, clock, clock.sleep),
                          sleep=clock.sleep), clock


# ----------------------------------------------------------------- config

def test_page_size_cap():
    with pytest.raises(ValueError):
        ExplorerConfig(page_size=10_001)
    with pytest.raises(ValueError):
        ExplorerConfig(max_requests_per_second=0)


def test_history_invariants():
    with pytest.raises(ValueError):
        AccountHistory(ME, (recv(1, 10), recv(1, 5)))
    stranger = TransactionRecord("0x" + "ee" * 32, addr(5), addr(6), 1, 1)
    with pytest.raises(ValueError):
        AccountHistory(ME, (stranger,))


# ------------------------------------------------------------------ fetch

def test_unknown_address_gives_empty_history():
    c, _ = client(FakeExplorer())
    hist = c.fetch_account_history(ME)
    assert hist == AccountHistory(ME)
    assert not hist.truncated


def test_request_shape():
    fake = FakeExplorer()
    c, _ = client(fake, page_size=500)
    c.fetch_account_history(ME)
    assert [p["action"] for p in fake.calls] == ["txlist", "tokentx"]
    for p in fake.calls:
        assert p["module"] == "account" and p["sort"] == "desc"
        assert p["offset"] == "500" and p["page"] == "1" and p["address"] == ME
        assert p["apikey"] == "k"


def big_fixture(n=12_000, seed=3):
    rng = np.random.default_rng(seed)
    ts = np.sort(rng.integers(1_400_000_000, 1_600_000_000, n))
    return [recv(int(v), int(t)) for v, t in zip(rng.integers(1, 10**9, n), ts)]


def test_truncates_to_most_recent_page():
    records = big_fixture()
    fake = FakeExplorer(txs={ME: [explorer_tx(t) for t in records]})
    c, _ = client(fake)
    hist = c.fetch_account_history(ME)
    assert hist.truncated
    assert len(hist.transactions) == 10_000
    expected = sorted(records, key=lambda t: (t.timestamp, t.hash))[-10_000:]
    assert list(hist.transactions) == expected


def test_cutoff_filters_later_records():
    records = big_fixture(3_000, seed=4)
    fake = FakeExplorer(txs={ME: [explorer_tx(t) for t in records]})
    c, _ = client(fake, cutoff_timestamp=CUTOFF)
    hist = c.fetch_account_history(ME)
    assert hist.transactions and all(t.timestamp <= CUTOFF for t in hist.transactions)
    assert len(hist.transactions) == sum(t.timestamp <= CUTOFF for t in records)
    assert not hist.truncated


def test_fetch_matches_dump(tmp_path):
    rng = np.random.default_rng(9)
    txs, tts = random_records(rng, 60, 30)
    fake = FakeExplorer(txs={ME: [explorer_tx(t) for t in txs]},
                        tokens={ME: [explorer_token(t) for t in tts]})
    c, _ = client(fake, cutoff_timestamp=1_560_000_000)
    fetched = c.fetch_account_history(ME)
    write_history_dumps([make_history(ME, txs, tts)], tmp_path / "tx.csv", tmp_path / "tok.csv")
    dumped = load_history_dump(tmp_path / "tx.csv", ME, tmp_path / "tok.csv",
                               cutoff_timestamp=1_560_000_000)
    assert fetched == dumped


def test_rate_limit_backoff_then_success():
    fake = FakeExplorer()
    state = {"n": 0}

    def handler(request):
        state["n"] += 1
        if state["n"] <= 2:
            return httpx.Response(429)
        return fake(request)

    clock = FakeClock()
    c = ExplorerClient(ExplorerConfig(base_url="http://x.test/api"),
                       http=httpx.Client(transport=httpx.MockTransport(handler)),
                       limiter=RateLimiter(5.0, clock, clock.sleep), sleep=clock.sleep)
    assert c.fetch_account_history(ME) == AccountHistory(ME)
    backoffs = [s for s in clock.sleeps if s >= 1.0]
    assert backoffs == [1.0, 2.0]


@pytest.mark.parametrize("response", [
    httpx.Response(429),
    httpx.Response(200, json={"status": "0", "message": "NOTOK",
                              "result": "Max rate limit reached"}),
])
def test_rate_limited_surfaces_after_five_attempts(response):
    clock = FakeClock()
    count = {"n": 0}

    def handler(request):
        count["n"] += 1
        return response

    c = ExplorerClient(ExplorerConfig(base_url="http://x.test/api"),
                       http=httpx.Client(transport=httpx.MockTransport(handler)),
                       limiter=RateLimiter(5.0, clock, clock.sleep), sleep=clock.sleep)
    with pytest.raises(RateLimited):
        c.fetch_account_history(ME)
    assert count["n"] == 5
    assert [s for s in clock.sleeps if s >= 1.0] == [1.0, 2.0, 4.0, 8.0]


@pytest.mark.parametrize("response, error", [
    (httpx.Response(500), HttpError),
    (httpx.Response(200, text="<html>"), MalformedResponse),
    (httpx.Response(200, json={"result": []}), MalformedResponse),
    (httpx.Response(200, json={"status": "0", "message": "NOTOK", "result": "Invalid API Key"}),
     HttpError),
    (httpx.Response(200, json={"status": "1", "message": "OK", "result": [{"hash": "0x1"}]}),
     MalformedResponse),
])
def test_error_responses(response, error):
    clock = FakeClock()
    c = ExplorerClient(ExplorerConfig(base_url="http://x.test/api"),
                       http=httpx.Client(transport=httpx.MockTransport(lambda r: response)),
                       limiter=RateLimiter(5.0, clock, clock.sleep), sleep=clock.sleep)
    with pytest.raises(error):
        c.fetch_account_history(ME)


@given(st.floats(0.5, 20.0), st.lists(st.floats(0.0, 0.5), min_size=1, max_size=60))
def test_rate_limiter_window_bound(rate, arrivals):
    clock = FakeClock()
    limiter = RateLimiter(rate, clock, clock.sleep)
    grants = []
    for gap in arrivals:
        clock.now += gap
        grants.append(limiter.acquire())
    cap = math.ceil(rate)
    for i, start in enumerate(grants):
        in_window = [t for t in grants[i:] if t < start + 1.0]
        assert len(in_window) <= cap


# ------------------------------------------------------------------ dumps

HEADER = "hash,from,to,value_wei,timestamp,is_contract_creation,is_error\n"


def test_empty_dump_gives_empty_history(tmp_path):
    (tmp_path / "tx.csv").write_text(HEADER)
    assert load_history_dump(tmp_path / "tx.csv", ME) == AccountHistory(ME)


def test_dump_partitions_by_direction_and_sorts(tmp_path):
    records = [send(1, 50), recv(2, 10), send(3, 40), recv(4, 30), send(5, 20)]
    other = TransactionRecord("0x" + "ef" * 32, addr(8), addr(9), 1, 5)
    lines = [HEADER] + [f"{t.hash},{t.from_},{t.to},{t.value},{t.timestamp},0,0\n"
                        for t in [other, *records]]
    (tmp_path / "tx.csv").write_text("".join(lines))
    hist = load_history_dump(tmp_path / "tx.csv", ME)
    assert len(hist.transactions) == 5
    assert sum(t.from_ == ME for t in hist.transactions) == 3
    assert sum(t.to == ME for t in hist.transactions) == 2
    assert [t.timestamp for t in hist.transactions] == [10, 20, 30, 40, 50]


def test_dump_parse_error_names_row(tmp_path):
    (tmp_path / "tx.csv").write_text(HEADER + f"0x{'11' * 32},{ME},{addr(1)},abc,1,0,0\n")
    with pytest.raises(ParseError, match="row 2"):
        load_history_dump(tmp_path / "tx.csv", ME)
    (tmp_path / "bad.csv").write_text("hash,from\n")
    with pytest.raises(ParseError):
        load_history_dump(tmp_path / "bad.csv", ME)


def test_dump_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_history_dump(tmp_path / "nope.csv", ME)


@given(st.integers(0, 2**32 - 1))
def test_dump_round_trip_many_accounts(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    accounts = [Address("0x" + f"{0xbb00 + i:040x}") for i in range(3)]
    originals = [make_history(a, *random_records(rng, 15, 6, me=a)) for a in accounts]
    d = tmp_path_factory.mktemp("dump")
    write_history_dumps(originals, d / "tx.csv", d / "tok.csv")
    loaded = load_history_dumps(d / "tx.csv", accounts, d / "tok.csv")
    assert [loaded[a] for a in accounts] == originals


def test_json_store_round_trip(tmp_path):
    hist = make_history(ME, *random_records(np.random.default_rng(2), 30, 10), truncated=True)
    assert history_from_json(history_to_json(hist)) == hist
    path = save_history(hist, tmp_path)
    assert path.name == f"{ME}.json"
    assert load_history(path) == hist
    assert not list(tmp_path.glob("*.tmp"))
