import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudvcg.ledger import (
    AlreadySettled,
    CorruptLedger,
    LedgerRecord,
    NotFound,
    NotSettleable,
    append_record,
    build_report,
    clock_from_env,
    dump_ledger,
    fixed_clock,
    load_ledger,
    settle,
    summarize,
)
from cloudvcg.market import FIRST_PRICE, VCG, posted_price
from cloudvcg.strategy import GenParams, generate_scenario, run_auction

CLOCK = fixed_clock("2026-01-02T03:04:05Z")


@pytest.fixture
def ledger(tmp_path):
    return tmp_path / "ledger.jsonl"


def test_first_append(ledger, ex1):
    rec = append_record(ledger, run_auction(ex1, VCG), CLOCK)
    assert rec.record_id == 1 and rec.settlement == "Pending"
    assert rec.timestamp == "2026-01-02T03:04:05Z"
    assert ledger.read_text().count("\n") == 1


def test_two_appends(ledger, ex1):
    ids = [append_record(ledger, run_auction(ex1, m), CLOCK).record_id for m in (VCG, FIRST_PRICE)]
    assert ids == [1, 2]
    assert [r.record_id for r in load_ledger(ledger)] == [1, 2]


def test_truncated_line_is_corrupt(ledger, ex1):
    append_record(ledger, run_auction(ex1, VCG), CLOCK)
    append_record(ledger, run_auction(ex1, VCG), CLOCK)
    data = ledger.read_bytes()
    ledger.write_bytes(data[:-15])
    with pytest.raises(CorruptLedger):
        append_record(ledger, run_auction(ex1, VCG), CLOCK)
    with pytest.raises(CorruptLedger):
        build_report(ledger)
    # the failed append left the damaged file as it was
    assert ledger.read_bytes() == data[:-15]


@pytest.mark.parametrize(
    "damage",
    [
        lambda b: b.replace(b'"record_id":1', b'"record_id":7'),
        lambda b: b.replace(b'"Pending"', b'"Lost"'),
        lambda b: b.replace(b",", b", ", 1),
        lambda b: b + b"\n",
        lambda b: b"\xff" + b,
    ],
)
def test_damaged_ledgers(ledger, ex1, damage):
    append_record(ledger, run_auction(ex1, VCG), CLOCK)
    ledger.write_bytes(damage(ledger.read_bytes()))
    with pytest.raises(CorruptLedger):
        load_ledger(ledger)


def test_settle(ledger, ex1):
    append_record(ledger, run_auction(ex1, VCG), CLOCK)
    rec = settle(ledger, 1, "TXN-001", CLOCK)
    assert rec.record_id == 2 and rec.settlement == "Settled" and rec.reference == "TXN-001"
    assert rec.supersedes == 1
    with pytest.raises(AlreadySettled):
        settle(ledger, 1, "TXN-002", CLOCK)
    with pytest.raises(AlreadySettled):
        settle(ledger, 2, "TXN-002", CLOCK)
    with pytest.raises(NotFound):
        settle(ledger, 3, "TXN-002", CLOCK)


def test_settle_requires_success(ledger, ex1):
    append_record(ledger, run_auction(ex1.with_changes(quality_threshold=7), VCG), CLOCK)
    with pytest.raises(NotSettleable):
        settle(ledger, 1, "TXN-001", CLOCK)


def test_settle_missing_ledger(ledger):
    with pytest.raises(FileNotFoundError):
        settle(ledger, 1, "x", CLOCK)


def test_empty_report(ledger):
    ledger.write_bytes(b"")
    rep = build_report(ledger).to_json()
    assert rep["auctions"] == 0 and rep["total_spend_cents"] == 0
    assert set(rep["by_status"].values()) == {0}
    assert rep["provider_revenue_cents"] == {} and rep["settlement_backlog"] == 0


def test_report_ex1(ledger, ex1):
    append_record(ledger, run_auction(ex1, VCG), CLOCK)
    rep = build_report(ledger)
    assert rep.total_spend == 1900
    assert rep.provider_revenue == {"P2": 1300, "P3": 600}
    assert rep.settlement_backlog == 1
    settle(ledger, 1, "TXN-001", CLOCK)
    rep = build_report(ledger)
    # the settled copy supersedes the original rather than double counting
    assert rep.auctions == 1 and rep.records == 2
    assert rep.total_spend == 1900 and rep.settled == 1 and rep.settlement_backlog == 0


def test_report_infeasible(ledger, ex1):
    append_record(ledger, run_auction(ex1.with_changes(quality_threshold=7), VCG), CLOCK)
    rep = build_report(ledger)
    assert rep.by_status["Infeasible"] == 1 and rep.total_spend == 0


def _outcomes():
    mechs = st.sampled_from([VCG, FIRST_PRICE, posted_price(1500)])
    params = st.builds(
        GenParams,
        n_tasks=st.integers(1, 3),
        offers_per_task=st.integers(1, 3),
        threshold_fraction_bp=st.integers(0, 10000),
    )
    return st.builds(
        lambda p, seed, m, budget_scale: (lambda s: run_auction(s.with_changes(budget=s.budget * budget_scale // 6), m))(
            generate_scenario(p, seed)
        ),
        params,
        st.integers(0, 10**6),
        mechs,
        st.integers(0, 6),
    )


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(_outcomes(), st.booleans()), max_size=6))
def test_append_only_and_conservation(tmp_path_factory, ops):
    path = tmp_path_factory.mktemp("l") / "ledger.jsonl"
    prefixes = []
    for outcome, want_settle in ops:
        before = path.read_bytes() if path.exists() else b""
        prefixes.append(hashlib.sha256(before).hexdigest())
        rec = append_record(path, outcome, CLOCK)
        assert path.read_bytes().startswith(before)
        if want_settle and outcome.status.ok:
            before = path.read_bytes()
            settle(path, rec.record_id, f"TXN-{rec.record_id}", CLOCK)
            assert path.read_bytes().startswith(before)
    records = load_ledger(path, missing_ok=True)
    assert [r.record_id for r in records] == list(range(1, len(records) + 1))
    assert dump_ledger(records) == (path.read_bytes() if path.exists() else b"")
    rep = summarize(records)
    assert rep.total_spend == sum(rep.provider_revenue.values())


def test_round_trip_bytes(ledger, ex1):
    for m in (VCG, FIRST_PRICE, posted_price(2500)):
        append_record(ledger, run_auction(ex1, m), CLOCK)
    settle(ledger, 1, "TXN-ü", CLOCK)
    assert dump_ledger(load_ledger(ledger)) == ledger.read_bytes()


def test_clock_from_env():
    assert clock_from_env({})().tzinfo is not None
    assert clock_from_env({"FIXED_CLOCK": "2026-03-04T05:06:07"})().isoformat() == "2026-03-04T05:06:07+00:00"


def test_record_invariants(ex1):
    out = run_auction(ex1.with_changes(quality_threshold=7), VCG)
    with pytest.raises(ValueError):
        LedgerRecord(1, "t", out, "Settled", "ref")
