import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cloudvcg.market import (
    DIGEST_LENGTH,
    FIRST_PRICE,
    VCG,
    AuctionOutcome,
    DuplicateBid,
    DuplicateOfferId,
    DuplicateTask,
    Mechanism,
    MissingOffers,
    NegativeValue,
    Offer,
    SchemaError,
    UnknownTask,
    ValidationError,
    parse_scenario,
    posted_price,
    round_half_up,
    scenario_digest,
    serialize_scenario,
    validate_scenario,
)

from conftest import scenarios


def test_ex1_validates_unchanged(ex1):
    assert validate_scenario(ex1) is ex1
    assert ex1.tasks == ("t1", "t2")
    assert ex1.quality_threshold == 4 and ex1.budget == 2000
    assert [o.offer_id for o in ex1.offers] == ["oA1", "oB1", "oA2", "oB2"]
    assert all(o.true_cost == o.reported_cost for o in ex1.offers)


def test_empty_tasks_rejected(ex1_doc):
    ex1_doc["tasks"] = []
    ex1_doc["offers"] = []
    with pytest.raises(MissingOffers):
        parse_scenario(json.dumps(ex1_doc))


def test_duplicate_bid(ex1_doc):
    ex1_doc["offers"].append(dict(ex1_doc["offers"][1], id="oB1x"))
    with pytest.raises(DuplicateBid):
        parse_scenario(json.dumps(ex1_doc))


def test_duplicate_offer_id(ex1_doc):
    ex1_doc["offers"].append(dict(ex1_doc["offers"][0], provider="P9"))
    with pytest.raises(DuplicateOfferId):
        parse_scenario(json.dumps(ex1_doc))


def test_unknown_task(ex1_doc):
    ex1_doc["offers"][0]["task"] = "t9"
    with pytest.raises(UnknownTask):
        parse_scenario(json.dumps(ex1_doc))


def test_missing_offers_names_task(ex1_doc):
    ex1_doc["tasks"].append("t3")
    with pytest.raises(MissingOffers) as err:
        parse_scenario(json.dumps(ex1_doc))
    assert err.value.task_id == "t3"


def test_duplicate_task(ex1_doc):
    ex1_doc["tasks"].append("t1")
    with pytest.raises(DuplicateTask):
        parse_scenario(json.dumps(ex1_doc))


@pytest.mark.parametrize(
    "path, value",
    [
        (("budget_cents",), -1),
        (("quality_threshold",), -1),
        (("offers", 0, "cost_cents"), -5),
        (("offers", 2, "quality"), -1),
        (("offers", 3, "true_cost_cents"), -1),
    ],
)
def test_negative_values(ex1_doc, path, value):
    target = ex1_doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(NegativeValue):
        parse_scenario(json.dumps(ex1_doc))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(extra=1),
        lambda d: d["offers"][0].update(cost=1),
        lambda d: d.pop("budget_cents"),
        lambda d: d.update(version=2),
        lambda d: d.update(budget_cents=20.5),
        lambda d: d.update(budget_cents=True),
        lambda d: d["offers"][0].update(provider=""),
        lambda d: d.update(tasks="t1"),
    ],
)
def test_strict_schema(ex1_doc, mutate):
    mutate(ex1_doc)
    with pytest.raises(SchemaError):
        parse_scenario(json.dumps(ex1_doc))


@pytest.mark.parametrize("raw", [b"", b"{", b"\xff\xfe", b"[]", b"null", b"[" * 100000])
def test_garbage_is_rejected_cleanly(raw):
    with pytest.raises(ValidationError):
        parse_scenario(raw)


@settings(max_examples=300)
@given(st.binary(max_size=200))
def test_validation_is_total_on_bytes(raw):
    try:
        parse_scenario(raw)
    except ValidationError:
        pass


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-5, 5) | st.text(max_size=3),
    lambda kids: st.lists(kids, max_size=3) | st.dictionaries(st.text(max_size=8), kids, max_size=4),
    max_leaves=12,
)


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    st.fixed_dictionaries(
        {},
        optional={
            "version": json_values,
            "tasks": json_values,
            "quality_threshold": json_values,
            "budget_cents": json_values,
            "offers": st.lists(
                st.fixed_dictionaries(
                    {},
                    optional={k: json_values for k in ("id", "provider", "task", "cost_cents", "quality")},
                ),
                max_size=3,
            ),
        },
    )
)
def test_validation_is_total_on_structured_junk(doc):
    try:
        parse_scenario(json.dumps(doc))
    except ValidationError:
        pass


@given(scenarios())
def test_round_trip(s):
    s = validate_scenario(s)
    assert parse_scenario(serialize_scenario(s)) == s
    assert parse_scenario(serialize_scenario(s, indent=2)) == s


def test_true_cost_round_trips(ex1):
    o = ex1.offers[0]
    s = ex1.with_changes(offers=(Offer(o.offer_id, o.provider_id, o.task_id, 1100, o.quality, 1000),) + ex1.offers[1:])
    back = parse_scenario(serialize_scenario(s))
    assert back.offers[0].true_cost == 1000 and back.offers[0].reported_cost == 1100
    assert "true_cost_cents" in serialize_scenario(s)


def test_digest(ex1):
    d = scenario_digest(ex1)
    assert len(d) == DIGEST_LENGTH
    assert int(d, 16) >= 0
    assert d == scenario_digest(parse_scenario(serialize_scenario(ex1)))
    assert d != scenario_digest(ex1.with_changes(budget=2001))


def test_digest_ignores_whitespace_and_key_order(ex1_doc, ex1):
    shuffled = {k: ex1_doc[k] for k in reversed(list(ex1_doc))}
    assert scenario_digest(parse_scenario(json.dumps(shuffled, indent=4))) == scenario_digest(ex1)


@pytest.mark.parametrize(
    "n, d, expected", [(0, 10, 0), (4, 10, 0), (5, 10, 1), (15, 10, 2), (14999, 10000, 1), (15000, 10000, 2)]
)
def test_round_half_up(n, d, expected):
    assert round_half_up(n, d) == expected


def test_mechanism_parse():
    assert Mechanism.parse("vcg") == VCG
    assert Mechanism.parse("first-price") == FIRST_PRICE
    assert Mechanism.parse("posted:2500") == posted_price(2500)
    assert str(posted_price(2500)) == "POSTED_PRICE(2500)"
    for bad in ("vickrey", "posted:", "posted:-1", "posted:abc"):
        with pytest.raises(ValueError):
            Mechanism.parse(bad)
    with pytest.raises(ValueError):
        Mechanism("VCG", 5)
    with pytest.raises(ValueError):
        Mechanism("POSTED_PRICE")


def test_outcome_invariants():
    from cloudvcg.market import Allocation, PaymentSchedule, Status

    a = Allocation({"t1": "x"}, 5)
    with pytest.raises(AssertionError):
        AuctionOutcome("d", VCG, Status("Infeasible"), a)
    with pytest.raises(AssertionError):
        AuctionOutcome("d", VCG, Status("Success"), a)
    with pytest.raises(AssertionError):
        AuctionOutcome("d", VCG, Status("BudgetExceeded", required=9), a, PaymentSchedule.from_payments(VCG, {"p": 9}))
