import json
from pathlib import Path

import pytest
from hypothesis import strategies as st

from cloudvcg.market import Offer, Scenario, load_scenario

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def ex1():
    return load_scenario(FIXTURES / "ex1.json")


@pytest.fixture
def ex1_doc():
    return json.loads((FIXTURES / "ex1.json").read_text())


@st.composite
def scenarios(draw, max_tasks=3, max_offers=3, max_cost=60, max_quality=4, shared_providers=True,
              min_offers=1, competitive=False):
    """Small validated scenarios. Providers may bid on several tasks.

    ``competitive`` keeps the threshold low so most draws are feasible with
    no indispensable provider.
    """
    n = draw(st.integers(1, max_tasks))
    tasks = tuple(f"t{i}" for i in range(n))
    pool = [f"P{i}" for i in range(max_offers + (2 if shared_providers else 0))]
    offers = []
    used = 0
    for t in tasks:
        k = draw(st.integers(min_offers, max_offers))
        if shared_providers:
            providers = draw(st.lists(st.sampled_from(pool), min_size=k, max_size=k, unique=True))
        else:
            providers = [f"P{used + j}" for j in range(k)]
            used += k
        for p in providers:
            offers.append(
                Offer(
                    offer_id=f"o{len(offers)}",
                    provider_id=p,
                    task_id=t,
                    reported_cost=draw(st.integers(0, max_cost)),
                    quality=draw(st.integers(0, max_quality)),
                )
            )
    threshold = draw(st.integers(0, n if competitive else max_quality * n + 1))
    budget = draw(st.integers(0, 10 * max_cost * n))
    return Scenario(tasks, tuple(offers), threshold, budget)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
