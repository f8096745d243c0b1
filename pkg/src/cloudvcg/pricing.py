"""Payment rules: VCG with the Clarke pivot, first-price, and posted price."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Union

from .market import (
    FIRST_PRICE,
    VCG,
    Allocation,
    PaymentSchedule,
    Scenario,
    posted_price,
    round_half_up,
)
from .solver import restrict, solve_dp

BP = 10_000


class MonopolyProvider(Exception):
    """Removing a winning provider makes the request infeasible, so its
    VCG externality (and payment) is unbounded."""

    code = "MonopolyProvider"

    def __init__(self, provider_id: str):
        self.provider_id = provider_id
        super().__init__(f"provider {provider_id!r} is indispensable")


@dataclass(frozen=True)
class BudgetExceeded:
    required: int


@dataclass(frozen=True)
class ProviderUtility:
    provider_id: str
    payment: int
    true_cost_supplied: int
    utility: int


def winning_costs(s: Scenario, a: Allocation) -> dict[str, int]:
    """Sum of reported costs per winning provider (``S_p``)."""
    out: dict[str, int] = defaultdict(int)
    for o in a.offers(s):
        out[o.provider_id] += o.reported_cost
    return dict(out)


def vcg_payments(s: Scenario, a: Allocation) -> PaymentSchedule:
    """Clarke pivot: pay(p) = C*(without p) - (C* - S_p).

    Raises MonopolyProvider for the first winner (by id) whose removal
    leaves no feasible composition.
    """
    c_star = a.total_reported_cost
    payments = {}
    for p, s_p in sorted(winning_costs(s, a).items()):
        alt = solve_dp(restrict(s, p))
        if alt is None:
            raise MonopolyProvider(p)
        payments[p] = alt.total_reported_cost - (c_star - s_p)
    return PaymentSchedule.from_payments(VCG, payments)


def first_price_payments(s: Scenario, a: Allocation) -> PaymentSchedule:
    return PaymentSchedule.from_payments(FIRST_PRICE, winning_costs(s, a))


def posted_price_payments(s: Scenario, a: Allocation, markup_bp: int) -> PaymentSchedule:
    if markup_bp < 0:
        raise ValueError("markup_bp must be nonnegative")
    payments = {
        p: round_half_up(s_p * (BP + markup_bp), BP) for p, s_p in winning_costs(s, a).items()
    }
    return PaymentSchedule.from_payments(posted_price(markup_bp), payments)


def check_budget(p: PaymentSchedule, s: Scenario) -> Union[None, BudgetExceeded]:
    """None when the consumer can afford the schedule."""
    if p.consumer_total <= s.budget:
        return None
    return BudgetExceeded(p.consumer_total)


def provider_utilities(p: PaymentSchedule, s: Scenario, a: Allocation) -> list[ProviderUtility]:
    true_cost: dict[str, int] = defaultdict(int)
    for o in a.offers(s):
        true_cost[o.provider_id] += o.true_cost
    return [
        ProviderUtility(pid, pay, true_cost[pid], pay - true_cost[pid])
        for pid, pay in p.payments.items()
    ]
