"""Running auctions end to end and probing them for manipulability.

The deviation sweep scales every offer of one provider by a common
multiplier (basis points of true cost) while everyone else bids truthfully,
and measures the deviator's utility against its true costs.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .market import (
    BUDGET_EXCEEDED,
    FIRST_PRICE,
    INFEASIBLE,
    MONOPOLY,
    SUCCESS,
    VCG,
    AuctionOutcome,
    Mechanism,
    Offer,
    Scenario,
    Status,
    UnknownProvider,
    ValidationError,
    posted_price,
    round_half_up,
    scenario_digest,
    validate_scenario,
)
from .pricing import (
    BP,
    MonopolyProvider,
    check_budget,
    first_price_payments,
    posted_price_payments,
    provider_utilities,
    vcg_payments,
)
from .solver import restrict, solve_bruteforce, solve_dp

log = logging.getLogger(__name__)

TRUTHFUL_BP = 10_000
DEFAULT_GRID = (2500, 5000, 7500, 9000, 9900, 10000, 10100, 11000, 12500, 15000, 20000, 40000)


class MissingTruthfulPoint(ValidationError):
    code = "MissingTruthfulPoint"


class InvalidRange(ValidationError):
    code = "InvalidRange"


def _payments(s, a, m: Mechanism):
    if m.kind == "VCG":
        return vcg_payments(s, a)
    if m.kind == "FIRST_PRICE":
        return first_price_payments(s, a)
    return posted_price_payments(s, a, m.markup_bp)


def run_auction(s: Scenario, m: Mechanism, *, enforce_budget: bool = True) -> AuctionOutcome:
    """Select, price, and budget-check one auction.

    With ``enforce_budget=False`` the consumer budget is ignored; the
    deviation sweep uses this to isolate the payment rule's incentives.
    """
    digest = scenario_digest(s)
    a = solve_dp(s)
    if a is None:
        return AuctionOutcome(digest, m, Status(INFEASIBLE))
    try:
        sched = _payments(s, a, m)
    except MonopolyProvider as exc:
        return AuctionOutcome(digest, m, Status(MONOPOLY, provider_id=exc.provider_id), a)
    over = check_budget(sched, s) if enforce_budget else None
    if over is not None:
        return AuctionOutcome(digest, m, Status(BUDGET_EXCEEDED, required=over.required), a)
    return AuctionOutcome(digest, m, Status(SUCCESS), a, sched)


def outcome_utility(outcome: AuctionOutcome, s: Scenario, provider_id: str) -> int:
    """Utility against true cost; zero unless the auction succeeded and
    ``provider_id`` was paid."""
    if not outcome.status.ok:
        return 0
    for u in provider_utilities(outcome.payments, s, outcome.allocation):
        if u.provider_id == provider_id:
            return u.utility
    return 0


@dataclass(frozen=True)
class DeviationPoint:
    multiplier_bp: int
    outcome_status: Status
    won: bool
    utility: int

    def to_json(self) -> dict:
        return {
            "multiplier_bp": self.multiplier_bp,
            "status": self.outcome_status.to_json(),
            "won": self.won,
            "utility_cents": self.utility,
        }


@dataclass(frozen=True)
class SweepReport:
    scenario_digest: str
    provider_id: str
    mechanism: Mechanism
    points: tuple[DeviationPoint, ...]
    truthful_utility: int
    max_gain: int

    def best_point(self) -> DeviationPoint:
        return max(self.points, key=lambda pt: (pt.utility, -pt.multiplier_bp))

    def to_json(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "provider": self.provider_id,
            "mechanism": self.mechanism.to_json(),
            "truthful_utility_cents": self.truthful_utility,
            "max_gain_cents": self.max_gain,
            "points": [pt.to_json() for pt in self.points],
        }


def misreport(s: Scenario, provider_id: str, multiplier_bp: int) -> Scenario:
    """Scenario in which ``provider_id`` reports true_cost * multiplier and
    every other provider reports its true cost."""
    offers = []
    for o in s.offers:
        if o.provider_id == provider_id:
            reported = round_half_up(o.true_cost * multiplier_bp, BP)
        else:
            reported = o.true_cost
        offers.append(Offer(o.offer_id, o.provider_id, o.task_id, reported, o.quality, o.true_cost))
    return s.with_changes(offers=tuple(offers))


def deviation_sweep(
    s: Scenario,
    provider_id: str,
    m: Mechanism,
    multipliers_bp: Iterable[int] = DEFAULT_GRID,
    *,
    enforce_budget: bool = False,
) -> SweepReport:
    """Utility of ``provider_id`` at each multiplier of its true costs.

    The budget gate is off by default: conditioning success on the budget
    lets a deviation push the total under the budget and profit from it,
    which is a property of the gate, not of the payment rule. Pass
    ``enforce_budget=True`` to measure that boundary effect too.
    """
    multipliers = list(multipliers_bp)
    if provider_id not in s.providers:
        raise UnknownProvider(f"provider {provider_id!r} has no offers")
    if not multipliers or any(k <= 0 for k in multipliers):
        raise InvalidRange("multipliers must be a non-empty list of positive basis points")
    if TRUTHFUL_BP not in multipliers:
        raise MissingTruthfulPoint("the multiplier grid must contain 10000")

    points = []
    for k in multipliers:
        dev = misreport(s, provider_id, k)
        outcome = run_auction(dev, m, enforce_budget=enforce_budget)
        won = outcome.allocation is not None and provider_id in outcome.allocation.winners(dev)
        points.append(DeviationPoint(k, outcome.status, won, outcome_utility(outcome, dev, provider_id)))
    truthful = next(pt.utility for pt in points if pt.multiplier_bp == TRUTHFUL_BP)
    return SweepReport(
        scenario_digest=scenario_digest(s),
        provider_id=provider_id,
        mechanism=m,
        points=tuple(points),
        truthful_utility=truthful,
        max_gain=max(pt.utility for pt in points) - truthful,
    )


@dataclass(frozen=True)
class GenParams:
    n_tasks: int = 3
    offers_per_task: int = 3
    cost_range: tuple[int, int] = (1, 10_000)
    quality_range: tuple[int, int] = (0, 5)
    threshold_fraction_bp: int = 6000

    def check(self) -> None:
        if self.n_tasks < 1:
            raise InvalidRange("n_tasks must be at least 1")
        if self.offers_per_task < 1:
            raise InvalidRange("offers_per_task must be at least 1")
        for name, (lo, hi) in (("cost_range", self.cost_range), ("quality_range", self.quality_range)):
            if lo < 0 or lo > hi:
                raise InvalidRange(f"{name} [{lo}, {hi}] must satisfy 0 <= lo <= hi")
        if not 0 <= self.threshold_fraction_bp <= BP:
            raise InvalidRange("threshold_fraction_bp must lie in [0, 10000]")


def generate_scenario(params: GenParams, seed: int) -> Scenario:
    """Deterministic random scenario; providers are disjoint across tasks.

    The threshold is a fraction of the best attainable quality, so the
    scenario is always feasible, and the budget is three times the truthful
    first-price cost.
    """
    params.check()
    rng = random.Random(seed)
    tasks = tuple(f"t{i:02d}" for i in range(1, params.n_tasks + 1))
    offers = []
    best_quality = 0
    for i, t in enumerate(tasks, start=1):
        qs = []
        for k in range(1, params.offers_per_task + 1):
            cost = rng.randint(*params.cost_range)
            q = rng.randint(*params.quality_range)
            qs.append(q)
            offers.append(Offer(f"o{i:02d}{k:02d}", f"P{i:02d}{k:02d}", t, cost, q))
        best_quality += max(qs)
    threshold = round_half_up(params.threshold_fraction_bp * best_quality, BP)
    s = Scenario(tasks, tuple(offers), threshold, 0)
    a = solve_dp(s)
    s = s.with_changes(budget=3 * a.total_reported_cost)
    return validate_scenario(s)


@dataclass
class VerifyReport:
    mechanism: Mechanism
    multipliers_bp: tuple[int, ...]
    scenarios_examined: int = 0
    global_max_gain: int = 0
    offending: list[dict] = field(default_factory=list)
    scenarios: list[dict] = field(default_factory=list)
    ir_winners_checked: int = 0
    ir_violations: list[dict] = field(default_factory=list)
    efficiency_violations: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.global_max_gain <= 0

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        d = {
            "verdict": self.verdict,
            "mechanism": self.mechanism.to_json(),
            "multipliers_bp": list(self.multipliers_bp),
            "scenarios_examined": self.scenarios_examined,
            "global_max_gain_cents": self.global_max_gain,
            "offending": self.offending,
            "ir_winners_checked": self.ir_winners_checked,
            "ir_violations": self.ir_violations,
            "efficiency_violations": self.efficiency_violations,
            "scenarios": self.scenarios,
        }
        if self.scenarios_examined == 0:
            d["warning"] = "0 scenarios examined; verdict is vacuous"
        return d


def _check_individual_rationality(s: Scenario) -> tuple[int, list[dict]]:
    """Truthful VCG winners must be paid at least their reported cost, with
    utility exactly C*(without p) - C* >= 0."""
    a = solve_dp(s)
    if a is None:
        return 0, []
    try:
        sched = vcg_payments(s, a)
    except MonopolyProvider:
        return 0, []
    bad = []
    for u in provider_utilities(sched, s, a):
        alt = solve_dp(restrict(s, u.provider_id)).total_reported_cost
        reported = sum(o.reported_cost for o in a.offers(s) if o.provider_id == u.provider_id)
        if u.payment < reported or u.utility != alt - a.total_reported_cost or u.utility < 0:
            bad.append({"provider": u.provider_id, "payment_cents": u.payment, "utility_cents": u.utility})
    return len(sched.payments), bad


def verify_strategyproof(
    seeds: Sequence[int],
    params: GenParams,
    multipliers_bp: Sequence[int] = DEFAULT_GRID,
    m: Mechanism = VCG,
    *,
    enforce_budget: bool = False,
) -> VerifyReport:
    """Sweep every provider of every generated scenario over the grid.

    For VCG each scenario is also checked for individual rationality, and
    every truthful allocation against the brute-force optimum.
    """
    report = VerifyReport(m, tuple(multipliers_bp))
    for seed in seeds:
        s = generate_scenario(params, seed)
        truthful = run_auction(s, m)
        scenario_gain = None
        for p in s.providers:
            sweep = deviation_sweep(s, p, m, multipliers_bp, enforce_budget=enforce_budget)
            scenario_gain = sweep.max_gain if scenario_gain is None else max(scenario_gain, sweep.max_gain)
            if sweep.max_gain > 0:
                best = sweep.best_point()
                report.offending.append(
                    {"seed": seed, "provider": p, "multiplier_bp": best.multiplier_bp, "gain_cents": sweep.max_gain}
                )
        if m.kind == "VCG":
            checked, bad = _check_individual_rationality(s)
            report.ir_winners_checked += checked
            report.ir_violations.extend({"seed": seed, **v} for v in bad)
        if truthful.allocation is not None:
            oracle = solve_bruteforce(s)
            if oracle.total_reported_cost != truthful.allocation.total_reported_cost:
                report.efficiency_violations.append({"seed": seed})
        report.scenarios.append(
            {
                "seed": seed,
                "scenario_digest": scenario_digest(s),
                "truthful_status": truthful.status.to_json(),
                "max_gain_cents": scenario_gain or 0,
            }
        )
        report.scenarios_examined += 1
        report.global_max_gain = max(report.global_max_gain, scenario_gain or 0)
    if not seeds:
        log.warning("0 scenarios examined")
    return report


@dataclass(frozen=True)
class ComparisonRow:
    mechanism: Mechanism
    status: Status
    consumer_total: Optional[int]
    social_cost_true: Optional[int]
    provider_surplus: Optional[int]

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism.to_json(),
            "status": self.status.to_json(),
            "consumer_total_cents": self.consumer_total,
            "social_cost_true_cents": self.social_cost_true,
            "provider_surplus_cents": self.provider_surplus,
        }


def compare_mechanisms(s: Scenario, markup_bp: int) -> list[ComparisonRow]:
    """Price the same truthful allocation under all three mechanisms."""
    rows = []
    for m in (VCG, FIRST_PRICE, posted_price(markup_bp)):
        outcome = run_auction(s, m)
        social = None
        if outcome.allocation is not None:
            social = sum(o.true_cost for o in outcome.allocation.offers(s))
        if outcome.status.ok:
            total = outcome.payments.consumer_total
            rows.append(ComparisonRow(m, outcome.status, total, social, total - social))
        elif outcome.status.kind == BUDGET_EXCEEDED:
            total = outcome.status.required
            rows.append(ComparisonRow(m, outcome.status, total, social, total - social))
        else:
            rows.append(ComparisonRow(m, outcome.status, None, social, None))
    return rows


@dataclass(frozen=True)
class ReputationState:
    provider_id: str
    score: int
    alpha_bp: int

    def __post_init__(self):
        if not 0 <= self.alpha_bp <= BP:
            raise ValueError("alpha_bp must lie in [0, 10000]")
        if self.score < 0:
            raise ValueError("score must be nonnegative")


def update_reputation(r: ReputationState, observed: int) -> ReputationState:
    """Exponential smoothing of delivered quality, rounded half up."""
    if observed < 0:
        raise ValueError("observed quality must be nonnegative")
    score = round_half_up((BP - r.alpha_bp) * r.score + r.alpha_bp * observed, BP)
    return ReputationState(r.provider_id, score, r.alpha_bp)
