"""Winner determination: cheapest composition meeting the quality threshold.

``solve_dp`` runs a multiple-choice knapsack style dynamic program over
accumulated quality, capped at the threshold. ``solve_bruteforce`` enumerates
every composition and exists to check the DP.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

from .market import Allocation, Offer, Scenario, UnknownProvider, validate_scenario

BRUTEFORCE_CAP = 10**6


class InstanceTooLarge(ValueError):
    code = "InstanceTooLarge"


@dataclass
class DpTable:
    """``cost[i][g]``: cheapest cost of serving the first ``i`` tasks with
    accumulated quality ``min(G, sum)`` equal to ``g`` (None = unreachable).

    ``back[i][g]`` holds ``(offer_id, previous_g)`` for reconstruction.
    """

    cost: list[list[Optional[int]]]
    back: list[list[Optional[tuple[str, int]]]]


def build_table(s: Scenario) -> DpTable:
    G = s.quality_threshold
    n = len(s.tasks)
    cost: list[list[Optional[int]]] = [[None] * (G + 1) for _ in range(n + 1)]
    back: list[list[Optional[tuple[str, int]]]] = [[None] * (G + 1) for _ in range(n + 1)]
    cost[0][0] = 0

    by_task: dict[str, list[Offer]] = {t: [] for t in s.tasks}
    for o in s.offers:
        by_task[o.task_id].append(o)

    for i, task in enumerate(s.tasks, start=1):
        prev, cur, bk = cost[i - 1], cost[i], back[i]
        offers = sorted(by_task[task], key=lambda o: o.offer_id)
        for g in range(G + 1):
            base = prev[g]
            if base is None:
                continue
            for o in offers:
                g2 = min(G, g + o.quality)
                cand = base + o.reported_cost
                best = cur[g2]
                # strict improvement, or equal cost with a smaller offer id
                if best is None or cand < best or (cand == best and o.offer_id < bk[g2][0]):
                    cur[g2] = cand
                    bk[g2] = (o.offer_id, g)
    return DpTable(cost, back)


def solve_dp(s: Scenario) -> Optional[Allocation]:
    """Minimum reported-cost feasible allocation, or None when infeasible.

    Runs in O(n * (G+1) * max offers per task).
    """
    table = build_table(s)
    G = s.quality_threshold
    n = len(s.tasks)
    total = table.cost[n][G]
    if total is None:
        return None
    picks: list[str] = []
    g = G
    for i in range(n, 0, -1):
        offer_id, g = table.back[i][g]
        picks.append(offer_id)
    picks.reverse()
    quality = sum(s.offer(oid).quality for oid in picks)
    return Allocation(dict(zip(s.tasks, picks)), total, quality)


def solve_bruteforce(s: Scenario, cap: int = BRUTEFORCE_CAP) -> Optional[Allocation]:
    per_task = [sorted(s.offers_for(t), key=lambda o: o.offer_id) for t in s.tasks]
    size = math.prod(len(p) for p in per_task)
    if size > cap:
        raise InstanceTooLarge(f"{size} compositions exceed the cap of {cap}")
    best: Optional[tuple[int, tuple[Offer, ...]]] = None
    # product() yields selections in lexicographic offer-id order, so the
    # first minimum found is the lexicographically smallest among ties
    for combo in itertools.product(*per_task):
        if sum(o.quality for o in combo) < s.quality_threshold:
            continue
        c = sum(o.reported_cost for o in combo)
        if best is None or c < best[0]:
            best = (c, combo)
    if best is None:
        return None
    c, combo = best
    return Allocation(
        {t: o.offer_id for t, o in zip(s.tasks, combo)}, c, sum(o.quality for o in combo)
    )


def restrict(s: Scenario, excluded: str) -> Scenario:
    """Drop every offer of provider ``excluded``.

    Tasks left without offers are reported by ``result.empty_tasks``; the
    provider is then a monopolist for those tasks.
    """
    if not any(o.provider_id == excluded for o in s.offers):
        raise UnknownProvider(f"provider {excluded!r} has no offers")
    r = s.with_changes(offers=tuple(o for o in s.offers if o.provider_id != excluded))
    return validate_scenario(r, allow_empty_tasks=True)
