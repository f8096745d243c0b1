"""Domain types for the composition market and the scenario file format.

Money is integer cents and quality is integer levels throughout, so every
comparison made by the solver and the mechanisms is exact.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

SCHEMA_VERSION = 1
DIGEST_LENGTH = 64  # hex chars of sha256

_SCENARIO_KEYS = ("version", "tasks", "quality_threshold", "budget_cents", "offers")
_OFFER_KEYS = ("id", "provider", "task", "cost_cents", "quality")
_OFFER_OPTIONAL = ("true_cost_cents",)


class ValidationError(ValueError):
    """Base class for scenario rejections. ``code`` is stable and machine-readable."""

    code = "ValidationError"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")


class SchemaError(ValidationError):
    code = "SchemaError"


class DuplicateOfferId(ValidationError):
    code = "DuplicateOfferId"


class DuplicateBid(ValidationError):
    code = "DuplicateBid"


class DuplicateTask(ValidationError):
    code = "DuplicateTask"


class UnknownTask(ValidationError):
    code = "UnknownTask"


class MissingOffers(ValidationError):
    code = "MissingOffers"

    def __init__(self, task_id: Optional[str]):
        self.task_id = task_id
        if task_id is None:
            super().__init__("scenario has no tasks")
        else:
            super().__init__(f"task {task_id!r} has no offers")


class NegativeValue(ValidationError):
    code = "NegativeValue"


class UnknownProvider(ValidationError):
    code = "UnknownProvider"


@dataclass(frozen=True)
class Offer:
    offer_id: str
    provider_id: str
    task_id: str
    reported_cost: int
    quality: int
    true_cost: Optional[int] = None

    def __post_init__(self):
        if self.true_cost is None:
            object.__setattr__(self, "true_cost", self.reported_cost)

    def to_json(self) -> dict:
        d = {
            "id": self.offer_id,
            "provider": self.provider_id,
            "task": self.task_id,
            "cost_cents": self.reported_cost,
            "quality": self.quality,
        }
        if self.true_cost != self.reported_cost:
            d["true_cost_cents"] = self.true_cost
        return d


@dataclass(frozen=True)
class Scenario:
    tasks: tuple[str, ...]
    offers: tuple[Offer, ...]
    quality_threshold: int
    budget: int
    version: int = SCHEMA_VERSION

    def offers_for(self, task_id: str) -> tuple[Offer, ...]:
        return tuple(o for o in self.offers if o.task_id == task_id)

    def offer(self, offer_id: str) -> Offer:
        for o in self.offers:
            if o.offer_id == offer_id:
                return o
        raise KeyError(offer_id)

    @property
    def providers(self) -> tuple[str, ...]:
        return tuple(sorted({o.provider_id for o in self.offers}))

    @property
    def empty_tasks(self) -> tuple[str, ...]:
        """Tasks left without any offer, e.g. after removing a provider."""
        covered = {o.task_id for o in self.offers}
        return tuple(t for t in self.tasks if t not in covered)

    def with_changes(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "tasks": list(self.tasks),
            "quality_threshold": self.quality_threshold,
            "budget_cents": self.budget,
            "offers": [o.to_json() for o in self.offers],
        }


@dataclass(frozen=True)
class Allocation:
    """One chosen offer per task, in task order."""

    chosen: Mapping[str, str]
    total_reported_cost: int
    total_quality: int = field(default=0, compare=False)

    def offers(self, s: Scenario) -> list[Offer]:
        return [s.offer(self.chosen[t]) for t in s.tasks]

    def winners(self, s: Scenario) -> tuple[str, ...]:
        return tuple(sorted({o.provider_id for o in self.offers(s)}))

    def check(self, s: Scenario) -> None:
        """Assert the allocation is consistent with and feasible for ``s``."""
        assert list(self.chosen) == list(s.tasks), "one chosen offer per task, in order"
        chosen = self.offers(s)
        for t, o in zip(s.tasks, chosen):
            assert o.task_id == t, f"offer {o.offer_id} does not serve {t}"
        assert sum(o.reported_cost for o in chosen) == self.total_reported_cost
        assert sum(o.quality for o in chosen) >= s.quality_threshold

    def to_json(self) -> dict:
        return {"chosen": dict(self.chosen), "total_reported_cost_cents": self.total_reported_cost}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "Allocation":
        return cls(chosen=dict(d["chosen"]), total_reported_cost=d["total_reported_cost_cents"])


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _require_int(v: Any, what: str) -> int:
    if not _is_int(v):
        raise SchemaError(f"{what} must be an integer, got {type(v).__name__}")
    return v


def _require_id(v: Any, what: str) -> str:
    if not isinstance(v, str) or not v:
        raise SchemaError(f"{what} must be a non-empty string")
    return v


def _check_keys(d: Any, required: tuple, optional: tuple, what: str) -> None:
    if not isinstance(d, dict):
        raise SchemaError(f"{what} must be an object")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise SchemaError(f"{what} has unknown field(s) {sorted(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise SchemaError(f"{what} is missing field(s) {missing}")


def scenario_from_json(data: Any) -> Scenario:
    """Build a :class:`Scenario` from decoded JSON and validate it.

    The schema is strict: unknown fields are errors.
    """
    _check_keys(data, _SCENARIO_KEYS, (), "scenario")
    version = _require_int(data["version"], "version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version}")
    if not isinstance(data["tasks"], list):
        raise SchemaError("tasks must be a list")
    tasks = tuple(_require_id(t, "task id") for t in data["tasks"])
    if not isinstance(data["offers"], list):
        raise SchemaError("offers must be a list")
    offers = []
    for i, raw in enumerate(data["offers"]):
        what = f"offers[{i}]"
        _check_keys(raw, _OFFER_KEYS, _OFFER_OPTIONAL, what)
        offers.append(
            Offer(
                offer_id=_require_id(raw["id"], f"{what}.id"),
                provider_id=_require_id(raw["provider"], f"{what}.provider"),
                task_id=_require_id(raw["task"], f"{what}.task"),
                reported_cost=_require_int(raw["cost_cents"], f"{what}.cost_cents"),
                quality=_require_int(raw["quality"], f"{what}.quality"),
                true_cost=(
                    _require_int(raw["true_cost_cents"], f"{what}.true_cost_cents")
                    if "true_cost_cents" in raw
                    else None
                ),
            )
        )
    s = Scenario(
        tasks=tasks,
        offers=tuple(offers),
        quality_threshold=_require_int(data["quality_threshold"], "quality_threshold"),
        budget=_require_int(data["budget_cents"], "budget_cents"),
        version=version,
    )
    return validate_scenario(s)


def parse_scenario(raw: str | bytes) -> Scenario:
    """Decode and validate a scenario document. Only raises :class:`ValidationError`."""
    try:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        data = json.loads(raw)
    except (UnicodeDecodeError, ValueError, RecursionError) as exc:
        raise SchemaError(f"not a JSON document ({exc.__class__.__name__})") from None
    return scenario_from_json(data)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_bytes())


def serialize_scenario(s: Scenario, *, indent: Optional[int] = None) -> str:
    if indent is None:
        return json.dumps(s.to_json(), separators=(",", ":"))
    return json.dumps(s.to_json(), indent=indent) + "\n"


def validate_scenario(s: Scenario, *, allow_empty_tasks: bool = False) -> Scenario:
    """Check every scenario and offer invariant; return ``s`` unchanged.

    ``allow_empty_tasks`` is used for restricted scenarios, where a task may
    legitimately lose all its offers.
    """
    if s.quality_threshold < 0:
        raise NegativeValue("quality_threshold is negative")
    if s.budget < 0:
        raise NegativeValue("budget is negative")
    for o in s.offers:
        if o.reported_cost < 0 or o.true_cost < 0:
            raise NegativeValue(f"offer {o.offer_id} has a negative cost")
        if o.quality < 0:
            raise NegativeValue(f"offer {o.offer_id} has negative quality")
    if not s.tasks:
        raise MissingOffers(None)
    if len(set(s.tasks)) != len(s.tasks):
        raise DuplicateTask("task identifiers must be unique")
    seen_ids: set[str] = set()
    seen_bids: set[tuple[str, str]] = set()
    tasks = set(s.tasks)
    for o in s.offers:
        if o.offer_id in seen_ids:
            raise DuplicateOfferId(f"offer id {o.offer_id!r} appears twice")
        seen_ids.add(o.offer_id)
        if (o.provider_id, o.task_id) in seen_bids:
            raise DuplicateBid(f"provider {o.provider_id!r} bids twice on task {o.task_id!r}")
        seen_bids.add((o.provider_id, o.task_id))
        if o.task_id not in tasks:
            raise UnknownTask(f"offer {o.offer_id} references unknown task {o.task_id!r}")
    if not allow_empty_tasks and s.empty_tasks:
        raise MissingOffers(s.empty_tasks[0])
    return s


def canonical_bytes(s: Scenario) -> bytes:
    return json.dumps(s.to_json(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def scenario_digest(s: Scenario) -> str:
    """sha256 over the canonical serialization (sorted keys, no whitespace)."""
    return hashlib.sha256(canonical_bytes(s)).hexdigest()


def round_half_up(numerator: int, denominator: int) -> int:
    """Nonnegative integer division rounded half up."""
    return (2 * numerator + denominator) // (2 * denominator)


@dataclass(frozen=True)
class Mechanism:
    """VCG, FIRST_PRICE, or POSTED_PRICE with a markup in basis points."""

    kind: str
    markup_bp: Optional[int] = None

    KINDS = ("VCG", "FIRST_PRICE", "POSTED_PRICE")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown mechanism {self.kind!r}")
        if (self.kind == "POSTED_PRICE") != (self.markup_bp is not None):
            raise ValueError("markup_bp is required for, and only for, POSTED_PRICE")
        if self.markup_bp is not None and (not _is_int(self.markup_bp) or self.markup_bp < 0):
            raise ValueError("markup_bp must be a nonnegative integer")

    @classmethod
    def parse(cls, text: str) -> "Mechanism":
        """Parse the CLI spelling: ``vcg``, ``first-price`` or ``posted:MARKUPBP``."""
        t = text.strip().lower()
        if t == "vcg":
            return VCG
        if t in ("first-price", "first_price"):
            return FIRST_PRICE
        if t.startswith("posted:"):
            try:
                return cls("POSTED_PRICE", int(t.split(":", 1)[1]))
            except ValueError:
                pass
        raise ValueError(f"bad mechanism {text!r}; expected vcg, first-price or posted:BP")

    def __str__(self) -> str:
        if self.kind == "POSTED_PRICE":
            return f"POSTED_PRICE({self.markup_bp})"
        return self.kind

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.markup_bp is not None:
            d["markup_bp"] = self.markup_bp
        return d

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "Mechanism":
        return cls(d["kind"], d.get("markup_bp"))


VCG = Mechanism("VCG")
FIRST_PRICE = Mechanism("FIRST_PRICE")


def posted_price(markup_bp: int) -> Mechanism:
    return Mechanism("POSTED_PRICE", markup_bp)


@dataclass(frozen=True)
class PaymentSchedule:
    mechanism: Mechanism
    payments: Mapping[str, int]
    consumer_total: int

    @classmethod
    def from_payments(cls, mechanism: Mechanism, payments: Mapping[str, int]) -> "PaymentSchedule":
        ordered = {p: payments[p] for p in sorted(payments)}
        return cls(mechanism, ordered, sum(ordered.values()))

    def check(self) -> None:
        assert self.consumer_total == sum(self.payments.values())

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism.to_json(),
            "payments_cents": dict(self.payments),
            "consumer_total_cents": self.consumer_total,
        }

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "PaymentSchedule":
        return cls(Mechanism.from_json(d["mechanism"]), dict(d["payments_cents"]), d["consumer_total_cents"])


SUCCESS = "Success"
INFEASIBLE = "Infeasible"
MONOPOLY = "MonopolyProvider"
BUDGET_EXCEEDED = "BudgetExceeded"
STATUSES = (SUCCESS, INFEASIBLE, MONOPOLY, BUDGET_EXCEEDED)


@dataclass(frozen=True)
class Status:
    kind: str
    provider_id: Optional[str] = None  # MonopolyProvider only
    required: Optional[int] = None  # BudgetExceeded only

    def __post_init__(self):
        if self.kind not in STATUSES:
            raise ValueError(f"unknown status {self.kind!r}")

    @property
    def ok(self) -> bool:
        return self.kind == SUCCESS

    def __str__(self) -> str:
        if self.kind == MONOPOLY:
            return f"MonopolyProvider({self.provider_id})"
        if self.kind == BUDGET_EXCEEDED:
            return f"BudgetExceeded({self.required})"
        return self.kind

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == MONOPOLY:
            d["provider"] = self.provider_id
        elif self.kind == BUDGET_EXCEEDED:
            d["required_cents"] = self.required
        return d

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "Status":
        return cls(d["kind"], d.get("provider"), d.get("required_cents"))


@dataclass(frozen=True)
class AuctionOutcome:
    scenario_digest: str
    mechanism: Mechanism
    status: Status
    allocation: Optional[Allocation] = None
    payments: Optional[PaymentSchedule] = None

    def __post_init__(self):
        if self.status.kind == INFEASIBLE:
            assert self.allocation is None and self.payments is None
        if self.status.ok:
            assert self.allocation is not None and self.payments is not None
        elif self.payments is not None:
            raise AssertionError("payments are only recorded for successful auctions")

    def to_json(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "mechanism": self.mechanism.to_json(),
            "status": self.status.to_json(),
            "allocation": None if self.allocation is None else self.allocation.to_json(),
            "payments": None if self.payments is None else self.payments.to_json(),
        }

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "AuctionOutcome":
        return cls(
            scenario_digest=d["scenario_digest"],
            mechanism=Mechanism.from_json(d["mechanism"]),
            status=Status.from_json(d["status"]),
            allocation=None if d["allocation"] is None else Allocation.from_json(d["allocation"]),
            payments=None if d["payments"] is None else PaymentSchedule.from_json(d["payments"]),
        )
