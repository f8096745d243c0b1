"""Append-only JSON Lines ledger of auction outcomes.

Every write rewrites the file into a temporary sibling and renames it over
the original, so a crash leaves either the old or the new file, never a torn
line. Settlement appends a superseding copy of a record; earlier lines are
never modified. One writer per ledger file.
"""
from __future__ import annotations

import json
import os
import tempfile
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

from .market import STATUSES, SUCCESS, AuctionOutcome

Clock = Callable[[], datetime]

PENDING = "Pending"
SETTLED = "Settled"


class LedgerError(Exception):
    code = "LedgerError"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")


class CorruptLedger(LedgerError):
    code = "CorruptLedger"


class NotFound(LedgerError):
    code = "NotFound"


class AlreadySettled(LedgerError):
    code = "AlreadySettled"


class NotSettleable(LedgerError):
    code = "NotSettleable"


def system_clock() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(iso: str) -> Clock:
    """Clock frozen at ``iso``; naive times are taken as UTC."""
    t = datetime.fromisoformat(iso.strip().replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return lambda: t


def clock_from_env(environ=os.environ) -> Clock:
    iso = environ.get("FIXED_CLOCK")
    return fixed_clock(iso) if iso else system_clock


def format_timestamp(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class LedgerRecord:
    record_id: int
    timestamp: str
    outcome: AuctionOutcome
    settlement: str = PENDING
    reference: Optional[str] = None
    supersedes: Optional[int] = None

    def __post_init__(self):
        if self.settlement not in (PENDING, SETTLED):
            raise ValueError(f"unknown settlement state {self.settlement!r}")
        if self.settlement == SETTLED and not self.outcome.status.ok:
            raise ValueError("only successful auctions can be settled")
        if (self.settlement == SETTLED) != (self.reference is not None):
            raise ValueError("a settlement reference is required for, and only for, Settled")

    @property
    def logical_id(self) -> int:
        return self.supersedes if self.supersedes is not None else self.record_id

    def to_json(self) -> dict:
        settlement: dict[str, Any] = {"state": self.settlement}
        if self.reference is not None:
            settlement["reference"] = self.reference
        return {
            "record_id": self.record_id,
            "timestamp": self.timestamp,
            "outcome": self.outcome.to_json(),
            "settlement": settlement,
            "supersedes": self.supersedes,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"), ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "LedgerRecord":
        if list(d) != ["record_id", "timestamp", "outcome", "settlement", "supersedes"]:
            raise ValueError(f"unexpected record keys {list(d)}")
        settlement = d["settlement"]
        return cls(
            record_id=d["record_id"],
            timestamp=d["timestamp"],
            outcome=AuctionOutcome.from_json(d["outcome"]),
            settlement=settlement["state"],
            reference=settlement.get("reference"),
            supersedes=d["supersedes"],
        )


def _parse(data: bytes, path: Path) -> list[LedgerRecord]:
    if not data:
        return []
    if not data.endswith(b"\n"):
        raise CorruptLedger(f"{path}: last line is truncated")
    records = []
    for n, line in enumerate(data.decode("utf-8", errors="strict").splitlines(keepends=True), 1):
        try:
            rec = LedgerRecord.from_json(json.loads(line))
        except (ValueError, KeyError, TypeError, AttributeError, AssertionError) as exc:
            raise CorruptLedger(f"{path}:{n}: {exc}") from None
        if rec.to_line() != line:
            raise CorruptLedger(f"{path}:{n}: line is not in canonical form")
        if rec.record_id != n:
            raise CorruptLedger(f"{path}:{n}: expected record_id {n}, found {rec.record_id}")
        records.append(rec)
    return records


def load_ledger(path: str | Path, *, missing_ok: bool = False) -> list[LedgerRecord]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        if missing_ok:
            return []
        raise
    try:
        return _parse(data, path)
    except UnicodeDecodeError as exc:
        raise CorruptLedger(f"{path}: {exc}") from None


def dump_ledger(records: list[LedgerRecord]) -> bytes:
    return "".join(r.to_line() for r in records).encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _append(path: Path, records: list[LedgerRecord], rec: LedgerRecord) -> LedgerRecord:
    _atomic_write(path, dump_ledger(records) + rec.to_line().encode("utf-8"))
    return rec


def append_record(ledger_path: str | Path, outcome: AuctionOutcome, clock: Clock = system_clock) -> LedgerRecord:
    path = Path(ledger_path)
    records = load_ledger(path, missing_ok=True)
    rec = LedgerRecord(len(records) + 1, format_timestamp(clock()), outcome)
    return _append(path, records, rec)


def settle(ledger_path: str | Path, record_id: int, reference: str, clock: Clock = system_clock) -> LedgerRecord:
    """Append a Settled copy of ``record_id`` carrying ``reference``."""
    path = Path(ledger_path)
    records = load_ledger(path)
    if not 1 <= record_id <= len(records):
        raise NotFound(f"no record {record_id}")
    target = records[record_id - 1]
    logical = target.logical_id
    if any(r.logical_id == logical and r.settlement == SETTLED for r in records):
        raise AlreadySettled(f"record {record_id} is already settled")
    if not target.outcome.status.ok:
        raise NotSettleable(f"record {record_id} has status {target.outcome.status}")
    rec = LedgerRecord(
        record_id=len(records) + 1,
        timestamp=format_timestamp(clock()),
        outcome=target.outcome,
        settlement=SETTLED,
        reference=reference,
        supersedes=logical,
    )
    return _append(path, records, rec)


@dataclass
class MarketReport:
    records: int = 0
    auctions: int = 0
    by_status: dict[str, int] = field(default_factory=lambda: {k: 0 for k in STATUSES})
    total_spend: int = 0
    provider_revenue: dict[str, int] = field(default_factory=dict)
    settled: int = 0
    settlement_backlog: int = 0

    def to_json(self) -> dict:
        return {
            "records": self.records,
            "auctions": self.auctions,
            "by_status": self.by_status,
            "total_spend_cents": self.total_spend,
            "provider_revenue_cents": self.provider_revenue,
            "settled": self.settled,
            "settlement_backlog": self.settlement_backlog,
        }


def summarize(records: list[LedgerRecord]) -> MarketReport:
    latest: dict[int, LedgerRecord] = {}
    for r in records:
        latest[r.logical_id] = r
    report = MarketReport(records=len(records), auctions=len(latest))
    status = Counter(r.outcome.status.kind for r in latest.values())
    report.by_status.update(status)
    revenue: dict[str, int] = defaultdict(int)
    for r in latest.values():
        if r.outcome.status.kind != SUCCESS:
            continue
        report.total_spend += r.outcome.payments.consumer_total
        for p, amount in r.outcome.payments.payments.items():
            revenue[p] += amount
        if r.settlement == SETTLED:
            report.settled += 1
        else:
            report.settlement_backlog += 1
    report.provider_revenue = dict(sorted(revenue.items()))
    return report


def build_report(ledger_path: str | Path) -> MarketReport:
    return summarize(load_ledger(ledger_path))
