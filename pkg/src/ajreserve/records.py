"""Claim payment records: schema, CSV ingestion, and validation.

Input files are comma-delimited UTF-8 with the exact header
``claim_number,claim_type,AM,CM,DM,incPaid,Delta``. Month columns (AM =
accident month, CM = report month, DM = development month) are bucketed
into model periods with a configurable period length in months.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

CSV_HEADER = ("claim_number", "claim_type", "AM", "CM", "DM", "incPaid", "Delta")


@dataclass(frozen=True)
class StateSpace:
    """State space on the claim-size clock.

    States 1..k-2 are single development-period buckets, state k-1 collapses
    all deeper development periods, and state k is the absorbing Closed
    state.
    """

    k: int

    def __post_init__(self):
        if self.k < 3:
            raise ValidationError(f"state space needs k >= 3, got {self.k}")

    @property
    def closed(self) -> int:
        return self.k

    @property
    def transient(self) -> range:
        return range(1, self.k)

    def bucket(self, development_period: int) -> int:
        """Map a development period to its transient state."""
        if development_period < 1:
            raise ValidationError(f"development period must be >= 1, got {development_period}")
        return min(development_period, self.k - 1)


@dataclass(frozen=True)
class ClaimRecord:
    """One incremental payment row of an individual claim."""

    claim_id: str
    claim_type: int
    accident_period: int
    reporting_delay: int
    development_period: int
    incremental_paid: float
    settled: bool

    def __post_init__(self):
        if self.incremental_paid < 0:
            raise ValidationError(
                f"claim {self.claim_id}: negative incremental payment "
                f"{self.incremental_paid} rejected (sizes must be nondecreasing)"
            )
        if self.accident_period < 1:
            raise ValidationError(f"claim {self.claim_id}: accident period must be >= 1")
        if self.reporting_delay < 1:
            raise ValidationError(f"claim {self.claim_id}: reporting delay must be >= 1")
        if self.development_period < 1:
            raise ValidationError(f"claim {self.claim_id}: development period must be >= 1")


def month_to_period(month: int, months_per_period: int) -> int:
    """1-based period index of a 1-based month."""
    return (month - 1) // months_per_period + 1


def ingest_records(source, months_per_period: int = 12) -> list[ClaimRecord]:
    """Parse claim rows from a CSV path, file object, or text.

    Raises ParseError for malformed rows (with the row number),
    ValidationError for negative payments or a settlement flag that is
    inconsistent within a claim. Zero-paid rows are kept: they carry
    reporting information for the count triangle.
    """
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        with open(source, newline="", encoding="utf-8") as fh:
            return _ingest(fh, months_per_period)
    if isinstance(source, str):
        return _ingest(io.StringIO(source), months_per_period)
    return _ingest(source, months_per_period)


def _ingest(fh, months_per_period: int) -> list[ClaimRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected header row") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"unexpected header {header!r}, expected {list(CSV_HEADER)}", row=1)

    records: list[ClaimRecord] = []
    flags: dict[str, tuple[bool, int, int, int]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", row=lineno)
        try:
            claim_id = row[0].strip()
            claim_type = int(row[1])
            am, cm, dm = int(row[2]), int(row[3]), int(row[4])
            inc_paid = float(row[5])
            delta = int(row[6])
        except ValueError as exc:
            raise ParseError(str(exc), row=lineno) from None
        if delta not in (0, 1):
            raise ParseError(f"Delta must be 0 or 1, got {row[6]!r}", row=lineno)
        if am < 1 or cm < 1 or dm < 1:
            raise ParseError("month columns must be >= 1", row=lineno)
        if cm < am:
            raise ParseError(f"report month {cm} precedes accident month {am}", row=lineno)

        accident = month_to_period(am, months_per_period)
        delay = month_to_period(cm, months_per_period) - accident + 1
        dev = month_to_period(dm, months_per_period)
        record = ClaimRecord(
            claim_id=claim_id,
            claim_type=claim_type,
            accident_period=accident,
            reporting_delay=delay,
            development_period=dev,
            incremental_paid=inc_paid,
            settled=bool(delta),
        )
        seen = flags.get(claim_id)
        key = (record.settled, claim_type, accident, delay)
        if seen is None:
            flags[claim_id] = key
        elif seen != key:
            field = "settlement flag" if seen[0] != record.settled else "claim attributes"
            raise ValidationError(f"claim {claim_id}: inconsistent {field} across rows")
        records.append(record)
    return records


def group_by_claim(records: Iterable[ClaimRecord]) -> dict[str, list[ClaimRecord]]:
    """Group records by claim id, preserving first-appearance order."""
    grouped: dict[str, list[ClaimRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.claim_id, []).append(rec)
    return grouped


def write_records(records: Sequence[ClaimRecord], path, months_per_period: int = 12) -> None:
    """Write records back to the CSV schema (inverse of ingest_records).

    Period indices are expanded to the first month of their period, so a
    round trip through ingest_records reproduces the same periods.
    """

    def first_month(period: int) -> int:
        return (period - 1) * months_per_period + 1

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            am = first_month(rec.accident_period)
            cm = first_month(rec.accident_period + rec.reporting_delay - 1)
            dm = first_month(rec.development_period)
            writer.writerow(
                [
                    rec.claim_id,
                    rec.claim_type,
                    am,
                    cm,
                    dm,
                    repr(rec.incremental_paid),
                    int(rec.settled),
                ]
            )
