"""Run-off triangles of reported counts and cumulative paid amounts.

A triangle of dimension J = k-1 holds cells (row, col) with row + col <= k,
1-based; builders mask everything else. A fully observed square is also
representable (used for run-off ground truth in tests).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .records import ClaimRecord, StateSpace


@dataclass(frozen=True)
class Triangle:
    """Dense (J, J) value array plus an observed-cell mask."""

    values: np.ndarray
    mask: np.ndarray
    kind: str  # "count" | "cumulative_paid"
    n_excluded: int = 0

    def __post_init__(self):
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise ValidationError("triangle values and mask must be square and aligned")
        if self.values.shape[0] != self.values.shape[1]:
            raise ValidationError("triangle must be square")
        if self.kind not in ("count", "cumulative_paid"):
            raise ValidationError(f"unknown triangle kind {self.kind!r}")

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    def cell(self, row: int, col: int) -> float:
        """1-based accessor; raises on unobserved cells."""
        if not self.mask[row - 1, col - 1]:
            raise ValidationError(f"cell ({row}, {col}) is not observed")
        return float(self.values[row - 1, col - 1])

    def last_observed_col(self, row: int) -> int:
        """1-based index of the rightmost observed column of a row."""
        observed = np.flatnonzero(self.mask[row - 1])
        if observed.size == 0:
            raise ValidationError(f"row {row} has no observed cells")
        return int(observed[-1]) + 1

    def row_cumulative(self) -> "Triangle":
        """Row-wise cumulative version of an incremental count triangle."""
        values = np.where(self.mask, self.values, 0.0).cumsum(axis=1)
        values[~self.mask] = 0.0
        return Triangle(values, self.mask.copy(), self.kind, self.n_excluded)

    def to_csv(self, path) -> None:
        """Matrix CSV with blank cells outside the observed region."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for i in range(self.dimension):
                writer.writerow(
                    [repr(float(self.values[i, j])) if self.mask[i, j] else ""
                     for j in range(self.dimension)]
                )


def runoff_mask(dimension: int) -> np.ndarray:
    """Observed-cell mask of a standard run-off triangle (row + col <= J + 1)."""
    rows, cols = np.indices((dimension, dimension))
    return rows + cols <= dimension - 1


def full_mask(dimension: int) -> np.ndarray:
    return np.ones((dimension, dimension), dtype=bool)


def build_count_triangle(records: Iterable[ClaimRecord], state_space: StateSpace) -> Triangle:
    """Count of distinct claims per (accident period, reporting delay) cell.

    Claims beyond the observable diagonal (U + T > k) are excluded and
    tallied in ``n_excluded``.
    """
    k = state_space.k
    dim = k - 1
    values = np.zeros((dim, dim))
    seen: set[str] = set()
    excluded: set[str] = set()
    for rec in records:
        if rec.claim_id in seen or rec.claim_id in excluded:
            continue
        if rec.accident_period + rec.reporting_delay > k:
            excluded.add(rec.claim_id)
            continue
        values[rec.accident_period - 1, rec.reporting_delay - 1] += 1
        seen.add(rec.claim_id)
    return Triangle(values, runoff_mask(dim), "count", n_excluded=len(excluded))


def build_paid_triangle(records: Iterable[ClaimRecord], state_space: StateSpace) -> Triangle:
    """Cumulative paid per (accident period, development bucket) cell.

    Cell (l, j) totals, over claims of accident period l, the cumulative
    amount paid through development bucket j; only the observed wedge
    l + j <= k is filled.
    """
    k = state_space.k
    dim = k - 1
    incremental = np.zeros((dim, dim))
    excluded: set[str] = set()
    for rec in records:
        if rec.accident_period + rec.reporting_delay > k:
            excluded.add(rec.claim_id)
            continue
        if rec.accident_period > dim:
            excluded.add(rec.claim_id)
            continue
        bucket = state_space.bucket(rec.development_period)
        incremental[rec.accident_period - 1, bucket - 1] += rec.incremental_paid
    mask = runoff_mask(dim)
    values = incremental.cumsum(axis=1)
    values[~mask] = 0.0
    return Triangle(values, mask, "cumulative_paid", n_excluded=len(excluded))
