"""Jump paths on the claim-size clock and conversion from payment records.

A claim's cumulative paid amount is the clock: the claim occupies the state
of its current development-period bucket while the cumulative amount grows,
jumps forward when payments move to a later bucket, and jumps to the
absorbing Closed state at its final size. Open claims are right-censored at
their paid-to-date level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ValidationError
from .records import ClaimRecord, StateSpace, group_by_claim

COVARIATE_NAMES = ("claim_type", "accident_period")


class JumpEvent(NamedTuple):
    size: float
    source: int
    target: int


@dataclass(frozen=True)
class ClaimPath:
    """Right-censored forward jump path of one claim.

    ``censor_level`` is the end of the observation window: the absorption
    size for settled claims, the paid-to-date level W for open ones. Either
    way it equals the claim's cumulative paid amount.
    """

    claim_id: str
    covariates: tuple[float, ...]
    start_state: int
    events: tuple[JumpEvent, ...]
    censor_level: float
    absorbed: bool

    def __post_init__(self):
        if self.censor_level < 0:
            raise ValidationError(f"claim {self.claim_id}: negative observation window")
        prev = 0.0
        for ev in self.events:
            if ev.size < prev:
                raise ValidationError(f"claim {self.claim_id}: jump sizes must be nondecreasing")
            if ev.source >= ev.target:
                raise ValidationError(f"claim {self.claim_id}: jumps must move strictly forward")
            prev = ev.size
        if self.events and self.events[0].source != self.start_state:
            raise ValidationError(f"claim {self.claim_id}: first jump must leave the start state")
        if self.events and self.events[-1].size > self.censor_level:
            raise ValidationError(f"claim {self.claim_id}: jump beyond observation window")
        if self.absorbed:
            if not self.events:
                raise ValidationError(f"claim {self.claim_id}: absorbed path needs a closing jump")
            if self.events[-1].size != self.censor_level:
                raise ValidationError(f"claim {self.claim_id}: absorption size != window end")

    @property
    def absorption_size(self) -> float:
        if not self.absorbed:
            raise ValidationError(f"claim {self.claim_id} is not absorbed")
        return self.events[-1].size

    @property
    def paid_to_date(self) -> float:
        return self.censor_level


@dataclass(frozen=True)
class Portfolio:
    """Immutable bundle of claim paths sharing one state space."""

    paths: tuple[ClaimPath, ...]
    state_space: StateSpace
    covariate_names: tuple[str, ...] = COVARIATE_NAMES

    def __post_init__(self):
        k = self.state_space.k
        for path in self.paths:
            if not 1 <= path.start_state < k:
                raise ValidationError(f"claim {path.claim_id}: start state outside 1..{k - 1}")
            for ev in path.events:
                if ev.target > k:
                    raise ValidationError(f"claim {path.claim_id}: state beyond {k}")
                if ev.source == k:
                    raise ValidationError(f"claim {path.claim_id}: jump out of the closed state")
            if path.absorbed and path.events[-1].target != k:
                raise ValidationError(f"claim {path.claim_id}: absorbed path must end in state {k}")
            if not path.absorbed and any(ev.target == k for ev in path.events):
                raise ValidationError(f"claim {path.claim_id}: open path reaches the closed state")
            if len(path.covariates) != len(self.covariate_names):
                raise ValidationError(f"claim {path.claim_id}: covariate length mismatch")

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def n_closed(self) -> int:
        return sum(p.absorbed for p in self.paths)

    @property
    def n_rbns(self) -> int:
        return len(self.paths) - self.n_closed

    @cached_property
    def covariate_matrix(self) -> np.ndarray:
        return np.array([p.covariates for p in self.paths], dtype=float).reshape(
            len(self.paths), len(self.covariate_names)
        )

    def covariate_columns(self, features: Sequence[str]) -> np.ndarray:
        """Column indices of the named features."""
        try:
            return np.array([self.covariate_names.index(f) for f in features], dtype=int)
        except ValueError:
            unknown = [f for f in features if f not in self.covariate_names]
            raise ValidationError(f"unknown features {unknown}, have {list(self.covariate_names)}")

    @cached_property
    def _event_table(self) -> tuple[np.ndarray, ...]:
        """Pooled jump events as (size, source, target, path index) arrays."""
        sizes, sources, targets, owners = [], [], [], []
        for idx, path in enumerate(self.paths):
            for ev in path.events:
                sizes.append(ev.size)
                sources.append(ev.source)
                targets.append(ev.target)
                owners.append(idx)
        return (
            np.array(sizes, dtype=float),
            np.array(sources, dtype=int),
            np.array(targets, dtype=int),
            np.array(owners, dtype=int),
        )

    @cached_property
    def _interval_table(self) -> tuple[np.ndarray, ...]:
        """Occupancy intervals as (lo, hi, state, path, closed flags) arrays.

        A path is at risk in ``state`` at event size s when s lies in
        (lo, hi], widened to [lo, hi] for the initial interval at zero and
        narrowed to (lo, hi) when the interval ends by censoring.
        """
        lo, hi, states, owners, closed_left, closed_right = [], [], [], [], [], []

        def push(a, b, state, idx, cl, cr):
            lo.append(a)
            hi.append(b)
            states.append(state)
            owners.append(idx)
            closed_left.append(cl)
            closed_right.append(cr)

        for idx, path in enumerate(self.paths):
            prev = 0.0
            first = True
            for ev in path.events:
                push(prev, ev.size, ev.source, idx, first, True)
                prev = ev.size
                first = False
            if path.absorbed:
                push(prev, np.inf, self.state_space.k, idx, False, False)
            else:
                push(prev, path.censor_level, path.events[-1].target if path.events else path.start_state, idx, first, False)
        return (
            np.array(lo, dtype=float),
            np.array(hi, dtype=float),
            np.array(states, dtype=int),
            np.array(owners, dtype=int),
            np.array(closed_left, dtype=bool),
            np.array(closed_right, dtype=bool),
        )

    @cached_property
    def start_states(self) -> np.ndarray:
        return np.array([p.start_state for p in self.paths], dtype=int)


def paths_from_records(records: Iterable[ClaimRecord], state_space: StateSpace) -> Portfolio:
    """Convert payment records to claim-size jump paths.

    Per claim: payments are totalled per development-period bucket; the
    claim starts in its first payment-bearing bucket, jumps to the next
    payment-bearing bucket at each cumulative level (empty buckets are
    skipped), and either jumps to Closed at its total paid size (settled)
    or is censored at paid-to-date (open). Settled claims without payments
    absorb at size zero.
    """
    k = state_space.k
    paths = []
    for claim_id, rows in group_by_claim(records).items():
        head = rows[0]
        for row in rows[1:]:
            if (row.settled, row.claim_type, row.accident_period, row.reporting_delay) != (
                head.settled,
                head.claim_type,
                head.accident_period,
                head.reporting_delay,
            ):
                raise ValidationError(f"claim {claim_id}: inconsistent attributes across rows")

        totals: dict[int, float] = {}
        for row in rows:
            bucket = state_space.bucket(row.development_period)
            totals[bucket] = totals.get(bucket, 0.0) + row.incremental_paid
        bearing = sorted(b for b, amount in totals.items() if amount > 0)

        covariates = (float(head.claim_type), float(head.accident_period))
        if not bearing:
            if head.settled:
                path = ClaimPath(claim_id, covariates, 1, (JumpEvent(0.0, 1, k),), 0.0, True)
            else:
                path = ClaimPath(claim_id, covariates, 1, (), 0.0, False)
            paths.append(path)
            continue

        cumulative = np.cumsum([totals[b] for b in bearing])
        events = [
            JumpEvent(float(cumulative[i]), bearing[i], bearing[i + 1])
            for i in range(len(bearing) - 1)
        ]
        total = float(cumulative[-1])
        if head.settled:
            events.append(JumpEvent(total, bearing[-1], k))
        paths.append(
            ClaimPath(claim_id, covariates, bearing[0], tuple(events), total, head.settled)
        )
    return Portfolio(tuple(paths), state_space)


def actual_ultimate(portfolio: Portfolio) -> float:
    """Sum of absorption sizes; requires every path settled (ground truth)."""
    open_ids = [p.claim_id for p in portfolio.paths if not p.absorbed]
    if open_ids:
        raise ValidationError(
            f"actual ultimate undefined: {len(open_ids)} unsettled paths (e.g. {open_ids[0]})"
        )
    return math.fsum(p.absorption_size for p in portfolio.paths)


def paid_to_date(portfolio: Portfolio) -> float:
    """Total amount paid so far over all claims."""
    return math.fsum(p.paid_to_date for p in portfolio.paths)
