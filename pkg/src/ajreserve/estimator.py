"""Occupation-probability estimation on the claim-size clock.

Pipeline: local weights -> pooled counting aggregate -> cumulative hazard
increments -> occupation curve via the product-factor recursion -> the
absorbing-state column as a step CDF of the individual claim size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from ._backend import occupation_recursion
from .errors import NumericError, ValidationError
from .paths import Portfolio

SUM_TOL = 1e-10
ENTRY_TOL = 1e-12
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class CountingAggregate:
    """Weighted event masses and left-limit at-risk masses on a pooled size grid.

    ``initial`` is the weighted start-state occupancy just before size zero;
    it includes paths censored at zero, which stay out of every at-risk
    column.
    """

    sizes: np.ndarray  # (E,) increasing
    event_mass: np.ndarray  # (E, k, k); entry (j, h) = weighted jumps j+1 -> h+1
    at_risk: np.ndarray  # (E, k) left-limit at-risk mass
    initial: np.ndarray  # (k,)


def aggregate_counts(portfolio: Portfolio, weights) -> CountingAggregate:
    """Pool weighted events and at-risk masses across the portfolio.

    Ties at one size merge into a single event point; a path censored
    exactly at an event size is not at risk there, while a settled path is
    at risk at its own absorption size.
    """
    k = portfolio.state_space.k
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(portfolio),):
        raise ValidationError(f"need one weight per path, got {weights.shape}")
    if np.any(weights < 0):
        raise ValidationError("weights must be nonnegative")
    if weights.sum() <= 0:
        raise ValidationError("weights must not all be zero")

    ev_size, ev_from, ev_to, ev_path = portfolio._event_table
    ev_w = weights[ev_path] if ev_size.size else np.empty(0)
    live = ev_w > 0
    sizes = np.unique(ev_size[live])
    n_events = sizes.size

    event_mass = np.zeros((n_events, k, k))
    if n_events:
        idx = np.searchsorted(sizes, ev_size[live])
        np.add.at(event_mass, (idx, ev_from[live] - 1, ev_to[live] - 1), ev_w[live])

    iv_lo, iv_hi, iv_state, iv_path, iv_cl, iv_cr = portfolio._interval_table
    at_risk = np.zeros((n_events, k))
    if n_events:
        w = weights[iv_path]
        delta = np.zeros((n_events + 1, k))
        start = np.where(
            iv_cl,
            np.searchsorted(sizes, iv_lo, side="left"),
            np.searchsorted(sizes, iv_lo, side="right"),
        )
        end = np.where(
            iv_cr,
            np.searchsorted(sizes, iv_hi, side="right"),
            np.searchsorted(sizes, iv_hi, side="left"),
        )
        keep = (w > 0) & (end > start)
        np.add.at(delta, (start[keep], iv_state[keep] - 1), w[keep])
        np.add.at(delta, (end[keep], iv_state[keep] - 1), -w[keep])
        at_risk = delta.cumsum(axis=0)[:n_events]

    initial = np.zeros(k)
    np.add.at(initial, portfolio.start_states - 1, weights)
    return CountingAggregate(sizes, event_mass, at_risk, initial)


@dataclass(frozen=True)
class CumulativeHazard:
    """Per-event-size hazard increment matrices, diagonal = -(row sum).

    ``n_skipped`` counts (state, size) pairs where events carried mass but
    the at-risk mass was zero; those increments are dropped rather than
    emitted as infinities.
    """

    sizes: np.ndarray  # (E,)
    increments: np.ndarray  # (E, k, k)
    n_skipped: int = 0

    @property
    def k(self) -> int:
        return self.increments.shape[1]

    def to_csv(self, path) -> None:
        """Tidy export: one row per (size, from, to) off-diagonal increment."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["size", "from", "to", "increment"])
            for e, size in enumerate(self.sizes):
                for j in range(self.k):
                    for h in range(self.k):
                        if j != h and self.increments[e, j, h] != 0.0:
                            writer.writerow([repr(float(size)), j + 1, h + 1,
                                             repr(float(self.increments[e, j, h]))])


def hazard_from_aggregate(aggregate: CountingAggregate) -> CumulativeHazard:
    """Increment ratios event-mass / at-risk, with zero-at-risk points skipped."""
    sizes, event_mass, at_risk = aggregate.sizes, aggregate.event_mass, aggregate.at_risk
    n_events, k, _ = event_mass.shape
    increments = np.zeros_like(event_mass)
    n_skipped = 0
    if n_events:
        risk = at_risk[:, :, None]
        positive = risk > 0
        np.divide(event_mass, risk, out=increments, where=positive)
        n_skipped = int(np.count_nonzero((~positive) & (event_mass[:, :, :] > 0)))
        # events cannot outweigh the at-risk mass; tolerate float dust only
        row_sums = increments.sum(axis=2)
        bad = row_sums > 1.0 + 1e-9
        if np.any(bad):
            raise NumericError("event mass exceeds at-risk mass at some event size")
        over = row_sums > 1.0
        if np.any(over):
            scale = np.where(over, 1.0 / row_sums, 1.0)
            increments *= scale[:, :, None]
        diag = np.arange(k)
        increments[:, diag, diag] = -increments.sum(axis=2)
    return CumulativeHazard(sizes, increments, n_skipped)


@dataclass(frozen=True)
class OccupationCurve:
    """Right-continuous state occupation vectors along the size grid."""

    sizes: np.ndarray  # (E,)
    probabilities: np.ndarray  # (E, k)
    initial: np.ndarray  # (k,) value before the first event size

    @property
    def k(self) -> int:
        return self.initial.shape[0]

    def to_csv(self, path) -> None:
        """Tidy export: one row per (size, state, probability)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["size", "state", "probability"])
            for state in range(self.k):
                writer.writerow(["0.0", state + 1, repr(float(self.initial[state]))])
            for e, size in enumerate(self.sizes):
                for state in range(self.k):
                    writer.writerow([repr(float(size)), state + 1,
                                     repr(float(self.probabilities[e, state]))])


def aalen_johansen(hazard: CumulativeHazard, initial) -> OccupationCurve:
    """Run the product-factor recursion p <- p (Id + increment) over the grid.

    Validates that the initial vector is a distribution and every factor is
    stochastic; the output is guaranteed to keep unit mass within 1e-10 and
    a nondecreasing absorbing column.
    """
    p0 = np.asarray(initial, dtype=float)
    k = hazard.k
    if p0.shape != (k,):
        raise ValidationError(f"initial vector must have length {k}")
    if np.any(p0 < -ENTRY_TOL):
        raise ValidationError("initial vector has negative mass")
    if abs(p0.sum() - 1.0) > 1e-8:
        raise ValidationError(f"initial vector mass {p0.sum()} != 1")
    p0 = np.clip(p0, 0.0, None)
    p0 = p0 / p0.sum()

    inc = hazard.increments
    if inc.size:
        off_diag = inc.copy()
        idx = np.arange(k)
        off_diag[:, idx, idx] = 0.0
        if np.any(off_diag < -ENTRY_TOL):
            raise NumericError("negative off-diagonal hazard increment")
        if np.any(1.0 + inc[:, idx, idx] < -ENTRY_TOL):
            raise NumericError("hazard increment factor has a negative diagonal entry")
        if np.any(np.abs(inc[:, k - 1, :]) > 0):
            raise NumericError("absorbing state must have zero outgoing increments")

    probs = occupation_recursion(np.ascontiguousarray(p0), np.ascontiguousarray(inc))
    if probs.size:
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            raise NumericError(f"occupation mass drifted from 1 by {np.abs(sums - 1).max():.2e}")
        if np.any(probs < -ENTRY_TOL) or np.any(probs > 1.0 + ENTRY_TOL):
            raise NumericError("occupation probability escaped [0, 1]")
        absorbing = np.concatenate(([p0[k - 1]], probs[:, k - 1]))
        if np.any(np.diff(absorbing) < 0):
            raise NumericError("absorbing occupation decreased")
        probs = np.clip(probs, 0.0, 1.0)
    return OccupationCurve(hazard.sizes, probs, p0)


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step CDF with an optional defect at the top.

    ``f0`` is the value before the first atom. Integrals downstream treat
    any missing terminal mass as an atom at ``support_cap`` (restricted-mean
    convention); ``tail_truncated`` flags when that atom is material.
    """

    sizes: np.ndarray  # (E,) strictly increasing
    values: np.ndarray  # (E,) nondecreasing in [0, 1]
    f0: float = 0.0

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "values", values)
        if sizes.shape != values.shape or sizes.ndim != 1:
            raise ValidationError("sizes and values must be aligned 1-d arrays")
        if sizes.size and np.any(np.diff(sizes) <= 0):
            raise ValidationError("cdf sizes must be strictly increasing")
        if sizes.size and sizes[0] < 0:
            raise ValidationError("cdf support must be nonnegative")
        full = np.concatenate(([self.f0], values))
        if np.any(np.diff(full) < -ENTRY_TOL):
            raise ValidationError("cdf values must be nondecreasing")
        if np.any(full < -ENTRY_TOL) or np.any(full > 1.0 + ENTRY_TOL):
            raise ValidationError("cdf values must lie in [0, 1]")

    @property
    def support_cap(self) -> float:
        return float(self.sizes[-1]) if self.sizes.size else 0.0

    @property
    def terminal_value(self) -> float:
        return float(self.values[-1]) if self.sizes.size else float(self.f0)

    @property
    def residual_mass(self) -> float:
        return 1.0 - self.terminal_value

    @property
    def tail_truncated(self) -> bool:
        return self.residual_mass > RESIDUAL_TOL

    def value_at(self, z):
        """Raw right-continuous evaluation (no residual atom)."""
        z = np.asarray(z, dtype=float)
        if self.sizes.size == 0:
            out = np.full(z.shape, float(self.f0))
            return out if z.ndim else float(out)
        idx = np.searchsorted(self.sizes, z, side="right") - 1
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], self.f0)
        return out if z.ndim else float(out)

    def capped_value_at(self, z):
        """Evaluation under the residual-atom convention: 1 from the cap on."""
        z = np.asarray(z, dtype=float)
        out = np.where(z >= self.support_cap, 1.0, self.value_at(z))
        return out if z.ndim else float(out)

    def to_csv(self, path, covariate: str = "") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["size", "probability", "covariate"])
            for size, value in zip(self.sizes, self.values):
                writer.writerow([repr(float(size)), repr(float(value)), covariate])


def occupation_cdf(curve: OccupationCurve) -> StepCdf:
    """Absorbing-state column of the curve as the claim-size CDF."""
    k = curve.k
    return StepCdf(curve.sizes, curve.probabilities[:, k - 1] if curve.sizes.size else np.empty(0),
                   f0=float(curve.initial[k - 1]))


def conditional_hazard(portfolio: Portfolio, x=None, kernel=None, bandwidth=None,
                       features: Sequence[str] | None = None) -> CumulativeHazard:
    """Locally weighted cumulative hazard at covariate point x.

    ``features`` selects covariate columns by name; None conditions on all
    of them and an empty sequence gives the unconditional (unit-weight)
    estimator. Exact kernels ignore the bandwidth.
    """
    weights = _local_weights(portfolio, x, kernel, bandwidth, features)
    return hazard_from_aggregate(aggregate_counts(portfolio, weights))


def fit_occupation_curve(portfolio: Portfolio, x=None, kernel=None, bandwidth=None,
                         features: Sequence[str] | None = None) -> OccupationCurve:
    weights = _local_weights(portfolio, x, kernel, bandwidth, features)
    aggregate = aggregate_counts(portfolio, weights)
    hazard = hazard_from_aggregate(aggregate)
    total = aggregate.initial.sum()
    if total <= 0:
        raise ValidationError("no initial occupancy mass")
    return aalen_johansen(hazard, aggregate.initial / total)


def fit_conditional_cdf(portfolio: Portfolio, x=None, kernel=None, bandwidth=None,
                        features: Sequence[str] | None = None) -> StepCdf:
    """Conditional claim-size CDF at covariate point x (see fit_occupation_curve)."""
    return occupation_cdf(fit_occupation_curve(portfolio, x, kernel, bandwidth, features))


def _local_weights(portfolio, x, kernel, bandwidth, features):
    if len(portfolio) == 0:
        raise ValidationError("cannot fit on an empty portfolio")
    if features is None:
        features = portfolio.covariate_names if x is not None else ()
    cols = portfolio.covariate_columns(features)
    if cols.size == 0:
        return np.full(len(portfolio), 1.0 / len(portfolio))
    if x is None:
        raise ValidationError(f"features {tuple(features)} need a covariate point")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (cols.size,):
        raise ValidationError(f"covariate point has {x.shape[0]} dims, features have {cols.size}")
    sample = portfolio.covariate_matrix[:, cols]
    kernel = kernel or kernels.KernelSpec("exact")
    if bandwidth is None and not kernel.is_exact:
        bandwidth = kernels.bandwidth_for_sample(sample)
    return kernels.nw_weights(kernel, x, sample, bandwidth)
