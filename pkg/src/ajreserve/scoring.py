"""Proper scoring of predicted claim-size curves and model selection.

CRPS of a step CDF against a realized size has an exact piecewise form;
averages over open claims drive the choice of state-space size and feature
set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .estimator import StepCdf


def crps(cdf: StepCdf, y: float) -> float:
    """Continuously ranked probability score of a step CDF at outcome y.

    Integrates F^2 below y and (1 - F)^2 above y, with the residual-atom
    convention closing the CDF at its support cap.
    """
    if y < 0:
        raise ValidationError(f"realized size must be >= 0, got {y}")
    cap = cdf.support_cap
    hi = max(cap, y)
    grid = np.unique(np.concatenate((cdf.sizes, [0.0, y, hi])))
    grid = grid[(grid >= 0.0) & (grid <= hi)]
    if grid.size < 2:
        return 0.0
    left = grid[:-1]
    f_left = cdf.capped_value_at(left)
    widths = np.diff(grid)
    below = left < y  # pieces [left, right) strictly below the outcome
    terms = np.where(below, f_left ** 2, (1.0 - f_left) ** 2) * widths
    return float(math.fsum(terms))


def error_incidence(predicted_total: float, actual_total: float) -> float:
    """Relative error of the predicted ultimate: predicted / actual - 1."""
    if actual_total <= 0:
        raise ValidationError(f"actual total must be positive, got {actual_total}")
    return predicted_total / actual_total - 1.0


@dataclass(frozen=True)
class ScoreSummary:
    """Per-claim CRPS values and headline metrics for one fitted model."""

    model: str
    k: int
    features: tuple[str, ...]
    claim_ids: tuple[str, ...]
    crps_values: np.ndarray
    ei: float
    cv: float | None = None
    relative_crps: float | None = None

    @property
    def avg_crps(self) -> float:
        if self.crps_values.size == 0:
            raise ValidationError(f"model {self.model}: no scored claims")
        return float(np.mean(self.crps_values))

    def with_relative(self, reference_avg: float) -> "ScoreSummary":
        if reference_avg <= 0:
            raise ValidationError("reference CRPS must be positive")
        return ScoreSummary(
            self.model, self.k, self.features, self.claim_ids, self.crps_values,
            self.ei, self.cv, self.avg_crps / reference_avg,
        )


def relativize(summaries, reference: ScoreSummary) -> list[ScoreSummary]:
    """Express every summary's average CRPS relative to the reference model."""
    ref = reference.avg_crps
    return [s.with_relative(ref) for s in summaries]


def select_model(candidates) -> ScoreSummary:
    """Argmin of average CRPS; ties prefer smaller k, then fewer features.

    All candidates must be scored on the identical set of claims.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValidationError("no candidate models to select from")
    baseline = candidates[0].claim_ids
    for cand in candidates[1:]:
        if cand.claim_ids != baseline:
            raise ValidationError(
                f"candidates scored on different claims: {cand.model} vs {candidates[0].model}"
            )
    return min(candidates, key=lambda s: (s.avg_crps, s.k, len(s.features)))
