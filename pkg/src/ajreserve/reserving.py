"""Reserve prediction: open-claim ultimates, IBNR compound model, totals.

Open (RBNS) claims get their expected remaining growth from the fitted
claim-size CDF via exact tail integrals of the step survival function; the
IBNR block combines chain-ladder counts on the reporting triangle with
unconditional severity moments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BeyondSupportError, NumericError, ValidationError
from .estimator import StepCdf, fit_conditional_cdf
from .paths import Portfolio, paid_to_date
from .triangles import Triangle

BEYOND_TOL = 1e-12


def tail_integral(cdf: StepCdf, w: float, m) -> float:
    """Exact integral of m * y^(m-1) * (1 - F(y)) over [w, support cap].

    Under the residual-atom convention the survival function vanishes
    beyond the cap, so this is the m-th tail moment contribution above w.
    """
    if m < 1:
        raise ValidationError(f"moment order must be >= 1, got {m}")
    if w < 0:
        raise ValidationError(f"integration start must be >= 0, got {w}")
    cap = cdf.support_cap
    if w >= cap:
        return 0.0
    inner = cdf.sizes[(cdf.sizes > w) & (cdf.sizes < cap)]
    grid = np.concatenate(([w], inner, [cap]))
    survival = 1.0 - cdf.value_at(grid[:-1])
    return float(math.fsum(np.diff(grid ** float(m)) * survival))


def rbns_conditional_moment(cdf: StepCdf, w: float, m) -> float:
    """Tail moment above w normalized by the survival mass at w.

    For m = 1 this is the mean residual growth E[Y - w | Y > w]. Raises
    BeyondSupportError when the CDF (residual atom included) has no mass
    above w; callers choose the fallback policy.
    """
    f_w = cdf.capped_value_at(w)
    if f_w >= 1.0 - BEYOND_TOL:
        raise BeyondSupportError(
            f"level {w} is at or beyond the estimated support cap {cdf.support_cap}"
        )
    return tail_integral(cdf, w, m) / (1.0 - f_w)


@dataclass(frozen=True)
class ClaimPrediction:
    claim_id: str
    censor_level: float
    mean_residual: float
    ultimate: float
    residual_second_moment: float
    variance: float
    beyond_support: bool


@dataclass(frozen=True)
class RbnsPrediction:
    """Per-claim ultimates for open claims plus portfolio totals."""

    claims: tuple[ClaimPrediction, ...]
    total_ultimate: float
    total_variance: float

    @property
    def n_beyond_support(self) -> int:
        return sum(c.beyond_support for c in self.claims)

    def to_csv_rows(self):
        yield ("claim_id", "paid_to_date", "mean_residual", "ultimate",
               "residual_second_moment", "variance", "beyond_support")
        for c in self.claims:
            yield (c.claim_id, repr(c.censor_level), repr(c.mean_residual), repr(c.ultimate),
                   repr(c.residual_second_moment), repr(c.variance), int(c.beyond_support))


def predict_rbns(portfolio: Portfolio, cdfs: Mapping[str, StepCdf],
                 fallback: str = "zero") -> RbnsPrediction:
    """Predicted ultimate W + E[Y - W | Y > W, x] per open claim.

    Per-claim variance is the variance of the residual distribution (second
    residual moment minus squared mean residual); totals add over claims.
    ``fallback`` decides what happens when W sits beyond the estimated
    support: "zero" books no further growth and flags the claim, "error"
    re-raises.
    """
    if fallback not in ("zero", "error"):
        raise ValidationError(f"unknown fallback policy {fallback!r}")
    rows = []
    for path in portfolio.paths:
        if path.absorbed:
            continue
        cdf = cdfs.get(path.claim_id)
        if cdf is None:
            raise ValidationError(f"no fitted cdf supplied for open claim {path.claim_id}")
        w = path.censor_level
        try:
            m1 = rbns_conditional_moment(cdf, w, 1)
            m2_shift = rbns_conditional_moment(cdf, w, 2)
            resid2 = m2_shift - 2.0 * w * m1
            variance = max(resid2 - m1 * m1, 0.0)
            flagged = False
        except BeyondSupportError:
            if fallback == "error":
                raise
            m1, resid2, variance, flagged = 0.0, 0.0, 0.0, True
        rows.append(ClaimPrediction(path.claim_id, w, m1, w + m1, resid2, variance, flagged))
    total = math.fsum(r.ultimate for r in rows)
    total_var = math.fsum(r.variance for r in rows)
    return RbnsPrediction(tuple(rows), total, total_var)


@dataclass(frozen=True)
class ChainLadderResult:
    """Development factors, completed rectangle, and (optionally) Mack variance."""

    factors: np.ndarray  # (J-1,)
    completed: np.ndarray  # (J, J)
    observed_mask: np.ndarray
    row_ultimates: np.ndarray  # (J,)
    total_ultimate: float
    total_ibnr: float
    sigma2: np.ndarray | None = None  # (J-1,)
    row_process_variance: np.ndarray | None = None
    total_process_variance: float | None = None


def chain_ladder(triangle: Triangle) -> ChainLadderResult:
    """Complete a cumulative triangle with volume-weighted development factors."""
    values, mask = triangle.values, triangle.mask
    dim = triangle.dimension
    if dim < 2:
        raise ValidationError("chain ladder needs at least a 2x2 triangle")
    steps = np.where(mask[:, 1:] & mask[:, :-1], np.diff(values, axis=1), 0.0)
    if np.any(steps < -1e-9):
        raise ValidationError("chain ladder expects a cumulative (row-nondecreasing) triangle")

    factors = np.empty(dim - 1)
    for j in range(dim - 1):
        rows = mask[:, j] & mask[:, j + 1]
        den = values[rows, j].sum()
        if not np.any(rows) or den <= 0:
            raise NumericError(f"development column {j + 1} has zero volume")
        factors[j] = values[rows, j + 1].sum() / den

    completed = np.where(mask, values, 0.0)
    last_obs = np.empty(dim, dtype=int)
    for row in range(dim):
        last_obs[row] = triangle.last_observed_col(row) - 1
        for j in range(last_obs[row], dim - 1):
            completed[row, j + 1] = completed[row, j] * factors[j]
    ultimates = completed[:, dim - 1]
    total_ibnr = math.fsum(ultimates[r] - completed[r, last_obs[r]] for r in range(dim))
    return ChainLadderResult(
        factors=factors,
        completed=completed,
        observed_mask=mask.copy(),
        row_ultimates=ultimates,
        total_ultimate=math.fsum(ultimates),
        total_ibnr=total_ibnr,
    )


def mack_process_variance(triangle: Triangle) -> ChainLadderResult:
    """Chain-ladder completion with distribution-free process variance.

    Column variance parameters come from the weighted squared deviations of
    per-row development ratios around the column factor; columns without a
    second usable row take the standard geometric-decay extrapolation. The
    per-row variance follows the forward recursion
    var <- var * f^2 + C * sigma^2 seeded with zero on the diagonal.
    """
    result = chain_ladder(triangle)
    values, mask = triangle.values, triangle.mask
    dim = triangle.dimension
    if dim < 3:
        raise ValidationError(
            "process variance needs at least 3 accident rows; "
            "use a zero-variance fallback explicitly for smaller triangles"
        )

    factors = result.factors
    sigma2 = np.full(dim - 1, np.nan)
    for j in range(dim - 1):
        rows = mask[:, j] & mask[:, j + 1] & (values[:, j] > 0)
        n_j = int(np.count_nonzero(rows))
        if n_j >= 2:
            ratios = values[rows, j + 1] / values[rows, j]
            sigma2[j] = float(np.sum(values[rows, j] * (ratios - factors[j]) ** 2) / (n_j - 1))
    if np.all(np.isnan(sigma2)):
        raise ValidationError(
            "no development column has two usable rows; "
            "use a zero-variance fallback explicitly for smaller triangles"
        )
    for j in range(dim - 1):
        if np.isnan(sigma2[j]):
            prev = sigma2[j - 1] if j >= 1 and not np.isnan(sigma2[j - 1]) else np.nan
            prev2 = sigma2[j - 2] if j >= 2 and not np.isnan(sigma2[j - 2]) else prev
            if np.isnan(prev):
                raise ValidationError(f"cannot extrapolate variance for column {j + 1}")
            decay = prev * prev / prev2 if prev2 > 0 else 0.0
            sigma2[j] = min(decay, prev2, prev)

    row_var = np.zeros(dim)
    completed = result.completed
    for row in range(dim):
        start = triangle.last_observed_col(row) - 1
        var = 0.0
        for j in range(start, dim - 1):
            var = var * factors[j] ** 2 + completed[row, j] * sigma2[j]
        row_var[row] = var
    return ChainLadderResult(
        factors=factors,
        completed=completed,
        observed_mask=result.observed_mask,
        row_ultimates=result.row_ultimates,
        total_ultimate=result.total_ultimate,
        total_ibnr=result.total_ibnr,
        sigma2=sigma2,
        row_process_variance=row_var,
        total_process_variance=float(math.fsum(row_var)),
    )


@dataclass(frozen=True)
class IbnrModel:
    """Compound model for not-yet-reported claims."""

    n_ibnr: float
    var_n_ibnr: float
    severity_mean: float
    severity_second_moment: float
    total: float
    variance: float

    @staticmethod
    def zero() -> "IbnrModel":
        return IbnrModel(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def compound_ibnr(n_ibnr: float, var_n_ibnr: float, severity_mean: float,
                  severity_second_moment: float) -> IbnrModel:
    """Mean and variance of a random-count sum of i.i.d. severities."""
    sev_var = max(severity_second_moment - severity_mean ** 2, 0.0)
    total = n_ibnr * severity_mean
    variance = n_ibnr * sev_var + severity_mean ** 2 * var_n_ibnr
    return IbnrModel(n_ibnr, var_n_ibnr, severity_mean, severity_second_moment, total, variance)


def predict_ibnr(count_triangle: Triangle, portfolio: Portfolio,
                 count_variance: str = "mack") -> IbnrModel:
    """IBNR total from chain-ladder counts and unconditional severity moments.

    Severity deliberately ignores covariates: future exposures by feature
    are unknown at evaluation. ``count_variance`` is "mack" or "zero" (for
    triangles too small to estimate variance parameters).
    """
    if count_variance not in ("mack", "zero"):
        raise ValidationError(f"unknown count variance mode {count_variance!r}")
    cdf = fit_conditional_cdf(portfolio, features=())
    sev_mean = tail_integral(cdf, 0.0, 1)
    sev_second = tail_integral(cdf, 0.0, 2)
    cumulative = count_triangle.row_cumulative()
    n_hat = chain_ladder(cumulative).total_ibnr
    if count_variance == "mack":
        var_n = mack_process_variance(cumulative).total_process_variance
    else:
        var_n = 0.0
    return compound_ibnr(n_hat, var_n, sev_mean, sev_second)


@dataclass(frozen=True)
class ReserveReport:
    """Totals of the prediction: settled, open, unreported, reserve, spread."""

    y_closed: float
    y_rbns: float
    y_ibnr: float
    y_total: float
    reserve: float
    sd_y_total: float
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "y_closed": self.y_closed,
                "y_rbns": self.y_rbns,
                "y_ibnr": self.y_ibnr,
                "y_total": self.y_total,
                "reserve": self.reserve,
                "sd_y_total": self.sd_y_total,
                "metadata": self.metadata,
            },
            indent=2,
            sort_keys=True,
        )

    def to_text(self) -> str:
        lines = [
            f"settled to date      {self.y_closed:>16.6f}",
            f"open (RBNS) predicted{self.y_rbns:>16.6f}",
            f"unreported (IBNR)    {self.y_ibnr:>16.6f}",
            f"ultimate total       {self.y_total:>16.6f}",
            f"reserve              {self.reserve:>16.6f}",
            f"sd of total          {self.sd_y_total:>16.6f}",
        ]
        if self.metadata:
            lines.append("model                " + json.dumps(self.metadata, sort_keys=True))
        return "\n".join(lines)


def assemble_report(portfolio: Portfolio, rbns: RbnsPrediction,
                    ibnr: IbnrModel | None = None, metadata: dict | None = None) -> ReserveReport:
    """Combine the prediction blocks into totals and the reserve."""
    ibnr = ibnr or IbnrModel.zero()
    y_closed = math.fsum(p.absorption_size for p in portfolio.paths if p.absorbed)
    y_total = y_closed + rbns.total_ultimate + ibnr.total
    reserve = y_total - paid_to_date(portfolio)
    sd = math.sqrt(rbns.total_variance + ibnr.variance)
    return ReserveReport(
        y_closed=y_closed,
        y_rbns=rbns.total_ultimate,
        y_ibnr=ibnr.total,
        y_total=y_total,
        reserve=reserve,
        sd_y_total=sd,
        metadata=metadata or {},
    )
