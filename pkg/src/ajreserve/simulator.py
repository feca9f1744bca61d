"""Jump-path simulation on the claim-size clock and scenario generators.

Paths are sampled state by state with piecewise-exponential competing
risks. Scenario "alpha" draws every accident period from the same base
intensities; "beta" divides all intensities by an accident-period effect
10 + k - U, so earlier periods grow larger claims. Censor levels are drawn
independently per claim (uniform below the 95th percentile of that claim's
true size distribution by default), which yields a mix of settled and open
paths while keeping censoring conditionally independent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .estimator import CumulativeHazard
from .paths import ClaimPath, JumpEvent, Portfolio
from .records import ClaimRecord, StateSpace


@dataclass(frozen=True)
class IntensityModel:
    """Piecewise-constant transition intensities by elapsed size in the state.

    ``cuts`` holds the left edges of the duration pieces (first entry 0);
    piece m applies on [cuts[m], cuts[m+1]) and the last piece extends to
    infinity. A single piece makes the model Markov on the size clock.
    """

    cuts: np.ndarray  # (M,)
    rates: np.ndarray  # (M, k, k) off-diagonal rates; diagonal and absorbing row zero

    def __post_init__(self):
        cuts = np.asarray(self.cuts, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "cuts", cuts)
        object.__setattr__(self, "rates", rates)
        if cuts.ndim != 1 or cuts.size == 0 or cuts[0] != 0.0:
            raise ValidationError("duration cuts must start at 0")
        if cuts.size > 1 and np.any(np.diff(cuts) <= 0):
            raise ValidationError("duration cuts must be strictly increasing")
        if rates.ndim != 3 or rates.shape[0] != cuts.size or rates.shape[1] != rates.shape[2]:
            raise ValidationError("rates must have shape (len(cuts), k, k)")
        if np.any(rates < 0):
            raise ValidationError("intensities must be nonnegative")
        k = rates.shape[1]
        if np.any(rates[:, k - 1, :] != 0):
            raise ValidationError("the absorbing state admits no outgoing intensity")
        if np.any(rates[:, np.arange(k), np.arange(k)] != 0):
            raise ValidationError("diagonal intensities must be zero")

    @property
    def k(self) -> int:
        return self.rates.shape[1]

    @property
    def is_markov(self) -> bool:
        return self.cuts.size == 1

    def cumulative_between(self, a: float, b: float) -> np.ndarray:
        """Integral of the rate matrix over durations [a, b]."""
        if b < a:
            raise ValidationError("need a <= b")
        edges = np.concatenate((self.cuts, [np.inf]))
        out = np.zeros((self.k, self.k))
        for m in range(self.cuts.size):
            lo, hi = max(a, edges[m]), min(b, edges[m + 1])
            if hi > lo:
                out += self.rates[m] * (hi - lo)
        return out


def intensities_from_hazard(hazard: CumulativeHazard) -> IntensityModel:
    """Piecewise rates whose integral over each inter-event gap reproduces
    the hazard increments; zero beyond the last event size.

    Zero-length gaps (an increment at size 0) are merged into the following
    piece with a warning.
    """
    k = hazard.k
    sizes = np.asarray(hazard.sizes, dtype=float)
    inc = np.array(hazard.increments, copy=True)
    if inc.size:
        diag = np.arange(k)
        inc[:, diag, diag] = 0.0
    edges = [0.0]
    rate_list = []
    carry = np.zeros((k, k))
    prev = 0.0
    for e in range(sizes.size):
        gap = sizes[e] - prev
        if gap <= 0:
            warnings.warn(f"zero-length gap at size {sizes[e]}: merging increments forward")
            carry = carry + inc[e]
            continue
        rate_list.append((carry + inc[e]) / gap)
        edges.append(sizes[e])
        carry = np.zeros((k, k))
        prev = sizes[e]
    if np.any(carry != 0):
        raise ValidationError("trailing hazard increment with zero gap cannot become a rate")
    rate_list.append(np.zeros((k, k)))
    return IntensityModel(np.array(edges[: len(rate_list)]), np.array(rate_list))


def default_intensity_model(k: int) -> IntensityModel:
    """Shipped ground-truth family: Markov rates on the size clock.

    Forward development runs at unit rate; closure accelerates with the
    state index (0.4 + 0.6 per step), so deep developments settle fast and
    the total-size distribution keeps a light tail.
    """
    if k < 3:
        raise ValidationError(f"need k >= 3, got {k}")
    rates = np.zeros((1, k, k))
    for j in range(1, k):
        if j + 1 <= k - 1:
            rates[0, j - 1, j] = 1.0
        rates[0, j - 1, k - 1] = 0.4 + 0.6 * (j - 1)
    return IntensityModel(np.array([0.0]), rates)


_TRUTH_CACHE: dict = {}


@dataclass(frozen=True)
class TrueSeverity:
    """Numerically integrated true size distribution of a Markov model."""

    grid: np.ndarray
    cdf: np.ndarray

    def cdf_at(self, z):
        z = np.asarray(z, dtype=float)
        out = np.interp(z, self.grid, self.cdf, left=0.0, right=float(self.cdf[-1]))
        return out if z.ndim else float(out)

    def quantile(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise ValidationError("quantile level must lie in (0, 1)")
        if q > self.cdf[-1]:
            raise ValidationError(f"quantile {q} beyond integrated horizon {self.cdf[-1]}")
        return float(self.grid[int(np.searchsorted(self.cdf, q))])


def _generator_matrix(model: IntensityModel, effect_divisor: float) -> np.ndarray:
    q = model.rates[0] / effect_divisor
    q = q - np.diag(q.sum(axis=1))
    return q


def _integrate_cdf(q: np.ndarray, k: int, zmax: float, n_steps: int) -> TrueSeverity:
    h = zmax / n_steps
    qh = q * h
    factor = np.eye(k) + qh + qh @ qh / 2.0
    grid = np.empty(n_steps + 1)
    cdf = np.empty(n_steps + 1)
    p = np.zeros(k)
    p[0] = 1.0
    grid[0], cdf[0] = 0.0, 0.0
    for i in range(1, n_steps + 1):
        p = p @ factor
        grid[i] = i * h
        cdf[i] = p[k - 1]
    return TrueSeverity(grid, cdf)


def true_severity(model: IntensityModel, effect_divisor: float = 1.0,
                  n_steps: int = 32768) -> TrueSeverity:
    """True claim-size CDF by high-resolution product integration.

    Only defined for Markov (single duration piece) models, where the size
    clock itself is Markov and the occupation vector evolves by constant
    generator factors.
    """
    if not model.is_markov:
        raise ValidationError("true severity oracle requires a Markov intensity model")
    key = (model.rates.tobytes(), float(effect_divisor), n_steps)
    hit = _TRUTH_CACHE.get(key)
    if hit is not None:
        return hit
    k = model.k
    q = _generator_matrix(model, effect_divisor)
    total_exit = -np.diag(q)[: k - 1]
    if np.any(total_exit <= 0):
        raise ValidationError("every transient state needs positive total intensity")
    zmax = 3.0 * (1.0 / total_exit).sum()
    for _ in range(60):
        coarse = _integrate_cdf(q, k, zmax, 4096)
        if coarse.cdf[-1] >= 1.0 - 1e-6:
            break
        zmax *= 2.0
    else:
        raise NumericError("true severity failed to reach the 1 - 1e-6 horizon")
    result = _integrate_cdf(q, k, zmax, n_steps)
    _TRUTH_CACHE[key] = result
    return result


def _pick_destination(rate_row: np.ndarray, rng) -> int:
    total = rate_row.sum()
    v = rng.random() * total
    acc = 0.0
    for h in range(rate_row.size):
        acc += rate_row[h]
        if v < acc:
            return h + 1
    return int(np.flatnonzero(rate_row)[-1]) + 1  # guard against float dust


def _sample_sojourn(model: IntensityModel, state: int, rng, effect_divisor: float):
    """Duration and destination of the next jump out of ``state``; None if never."""
    cuts, rates = model.cuts, model.rates
    n_pieces = cuts.size
    row = rates[:, state - 1, :]
    draw = rng.exponential()
    for m in range(n_pieces):
        total = row[m].sum() / effect_divisor
        length = cuts[m + 1] - cuts[m] if m + 1 < n_pieces else math.inf
        if total > 0:
            capacity = total * length
            if draw <= capacity:
                duration = cuts[m] + draw / total
                return duration, _pick_destination(row[m], rng)
            draw -= capacity
    return None


def simulate_path(model: IntensityModel, rng, censor_level: float = math.inf,
                  effect_divisor: float = 1.0, start_state: int = 1,
                  claim_id: str = "sim", covariates: tuple = ()) -> ClaimPath:
    """Sample one forward path from size zero until absorption or censoring.

    Subjects start in state 1 (other transient starts are allowed for
    experiments, the absorbing state is rejected). With an infinite censor
    level the model must absorb almost surely, otherwise a transient state
    that runs out of hazard raises NumericError.
    """
    k = model.k
    if not 1 <= start_state < k:
        raise ValidationError(f"start state must be transient (1..{k - 1}), got {start_state}")
    if effect_divisor <= 0:
        raise ValidationError("effect divisor must be positive")
    events = []
    state = start_state
    position = 0.0
    while state != k:
        sojourn = _sample_sojourn(model, state, rng, effect_divisor)
        if sojourn is None:
            if math.isfinite(censor_level):
                return ClaimPath(claim_id, covariates, start_state, tuple(events),
                                 censor_level, False)
            raise NumericError(
                f"state {state} exhausts its hazard with no censoring bound "
                "(non-terminating state)"
            )
        duration, destination = sojourn
        next_position = position + duration
        if next_position > censor_level:
            return ClaimPath(claim_id, covariates, start_state, tuple(events),
                             censor_level, False)
        events.append(JumpEvent(next_position, state, destination))
        position = next_position
        state = destination
    return ClaimPath(claim_id, covariates, start_state, tuple(events), position, True)


def truncate_path(path: ClaimPath, censor_level: float) -> ClaimPath:
    """Censored view of a path: events above the level (and any closure) drop."""
    if path.absorbed and path.absorption_size <= censor_level:
        return path
    kept = tuple(
        ev for ev in path.events
        if ev.size <= censor_level and not (path.absorbed and ev is path.events[-1])
    )
    return ClaimPath(path.claim_id, path.covariates, path.start_state, kept,
                     censor_level, False)


VOLUME_PRESETS = ("flat", "decrement", "formula")


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario recipe: state space size, effects, volumes, censoring, seed."""

    k: int
    scenario: str = "alpha"  # "alpha" | "beta"
    seed: int = 0
    replications: int = 1
    censoring: str = "uniform"  # "uniform" | "none"
    censor_quantile: float = 0.95
    volume_preset: str | None = None  # default: flat for alpha, decrement for beta
    volumes: tuple[int, ...] | None = None
    claim_type: int = 1
    model: IntensityModel | None = None

    def __post_init__(self):
        if self.k < 3:
            raise ValidationError("scenario needs k >= 3")
        if self.scenario not in ("alpha", "beta"):
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if self.censoring not in ("uniform", "none"):
            raise ValidationError(f"unknown censoring rule {self.censoring!r}")
        if not 0.0 < self.censor_quantile < 1.0:
            raise ValidationError("censor quantile must lie in (0, 1)")
        if self.replications < 1:
            raise ValidationError("need at least one replication")
        if self.volume_preset is not None and self.volume_preset not in VOLUME_PRESETS:
            raise ValidationError(f"unknown volume preset {self.volume_preset!r}")
        if self.volumes is not None and (len(self.volumes) != self.k - 1
                                         or any(v <= 0 for v in self.volumes)):
            raise ValidationError("volumes must list one positive count per accident period")

    def effect(self, accident_period: int) -> float:
        if self.scenario == "beta":
            return float(10 + self.k - accident_period)
        return 1.0

    def resolved_model(self) -> IntensityModel:
        return self.model if self.model is not None else default_intensity_model(self.k)

    def resolved_volumes(self) -> tuple[int, ...]:
        """Per-period claim counts.

        Presets: "flat" repeats 1200; "decrement" drops 100 per later period
        (the narrative schedule); "formula" keeps 1200 then 1100 everywhere,
        which realizes the alternative total 1200(k-1) - 100(k-2). Default
        is flat for alpha and decrement for beta.
        """
        if self.volumes is not None:
            return self.volumes
        preset = self.volume_preset or ("flat" if self.scenario == "alpha" else "decrement")
        periods = range(1, self.k)
        if preset == "flat":
            counts = [1200 for _ in periods]
        elif preset == "decrement":
            counts = [1200 - 100 * (u - 1) for u in periods]
        else:
            counts = [1200 if u == 1 else 1100 for u in periods]
        if any(c <= 0 for c in counts):
            raise ValidationError(f"volume preset {preset!r} underflows for k={self.k}")
        return tuple(counts)


def generate_scenario(config: ScenarioConfig, replication: int = 0):
    """Simulate one scenario dataset with retained ground truth.

    Returns (portfolio, truth) where truth maps claim id to the true
    ultimate size, including claims that the censoring cut left open.
    Claim-level rng streams derive from (seed, replication, claim index),
    so identical configs reproduce identical portfolios and replications
    are independent. Per claim, the censor level is drawn before the path.
    """
    model = config.resolved_model()
    if model.k != config.k:
        raise ValidationError("intensity model dimension differs from scenario k")
    volumes = config.resolved_volumes()
    caps = {}
    if config.censoring == "uniform":
        for u in range(1, config.k):
            caps[u] = true_severity(model, config.effect(u)).quantile(config.censor_quantile)

    paths = []
    truth = {}
    index = 0
    for u in range(1, config.k):
        effect = config.effect(u)
        for i in range(volumes[u - 1]):
            rng = np.random.default_rng(np.random.SeedSequence((config.seed, replication, index)))
            index += 1
            level = rng.uniform(0.0, caps[u]) if config.censoring == "uniform" else math.inf
            claim_id = f"c{u:02d}-{i:05d}"
            covariates = (float(config.claim_type), float(u))
            full = simulate_path(model, rng, censor_level=math.inf, effect_divisor=effect,
                                 claim_id=claim_id, covariates=covariates)
            truth[claim_id] = full.absorption_size
            paths.append(full if full.absorption_size <= level else truncate_path(full, level))
    portfolio = Portfolio(tuple(paths), StateSpace(config.k))
    return portfolio, truth


def portfolio_to_records(portfolio: Portfolio, months_per_period: int = 12) -> list[ClaimRecord]:
    """Export simulated paths to the payment-record schema.

    Simulated claims report in their accident period, so the reporting
    delay is 1 everywhere and the reporting triangle carries no unreported
    tail. Zero-paid claims emit a single zero row so they stay visible to
    the count triangle.
    """
    records = []
    for path in portfolio.paths:
        claim_type = int(path.covariates[0])
        accident = int(path.covariates[1])
        increments: list[tuple[int, float]] = []
        prev = 0.0
        for ev in path.events:
            increments.append((ev.source, ev.size - prev))
            prev = ev.size
        if not path.absorbed and path.censor_level > prev:
            state = path.events[-1].target if path.events else path.start_state
            increments.append((state, path.censor_level - prev))
        if not increments:
            increments.append((path.start_state, 0.0))
        for bucket, amount in increments:
            records.append(
                ClaimRecord(
                    claim_id=path.claim_id,
                    claim_type=claim_type,
                    accident_period=accident,
                    reporting_delay=1,
                    development_period=bucket,
                    incremental_paid=amount,
                    settled=path.absorbed,
                )
            )
    return records
