"""Kernel families, bandwidth schedules, and local weights for conditioning.

Continuous families live on [-1, 1] and integrate to one; the "exact"
family matches discrete covariates coordinate-by-coordinate, which turns
every downstream estimator into its unconditional version on the matching
subsample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoLocalDataError, ValidationError

FAMILIES = ("uniform", "epanechnikov", "triangular", "exact")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}, pick one of {FAMILIES}")

    @property
    def is_exact(self) -> bool:
        return self.family == "exact"

    def base(self, u: np.ndarray) -> np.ndarray:
        """Kernel values at standardized offsets."""
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        if self.family == "uniform":
            return np.where(inside, 0.5, 0.0)
        if self.family == "epanechnikov":
            return np.where(inside, 0.75 * (1.0 - u * u), 0.0)
        if self.family == "triangular":
            return np.where(inside, 1.0 - np.abs(u), 0.0)
        raise ValidationError("exact kernels have no base function")


def default_bandwidth(n, d: int, eta: float = 0.75, per_dim_scale=1.0) -> np.ndarray:
    """Per-dimension bandwidth a = scale * (log n / n^(1 - eta))^(1/d).

    The schedule keeps n * a^d growing like n^eta * log n, so weights stay
    local while the effective sample size diverges.
    """
    if n < 2:
        raise ValidationError(f"bandwidth schedule needs n >= 2, got {n}")
    if not 0.0 < eta < 1.0:
        raise ValidationError(f"eta must lie in (0, 1), got {eta}")
    if d < 1:
        raise ValidationError(f"bandwidth needs at least one dimension, got {d}")
    scale = np.broadcast_to(np.asarray(per_dim_scale, dtype=float), (d,)).copy()
    if np.any(scale <= 0):
        raise ValidationError("per-dimension scales must be strictly positive")
    base = (np.log(n) / n ** (1.0 - eta)) ** (1.0 / d)
    return scale * base


def bandwidth_for_sample(sample: np.ndarray, eta: float = 0.75) -> np.ndarray:
    """Default data-driven bandwidth: coordinate standard deviations as scales.

    Constant coordinates fall back to scale one (the schedule still shrinks
    with n).
    """
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    n, d = sample.shape
    scale = sample.std(axis=0)
    scale[scale <= 0] = 1.0
    return default_bandwidth(n, d, eta=eta, per_dim_scale=scale)


def _check_dims(x: np.ndarray, sample: np.ndarray, bandwidth) -> np.ndarray:
    if sample.ndim != 2:
        raise ValidationError("sample must be a 2-d array of covariate rows")
    if x.shape[0] != sample.shape[1]:
        raise ValidationError(f"covariate point has {x.shape[0]} dims, sample has {sample.shape[1]}")
    if bandwidth is None:
        return None
    bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (x.shape[0],))
    if np.any(bw <= 0):
        raise ValidationError("bandwidth entries must be strictly positive")
    return bw


def kernel_weight(spec: KernelSpec, x, xi, bandwidth=None) -> float:
    """Product kernel weight of one observation; exact kernels ignore bandwidth."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if x.shape != xi.shape:
        raise ValidationError(f"dimension mismatch: point {x.shape} vs observation {xi.shape}")
    if x.size == 0:
        return 1.0
    if spec.is_exact:
        return float(np.all(x == xi))
    if bandwidth is None:
        raise ValidationError(f"{spec.family} kernel needs a bandwidth")
    bw = _check_dims(x, xi.reshape(1, -1), bandwidth)
    return float(np.prod(spec.base((x - xi) / bw) / bw))


def _raw_weights(spec: KernelSpec, x, sample: np.ndarray, bandwidth=None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sample = np.asarray(sample, dtype=float)
    if sample.ndim == 1:
        sample = sample.reshape(-1, 1)
    if x.size == 0:
        return np.ones(sample.shape[0])
    if spec.is_exact:
        _check_dims(x, sample, None)
        return np.all(sample == x, axis=1).astype(float)
    if bandwidth is None:
        raise ValidationError(f"{spec.family} kernel needs a bandwidth")
    bw = _check_dims(x, sample, bandwidth)
    return np.prod(spec.base((x - sample) / bw) / bw, axis=1)


def density_estimate(spec: KernelSpec, x, sample, bandwidth=None) -> float:
    """Kernel density of the covariate distribution at x (sample mean of weights)."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise ValidationError("density estimate needs a nonempty sample")
    return float(np.mean(_raw_weights(spec, x, sample, bandwidth)))


def nw_weights(spec: KernelSpec, x, sample, bandwidth=None) -> np.ndarray:
    """Normalized local weights w_i >= 0 with sum 1; the conditioning backbone.

    Raises NoLocalDataError when no observation carries positive kernel
    mass at x.
    """
    raw = _raw_weights(spec, x, np.asarray(sample, dtype=float), bandwidth)
    total = raw.sum()
    if total <= 0.0:
        raise NoLocalDataError(np.atleast_1d(np.asarray(x, dtype=float)))
    return raw / total
