"""Green QoE model: bitrate -> MOS, normalized utility, utility loss, thresholds.

A user with greenness factor ``gamma`` is fully satisfied at ``x_max / gamma``,
so the MOS curve reaches 5 earlier. All logs are natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BitrateBounds",
    "DEFAULT_BOUNDS",
    "UserProfile",
    "qoe_score",
    "utility",
    "delta_utility",
    "min_incentive",
    "flexibility",
    "log_span",
]


@dataclass(frozen=True)
class BitrateBounds:
    """Bitrate range (kbps) over which the MOS mapping is defined."""

    x_min: float = 300.0
    x_max: float = 5000.0

    def __post_init__(self):
        if not (0 < self.x_min < self.x_max) or not math.isfinite(self.x_max):
            raise ValueError(
                f"need 0 < x_min < x_max, got x_min={self.x_min}, x_max={self.x_max}"
            )

    @property
    def gamma_limit(self) -> float:
        """Supremum of admissible greenness factors, ``x_max / x_min``."""
        return self.x_max / self.x_min


DEFAULT_BOUNDS = BitrateBounds()


def log_span(gamma, bounds: BitrateBounds = DEFAULT_BOUNDS):
    """``log(x_max) - log(gamma * x_min)``; the shared MOS denominator.

    Raises ValueError if it is not strictly positive.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("gamma must be finite and positive")
    span = math.log(bounds.x_max) - np.log(g * bounds.x_min)
    if np.any(span <= 0):
        raise ValueError(
            f"gamma * x_min must stay below x_max (gamma < {bounds.gamma_limit:g})"
        )
    return span if span.ndim else float(span)


def _check_bitrate(x, bounds: BitrateBounds):
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < bounds.x_min) or np.any(xa > bounds.x_max):
        raise ValueError(f"bitrate outside [{bounds.x_min:g}, {bounds.x_max:g}]: {x!r}")
    return xa


def _unclipped_mos(x, gamma, bounds):
    return 1.0 + 4.0 * (np.log(x) - math.log(bounds.x_min)) / log_span(gamma, bounds)


def qoe_score(x, gamma=1.0, bounds: BitrateBounds = DEFAULT_BOUNDS, clip: bool = True):
    """MOS in [1, 5] for bitrate ``x`` (kbps).

    ``clip=False`` returns the raw logarithmic curve, which exceeds 5 for
    ``gamma > 1`` near ``x_max``.
    """
    xa = _check_bitrate(x, bounds)
    mos = _unclipped_mos(xa, gamma, bounds)
    if clip:
        mos = np.clip(mos, 1.0, 5.0)
    return mos if np.ndim(mos) else float(mos)


def utility(x, gamma=1.0, bounds: BitrateBounds = DEFAULT_BOUNDS):
    """Normalized utility MOS/5, clipped to [0, 1]."""
    u = np.clip(np.asarray(qoe_score(x, gamma, bounds), dtype=float) / 5.0, 0.0, 1.0)
    return u if u.ndim else float(u)


def _delta_utility_raw(x_high, x_low, gamma, bounds):
    # closed form; no clipping of the underlying utilities
    return 4.0 * (np.log(x_high) - np.log(x_low)) / (5.0 * log_span(gamma, bounds))


@dataclass(frozen=True)
class UserProfile:
    """One user's parameters.

    ``savings`` is normally non-negative; a negative value is a disutility and
    only arises when a target threshold is imposed by back-solving savings.
    """

    id: int
    x_high: float
    x_low: float
    gamma: float = 1.0
    delta: float = 1.0
    beta: float = 1.0
    savings: float = 0.0

    def violations(self, bounds: BitrateBounds = DEFAULT_BOUNDS) -> list[str]:
        errs = []
        if not (bounds.x_min <= self.x_low < self.x_high <= bounds.x_max):
            errs.append(
                f"need x_min <= x_low < x_high <= x_max, got x_low={self.x_low}, x_high={self.x_high}"
            )
        if not (math.isfinite(self.gamma) and self.gamma >= 1.0):
            errs.append(f"gamma must be >= 1, got {self.gamma}")
        elif not self.gamma * bounds.x_min < bounds.x_max:
            errs.append(f"gamma * x_min must be < x_max, got gamma={self.gamma}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            errs.append(f"delta must be > 0, got {self.delta}")
        if not (0.0 <= self.beta <= 1.0):
            errs.append(f"beta must lie in [0, 1], got {self.beta}")
        if not math.isfinite(self.savings):
            errs.append(f"savings must be finite, got {self.savings}")
        return errs

    def validate(self, bounds: BitrateBounds = DEFAULT_BOUNDS) -> "UserProfile":
        errs = self.violations(bounds)
        if errs:
            raise ValueError(f"user {self.id}: " + "; ".join(errs))
        return self

    @property
    def flexibility(self) -> float:
        return self.x_high - self.x_low

    def delta_utility(self, bounds: BitrateBounds = DEFAULT_BOUNDS) -> float:
        return delta_utility(self, bounds)

    def r_min(self, bounds: BitrateBounds = DEFAULT_BOUNDS) -> float:
        return min_incentive(self, bounds)


def delta_utility(profile: UserProfile, bounds: BitrateBounds = DEFAULT_BOUNDS) -> float:
    """Normalized utility loss of moving from ``x_high`` to ``x_low``.

    Uses the unclipped closed form, so it stays consistent with the inverse
    solves in :mod:`greenstream.education` even where U itself saturates.
    """
    profile.validate(bounds)
    return float(_delta_utility_raw(profile.x_high, profile.x_low, profile.gamma, bounds))


def min_incentive(profile: UserProfile, bounds: BitrateBounds = DEFAULT_BOUNDS) -> float:
    """Smallest offer that covers the net benefit loss: ``max(dU - s, 0)``."""
    return max(delta_utility(profile, bounds) - profile.savings, 0.0)


def flexibility(profile: UserProfile) -> float:
    """Bitrate reduction (kbps) delivered if the user switches down."""
    return profile.x_high - profile.x_low
