"""Altruistic users: private utility mixed with the population's mean utility."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .population import Population
from .qoe import DEFAULT_BOUNDS, BitrateBounds, UserProfile, _check_bitrate, _unclipped_mos

__all__ = [
    "social_wellbeing",
    "altruistic_min_incentive",
    "two_group_min_incentive",
    "beta_response_curve",
    "BetaPoint",
    "mean_threshold_surface",
]


def social_wellbeing(profiles, x, bounds: BitrateBounds | None = None) -> float:
    """Mean clipped utility of all users at bitrate ``x``.

    ``x`` is either one common bitrate or one bitrate per user.
    """
    pop = Population.from_profiles(profiles, **({} if bounds is None else {"bounds": bounds}))
    if len(pop) == 0:
        raise ValueError("social wellbeing of an empty population is undefined")
    bounds = bounds or pop.bounds
    xs = _check_bitrate(np.broadcast_to(np.asarray(x, dtype=float), pop.gamma.shape), bounds)
    u = np.clip(_unclipped_mos(xs, pop.gamma, bounds) / 5.0, 0.0, 1.0)
    return float(u.mean())


def _raw_utility(x, gamma, bounds):
    # unclipped U; differences of these reproduce the closed-form dU exactly
    return _unclipped_mos(np.asarray(x, dtype=float), gamma, bounds) / 5.0


def _composite_gap(beta, profile: UserProfile, pop: Population, bounds):
    own = _raw_utility(profile.x_high, profile.gamma, bounds) - _raw_utility(profile.x_low, profile.gamma, bounds)
    sw_high = _raw_utility(pop.x_high, pop.gamma, bounds).mean()
    sw_low = _raw_utility(pop.x_low, pop.gamma, bounds).mean()
    return beta * own + (1.0 - beta) * (sw_high - sw_low)


def altruistic_min_incentive(profile: UserProfile, profiles, bounds: BitrateBounds = DEFAULT_BOUNDS,
                             beta: float | None = None) -> float:
    """Threshold of a user whose utility is ``beta * U_n + (1 - beta) * SW``.

    The composite utility gap between the user's high and low bitrate is
    computed directly (SW evaluated with every user at high, then at low
    bitrate), then savings are subtracted and the result clamped at zero.
    ``profiles`` should contain ``profile`` itself. ``beta`` overrides the
    profile's own weight.
    """
    profile.validate(bounds)
    pop = Population.from_profiles(profiles, bounds=bounds)
    if len(pop) == 0:
        raise ValueError("empty population")
    b = profile.beta if beta is None else beta
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {b}")
    gap = _composite_gap(b, profile, pop, bounds)
    return max(float(gap) - profile.savings, 0.0)


def two_group_min_incentive(member_of: str, beta: float, delta_u_l: float, delta_u_m: float,
                            sizes: tuple[int, int, int]) -> float:
    """Altruistic threshold when users form two homogeneous groups L and M."""
    n_l, n_m, n = sizes
    if n_l < 0 or n_m < 0 or n_l + n_m != n or n == 0:
        raise ValueError(f"inconsistent group sizes L={n_l}, M={n_m}, N={n}")
    if delta_u_l < 0 or delta_u_m < 0:
        raise ValueError("utility losses must be >= 0")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    w_l = (1.0 - beta) * n_l / n
    w_m = (1.0 - beta) * n_m / n
    if member_of == "L":
        return (beta + w_l) * delta_u_l + w_m * delta_u_m
    if member_of == "M":
        return w_l * delta_u_l + (beta + w_m) * delta_u_m
    raise ValueError(f"member_of must be 'L' or 'M', got {member_of!r}")


@dataclass(frozen=True)
class BetaPoint:
    beta: float
    r_beta_min: float
    slope_sign: int
    is_min: bool


def beta_response_curve(profile: UserProfile, profiles, beta_grid,
                        bounds: BitrateBounds = DEFAULT_BOUNDS) -> list[BetaPoint]:
    pop = Population.from_profiles(profiles, bounds=bounds)
    grid = [float(b) for b in beta_grid]
    if not grid or any(not 0.0 <= b <= 1.0 for b in grid):
        raise ValueError("beta_grid must be a non-empty subset of [0, 1]")
    slope = profile.delta_utility(bounds) - float(pop.delta_utility.mean())
    sign = 0 if math.isclose(slope, 0.0, abs_tol=1e-15) else int(np.sign(slope))
    vals = [altruistic_min_incentive(profile, pop, bounds, beta=b) for b in grid]
    best = min(range(len(grid)), key=lambda i: (vals[i], i))
    return [BetaPoint(b, v, sign, i == best) for i, (b, v) in enumerate(zip(grid, vals))]


def mean_threshold_surface(profiles, beta_grid, gamma_grid, bounds: BitrateBounds = DEFAULT_BOUNDS):
    """Population-mean altruistic threshold when every user shares (beta, gamma).

    Bitrates and savings stay as sampled. Returns an array of shape
    ``(len(beta_grid), len(gamma_grid))``.
    """
    pop = Population.from_profiles(profiles, bounds=bounds)
    out = np.empty((len(beta_grid), len(gamma_grid)))
    for j, g in enumerate(gamma_grid):
        du = Population.with_columns(pop, gamma=np.full(len(pop), float(g))).delta_utility
        mean_du = du.mean()
        for i, b in enumerate(beta_grid):
            r = np.maximum(b * du + (1.0 - b) * mean_du - pop.savings, 0.0)
            out[i, j] = r.mean()
    return out
