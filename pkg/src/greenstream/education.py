"""Education levers: what it takes to bring a user's threshold down to a target.

Each solver inverts the utility-loss formula for one quantity (the low
bitrate, the greenness factor or the savings) and reports infeasible answers
with a flag instead of clamping them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .policy import SweepTable, sweep_distribution
from .population import DistributionSpec, Population
from .qoe import DEFAULT_BOUNDS, BitrateBounds, _delta_utility_raw, log_span
from .rng import stream

__all__ = [
    "InfeasibleTargetError",
    "BitrateSolution",
    "GammaSolution",
    "bitrate_for_target",
    "gamma_for_target",
    "savings_for_target",
    "EducationResult",
    "education_experiment",
    "LEVERS",
]

NEAR_LIMIT = 0.01


class InfeasibleTargetError(ValueError):
    pass


class BitrateSolution(NamedTuple):
    x_low: float
    in_range: bool


class GammaSolution(NamedTuple):
    gamma: float
    feasible: bool
    near_limit: bool


def bitrate_for_target(x_high, gamma, savings, r_target, bounds: BitrateBounds = DEFAULT_BOUNDS) -> BitrateSolution:
    """Low bitrate at which the user's threshold equals ``r_target``.

    ``in_range`` is False when the answer falls below ``x_min``.
    """
    if r_target < 0:
        raise ValueError(f"r_target must be >= 0, got {r_target}")
    if not bounds.x_min <= x_high <= bounds.x_max:
        raise ValueError(f"x_high={x_high} outside [{bounds.x_min:g}, {bounds.x_max:g}]")
    span = log_span(gamma, bounds)
    x_low = x_high * math.exp(-1.25 * span * (r_target + savings))
    return BitrateSolution(x_low, bool(bounds.x_min <= x_low <= x_high))


def gamma_for_target(x_high, x_low, savings, r_target, bounds: BitrateBounds = DEFAULT_BOUNDS) -> GammaSolution:
    total = r_target + savings
    if not total > 0:
        raise InfeasibleTargetError(
            f"r_target + savings must be > 0 (got {total}); no greenness factor reaches it"
        )
    if not 0 < x_low < x_high:
        raise ValueError(f"need 0 < x_low < x_high, got {x_low}, {x_high}")
    gamma = bounds.x_max / (bounds.x_min * math.exp(4.0 * math.log(x_high / x_low) / (5.0 * total)))
    feasible = gamma >= 1.0 and gamma * bounds.x_min < bounds.x_max
    near = feasible and (1.0 - gamma / bounds.gamma_limit) < NEAR_LIMIT
    return GammaSolution(gamma, feasible, near)


def savings_for_target(x_high, x_low, gamma, r_target, bounds: BitrateBounds = DEFAULT_BOUNDS) -> float:
    # negative means the target is already met without any savings
    return float(_delta_utility_raw(x_high, x_low, gamma, bounds)) - r_target


LEVERS = ("gamma", "savings", "bitrate")


@dataclass
class EducationResult:
    baseline: SweepTable
    educated: SweepTable
    lever: str
    n_fallback: tuple[int, int]

    @property
    def argmax_shift(self) -> float:
        """Offer-level difference (educated minus baseline) of the two optima."""
        return _argmax_level(self.educated) - _argmax_level(self.baseline)

    def rows(self):
        """(offer_grid_value, ratio_baseline, ratio_educated, stderr_b, stderr_e) per grid point."""
        for b, e in zip(self.baseline.rows, self.educated.rows):
            yield _level(b.params), b.ratio, e.ratio, b.ratio_stderr, e.ratio_stderr


def _level(params) -> float:
    if "a" in params:
        return 0.5 * (params["a"] + params["b"])
    return params.get("mu", params.get("value"))


def _argmax_level(table: SweepTable) -> float:
    row = table.argmax()
    return float("nan") if row is None else _level(row.params)


def _thresholded(pop: Population, targets, savings, lever: str):
    """Rebuild ``pop`` so every user's threshold equals ``targets``.

    Returns the new population and how many users fell back to savings
    back-solving because the requested lever had no admissible solution.
    """
    b = pop.bounds
    gamma = pop.gamma.copy()
    s = np.asarray(savings, dtype=float).copy()
    x_low = pop.x_low.copy()
    fallback = np.zeros(len(pop), dtype=bool)
    for i in range(len(pop)):
        if lever == "gamma":
            try:
                sol = gamma_for_target(pop.x_high[i], pop.x_low[i], s[i], targets[i], b)
                ok = sol.feasible
            except InfeasibleTargetError:
                ok = False
            if ok:
                gamma[i] = sol.gamma
            else:
                fallback[i] = True
        elif lever == "bitrate":
            sol = bitrate_for_target(pop.x_high[i], gamma[i], s[i], targets[i], b)
            # out-of-range bitrates are kept; the flexibility they imply is what the lever costs
            x_low[i] = sol.x_low
            fallback[i] = not sol.in_range
            continue
        else:
            fallback[i] = True
        if fallback[i]:
            s[i] = savings_for_target(pop.x_high[i], pop.x_low[i], gamma[i], targets[i], b)
    out = pop.with_columns(gamma=gamma, savings=s, x_low=x_low)
    return out, int(fallback.sum()) if lever != "savings" else 0


def education_experiment(
    profiles,
    baseline_law: DistributionSpec,
    educated_law: DistributionSpec,
    offer_grid,
    savings_law: DistributionSpec | None = None,
    c_admin: float = 0.04,
    seed: int = 0,
    n_replicates: int = 20,
    lever: str = "gamma",
) -> EducationResult:
    """Ratio curves before and after an education campaign.

    Both populations share bitrates, slopes and savings draws; they differ
    only in the thresholds, drawn from ``baseline_law`` and ``educated_law``
    with common random numbers. ``lever`` decides which user parameter
    absorbs the threshold: ``gamma`` (default) and ``bitrate`` keep the drawn
    savings, ``savings`` back-solves them. Users for whom the lever has no
    admissible value fall back to savings back-solving and are counted
    (for ``bitrate``: the count of out-of-range bitrates).
    """
    if lever not in LEVERS:
        raise ValueError(f"lever must be one of {LEVERS}, got {lever!r}")
    pop = Population.from_profiles(profiles)
    n = len(pop)
    savings = np.array(
        [float(savings_law.sample(stream(seed, "education-savings", int(u)))) for u in pop.ids]
    ) if savings_law is not None else pop.savings.copy()

    def draw(law):
        out = np.empty(n)
        for i, u in enumerate(pop.ids):
            rng = stream(seed, "education-threshold", int(u))
            for _ in range(1000):
                v = float(law.sample(rng))
                if v >= 0:
                    break
            else:
                raise ValueError(f"threshold law {law} yields no non-negative value")
            out[i] = v
        return out

    base_pop, fb_b = _thresholded(pop, draw(baseline_law), savings, lever)
    edu_pop, fb_e = _thresholded(pop, draw(educated_law), savings, lever)
    base = sweep_distribution(base_pop, offer_grid, c_admin, seed, n_replicates)
    edu = sweep_distribution(edu_pop, offer_grid, c_admin, seed, n_replicates)
    return EducationResult(base, edu, lever, (fb_b, fb_e))
