"""Provider-side evaluation: expected cost, expected flexibility, their ratio."""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .acceptance import accept_probability
from .population import DistributionSpec, Population
from .rng import stream

__all__ = [
    "PolicyOutcome",
    "SweepRow",
    "SweepTable",
    "clip_offers",
    "compare_group_targeting",
    "compare_mean_vs_individual",
    "evaluate_policy",
    "realized_outcome",
    "sweep_distribution",
    "sweep_subset_size",
]


@dataclass(frozen=True)
class PolicyOutcome:
    """Expected outcome of one offer assignment.

    ``ratio`` is ``None`` when the expected cost is zero (nothing offered).
    """

    expected_cost: float
    expected_flexibility: float
    ratio: float | None
    n_offers: int
    mean_accept_prob: float


def clip_offers(offers) -> np.ndarray:
    """Offers are non-negative; a negative draw means no offer."""
    return np.maximum(np.asarray(offers, dtype=float), 0.0)


def _columns(profiles):
    pop = Population.from_profiles(profiles)
    return pop.r_min, pop.delta, pop.flexibility


def _expected(r_min, delta, flex, offers, c_admin):
    """Cost, flexibility, offer count and mean p along the last axis of ``offers``."""
    p = accept_probability(offers, r_min, delta)
    p = np.asarray(p, dtype=float)
    offered = offers > 0
    cost = (p * offers).sum(-1) + c_admin * offered.sum(-1)
    flx = (p * flex).sum(-1)
    return cost, flx, offered.sum(-1), p.mean(-1)


def _ratio(flx, cost):
    flx = np.asarray(flx, dtype=float)
    cost = np.asarray(cost, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(cost > 0, flx / np.where(cost > 0, cost, 1.0), np.nan)


def evaluate_policy(profiles, assignment, c_admin: float = 0.04) -> PolicyOutcome:
    """Expected provider cost and flexibility for per-user offers ``assignment``.

    A user offered ``r`` accepts with the sigmoid probability ``p(r)``; the
    provider pays ``p(r) * r`` plus ``c_admin`` for every positive offer, and
    gains ``p(r) * (x_high - x_low)`` kbps. Users with ``r = 0`` still switch
    with probability ``p(0)`` but cost nothing.
    """
    r_min, delta, flex = _columns(profiles)
    offers = np.asarray(assignment, dtype=float)
    if offers.shape != r_min.shape:
        raise ValueError(
            f"assignment has {offers.size} entries for {r_min.size} users"
        )
    if np.any(~np.isfinite(offers)) or np.any(offers < 0):
        raise ValueError("offers must be finite and >= 0")
    if not (math.isfinite(c_admin) and c_admin >= 0):
        raise ValueError(f"c_admin must be >= 0, got {c_admin}")
    cost, flx, n_off, mean_p = _expected(r_min, delta, flex, offers, c_admin)
    ratio = float(flx / cost) if cost > 0 else None
    return PolicyOutcome(float(cost), float(flx), ratio, int(n_off), float(mean_p))


def realized_outcome(profiles, assignment, c_admin, rng: np.random.Generator, n_draws: int = 1):
    """Sampled cost and flexibility over ``n_draws`` independent acceptance rounds.

    Returns two arrays of length ``n_draws``. Used to cross-check the
    expectations of :func:`evaluate_policy`.
    """
    r_min, delta, flex = _columns(profiles)
    offers = np.asarray(assignment, dtype=float)
    p = np.asarray(accept_probability(offers, r_min, delta))
    admin = c_admin * np.count_nonzero(offers > 0)
    accepted = rng.random((n_draws, p.size)) < p
    return accepted @ offers + admin, accepted @ flex


# --------------------------------------------------------------------------
# Sweeps over offer laws / number of incentivized users

SWEEP_COLUMNS = (
    "expected_cost",
    "expected_flexibility",
    "ratio",
    "ratio_stderr",
    "n_offers",
    "mean_accept_prob",
    "is_argmax",
)


@dataclass
class SweepRow:
    curve: str
    params: dict
    expected_cost: float
    expected_flexibility: float
    ratio: float | None
    ratio_stderr: float
    n_offers: float
    mean_accept_prob: float
    is_argmax: bool = False
    extra: dict = field(default_factory=dict)


@dataclass
class SweepTable:
    """Replicate-averaged outcomes, one row per (curve, grid point)."""

    param_names: tuple
    rows: list

    def curves(self) -> list[str]:
        return list(dict.fromkeys(r.curve for r in self.rows))

    def curve(self, name: str = "main") -> list[SweepRow]:
        return [r for r in self.rows if r.curve == name]

    def ratios(self, name: str = "main") -> np.ndarray:
        return np.array([np.nan if r.ratio is None else r.ratio for r in self.curve(name)])

    def stderrs(self, name: str = "main") -> np.ndarray:
        return np.array([r.ratio_stderr for r in self.curve(name)])

    def param(self, key: str, name: str = "main") -> np.ndarray:
        return np.array([r.params[key] for r in self.curve(name)])

    def argmax(self, name: str = "main") -> SweepRow | None:
        for r in self.curve(name):
            if r.is_argmax:
                return r
        return None

    def write_csv(self, fh) -> None:
        from .population import fmt

        extra_keys = list(dict.fromkeys(k for r in self.rows for k in r.extra))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve", *self.param_names, *SWEEP_COLUMNS, *extra_keys])
        for r in self.rows:
            w.writerow(
                [r.curve]
                + [fmt(r.params[k]) for k in self.param_names]
                + [fmt(getattr(r, k)) for k in SWEEP_COLUMNS]
                + [r.extra.get(k, "") if isinstance(r.extra.get(k), str) else fmt(r.extra.get(k)) for k in extra_keys]
            )


def _mark_argmax(rows: list[SweepRow], offer_level) -> None:
    """Flag the best ratio; ties go to the cheaper grid point."""
    best = None
    for i, r in enumerate(rows):
        if r.ratio is None or math.isnan(r.ratio):
            continue
        key = (-r.ratio, offer_level(r), i)
        if best is None or key < best[0]:
            best = (key, r)
    if best is not None:
        best[1].is_argmax = True


def _aggregate(curve, params, cost, flx, n_off, mean_p) -> SweepRow:
    ratio = _ratio(flx, cost)
    ok = ~np.isnan(ratio)
    n_ok = int(ok.sum())
    if n_ok:
        mean_ratio = float(ratio[ok].mean())
        se = float(ratio[ok].std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else 0.0
    else:
        mean_ratio, se = None, 0.0
    return SweepRow(
        curve,
        dict(params),
        float(np.mean(cost)),
        float(np.mean(flx)),
        mean_ratio,
        se,
        float(np.mean(n_off)),
        float(np.mean(mean_p)),
    )


def _grid_params(grid: Sequence[DistributionSpec]) -> tuple:
    kinds = {g.kind for g in grid}
    if not grid:
        raise ValueError("offer grid is empty")
    if len(kinds) != 1 or "discrete" in kinds:
        raise ValueError("offer grid must hold laws of a single uniform/normal/constant kind")
    return tuple(grid[0].param_dict())


def _draw_offers(law: DistributionSpec, n: int, seed: int, i: int, n_replicates: int) -> np.ndarray:
    return np.stack(
        [clip_offers(law.sample(stream(seed, "offers", i, j), n)) for j in range(n_replicates)]
    ) if n else np.zeros((n_replicates, 0))


def _check_common(c_admin, n_replicates):
    if not (math.isfinite(c_admin) and c_admin >= 0):
        raise ValueError(f"c_admin must be >= 0, got {c_admin}")
    if n_replicates < 1:
        raise ValueError(f"n_replicates must be >= 1, got {n_replicates}")


def sweep_distribution(profiles, grid, c_admin=0.04, seed=0, n_replicates=20) -> SweepTable:
    """Offer every user an independent draw from each law in ``grid``.

    Each (grid point, replicate) gets its own offer stream; the expected
    outcome is averaged over replicates and the best-ratio grid point is
    flagged.
    """
    _check_common(c_admin, n_replicates)
    names = _grid_params(grid)
    r_min, delta, flex = _columns(profiles)
    rows = []
    for i, law in enumerate(grid):
        offers = _draw_offers(law, r_min.size, seed, i, n_replicates)
        rows.append(_aggregate("main", law.param_dict(), *_expected(r_min, delta, flex, offers, c_admin)))
    by_row = {id(r): law.mean for r, law in zip(rows, grid)}
    _mark_argmax(rows, lambda r: by_row[id(r)])
    return SweepTable(names, rows)


SELECTION_RULES = ("random", "ascending_rmin", "group")


def _selection_order(pop: Population, rule: str, rng: np.random.Generator) -> np.ndarray:
    if rule == "random":
        return rng.permutation(len(pop))
    if rule == "ascending_rmin":
        return np.argsort(pop.r_min, kind="stable")
    if rule == "group":
        if pop.labels is None:
            raise ValueError("selection rule 'group' needs a labelled population")
        return np.argsort(pop.labels, kind="stable")
    raise ValueError(f"unknown selection rule {rule!r}; expected one of {SELECTION_RULES}")


def sweep_subset_size(profiles, offer_law, k_grid=None, selection="random",
                      c_admin=0.04, seed=0, n_replicates=20) -> SweepTable:
    """Offer draws from ``offer_law`` to the first ``k`` users of a selection order.

    Users outside the first ``k`` get no offer. With ``selection="random"``
    every replicate uses a fresh permutation.
    """
    _check_common(c_admin, n_replicates)
    pop = Population.from_profiles(profiles)
    n = len(pop)
    ks = np.arange(n + 1) if k_grid is None else np.asarray(sorted(set(int(k) for k in k_grid)))
    if ks.size == 0 or ks[0] < 0 or ks[-1] > n:
        raise ValueError(f"k_grid must be a non-empty subset of [0, {n}]")
    r_min, delta, flex = pop.r_min, pop.delta, pop.flexibility

    cost = np.empty((n_replicates, ks.size))
    flx = np.empty_like(cost)
    n_off = np.empty_like(cost)
    mean_p = np.empty_like(cost)
    p_zero = np.asarray(accept_probability(0.0, r_min, delta))
    for j in range(n_replicates):
        order = _selection_order(pop, selection, stream(seed, "permutation", j))
        offers = clip_offers(offer_law.sample(stream(seed, "offers", 0, j), n))
        o = offers[order]
        p_on = np.asarray(accept_probability(o, r_min[order], delta[order]))
        p_off = p_zero[order]
        # prefix sums give every k at once
        cum = lambda v: np.concatenate([[0.0], np.cumsum(v)])
        c_on = cum(p_on * o + c_admin * (o > 0))
        f_on = cum(p_on * flex[order])
        f_off = cum(p_off * flex[order])
        pr_on, pr_off = cum(p_on), cum(p_off)
        cost[j] = c_on[ks]
        flx[j] = f_on[ks] + (f_off[-1] - f_off[ks])
        n_off[j] = cum(o > 0)[ks]
        mean_p[j] = (pr_on[ks] + pr_off[-1] - pr_off[ks]) / n
    rows = [
        _aggregate("main", {"k": int(k)}, cost[:, i], flx[:, i], n_off[:, i], mean_p[:, i])
        for i, k in enumerate(ks)
    ]
    _mark_argmax(rows, lambda r: r.params["k"])
    return SweepTable(("k",), rows)


def compare_group_targeting(group_a, group_b, grid, c_admin=0.04, seed=0, n_replicates=20) -> SweepTable:
    """Ratio curves for offering only group A, only group B, or both.

    Each curve is the Flexibility-Cost ratio of the targeted users alone, so
    the curves compare how efficiently each segment converts incentives into
    flexibility. An empty group yields the no-offer baseline (ratio absent).
    """
    _check_common(c_admin, n_replicates)
    names = _grid_params(grid)
    a = Population.from_profiles(group_a)
    b = Population.from_profiles(group_b)
    both = Population.concat([a, b]) if len(a) and len(b) else (a if len(a) else b)
    na = len(a)
    rows = []
    for i, law in enumerate(grid):
        offers = _draw_offers(law, na + len(b), seed, i, n_replicates)
        point = []
        for name, pop, cols in (("A", a, slice(0, na)), ("B", b, slice(na, None)), ("both", both, slice(None))):
            o = offers[:, cols]
            if len(pop) == 0:
                z = np.zeros(n_replicates)
                row = _aggregate(name, law.param_dict(), z, z, z, z)
            else:
                row = _aggregate(name, law.param_dict(), *_expected(pop.r_min, pop.delta, pop.flexibility, o, c_admin))
            point.append(row)
        ranked = [r for r in point if r.ratio is not None]
        best = max(ranked, key=lambda r: r.ratio).curve if ranked else ""
        for r in point:
            r.extra["best_target"] = best
        rows.extend(point)
    table = SweepTable(names, rows)
    means = {id(r): law.mean for law_i, law in enumerate(grid) for r in rows[3 * law_i: 3 * law_i + 3]}
    for name in ("A", "B", "both"):
        _mark_argmax(table.curve(name), lambda r: means[id(r)])
    return table


def compare_mean_vs_individual(profiles, grid, c_admin=0.04, seed=0, n_replicates=20) -> SweepTable:
    """Offer everyone the law's mean (curve ``mean``) vs. per-user draws (``individual``)."""
    _check_common(c_admin, n_replicates)
    names = _grid_params(grid)
    r_min, delta, flex = _columns(profiles)
    rows = []
    means = {}
    for i, law in enumerate(grid):
        fixed = np.full((1, r_min.size), max(law.mean, 0.0))
        m = _aggregate("mean", law.param_dict(), *_expected(r_min, delta, flex, fixed, c_admin))
        offers = _draw_offers(law, r_min.size, seed, i, n_replicates)
        ind = _aggregate("individual", law.param_dict(), *_expected(r_min, delta, flex, offers, c_admin))
        means[id(m)] = means[id(ind)] = law.mean
        rows.extend([m, ind])
    table = SweepTable(names, rows)
    for name in ("mean", "individual"):
        _mark_argmax(table.curve(name), lambda r: means[id(r)])
    return table
