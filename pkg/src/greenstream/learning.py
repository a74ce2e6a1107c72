"""Per-user threshold and slope estimation from offer/response histories.

A two-parameter logistic model z = sigmoid(theta0 + theta1 * r) is fitted by
Newton steps (IRLS). The threshold estimate is -theta0/theta1 and the slope
estimate is theta1. Fits are vectorized over a batch of users so the
error-vs-sample-size experiment stays cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .acceptance import accept_probability
from .population import DistributionSpec, Population, fmt
from .qoe import UserProfile
from .rng import stream

__all__ = [
    "InteractionRecord",
    "ParameterEstimate",
    "SeparationError",
    "DegenerateDataError",
    "generate_interactions",
    "fit_logistic",
    "LearningCurve",
    "error_vs_samples",
    "LEARNING_COLUMNS",
]

GRAD_TOL = 1e-8
MAX_ITER = 100
THETA_INIT = (0.0, 0.1)


@dataclass(frozen=True)
class InteractionRecord:
    offer: float
    response: int

    def __post_init__(self):
        if self.response not in (0, 1):
            raise ValueError(f"response must be 0 or 1, got {self.response!r}")
        if not math.isfinite(self.offer):
            raise ValueError(f"offer must be finite, got {self.offer}")


@dataclass
class ParameterEstimate:
    theta0: float
    theta1: float
    converged: bool
    n_samples: int
    log_likelihood: float
    n_iter: int = 0
    cov: np.ndarray | None = None
    ll_history: list = field(default_factory=list)

    @property
    def r_min_hat(self) -> float:
        if self.theta1 == 0:
            return math.nan
        return -self.theta0 / self.theta1

    @property
    def delta_hat(self) -> float:
        return self.theta1

    @property
    def negative_slope(self) -> bool:
        # acceptance falling with the offer contradicts the model
        return self.theta1 < 0

    @property
    def se_delta(self) -> float:
        if self.cov is None:
            return math.nan
        return math.sqrt(self.cov[1, 1])

    @property
    def se_r_min(self) -> float:
        """Delta-method standard error of the threshold estimate."""
        if self.cov is None or self.theta1 == 0:
            return math.nan
        g = np.array([-1.0 / self.theta1, self.theta0 / self.theta1**2])
        return math.sqrt(float(g @ self.cov @ g))


class SeparationError(ValueError):
    """Responses are perfectly split by the offer, so the MLE diverges.

    ``direction`` is +1 when all acceptances sit at higher offers than all
    rejections, -1 for the reverse, 0 when every response is identical.
    """

    def __init__(self, direction: int, msg: str | None = None):
        self.direction = direction
        super().__init__(msg or f"responses are separable in offer (direction {direction:+d})")


class DegenerateDataError(ValueError):
    pass


def generate_interactions(profile: UserProfile, offer_law: DistributionSpec, m: int,
                          rng: np.random.Generator, r_min: float | None = None) -> list[InteractionRecord]:
    """Draw ``m`` offers from ``offer_law`` and the user's responses to them.

    Offers are used as drawn (negative values included). ``r_min`` overrides
    the profile's own threshold.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    offers, resp = _simulate(r_min if r_min is not None else profile.r_min(), profile.delta, offer_law, m, rng)
    return [InteractionRecord(float(o), int(c)) for o, c in zip(offers, resp)]


def _simulate(r_min, delta, offer_law, m, rng):
    offers = np.asarray(offer_law.sample(rng, size=m), dtype=float)
    p = accept_probability(offers, r_min, delta)
    resp = (rng.random(m) < p).astype(np.int8)
    return offers, resp


def _separation(x, y):
    """Per-row separation direction: +1, -1, 0 (constant labels) or None."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y).astype(bool)
    inf = np.inf
    max0 = np.where(~y, x, -inf).max(axis=1)
    min1 = np.where(y, x, inf).min(axis=1)
    max1 = np.where(y, x, -inf).max(axis=1)
    min0 = np.where(~y, x, inf).min(axis=1)
    const = y.all(axis=1) | (~y).all(axis=1)
    out = np.zeros(len(x), dtype=int)
    out[max0 <= min1] = 1
    out[max1 <= min0] = -1
    out[const] = 0
    sep = const | (max0 <= min1) | (max1 <= min0)
    return out, sep


def _loglik(theta, x, y, ridge):
    z = theta[:, :1] + theta[:, 1:] * x
    ll = (y * z - np.logaddexp(0.0, z)).sum(axis=1)
    return ll - 0.5 * ridge * (theta**2).sum(axis=1)


def _irls(x, y, ridge=0.0, max_iter=MAX_ITER, tol=GRAD_TOL, history=False):
    """Batch Newton ascent; rows of ``x``/``y`` are independent problems.

    Returns theta (B, 2), converged (B,), iterations (B,), log-likelihood
    (B,), the unpenalized information matrices (B, 2, 2) and, optionally,
    the log-likelihood after every step for row 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = x.shape[0]
    theta = np.tile(np.array(THETA_INIT, dtype=float), (b, 1))
    ll = _loglik(theta, x, y, ridge)
    active = np.ones(b, dtype=bool)
    conv = np.zeros(b, dtype=bool)
    n_iter = np.zeros(b, dtype=int)
    hist = [float(ll[0])] if history else None
    for it in range(max_iter + 1):
        z = theta[:, :1] + theta[:, 1:] * x
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -700, 700)))
        r = y - p
        g = np.stack([r.sum(1) - ridge * theta[:, 0], (r * x).sum(1) - ridge * theta[:, 1]], axis=1)
        done = active & (np.abs(g).max(axis=1) < tol)
        conv |= done
        active &= ~done
        if not active.any() or it == max_iter:
            break
        w = p * (1.0 - p)
        h00 = w.sum(1) + ridge
        h01 = (w * x).sum(1)
        h11 = (w * x * x).sum(1) + ridge
        det = h00 * h11 - h01 * h01
        ok = det > 0
        active &= ok
        safe = np.where(ok, det, 1.0)
        step = np.stack([(h11 * g[:, 0] - h01 * g[:, 1]) / safe,
                         (h00 * g[:, 1] - h01 * g[:, 0]) / safe], axis=1)
        step[~active] = 0.0
        t = np.ones(b)
        for _ in range(40):
            cand = theta + t[:, None] * step
            ll_new = _loglik(cand, x, y, ridge)
            bad = active & ~(ll_new >= ll - 1e-12 * np.abs(ll))
            if not bad.any():
                break
            t[bad] *= 0.5
        theta = np.where(active[:, None], cand, theta)
        ll = np.where(active, ll_new, ll)
        n_iter += active
        if history:
            hist.append(float(ll[0]))
    z = theta[:, :1] + theta[:, 1:] * x
    w = 1.0 / (1.0 + np.exp(-np.clip(z, -700, 700)))
    w = w * (1.0 - w)
    info = np.empty((b, 2, 2))
    info[:, 0, 0] = w.sum(1)
    info[:, 0, 1] = info[:, 1, 0] = (w * x).sum(1)
    info[:, 1, 1] = (w * x * x).sum(1)
    return theta, conv, n_iter, ll, info, hist


def _inverse(info, ridge):
    h = info + ridge * np.eye(2)
    try:
        return np.linalg.inv(h)
    except np.linalg.LinAlgError:
        return None


def fit_logistic(records, ridge: float = 0.0) -> ParameterEstimate:
    """Maximum-likelihood (theta0, theta1) for one user's history.

    Raises DegenerateDataError when every offer is identical and
    SeparationError when the responses are separable in the offer, unless a
    ridge penalty keeps the optimum finite.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    if len(records) == 0:
        raise DegenerateDataError("no records")
    x = np.array([r.offer for r in records], dtype=float)[None, :]
    y = np.array([r.response for r in records], dtype=float)[None, :]
    if np.ptp(x) == 0:
        raise DegenerateDataError("all offers are identical; the slope is not identifiable")
    direction, sep = _separation(x, y)
    if sep[0] and ridge == 0:
        raise SeparationError(int(direction[0]))
    theta, conv, n_iter, ll, info, hist = _irls(x, y, ridge, history=True)
    return ParameterEstimate(
        float(theta[0, 0]), float(theta[0, 1]), bool(conv[0]), x.shape[1], float(ll[0]),
        int(n_iter[0]), _inverse(info[0], ridge), hist,
    )


LEARNING_COLUMNS = ("m", "mean_abs_err_rmin", "mean_abs_err_delta", "n_excluded")


@dataclass
class LearningCurve:
    m: np.ndarray
    err_rmin: np.ndarray
    err_delta: np.ndarray
    n_excluded: np.ndarray
    n_fits: int

    @property
    def exclusion_rate(self) -> np.ndarray:
        return self.n_excluded / self.n_fits

    def write_csv(self, fh) -> None:
        fh.write(",".join(LEARNING_COLUMNS) + "\n")
        for row in zip(self.m, self.err_rmin, self.err_delta, self.n_excluded):
            m, er, ed, ex = row
            fh.write(f"{int(m)},{fmt(er)},{fmt(ed)},{int(ex)}\n")


def error_vs_samples(population, offer_law: DistributionSpec, m_grid, n_replicates: int = 10,
                     seed: int = 0, ridge: float = 0.0) -> LearningCurve:
    """Mean absolute estimation errors as the history length grows.

    Each (replicate, user) pair owns one stream and one history of length
    ``max(m_grid)``; smaller m use its prefix, so the curves are nested.
    Fits that hit separation, degenerate offers or the iteration cap are
    excluded and counted.
    """
    m_grid = sorted({int(m) for m in m_grid})
    if not m_grid or m_grid[0] < 1:
        raise ValueError("m_grid must be a non-empty set of positive integers")
    if n_replicates < 1:
        raise ValueError(f"n_replicates must be >= 1, got {n_replicates}")
    pop = Population.from_profiles(population)
    if len(pop) == 0:
        raise ValueError("empty population")
    r_true = pop.r_min
    d_true = pop.delta
    m_max = m_grid[-1]
    n = len(pop)
    xs = np.empty((n_replicates * n, m_max))
    ys = np.empty_like(xs)
    rt = np.tile(r_true, n_replicates)
    dt = np.tile(d_true, n_replicates)
    for rep in range(n_replicates):
        for i, u in enumerate(pop.ids):
            rng = stream(seed, "interactions", rep, int(u))
            xs[rep * n + i], ys[rep * n + i] = _simulate(r_true[i], d_true[i], offer_law, m_max, rng)

    e_r, e_d, n_ex = [], [], []
    for m in m_grid:
        x, y = xs[:, :m], ys[:, :m]
        _, sep = _separation(x, y)
        degenerate = np.ptp(x, axis=1) == 0
        skip = degenerate | (sep if ridge == 0 else np.zeros_like(sep))
        keep = ~skip
        theta = np.full((len(x), 2), np.nan)
        conv = np.zeros(len(x), dtype=bool)
        if keep.any():
            th, cv, *_ = _irls(x[keep], y[keep], ridge)
            theta[keep] = th
            conv[keep] = cv
        ok = keep & conv & (theta[:, 1] != 0)
        r_hat = -theta[ok, 0] / theta[ok, 1]
        e_r.append(float(np.mean(np.abs(r_hat - rt[ok]))) if ok.any() else math.nan)
        e_d.append(float(np.mean(np.abs(theta[ok, 1] - dt[ok]))) if ok.any() else math.nan)
        n_ex.append(int((~ok).sum()))
    return LearningCurve(np.array(m_grid), np.array(e_r), np.array(e_d), np.array(n_ex), n_replicates * n)
