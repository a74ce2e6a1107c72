"""Stochastic acceptance of an offered incentive."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import stream

__all__ = ["Offer", "Decision", "accept_probability", "sample_decision", "decision_stream"]


@dataclass(frozen=True)
class Offer:
    user_id: int
    amount: float

    def __post_init__(self):
        if not self.amount >= 0:
            raise ValueError(f"offer amount must be >= 0, got {self.amount}")


@dataclass(frozen=True)
class Decision:
    user_id: int
    accepted: int


def _sigmoid(z):
    # branch on sign so exp never overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def accept_probability(offer_amount, r_min, delta):
    """Probability that a user with threshold ``r_min`` and slope ``delta`` accepts.

    ``1 / (1 + exp(-delta * (offer - r_min)))``, evaluated without overflow.
    Broadcasts over array arguments.
    """
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError(f"delta must be > 0, got {delta!r}")
    p = _sigmoid(d * (np.asarray(offer_amount, dtype=float) - np.asarray(r_min, dtype=float)))
    return p if p.ndim else float(p)


def decision_stream(seed: int, user_id: int) -> np.random.Generator:
    """Per-user decision stream, independent of evaluation order."""
    return stream(seed, "decisions", user_id)


def sample_decision(offer: Offer, r_min: float, delta: float, rng: np.random.Generator) -> Decision:
    p = accept_probability(offer.amount, r_min, delta)
    return Decision(offer.user_id, int(rng.random() < p))
