import numpy as np
import pytest
from hypothesis import given, strategies as st

from greenstream.acceptance import Decision, Offer, accept_probability, decision_stream, sample_decision
from greenstream.rng import stream

import oracle


def test_half_at_threshold():
    for d in (0.1, 1.2, 100.0, 1e4):
        assert accept_probability(3.7, 3.7, d) == 0.5


def test_reference_values():
    assert accept_probability(1.1, 1.0, 100) == pytest.approx(1 / (1 + np.exp(-10)), rel=1e-12)
    assert accept_probability(1.1, 1.0, 100) == pytest.approx(0.9999546, abs=1e-7)
    assert accept_probability(0.9, 1.0, 100) == pytest.approx(4.54e-5, rel=1e-3)


def test_no_overflow_for_extreme_arguments():
    with np.errstate(over="raise", invalid="raise"):
        p = accept_probability(np.array([-1e6, 1e6]), 0.0, 1e4)
    assert p[0] == 0.0 and p[1] == 1.0


def test_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        accept_probability(1.0, 1.0, 0.0)


def test_offer_must_be_nonnegative():
    with pytest.raises(ValueError):
        Offer(0, -0.1)


@given(st.floats(-50, 50), st.floats(0.01, 200), st.floats(0, 5))
def test_symmetry(rm, delta, d):
    s = accept_probability(rm + d, rm, delta) + accept_probability(rm - d, rm, delta)
    assert abs(s - 1.0) < 1e-12


@given(st.floats(-20, 20), st.floats(1e-3, 5), st.floats(0, 10), st.floats(0.05, 50))
def test_monotone_and_matches_reference(r, dr, rm, delta):
    p1 = accept_probability(r, rm, delta)
    assert p1 == pytest.approx(oracle.sigmoid(r, rm, delta), rel=1e-12, abs=1e-300)
    assert accept_probability(r + dr, rm, delta) >= p1


def test_step_limit_for_large_delta():
    r = np.concatenate([np.linspace(-5, 0.99, 50), np.linspace(1.01, 7, 50)])
    p = accept_probability(r, 1.0, 1e4)
    assert np.all(np.abs(p - (r > 1.0)) < 1e-3)


def test_sampling_frequencies():
    rng = stream(1, "t")
    acc = [sample_decision(Offer(0, 1.0), 1.0, 3.0, rng).accepted for _ in range(100_000)]
    assert abs(np.mean(acc) - 0.5) < 0.01
    rng = stream(2, "t")
    acc = [sample_decision(Offer(0, 0.0), 50.0, 100.0, rng).accepted for _ in range(100_000)]
    assert np.mean(acc) < 1e-3


def test_frequency_within_three_standard_errors():
    p = accept_probability(2.3, 2.0, 2.0)
    m = 20_000
    rng = stream(3, "t")
    freq = np.mean([sample_decision(Offer(0, 2.3), 2.0, 2.0, rng).accepted for _ in range(m)])
    assert abs(freq - p) < 3 * np.sqrt(p * (1 - p) / m)


def test_decisions_reproducible():
    def run():
        rng = decision_stream(42, 7)
        return [sample_decision(Offer(7, r), 1.0, 2.0, rng) for r in np.linspace(0, 2, 50)]

    a, b = run(), run()
    assert a == b
    assert all(isinstance(d, Decision) for d in a)
