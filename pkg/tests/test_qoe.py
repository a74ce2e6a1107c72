import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from greenstream.qoe import (
    DEFAULT_BOUNDS,
    BitrateBounds,
    UserProfile,
    delta_utility,
    flexibility,
    log_span,
    min_incentive,
    qoe_score,
    utility,
)

import oracle

bitrates = st.floats(300, 5000)
gammas = st.floats(1.0, 16.0)


def test_endpoints_at_unit_gamma():
    assert qoe_score(300, 1.0) == 1.0
    assert qoe_score(5000, 1.0) == 5.0
    assert utility(300) == pytest.approx(0.2, abs=1e-15)
    assert utility(5000) == 1.0


def test_mid_bitrate_value():
    assert qoe_score(1200, 1.0) == pytest.approx(1 + 4 * math.log(4) / math.log(5000 / 300), rel=1e-14)
    # the quoted 4-digit value 2.9714 is off in the last digit; the closed form gives 2.97098
    assert qoe_score(1200, 1.0) == pytest.approx(2.9714, abs=5e-4)


def test_clipping_binds_at_top_for_green_users():
    assert qoe_score(5000, 1.15, clip=False) > 5.0
    assert utility(5000, 1.15) == 1.0


def test_delta_utility_reference_value():
    p = UserProfile(0, 5000, 1200, gamma=1.15)
    assert delta_utility(p) == pytest.approx(4 * math.log(5000 / 1200) / (5 * math.log(5000 / 345)), rel=1e-14)
    assert delta_utility(p) == pytest.approx(0.4270, abs=1e-4)


def test_delta_utility_grows_with_gamma():
    a = delta_utility(UserProfile(0, 5000, 1200, gamma=1.15))
    b = delta_utility(UserProfile(0, 5000, 1200, gamma=1.3))
    assert b > a


def test_min_incentive_examples():
    du = delta_utility(UserProfile(0, 5000, 1200, gamma=1.15))
    assert min_incentive(UserProfile(0, 5000, 1200, gamma=1.15, savings=0.1)) == pytest.approx(du - 0.1)
    assert min_incentive(UserProfile(0, 5000, 1200, gamma=1.15)) == pytest.approx(du)
    # savings above the loss clamp at zero
    assert min_incentive(UserProfile(0, 2000, 1500, gamma=1.0, savings=0.5)) == 0.0


def test_flexibility():
    assert flexibility(UserProfile(0, 5000, 1200)) == 3800


@pytest.mark.parametrize(
    "kw",
    [
        dict(x_high=1200, x_low=1200),
        dict(x_high=6000, x_low=300),
        dict(x_high=2000, x_low=200),
        dict(x_high=2000, x_low=300, gamma=0.9),
        dict(x_high=2000, x_low=300, gamma=17.0),
        dict(x_high=2000, x_low=300, delta=0.0),
        dict(x_high=2000, x_low=300, beta=1.5),
    ],
)
def test_invalid_profiles_rejected(kw):
    with pytest.raises(ValueError):
        delta_utility(UserProfile(0, **kw))


def test_bad_bounds_and_bitrates():
    with pytest.raises(ValueError):
        BitrateBounds(5000, 300)
    with pytest.raises(ValueError):
        qoe_score(100)
    with pytest.raises(ValueError):
        log_span(DEFAULT_BOUNDS.gamma_limit)


@given(bitrates, gammas)
def test_matches_reference_formula(x, g):
    g = min(g, 16.0)
    assert qoe_score(x, g, clip=False) == pytest.approx(oracle.mos(x, g), rel=1e-12)
    assert utility(x, g) == pytest.approx(oracle.util(x, g), rel=1e-12)


@given(bitrates, st.floats(1.0, 15.0))
def test_mos_increases_with_gamma(x, g):
    h = 1e-6
    d = (qoe_score(x, g + h, clip=False) - qoe_score(x, g - h, clip=False)) / (2 * h) if g > 1 + h else None
    if d is not None and x > 300.5:
        assert d > 0


@given(st.floats(300, 4999), st.floats(1e-3, 1.0), gammas)
def test_mos_increases_with_bitrate(x, dx, g):
    g = min(g, 16.0)
    assert qoe_score(x + dx, g, clip=False) > qoe_score(x, g, clip=False)


@given(st.sampled_from([2000, 3000, 4000, 5000]), st.sampled_from([300, 600, 1200, 1500]),
       st.floats(1.0, 2.0), st.floats(1.0, 2.0), st.floats(0, 1))
def test_delta_utility_properties(xh, xl, g1, g2, s):
    p = UserProfile(0, xh, xl, gamma=g1, savings=s)
    assert delta_utility(p) == pytest.approx(oracle.d_util(xh, xl, g1), rel=1e-12)
    lo, hi = sorted((g1, g2))
    if hi - lo > 1e-9:
        assert delta_utility(UserProfile(0, xh, xl, gamma=hi)) > delta_utility(UserProfile(0, xh, xl, gamma=lo))
    r = min_incentive(p)
    assert r >= 0
    assert (r == 0) == (s >= delta_utility(p))


def test_delta_utility_increasing_in_log_ratio():
    vals = [delta_utility(UserProfile(0, 5000, xl, gamma=1.15)) for xl in (1500, 1200, 600, 300)]
    assert np.all(np.diff(vals) > 0)
