import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greenstream.population import (
    ConfigurationError,
    DistributionSpec as D,
    Population,
    PopulationConfig,
    generate_population,
    partition_population,
    sample_from,
    write_population_csv,
)
from greenstream.qoe import UserProfile
from greenstream.rng import stream


def test_default_population_matches_generator_sets():
    pop = generate_population(PopulationConfig(seed=7))
    assert len(pop) == 1000
    assert set(pop.x_high) <= {2000, 3000, 4000, 5000}
    assert set(pop.x_low) <= {300, 600, 1200, 1500}
    assert np.all(pop.gamma == 1.15) and np.all(pop.beta == 1.0)
    assert not pop.violations()


def test_generation_is_deterministic():
    cfg = PopulationConfig(n_users=200, seed=3, gamma_spec=D.uniform(1, 1.5))
    assert generate_population(cfg) == generate_population(cfg)
    assert generate_population(cfg) != generate_population(cfg.replace(seed=4))


def test_prefix_stability():
    # per-user streams: a larger population extends a smaller one
    small = generate_population(PopulationConfig(n_users=50, seed=1))
    big = generate_population(PopulationConfig(n_users=80, seed=1))
    assert big.subset(np.arange(50)) == small


def test_sample_from_examples():
    rng = stream(0, "t")
    assert sample_from(D.constant(0.04), rng) == 0.04
    assert sample_from(D.uniform(5, 5), rng) == 5
    x = D.normal(0, 100).sample(stream(1, "t"), 100_000)
    assert abs(x.mean()) < 0.15
    assert abs(x.var() - 100) < 5


def test_inverted_uniform_is_normalized_with_warning():
    with pytest.warns(UserWarning):
        spec = D.uniform(5, 4)
    assert spec.params == (4.0, 5.0)


@pytest.mark.parametrize("bad", [
    lambda: D.normal(0, -1),
    lambda: D.discrete([1, 2], [0.5, 0.6]),
    lambda: D.discrete([]),
    lambda: D.constant(float("inf")),
    lambda: D.from_dict({"kind": "gamma"}),
])
def test_invalid_laws(bad):
    with pytest.raises(ValueError):
        bad()


def test_law_round_trip():
    for spec in (D.uniform(1, 2), D.normal(3, 4), D.discrete([1, 2], [0.25, 0.75]), D.constant(9)):
        assert D.from_dict(spec.to_dict()) == spec


def test_threshold_law_back_solves_savings():
    pop = generate_population(PopulationConfig(n_users=500, rmin_spec=D.uniform(3.5, 6), seed=2))
    assert np.all((pop.r_min >= 3.5) & (pop.r_min <= 6))
    assert np.allclose(pop.delta_utility - pop.savings, pop.r_min)


def test_positive_parameters_are_resampled():
    pop = generate_population(PopulationConfig(n_users=300, delta_spec=D.normal(0.5, 1.0), seed=0))
    assert np.all(pop.delta > 0)


def test_impossible_law_raises():
    with pytest.raises(ConfigurationError):
        generate_population(PopulationConfig(n_users=3, delta_spec=D.constant(-1)))


def test_moments_within_three_standard_errors():
    law = D.normal(1.3, 0.01)
    pop = generate_population(PopulationConfig(gamma_spec=law, seed=5))
    se = np.sqrt(0.01 / 1000)
    assert abs(pop.gamma.mean() - 1.3) < 3 * se


def test_partition_boundaries():
    pop = generate_population(PopulationConfig(n_users=100, seed=0))
    a, b = partition_population(pop, 0, {}, {})
    assert len(a) == 0 and len(b) == 100
    a, b = partition_population(pop, 100, {}, {})
    assert len(b) == 0
    with pytest.raises(ConfigurationError):
        partition_population(pop, 101, {}, {})
    with pytest.raises(ConfigurationError):
        partition_population(pop, 10, {"colour": D.constant(1)}, {})


def test_partition_group_moments():
    pop = generate_population(PopulationConfig(seed=0))
    a, b = partition_population(pop, 100, {"r_min": D.normal(30, 25)}, {"r_min": D.normal(3, 0.25)})
    assert abs(a.r_min.mean() - 30) < 1.5
    assert abs(b.r_min.mean() - 3) < 0.15
    assert set(a.labels) == {"A"} and set(b.labels) == {"B"}


def test_csv_round_trip(tmp_path):
    pop = generate_population(PopulationConfig(n_users=40, gamma_spec=D.uniform(1, 1.4), seed=9))
    path = tmp_path / "pop.csv"
    pop.to_csv(path)
    back = Population.read_csv(path)
    assert np.allclose(back.gamma, pop.gamma, rtol=1e-11)
    assert list(back.ids) == list(pop.ids)
    buf = io.StringIO()
    write_population_csv(pop, buf)
    assert buf.getvalue().splitlines()[0] == "user_id,x_high,x_low,gamma,delta,beta,savings,r_min"


def test_population_indexing_gives_profiles():
    pop = generate_population(PopulationConfig(n_users=5, seed=0))
    assert isinstance(pop[0], UserProfile)
    assert Population.from_profiles(list(pop)) == pop


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32), st.floats(1.0, 3.0), st.floats(0.0, 0.5))
def test_generated_profiles_always_valid(n, seed, g, s):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = PopulationConfig(n_users=n, seed=seed, gamma_spec=D.uniform(1.0, g), savings_spec=D.uniform(0, s))
    pop = generate_population(cfg)
    assert len(pop) == n
    assert not pop.violations()
    assert np.all(pop.r_min >= 0)
