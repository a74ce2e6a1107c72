"""Incentive-driven acceptance of low-bitrate ("green") video streaming.

Users trade a QoE loss for an offered incentive; the provider looks for offer
policies with a high expected flexibility per unit of expected cost.
"""

from .qoe import (
    BitrateBounds,
    DEFAULT_BOUNDS,
    UserProfile,
    delta_utility,
    flexibility,
    min_incentive,
    qoe_score,
    utility,
)
from .acceptance import Decision, Offer, accept_probability, sample_decision
from .population import (
    DistributionSpec,
    Population,
    PopulationConfig,
    generate_population,
    partition_population,
    sample_from,
)
from .policy import PolicyOutcome, evaluate_policy

__version__ = "0.1.0"

__all__ = [
    "BitrateBounds",
    "DEFAULT_BOUNDS",
    "Decision",
    "DistributionSpec",
    "Offer",
    "PolicyOutcome",
    "Population",
    "PopulationConfig",
    "UserProfile",
    "accept_probability",
    "delta_utility",
    "evaluate_policy",
    "flexibility",
    "generate_population",
    "min_incentive",
    "partition_population",
    "qoe_score",
    "sample_decision",
    "sample_from",
    "utility",
]
