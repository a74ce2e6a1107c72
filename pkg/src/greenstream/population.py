"""Sampling laws and the seeded synthetic user population."""

from __future__ import annotations

import csv
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .qoe import DEFAULT_BOUNDS, BitrateBounds, UserProfile, _delta_utility_raw
from .rng import stream

__all__ = [
    "ConfigurationError",
    "DistributionSpec",
    "Population",
    "PopulationConfig",
    "generate_population",
    "partition_population",
    "sample_from",
    "POPULATION_COLUMNS",
]

MAX_REJECTIONS = 1000

POPULATION_COLUMNS = ("user_id", "x_high", "x_low", "gamma", "delta", "beta", "savings", "r_min")


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSpec:
    """A sampling law: ``uniform``, ``normal``, ``discrete`` or ``constant``.

    Normal laws are parametrized by variance, ``normal(mu, sigma_sq)``.
    Build instances with the classmethods, which validate parameters.
    """

    kind: str
    params: tuple

    @classmethod
    def uniform(cls, a: float, b: float) -> "DistributionSpec":
        a, b = float(a), float(b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("uniform bounds must be finite")
        if a > b:
            warnings.warn(f"uniform law U[{a:g}, {b:g}] has a > b; using U[{b:g}, {a:g}]")
            a, b = b, a
        return cls("uniform", (a, b))

    @classmethod
    def normal(cls, mu: float, sigma_sq: float) -> "DistributionSpec":
        mu, sigma_sq = float(mu), float(sigma_sq)
        if not (math.isfinite(mu) and math.isfinite(sigma_sq)) or sigma_sq < 0:
            raise ValueError(f"normal law needs finite mu and sigma_sq >= 0, got ({mu}, {sigma_sq})")
        return cls("normal", (mu, sigma_sq))

    @classmethod
    def discrete(cls, values: Sequence[float], weights: Sequence[float] | None = None) -> "DistributionSpec":
        values = tuple(float(v) for v in values)
        if not values:
            raise ValueError("discrete law needs at least one value")
        if weights is None:
            weights = (1.0 / len(values),) * len(values)
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(values):
            raise ValueError("discrete law: values and weights differ in length")
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
            raise ValueError(f"discrete weights must be >= 0 and sum to 1, got {weights}")
        return cls("discrete", (values, weights))

    @classmethod
    def constant(cls, value: float) -> "DistributionSpec":
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("constant law needs a finite value")
        return cls("constant", (value,))

    @classmethod
    def from_dict(cls, d: Mapping) -> "DistributionSpec":
        kind = d.get("kind")
        if kind == "uniform":
            return cls.uniform(d["a"], d["b"])
        if kind == "normal":
            return cls.normal(d["mu"], d["sigma_sq"])
        if kind == "discrete":
            return cls.discrete(d["values"], d.get("weights"))
        if kind == "constant":
            return cls.constant(d["value"])
        raise ValueError(f"unknown distribution kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "discrete":
            return {"kind": "discrete", "values": list(self.params[0]), "weights": list(self.params[1])}
        return {"kind": self.kind, **self.param_dict()}

    def param_dict(self) -> dict:
        if self.kind == "uniform":
            return {"a": self.params[0], "b": self.params[1]}
        if self.kind == "normal":
            return {"mu": self.params[0], "sigma_sq": self.params[1]}
        if self.kind == "constant":
            return {"value": self.params[0]}
        return {"values": self.params[0], "weights": self.params[1]}

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        if self.kind in ("normal", "constant"):
            return self.params[0]
        values, weights = self.params
        return float(np.dot(values, weights))

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size)
        if self.kind == "normal":
            mu, var = self.params
            return rng.normal(mu, math.sqrt(var), size)
        if self.kind == "discrete":
            values, weights = self.params
            return rng.choice(np.asarray(values), size=size, p=np.asarray(weights))
        if size is None:
            return self.params[0]
        return np.full(size, self.params[0])

    def __str__(self):
        if self.kind == "uniform":
            return "U[{:g}, {:g}]".format(*self.params)
        if self.kind == "normal":
            return "N({:g}, {:g})".format(*self.params)
        if self.kind == "constant":
            return "const({:g})".format(*self.params)
        return "discrete{}".format(list(self.params[0]))


def sample_from(spec: DistributionSpec, rng: np.random.Generator) -> float:
    """One scalar draw from ``spec``."""
    return float(spec.sample(rng))


def _high_default():
    return DistributionSpec.discrete([2000, 3000, 4000, 5000])


def _low_default():
    return DistributionSpec.discrete([300, 600, 1200, 1500])


@dataclass(frozen=True)
class PopulationConfig:
    """Generator settings.

    When ``rmin_spec`` is given, each user's threshold is drawn from it and the
    savings are back-solved (``s = dU - r_min``) so the QoE model stays
    consistent; ``savings_spec`` is then ignored.
    """

    n_users: int = 1000
    high_bitrate_spec: DistributionSpec = field(default_factory=_high_default)
    low_bitrate_spec: DistributionSpec = field(default_factory=_low_default)
    gamma_spec: DistributionSpec = DistributionSpec("constant", (1.15,))
    delta_spec: DistributionSpec = DistributionSpec("constant", (1.2,))
    beta_spec: DistributionSpec = DistributionSpec("constant", (1.0,))
    savings_spec: DistributionSpec = DistributionSpec("constant", (0.0,))
    rmin_spec: DistributionSpec | None = None
    bounds: BitrateBounds = DEFAULT_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigurationError(f"n_users must be >= 1, got {self.n_users}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def replace(self, **changes) -> "PopulationConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, DistributionSpec):
                v = v.to_dict()
            elif isinstance(v, BitrateBounds):
                v = {"x_min": v.x_min, "x_max": v.x_max}
            out[f.name] = v
        return out


# Per-attribute acceptance tests used for rejection resampling.
def _ok_high(v, cur, bounds):
    return bounds.x_min < v <= bounds.x_max


def _ok_low(v, cur, bounds):
    return bounds.x_min <= v < cur["x_high"]


def _ok_gamma(v, cur, bounds):
    return v >= 1.0 and v * bounds.x_min < bounds.x_max


def _ok_delta(v, cur, bounds):
    return v > 0


def _ok_beta(v, cur, bounds):
    return 0.0 <= v <= 1.0


def _ok_nonneg(v, cur, bounds):
    return v >= 0


_ATTRS = (
    ("x_high", _ok_high),
    ("x_low", _ok_low),
    ("gamma", _ok_gamma),
    ("delta", _ok_delta),
    ("beta", _ok_beta),
    ("savings", _ok_nonneg),
    ("r_min", _ok_nonneg),
)


def _draw_valid(name, spec, check, cur, bounds, rng, user_id):
    for _ in range(MAX_REJECTIONS):
        v = float(spec.sample(rng))
        if math.isfinite(v) and check(v, cur, bounds):
            return v
    raise ConfigurationError(
        f"{name} law {spec} produced no valid value for user {user_id} "
        f"in {MAX_REJECTIONS} attempts"
    )


def _draw_user(user_id, specs: Mapping[str, DistributionSpec], base: Mapping, bounds, rng):
    cur = dict(base)
    for name, check in _ATTRS:
        spec = specs.get(name)
        if spec is None:
            continue
        cur[name] = _draw_valid(name, spec, check, cur, bounds, rng, user_id)
    if "r_min" in specs:
        du = float(_delta_utility_raw(cur["x_high"], cur["x_low"], cur["gamma"], bounds))
        cur["savings"] = du - cur.pop("r_min")
    else:
        cur.pop("r_min", None)
    return cur


class Population(Sequence):
    """Column-oriented population; indexing yields :class:`UserProfile`."""

    _COLS = ("x_high", "x_low", "gamma", "delta", "beta", "savings")

    def __init__(self, ids, x_high, x_low, gamma, delta, beta, savings,
                 bounds: BitrateBounds = DEFAULT_BOUNDS, labels=None):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.x_high = np.asarray(x_high, dtype=float)
        self.x_low = np.asarray(x_low, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.delta = np.asarray(delta, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.savings = np.asarray(savings, dtype=float)
        self.bounds = bounds
        n = len(self.ids)
        for name in self._COLS:
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column {name} has wrong shape")
        self.labels = None if labels is None else np.asarray(labels)

    @classmethod
    def from_profiles(cls, profiles, bounds: BitrateBounds = DEFAULT_BOUNDS, labels=None):
        if isinstance(profiles, Population):
            return profiles
        profiles = list(profiles)
        return cls(
            [p.id for p in profiles],
            *([getattr(p, c) for p in profiles] for c in cls._COLS),
            bounds=bounds,
            labels=labels,
        )

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.subset(np.arange(len(self))[i])
        return UserProfile(int(self.ids[i]), *(float(getattr(self, c)[i]) for c in self._COLS))

    def __eq__(self, other):
        if not isinstance(other, Population):
            return NotImplemented
        return (
            self.bounds == other.bounds
            and np.array_equal(self.ids, other.ids)
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in self._COLS)
        )

    def subset(self, idx) -> "Population":
        idx = np.asarray(idx, dtype=np.int64)
        return Population(
            self.ids[idx], *(getattr(self, c)[idx] for c in self._COLS),
            bounds=self.bounds,
            labels=None if self.labels is None else self.labels[idx],
        )

    @staticmethod
    def concat(parts: Sequence["Population"]) -> "Population":
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        labels = None
        if all(p.labels is not None for p in parts):
            labels = np.concatenate([p.labels for p in parts])
        return Population(
            np.concatenate([p.ids for p in parts]),
            *(np.concatenate([getattr(p, c) for p in parts]) for c in Population._COLS),
            bounds=parts[0].bounds,
            labels=labels,
        )

    def with_columns(self, **cols) -> "Population":
        kw = {c: cols.get(c, getattr(self, c)) for c in self._COLS}
        return Population(self.ids, **kw, bounds=self.bounds, labels=cols.get("labels", self.labels))

    @property
    def delta_utility(self) -> np.ndarray:
        return _delta_utility_raw(self.x_high, self.x_low, self.gamma, self.bounds)

    @property
    def r_min(self) -> np.ndarray:
        return np.maximum(self.delta_utility - self.savings, 0.0)

    @property
    def flexibility(self) -> np.ndarray:
        return self.x_high - self.x_low

    def violations(self) -> list[str]:
        out = []
        for p in self:
            out.extend(p.violations(self.bounds))
        return out

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            write_population_csv(self, fh)

    @classmethod
    def read_csv(cls, path, bounds: BitrateBounds = DEFAULT_BOUNDS) -> "Population":
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != POPULATION_COLUMNS:
                raise ValueError(f"unexpected population header {reader.fieldnames}")
            rows = list(reader)
        pop = cls(
            [int(r["user_id"]) for r in rows],
            *([float(r[c]) for r in rows] for c in cls._COLS),
            bounds=bounds,
        )
        errs = pop.violations()
        if errs:
            raise ValueError("invalid population file: " + "; ".join(errs[:5]))
        return pop


def fmt(v) -> str:
    """Stable text form for CSV cells."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(round(v, 12) + 0.0)


def write_population_csv(pop: Population, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POPULATION_COLUMNS)
    rmin = pop.r_min
    for i in range(len(pop)):
        w.writerow([fmt(pop.ids[i])] + [fmt(getattr(pop, c)[i]) for c in Population._COLS] + [fmt(rmin[i])])


def _config_specs(config: PopulationConfig) -> dict:
    specs = {
        "x_high": config.high_bitrate_spec,
        "x_low": config.low_bitrate_spec,
        "gamma": config.gamma_spec,
        "delta": config.delta_spec,
        "beta": config.beta_spec,
    }
    if config.rmin_spec is None:
        specs["savings"] = config.savings_spec
    else:
        specs["r_min"] = config.rmin_spec
    return specs


def generate_population(config: PopulationConfig = PopulationConfig()) -> Population:
    """Draw ``config.n_users`` valid profiles.

    User ``i`` consumes its own sub-stream of ``config.seed``, so the result
    depends only on the configuration. Draws that break a profile invariant
    (``x_low >= x_high``, ``delta <= 0``, ...) are redrawn.
    """
    specs = _config_specs(config)
    rows = []
    for i in range(config.n_users):
        rng = stream(config.seed, "population", i)
        rows.append(_draw_user(i, specs, {}, config.bounds, rng))
    return Population(
        np.arange(config.n_users),
        *([r[c] for r in rows] for c in Population._COLS),
        bounds=config.bounds,
    )


def partition_population(
    profiles,
    k: int,
    group_a_overrides: Mapping[str, DistributionSpec],
    group_b_overrides: Mapping[str, DistributionSpec],
    seed: int = 0,
) -> tuple[Population, Population]:
    """Split into the first ``k`` users (group A) and the rest (group B).

    Each group has the listed attributes redrawn from its override laws.
    Overrides may name ``x_high``, ``x_low``, ``gamma``, ``delta``, ``beta``,
    ``savings`` or ``r_min``; an ``r_min`` override back-solves savings.
    """
    pop = Population.from_profiles(profiles)
    n = len(pop)
    if not 0 <= k <= n:
        raise ConfigurationError(f"k must lie in [0, {n}], got {k}")
    known = {name for name, _ in _ATTRS}
    for ov in (group_a_overrides, group_b_overrides):
        bad = set(ov) - known
        if bad:
            raise ConfigurationError(f"unknown override attributes {sorted(bad)}")

    cols = {c: getattr(pop, c).copy() for c in Population._COLS}
    for i in range(n):
        overrides = group_a_overrides if i < k else group_b_overrides
        if not overrides:
            continue
        base = {c: cols[c][i] for c in Population._COLS}
        rng = stream(seed, "partition", int(pop.ids[i]))
        drawn = _draw_user(int(pop.ids[i]), overrides, base, pop.bounds, rng)
        for c in Population._COLS:
            cols[c][i] = drawn[c]
    labels = np.array(["A"] * k + ["B"] * (n - k))
    full = Population(pop.ids, **cols, bounds=pop.bounds, labels=labels)
    return full.subset(np.arange(k)), full.subset(np.arange(k, n))
