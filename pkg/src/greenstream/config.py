"""Scenario configuration: parsing, defaults and validation.

A config is a YAML (or JSON) mapping::

    scenario: sweep-incentives
    seed: 7
    replicates: 20
    c_admin: 0.04
    population: {delta_spec: {kind: constant, value: 100}}
    params: {grid: {kind: uniform, a: [18, 20], b: [22, 24], paired: true}}

Validation collects every problem with its dotted field path instead of
stopping at the first one.
"""

from __future__ import annotations

import copy
import itertools
import math
import warnings
from dataclasses import dataclass, field

import yaml

from .population import DistributionSpec, PopulationConfig
from .qoe import BitrateBounds

SCENARIOS = (
    "sweep-incentives",
    "sweep-users",
    "group-targeting",
    "mean-vs-individual",
    "altruism",
    "educate",
    "learn",
    "generate-population",
)

TOP_KEYS = {"scenario", "seed", "replicates", "c_admin", "population", "params"}

_LAW_FIELDS = ("high_bitrate_spec", "low_bitrate_spec", "gamma_spec", "delta_spec",
               "beta_spec", "savings_spec", "rmin_spec")


def _steps(start, stop, step):
    n = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(n + 1)]


SCENARIO_DEFAULTS = {
    "sweep-incentives": {
        "grid": {"kind": "uniform", "a": _steps(18, 38, 2), "b": _steps(22, 42, 2), "paired": True},
    },
    "sweep-users": {
        "offer_law": {"kind": "normal", "mu": 0.1, "sigma_sq": 0.05},
        "k_grid": None,
        "selection": "random",
    },
    "group-targeting": {
        "k": 100,
        "group_a": {"rmin_spec": {"kind": "normal", "mu": 30, "sigma_sq": 25}},
        "group_b": {"rmin_spec": {"kind": "normal", "mu": 3, "sigma_sq": 0.25}},
        "grid": {"kind": "normal", "mu": _steps(1, 60, 1), "sigma_sq": 4},
    },
    "mean-vs-individual": {
        "grid": {"kind": "uniform", "a": 10, "b": _steps(10, 40, 2)},
    },
    "altruism": {
        "beta_grid": _steps(0, 1, 0.1),
        "gamma_grid": _steps(1.0, 1.5, 0.1),
    },
    "educate": {
        "baseline": {"kind": "uniform", "a": 10, "b": 100},
        "educated": {"kind": "uniform", "a": 5, "b": 40},
        "savings": {"kind": "uniform", "a": 2, "b": 5},
        "grid": {"kind": "uniform", "a": 0, "b": _steps(10, 200, 10)},
        "lever": "gamma",
    },
    "learn": {
        "offer_law": {"kind": "uniform", "a": 0, "b": 10},
        "m_grid": [5, 10, 20, 40, 80],
        "ridge": 0.0,
    },
    "generate-population": {},
}

# Group overrides are written with PopulationConfig names and mapped to profile columns.
OVERRIDE_COLUMNS = {
    "high_bitrate_spec": "x_high",
    "low_bitrate_spec": "x_low",
    "gamma_spec": "gamma",
    "delta_spec": "delta",
    "beta_spec": "beta",
    "savings_spec": "savings",
    "rmin_spec": "r_min",
}


class ConfigParseError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    replicates: int
    c_admin: float
    population: PopulationConfig
    params: dict
    raw_params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        """Fully resolved config; feeding it back reproduces the run."""
        pop = self.population.to_dict()
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "replicates": self.replicates,
            "c_admin": self.c_admin,
            "population": pop,
            "params": copy.deepcopy(self.raw_params),
        }


def parse_text(text: str) -> dict:
    """YAML/JSON text to a mapping. Raises ConfigParseError."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"cannot parse config: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a mapping at the top level")
    # a run manifest can be used as a config
    if isinstance(data.get("config"), dict):
        data = data["config"]
    return data


def apply_override(data: dict, assignment: str) -> None:
    """Apply one ``dotted.key=value`` override; the value is parsed as YAML."""
    key, sep, value = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigParseError(f"override {assignment!r} is not of the form key=value")
    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"override {assignment!r}: {exc}") from None
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigParseError(f"override {assignment!r}: {p} is not a mapping")
        node = nxt
    node[parts[-1]] = parsed


class _Errors:
    def __init__(self):
        self.items: list[str] = []
        self.warnings: list[str] = []

    def add(self, path, msg):
        self.items.append(f"{path}: {msg}")

    def law(self, path, value, allow_scalar=True):
        """DistributionSpec from a dict (or a bare number as a constant)."""
        if allow_scalar and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = {"kind": "constant", "value": value}
        if not isinstance(value, dict):
            self.add(path, "expected a distribution mapping with a 'kind' field")
            return None
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                spec = DistributionSpec.from_dict(value)
            for w in caught:
                self.warnings.append(f"{path}: {w.message}")
            return spec
        except KeyError as exc:
            self.add(path, f"missing parameter {exc.args[0]!r}")
        except (TypeError, ValueError) as exc:
            self.add(path, str(exc))
        return None


def expand_grid(value) -> list[dict]:
    """Expand a grid shorthand into a list of law mappings.

    A list is taken as-is. A mapping whose parameters are lists expands to
    their Cartesian product, or to an element-wise pairing with
    ``paired: true``.
    """
    if isinstance(value, list):
        return value
    if not isinstance(value, dict):
        raise ValueError("grid must be a list of laws or a mapping with list-valued parameters")
    spec = dict(value)
    paired = bool(spec.pop("paired", False))
    kind = spec.pop("kind", None)
    keys = list(spec)
    lists = [v if isinstance(v, list) else [v] for v in spec.values()]
    if paired:
        sizes = {len(v) for v in lists if len(v) != 1}
        if len(sizes) > 1:
            raise ValueError(f"paired grid parameters differ in length: {sorted(sizes)}")
        n = sizes.pop() if sizes else 1
        combos = [tuple(v[i] if len(v) > 1 else v[0] for v in lists) for i in range(n)]
    else:
        combos = list(itertools.product(*lists))
    return [{"kind": kind, **dict(zip(keys, c))} for c in combos]


def _grid(err: _Errors, path, value):
    try:
        items = expand_grid(value)
    except ValueError as exc:
        err.add(path, str(exc))
        return None
    if not items:
        err.add(path, "grid is empty")
        return None
    laws = [err.law(f"{path}[{i}]", d, allow_scalar=False) for i, d in enumerate(items)]
    return None if any(l is None for l in laws) else laws


def _int(err, path, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        err.add(path, f"expected an integer, got {value!r}")
        return None
    if lo is not None and value < lo:
        err.add(path, f"must be >= {lo}, got {value}")
        return None
    return value


def _float(err, path, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        err.add(path, f"expected a finite number, got {value!r}")
        return None
    if lo is not None and value < lo:
        err.add(path, f"must be >= {lo}, got {value}")
        return None
    return float(value)


def _float_list(err, path, value, lo=None, hi=None):
    if not isinstance(value, list) or not value:
        err.add(path, "expected a non-empty list of numbers")
        return None
    out = []
    for i, v in enumerate(value):
        f = _float(err, f"{path}[{i}]", v)
        if f is None:
            return None
        if (lo is not None and f < lo) or (hi is not None and f > hi):
            err.add(f"{path}[{i}]", f"must lie in [{lo}, {hi}], got {f}")
            return None
        out.append(f)
    return out


def _population(err: _Errors, raw, seed):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        err.add("population", "expected a mapping")
        return None
    known = {"n_users", "bounds", "seed", *_LAW_FIELDS}
    for k in sorted(set(raw) - known):
        err.add(f"population.{k}", "unknown field")
    kw = {}
    if "n_users" in raw:
        kw["n_users"] = _int(err, "population.n_users", raw["n_users"], lo=1)
    for name in _LAW_FIELDS:
        if name in raw:
            if name == "rmin_spec" and raw[name] is None:
                kw[name] = None
                continue
            kw[name] = err.law(f"population.{name}", raw[name])
    if "bounds" in raw:
        b = raw["bounds"]
        try:
            kw["bounds"] = BitrateBounds(float(b["x_min"]), float(b["x_max"]))
        except (TypeError, KeyError, ValueError) as exc:
            err.add("population.bounds", f"invalid bounds: {exc}")
            kw["bounds"] = None
    kw["seed"] = seed if raw.get("seed") is None else _int(err, "population.seed", raw["seed"], lo=0)
    if any(v is None for k, v in kw.items() if k != "rmin_spec"):
        return None
    try:
        return PopulationConfig(**kw)
    except ValueError as exc:
        err.add("population", str(exc))
        return None


def _overrides(err, path, raw):
    if not isinstance(raw, dict):
        err.add(path, "expected a mapping of attribute laws")
        return None
    out = {}
    for k, v in raw.items():
        col = OVERRIDE_COLUMNS.get(k)
        if col is None:
            err.add(f"{path}.{k}", f"unknown attribute; expected one of {sorted(OVERRIDE_COLUMNS)}")
            continue
        out[col] = err.law(f"{path}.{k}", v)
    return None if any(v is None for v in out.values()) else out


def _params(err: _Errors, scenario, raw):
    p = {}
    path = "params"
    if scenario in ("sweep-incentives", "mean-vs-individual"):
        p["grid"] = _grid(err, f"{path}.grid", raw.get("grid"))
    elif scenario == "sweep-users":
        p["offer_law"] = err.law(f"{path}.offer_law", raw.get("offer_law"))
        k_grid = raw.get("k_grid")
        if k_grid is not None:
            if not isinstance(k_grid, list) or not k_grid:
                err.add(f"{path}.k_grid", "expected a non-empty list of integers")
            else:
                k_grid = [_int(err, f"{path}.k_grid[{i}]", k, lo=0) for i, k in enumerate(k_grid)]
        p["k_grid"] = k_grid
        sel = raw.get("selection")
        if sel not in ("random", "ascending_rmin"):
            err.add(f"{path}.selection", f"must be 'random' or 'ascending_rmin', got {sel!r}")
        p["selection"] = sel
    elif scenario == "group-targeting":
        p["k"] = _int(err, f"{path}.k", raw.get("k"), lo=0)
        p["group_a"] = _overrides(err, f"{path}.group_a", raw.get("group_a"))
        p["group_b"] = _overrides(err, f"{path}.group_b", raw.get("group_b"))
        p["grid"] = _grid(err, f"{path}.grid", raw.get("grid"))
    elif scenario == "altruism":
        p["beta_grid"] = _float_list(err, f"{path}.beta_grid", raw.get("beta_grid"), 0.0, 1.0)
        p["gamma_grid"] = _float_list(err, f"{path}.gamma_grid", raw.get("gamma_grid"), 1.0)
    elif scenario == "educate":
        for k in ("baseline", "educated", "savings"):
            p[k] = err.law(f"{path}.{k}", raw.get(k))
        p["grid"] = _grid(err, f"{path}.grid", raw.get("grid"))
        lever = raw.get("lever")
        if lever not in ("gamma", "savings", "bitrate"):
            err.add(f"{path}.lever", f"must be gamma, savings or bitrate, got {lever!r}")
        p["lever"] = lever
    elif scenario == "learn":
        p["offer_law"] = err.law(f"{path}.offer_law", raw.get("offer_law"))
        m_grid = raw.get("m_grid")
        if not isinstance(m_grid, list) or not m_grid:
            err.add(f"{path}.m_grid", "expected a non-empty list of positive integers")
        else:
            m_grid = [_int(err, f"{path}.m_grid[{i}]", m, lo=1) for i, m in enumerate(m_grid)]
        p["m_grid"] = m_grid
        p["ridge"] = _float(err, f"{path}.ridge", raw.get("ridge"), lo=0.0)
    for k in sorted(set(raw) - set(SCENARIO_DEFAULTS[scenario])):
        err.add(f"{path}.{k}", "unknown parameter")
    return p


def validate_config(data) -> tuple[ScenarioConfig | None, list[str]]:
    """Validate a config mapping (or YAML/JSON text).

    Returns ``(config, [])`` on success, ``(None, errors)`` otherwise. Text
    that does not parse yields a single error.
    """
    if isinstance(data, str):
        try:
            data = parse_text(data)
        except ConfigParseError as exc:
            return None, [str(exc)]
    err = _Errors()
    for k in sorted(set(data) - TOP_KEYS):
        err.add(k, "unknown field")
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        err.add("scenario", f"must be one of {', '.join(SCENARIOS)}, got {scenario!r}")
    seed = _int(err, "seed", data.get("seed", 0), lo=0)
    if seed is not None and seed >= 2**64:
        err.add("seed", "must fit in 64 bits")
        seed = None
    replicates = _int(err, "replicates", data.get("replicates", 20), lo=1)
    c_admin = data.get("c_admin", 0.04)
    if isinstance(c_admin, (int, float)) and not isinstance(c_admin, bool) and c_admin < 0:
        err.add("c_admin", f"c_admin must be nonnegative, got {c_admin}")
        c_admin = None
    else:
        c_admin = _float(err, "c_admin", c_admin)
    pop = _population(err, data.get("population"), seed if seed is not None else 0)

    params, raw_params = {}, {}
    if scenario in SCENARIOS:
        raw = data.get("params") or {}
        if not isinstance(raw, dict):
            err.add("params", "expected a mapping")
        else:
            raw_params = {**copy.deepcopy(SCENARIO_DEFAULTS[scenario]), **raw}
            params = _params(err, scenario, raw_params)
    if scenario == "group-targeting" and pop is not None and isinstance(params.get("k"), int):
        if params["k"] > pop.n_users:
            err.add("params.k", f"group size {params['k']} exceeds population.n_users={pop.n_users}")
    if err.items:
        return None, err.items
    cfg = ScenarioConfig(scenario, seed, replicates, c_admin, pop, params, raw_params, err.warnings)
    return cfg, []
