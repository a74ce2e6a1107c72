"""Command-line runner: one subcommand per scenario.

Exit codes: 0 success, 1 runtime error, 2 config parse error, 3 validation error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .altruism import mean_threshold_surface
from .config import (
    SCENARIOS,
    ConfigParseError,
    ScenarioConfig,
    apply_override,
    parse_text,
    validate_config,
)
from .education import education_experiment
from .learning import error_vs_samples
from .policy import (
    compare_group_targeting,
    compare_mean_vs_individual,
    sweep_distribution,
    sweep_subset_size,
)
from .population import fmt, generate_population, partition_population, write_population_csv

EXIT_OK, EXIT_RUNTIME, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3


def _sweep_incentives(cfg: ScenarioConfig, pop, fh):
    p = cfg.params
    sweep_distribution(pop, p["grid"], cfg.c_admin, cfg.seed, cfg.replicates).write_csv(fh)


def _sweep_users(cfg, pop, fh):
    p = cfg.params
    sweep_subset_size(pop, p["offer_law"], p["k_grid"], p["selection"], cfg.c_admin, cfg.seed,
                      cfg.replicates).write_csv(fh)


def _group_targeting(cfg, pop, fh):
    p = cfg.params
    a, b = partition_population(pop, p["k"], p["group_a"], p["group_b"], seed=cfg.seed)
    compare_group_targeting(a, b, p["grid"], cfg.c_admin, cfg.seed, cfg.replicates).write_csv(fh)


def _mean_vs_individual(cfg, pop, fh):
    p = cfg.params
    compare_mean_vs_individual(pop, p["grid"], cfg.c_admin, cfg.seed, cfg.replicates).write_csv(fh)


def _altruism(cfg, pop, fh):
    p = cfg.params
    surf = mean_threshold_surface(pop, p["beta_grid"], p["gamma_grid"], pop.bounds)
    fh.write("beta,gamma,mean_r_beta_min\n")
    for i, b in enumerate(p["beta_grid"]):
        for j, g in enumerate(p["gamma_grid"]):
            fh.write(f"{fmt(b)},{fmt(g)},{fmt(surf[i, j])}\n")


def _educate(cfg, pop, fh):
    p = cfg.params
    res = education_experiment(pop, p["baseline"], p["educated"], p["grid"], p["savings"], cfg.c_admin,
                               cfg.seed, cfg.replicates, p["lever"])
    fh.write("offer_grid_value,ratio_baseline,ratio_educated\n")
    for level, rb, re, *_ in res.rows():
        fh.write(f"{fmt(level)},{_cell(rb)},{_cell(re)}\n")


def _cell(v):
    return "" if v is None else fmt(v)


def _learn(cfg, pop, fh):
    p = cfg.params
    error_vs_samples(pop, p["offer_law"], p["m_grid"], cfg.replicates, cfg.seed, p["ridge"]).write_csv(fh)


def _generate(cfg, pop, fh):
    write_population_csv(pop, fh)


RUNNERS = {
    "sweep-incentives": _sweep_incentives,
    "sweep-users": _sweep_users,
    "group-targeting": _group_targeting,
    "mean-vs-individual": _mean_vs_individual,
    "altruism": _altruism,
    "educate": _educate,
    "learn": _learn,
    "generate-population": _generate,
}


def render(cfg: ScenarioConfig) -> str:
    """Run the scenario and return the results CSV text."""
    pop = generate_population(cfg.population)
    buf = io.StringIO()
    RUNNERS[cfg.scenario](cfg, pop, buf)
    return buf.getvalue()


def manifest(cfg: ScenarioConfig) -> dict:
    return {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "warnings": list(cfg.warnings),
        "outputs": ["results.csv"],
        "versions": {"greenstream": __version__, "numpy": np.__version__},
    }


def write_outputs(out_dir, csv_text: str, meta: dict) -> None:
    """Write both files into a staging directory, then move them into place."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        (stage / "results.csv").write_text(csv_text, encoding="utf-8", newline="")
        (stage / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for name in ("results.csv", "manifest.json"):
            os.replace(stage / name, out / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def run_scenario(cfg: ScenarioConfig, out_dir) -> int:
    csv_text = render(cfg)
    write_outputs(out_dir, csv_text, manifest(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="greenstream", description="Green streaming incentive experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="scenario", required=True, metavar="SCENARIO")
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", type=Path, help="YAML or JSON scenario file (a manifest also works)")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
        sp.add_argument("--replicates", type=int, help="offer-draw replicates per grid point")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. --set population.n_users=200")
    return ap


def _load(args) -> dict:
    data = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(f"cannot read {args.config}: {exc.strerror}") from None
        data = parse_text(text)
    if data.get("scenario", args.scenario) != args.scenario:
        raise ConfigParseError(f"config is for scenario {data['scenario']!r}, not {args.scenario!r}")
    data["scenario"] = args.scenario
    for ov in args.overrides:
        apply_override(data, ov)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.replicates is not None:
        data["replicates"] = args.replicates
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = _load(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    cfg, errors = validate_config(data)
    if errors:
        for e in errors:
            print(f"invalid: {e}", file=sys.stderr)
        return EXIT_INVALID
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        run_scenario(cfg, args.out)
    except Exception as exc:  # runtime failures map to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.out / 'results.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
