import json
import subprocess
import sys

import pytest

from greenstream.cli import main
from greenstream.config import SCENARIOS, apply_override, expand_grid, validate_config

FAST = ["--set", "population.n_users=60", "--replicates", "2"]


def _run(tmp_path, *args):
    out = tmp_path / "out"
    rc = main([*args, "--out", str(out)])
    return rc, out


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_every_scenario_runs_and_reproduces(tmp_path, scenario):
    extra = {"learn": ["--set", "params.m_grid=[5, 10]"], "group-targeting": ["--set", "params.k=10"]}.get(scenario, [])
    rc1 = main([scenario, *FAST, *extra, "--seed", "7", "--out", str(tmp_path / "a")])
    rc2 = main([scenario, *FAST, *extra, "--seed", "7", "--out", str(tmp_path / "b")])
    assert rc1 == rc2 == 0
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    meta = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert meta["scenario"] == scenario and meta["seed"] == 7
    assert meta["config"]["population"]["n_users"] == 60


def test_generate_population_rows(tmp_path):
    rc, out = _run(tmp_path, "generate-population", "--seed", "7")
    assert rc == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 1001
    assert lines[0] == "user_id,x_high,x_low,gamma,delta,beta,savings,r_min"


def test_sweep_incentives_argmax_at_smallest_offer(tmp_path):
    rc, out = _run(tmp_path, "sweep-incentives", "--seed", "7", "--replicates", "3")
    assert rc == 0
    rows = (out / "results.csv").read_text().splitlines()
    header = rows[0].split(",")
    flagged = [r.split(",") for r in rows[1:] if r.split(",")[header.index("is_argmax")] == "1"]
    assert len(flagged) == 1 and float(flagged[0][header.index("a")]) == 18.0


def test_manifest_reruns_identically(tmp_path):
    rc = main(["mean-vs-individual", *FAST, "--seed", "3", "--out", str(tmp_path / "a")])
    assert rc == 0
    manifest = tmp_path / "a" / "manifest.json"
    rc = main(["mean-vs-individual", "--config", str(manifest), "--out", str(tmp_path / "b")])
    assert rc == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_malformed_config_exits_2_without_outputs(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: [unclosed\n")
    rc, out = _run(tmp_path, "sweep-incentives", "--config", str(bad))
    assert rc == 2
    assert not out.exists()
    rc, out = _run(tmp_path, "sweep-incentives", "--config", str(tmp_path / "missing.yaml"))
    assert rc == 2


def test_invalid_config_exits_3(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("c_admin: -1\nreplicates: 0\n")
    rc, out = _run(tmp_path, "sweep-incentives", "--config", str(cfg))
    assert rc == 3
    err = capsys.readouterr().err
    assert "c_admin" in err and "replicates" in err
    assert not out.exists()


def test_group_size_checked_against_population():
    cfg, errors = validate_config({"scenario": "group-targeting", "population": {"n_users": 50}})
    assert cfg is None and any(e.startswith("params.k") for e in errors)


def test_scenario_mismatch_is_parse_error(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("scenario: learn\n")
    rc, _ = _run(tmp_path, "altruism", "--config", str(cfg))
    assert rc == 2


def test_runtime_error_exits_1(tmp_path):
    # a constant negative delta cannot satisfy the generator's checks
    rc, out = _run(tmp_path, "generate-population", "--set", "population.delta_spec=-1",
                   "--set", "population.n_users=5")
    assert rc == 1
    assert not (out / "results.csv").exists()


def test_validation_reports_every_error_with_paths():
    cfg, errors = validate_config({
        "scenario": "educate",
        "c_admin": -1,
        "seed": -3,
        "population": {"n_users": 0, "gamma_spec": {"kind": "normal", "mu": 1}},
        "params": {"lever": "magic", "grid": {"kind": "uniform", "a": [1, 2], "b": [3], "paired": True}},
    })
    assert cfg is None
    joined = "\n".join(errors)
    for path in ("c_admin", "seed", "population.n_users", "population.gamma_spec", "params.lever"):
        assert path in joined
    assert any("nonnegative" in e for e in errors if e.startswith("c_admin"))


def test_inverted_uniform_warns_and_normalizes():
    cfg, errors = validate_config({"scenario": "learn", "params": {"offer_law": {"kind": "uniform", "a": 5, "b": 4}}})
    assert not errors
    assert cfg.params["offer_law"].params == (4.0, 5.0)
    assert any("a > b" in w for w in cfg.warnings)


def test_education_defaults_echoed():
    cfg, errors = validate_config("scenario: educate\n")
    assert not errors
    d = cfg.to_dict()
    assert d["params"]["baseline"] == {"kind": "uniform", "a": 10, "b": 100}
    assert d["params"]["savings"] == {"kind": "uniform", "a": 2, "b": 5}
    assert d["c_admin"] == 0.04


def test_grid_expansion():
    assert len(expand_grid({"kind": "normal", "mu": [1, 2, 3], "sigma_sq": [1, 4]})) == 6
    paired = expand_grid({"kind": "uniform", "a": [0, 1], "b": [2, 3], "paired": True})
    assert paired == [{"kind": "uniform", "a": 0, "b": 2}, {"kind": "uniform", "a": 1, "b": 3}]


def test_override_parsing():
    data = {}
    apply_override(data, "population.delta_spec.value=3")
    apply_override(data, "params.m_grid=[1, 2]")
    assert data == {"population": {"delta_spec": {"value": 3}}, "params": {"m_grid": [1, 2]}}


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "greenstream.cli", "altruism", *FAST, "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "results.csv").exists()
