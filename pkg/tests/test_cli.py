import json
import math

import pytest

from lpsim import runner
from lpsim.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main
from lpsim.runner import ConfigError, execute, parse_override, plan, point_seeds, resolve_config


def test_resolve_layers_and_unknown_keys():
    cfg = resolve_config("scaling", {"logical_state": "+"}, {"seed": 5})
    assert cfg["logical_state"] == "+" and cfg["seed"] == 5
    with pytest.raises(ConfigError):
        resolve_config("scaling", {"bogus": 1})
    with pytest.raises(ConfigError):
        resolve_config("nope")
    with pytest.raises(ConfigError):
        resolve_config("scaling", {"experiment": "ipea-sensing"})
    with pytest.raises(ConfigError):
        resolve_config("ipea-success", overrides={"repeats": [2]})
    with pytest.raises(ConfigError):
        resolve_config("ipea-sensing", overrides={"scenario": "mystery"})


def test_full_grids_are_denser():
    assert len(plan("scaling", resolve_config("scaling", full=True))) > len(plan("scaling", resolve_config("scaling")))


def test_parse_override_types():
    assert parse_override("m=[3, 4]") == ("m", [3, 4])
    assert parse_override("prune=1e-9") == ("prune", 1e-9)
    assert parse_override("scenario=noisy-ancillas") == ("scenario", "noisy-ancillas")
    with pytest.raises(ConfigError):
        parse_override("novalue")


def test_plan_sizes():
    cfg = resolve_config("interaction-length")
    assert len(plan("interaction-length", cfg)) == 15
    assert len(cfg["depths"]) == 12
    cfg = resolve_config("kitaev-fidelity", overrides={"fidelity_points": 2, "angles": [0.05, 0.15]})
    assert len(plan("kitaev-fidelity", cfg)) == 4


def test_point_seeds_are_stable():
    assert point_seeds(7, 3) == point_seeds(7, 3)
    assert point_seeds(7, 4)[:3] == point_seeds(7, 3)
    assert len(set(point_seeds(7, 10))) == 10


def test_execute_writes_outputs_and_is_deterministic(tmp_path):
    cfg = resolve_config("scaling", overrides={"p": [1e-3, 2e-3, 4e-3, 8e-3]})
    a = execute("scaling", cfg, tmp_path / "a", make_plot=True)
    b = execute("scaling", cfg, tmp_path / "b")
    assert (tmp_path / "a" / "data.csv").read_text() == (tmp_path / "b" / "data.csv").read_text()
    assert (tmp_path / "a" / "plot.svg").read_text().startswith("<svg")
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    assert meta["status"] == "complete" and meta["config_hash"] == runner.config_hash(cfg)
    assert abs(meta["summary"]["fit"]["exponent"] - 3) < 0.1
    assert a.rows == b.rows


def test_kitaev_reruns_bit_identical(tmp_path):
    cfg = resolve_config("kitaev-fidelity", overrides={
        "fidelity_points": 1, "fidelity_lo": 1e-2, "fidelity_hi": 1e-2, "angles": [0.25],
        "ec_trajectories": 10, "syndrome_mode": "ideal"})
    a = execute("kitaev-fidelity", cfg, tmp_path / "a")
    b = execute("kitaev-fidelity", cfg, tmp_path / "b")
    assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()
    assert a.summary == b.summary


def test_budget_stops_early(tmp_path):
    cfg = resolve_config("scaling")
    res = execute("scaling", cfg, tmp_path, budget=0.0)
    assert res.partial and res.completed == 0
    assert json.loads((tmp_path / "meta.json").read_text())["status"] == "partial"


def test_parallel_matches_serial(tmp_path):
    cfg = resolve_config("scaling", overrides={"p": [1e-3, 3e-3, 1e-2, 3e-2]})
    serial = execute("scaling", cfg)
    par = execute("scaling", {**cfg, "workers": 2})
    assert serial.rows == par.rows


def test_cli_dry_run_and_errors(capsys, tmp_path):
    assert main(["interaction-length", "--dry-run"]) == EXIT_OK
    assert "15 points" in capsys.readouterr().out
    assert main(["scaling", "--set", "colour=blue"]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    assert main(["scaling", "--config", str(bad)]) == EXIT_CONFIG


def test_cli_run_with_config_file(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("p: [0.001, 0.002, 0.004, 0.008]\n")
    code = main(["scaling", "--config", str(conf), "--out", str(tmp_path), "--tag", "t1", "--plot", "-q"])
    assert code == EXIT_OK
    out = tmp_path / "scaling" / "t1"
    assert (out / "data.csv").exists() and (out / "plot.svg").exists()
    assert json.loads((out / "meta.json").read_text())["config"]["p"][0] == 0.001


def test_cli_partial_exit(tmp_path):
    assert main(["scaling", "--out", str(tmp_path), "--tag", "x", "--budget", "0", "-q"]) == EXIT_PARTIAL


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 6


def test_csv_round_trips_floats():
    text = runner.rows_to_csv([{"a": 0.1 + 0.2, "b": math.inf}])
    assert "0.30000000000000004" in text and "inf" in text
