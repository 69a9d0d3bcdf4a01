import json

import pytest

from sbg import solvers
from sbg.cli import main
from sbg.errors import NumericError
from sbg.games import FiniteGame


@pytest.fixture
def game_path(tmp_path):
    path = tmp_path / "g.json"
    FiniteGame.from_table([[1, 0.5], [0.2, 0.8]]).save(path)
    return str(path)


def test_gen_game_round_trip(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["gen-game", "--seed", "3", "--n", "4", "--m", "2", "--out", str(out)]) == 0
    assert FiniteGame.load(out).shape == (4, 2)
    assert main(["gen-game", "--seed", "3", "--n", "4", "--m", "2"]) == 0
    assert capsys.readouterr().out == out.read_text()


def test_solve_outputs(game_path, tmp_path, capsys):
    log = tmp_path / "log.csv"
    assert main(["solve", "--game", game_path, "--out", str(log), "--noise", "0.01"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["correct"] and doc["x_index"] == 0
    lines = log.read_text().splitlines()
    assert lines[0] == "t,x_index,y_index,u_tilde"
    assert len(lines) == doc["rounds_used"] + 1


def test_bounds_keys(game_path, capsys):
    assert main(["bounds", "--game", game_path, "--noise", "0.1", "--eps", "0.5", "--budget", "100000"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert list(doc) == ["h_star", "h_one", "h_two", "t_delta", "delta_T", "k_eps", "delta_T_eps", "delta_opt"]
    assert doc["h_star"] == pytest.approx(95.667, abs=1e-3)
    assert doc["t_delta"] == pytest.approx(7832.76, abs=0.01)


def test_exit_codes(game_path, tmp_path, capsys):
    assert main(["solve", "--game", str(tmp_path / "nope.json")]) == 2
    assert main(["solve", "--game", game_path, "--delta", "1.5"]) == 2
    assert main(["bounds", "--game", game_path, "--delta", "0"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["experiment"]) == 2


def test_numeric_failure_exit_code(game_path, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericError("covariance is not positive definite")

    monkeypatch.setattr(solvers, "m_gp_lucb", broken)
    assert main(["solve", "--game", game_path]) == 3


def test_config_supplies_defaults(game_path, tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('algorithm = "gp_se"\nbudget = 100\nseed = 5\n')
    assert main(["solve", "--game", game_path, "--config", str(cfg), "--out", "-"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.err)["rounds_used"] == 99
    cfg.write_text("unknown_key = 1\n")
    assert main(["solve", "--game", game_path, "--config", str(cfg)]) == 2


def test_experiment_command(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text("instances = 2\nruns = 2\nround_cap = 1000\n")
    out = tmp_path / "res"
    assert main(["experiment", "--config", str(cfg), "--out", str(out), "--seed", "1"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_runs"] == 4
    assert (out / "runs.csv").read_text().startswith("instance,run,algorithm,")


def test_spitfire_command(tmp_path):
    out = tmp_path / "s.csv"
    argv = ["spitfire", "--k-eps", "4", "--runs", "2", "--round-cap", "200", "--seed", "2", "--out", str(out)]
    assert main(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "run,k_eps,eps_theoretical,eps_hat,rounds,terminated"
    assert len(lines) == 3
