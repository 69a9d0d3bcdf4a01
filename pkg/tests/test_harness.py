import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbg.errors import ParameterError
from sbg.games import FiniteGame
from sbg.harness import (
    SUMMARY_KEYS,
    EpsPoint,
    ExperimentConfig,
    RunRecord,
    continuous_gp_instance,
    emit,
    eps_table,
    load_config,
    read_records,
    run_experiment,
    summarize,
    write_eps_series,
    write_records,
)
from sbg.gp import KernelSpec

TOY = FiniteGame.from_table([[1, 0.5], [0.2, 0.8]])


@pytest.fixture
def toy_path(tmp_path):
    path = tmp_path / "toy.json"
    TOY.save(path)
    return str(path)


def test_noiseless_single_run(toy_path):
    cfg = ExperimentConfig(source="file", game_path=toy_path, noise=1e-8, runs=1, eps=0.0)
    records, summary = run_experiment(cfg)
    assert len(records) == 1 and records[0].terminated and records[0].correct
    assert summary["pct_opt"] == 100.0 and summary["pct_end"] == 100.0


def test_gp_se_rounds(toy_path):
    cfg = ExperimentConfig(source="file", game_path=toy_path, algorithm="gp_se", budget=100, runs=5)
    records, _ = run_experiment(cfg)
    assert [r.rounds_used for r in records] == [99] * 5


def test_random_instances_are_nondegenerate_and_reproducible():
    cfg = ExperimentConfig(instances=3, runs=2, round_cap=2000)
    a, sa = run_experiment(cfg)
    b, sb = run_experiment(cfg)
    assert a == b and sa == sb
    assert [(r.instance, r.run) for r in a] == [(i, j) for i in range(3) for j in range(2)]
    buf_a, buf_b = io.StringIO(), io.StringIO()
    write_records(a, buf_a)
    write_records(b, buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()


def test_workers_do_not_change_results():
    cfg = ExperimentConfig(instances=2, runs=2, round_cap=1000)
    assert run_experiment(cfg)[0] == run_experiment(cfg.replace(workers=2))[0]


def test_summary_metrics():
    recs = [
        RunRecord(0, 0, "m_gp_lucb", 10, True, 0, 0, True, 0.1),
        RunRecord(0, 1, "m_gp_lucb", 30, True, 1, 0, False, 0.3),
        RunRecord(0, 2, "m_gp_lucb", 100, False, 0, 0, True, 0.2),
        RunRecord(0, 3, "m_gp_lucb", 0, False, -1, -1, error="NumericError: boom"),
    ]
    s = summarize(recs)
    assert s == {"t_delta_mean": 20.0, "pct_end": pytest.approx(200 / 3), "pct_opt": pytest.approx(200 / 3),
                 "eps_hat_mean": pytest.approx(0.2), "n_runs": 3, "n_failed": 1}
    assert summarize([])["n_runs"] == 0


def test_config_validation(tmp_path):
    with pytest.raises(ParameterError):
        ExperimentConfig(runs=0)
    with pytest.raises(ParameterError):
        ExperimentConfig(source="file", game_path=str(tmp_path / "missing.json"))
    with pytest.raises(ParameterError):
        ExperimentConfig(algorithm="gp_se")
    path = tmp_path / "c.toml"
    path.write_text('[solver]\ndelta = 0.2\nround_cap = 500\n[run]\nruns = 3\nseed = 9\n')
    cfg = load_config(path, seed=4)
    assert (cfg.delta, cfg.round_cap, cfg.runs, cfg.seed) == (0.2, 500, 3, 4)
    path.write_text("bogus = 1\n")
    with pytest.raises(ParameterError):
        load_config(path)


def test_emit_schema_and_empty(tmp_path):
    paths = emit([], summarize([]), tmp_path / "out", series=[EpsPoint(4, 1.5, 0.2)])
    with open(paths["runs"]) as fh:
        assert fh.read().count("\n") == 1
    with open(paths["summary"]) as fh:
        assert set(json.load(fh)) == set(SUMMARY_KEYS)
    with open(paths["eps_series"]) as fh:
        assert fh.read().splitlines() == ["k_eps,eps,eps_hat", "4,1.5,0.2"]


def test_emit_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit([], summarize([]), blocker / "sub")


records = st.builds(
    RunRecord,
    instance=st.integers(0, 100), run=st.integers(0, 1000),
    algorithm=st.sampled_from(["m_gp_lucb", "gp_se", "m_g_lucb", "m_lucb"]),
    rounds_used=st.integers(0, 10**6), terminated=st.booleans(),
    x_index=st.integers(-1, 50), y_index=st.integers(-1, 50),
    correct=st.none() | st.booleans(),
    eps_hat=st.none() | st.floats(0, 10, allow_nan=False),
    error=st.none() | st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=20),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(records, max_size=100))
def test_records_round_trip(recs):
    buf = io.StringIO()
    write_records(recs, buf)
    buf.seek(0)
    assert read_records(buf) == recs


def test_continuous_instance_shares_one_draw():
    ref, by_k = continuous_gp_instance(KernelSpec.se(0.3), [2, 4, 100], 100, 0)
    np.testing.assert_array_equal(by_k[100].u, ref.u)
    # the corners of every grid coincide with the reference corners
    for k in (2, 4):
        assert by_k[k].u[0, 0] == ref.u[0, 0] and by_k[k].u[-1, -1] == ref.u[-1, -1]
    # 1/3 lies on the 100-point grid (33/99) and must map to the same value
    assert by_k[4].u[1, 1] == ref.u[33, 33]


def test_exhaustive_discretization_has_zero_eps_hat():
    cfg = ExperimentConfig(instances=2, runs=2, reference_points=5, noise=1e-4, round_cap=4000)
    series, rows = eps_table(cfg, [5])
    assert all(r["terminated"] for r in rows)
    assert series[0].eps_hat == 0.0


def test_eps_series_csv():
    buf = io.StringIO()
    write_eps_series([EpsPoint(3, 5.2265, 1.1103)], buf)
    assert buf.getvalue() == "k_eps,eps,eps_hat\n3,5.2265,1.1103\n"
