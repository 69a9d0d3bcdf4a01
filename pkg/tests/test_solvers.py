import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbg.errors import ParameterError
from sbg.games import FiniteGame, GameSimulator
from sbg.gp import KernelSpec, ProfileGrid
from sbg.solvers import (
    GPBelief,
    HoeffdingBelief,
    IndependentBelief,
    QueryLog,
    _select,
    discretized_schedule,
    gp_se,
    logbar,
    m_g_lucb,
    m_gp_lucb,
    m_lucb,
    phase_lengths,
    default_schedule,
)

TOY = FiniteGame.from_table([[1, 0.5], [0.2, 0.8]])
SPEC = KernelSpec.se(0.5)


def test_default_schedule_value():
    b = default_schedule(2, 2, 0.1)
    assert b(2) == pytest.approx(2 * math.log(4 * math.pi**2 * 4 / 0.6))
    assert b(2) == pytest.approx(11.146, abs=1e-3)
    assert discretized_schedule(2, 2, 0.1)(2) == pytest.approx(b(2) + 2 * math.log(2))


def test_m_gp_lucb_noiseless_toy():
    hits = 0
    for seed in range(100):
        sim = GameSimulator(TOY, 0.0, seed)
        res = m_gp_lucb(sim, TOY.grid, 0.0, 0.1, SPEC, noise=1e-8)
        hits += res.profile == (0, 1) and res.terminated
    assert hits >= 99


def test_m_gp_lucb_round_cap():
    # two rows with identical row minima cannot be separated
    game = FiniteGame.from_table([[0.5, 0.6], [0.5, 0.7]])
    res = m_gp_lucb(GameSimulator(game, 0.01, 0), game.grid, 0.0, 0.1, SPEC, round_cap=4)
    assert (res.terminated, res.rounds_used, len(res.query_log)) == (False, 4, 4)
    res = m_gp_lucb(GameSimulator(game, 0.01, 0), game.grid, 0.0, 0.1, SPEC, round_cap=5)
    assert res.rounds_used == 6


def test_m_gp_lucb_query_log_pairs():
    game = FiniteGame.from_table([[0.1, 0.9, 0.4], [0.3, 0.35, 0.8], [0.0, 1.0, 0.5]])
    res = m_gp_lucb(GameSimulator(game, 0.01, 3), game.grid, 0.0, 0.1, SPEC)
    t, x, y, u = res.query_log.arrays()
    assert t.tolist() == list(range(1, res.rounds_used + 1))
    assert res.rounds_used % 2 == 0
    # within each decision step the two queried rows differ
    assert np.all(x[0::2] != x[1::2])
    assert res.terminated and res.profile[0] == 1


def test_stopping_rule_holds_at_termination():
    game = FiniteGame.from_table([[0.1, 0.9], [0.3, 0.35]])
    sim = GameSimulator(game, 0.01, 4)
    res = m_gp_lucb(sim, game.grid, 0.05, 0.1, SPEC, update="recursive")
    belief = GPBelief(game.grid, SPEC, 0.01, default_schedule(2, 2, 0.1))
    for _, i, j, v in res.query_log.rows():
        belief.observe(i * 2 + j, v)
    mu, lo, up = belief.intervals(res.rounds_used)
    sel = _select(mu, lo, up, 2, 2, 0.05)
    assert res.terminated and sel.stop
    assert sel.pi1 == res.profile[0] * 2 + res.profile[1]
    assert lo[sel.pi1] > up[sel.pi2] - 0.05


def test_recursive_and_aggregated_updates_agree():
    game = FiniteGame.from_table([[0.1, 0.9, 0.4], [0.3, 0.35, 0.8]])
    a = m_gp_lucb(GameSimulator(game, 0.01, 9), game.grid, 0.0, 0.1, SPEC, update="recursive")
    b = m_gp_lucb(GameSimulator(game, 0.01, 9), game.grid, 0.0, 0.1, SPEC, update="aggregated")
    assert (a.profile, a.rounds_used) == (b.profile, b.rounds_used)


def test_degenerate_grid_rejected():
    game = FiniteGame.from_table([[0.1, 0.2]])
    with pytest.raises(ParameterError):
        m_gp_lucb(GameSimulator(game, 0.01), game.grid, 0.0, 0.1, SPEC)
    with pytest.raises(ParameterError):
        gp_se(GameSimulator(game, 0.01), game.grid, 100, SPEC)
    with pytest.raises(ParameterError):
        m_gp_lucb(GameSimulator(TOY, 0.01), TOY.grid, 0.0, 1.5, SPEC)


# baselines -----------------------------------------------------------------


def test_independent_belief_scalar_formula():
    b = IndependentBelief(4, 0.2, default_schedule(2, 2, 0.1), prior_variance=0.5)
    for v in (0.9, 1.1, 1.3):
        b.observe(2, v)
    mu, var = b.moments()
    assert mu[2] == pytest.approx(1.1 * 3 / (3 + 0.2 / 0.5))
    assert var[2] == pytest.approx(0.2 / (0.2 / 0.5 + 3))
    assert mu[0] == 0.0 and var[0] == pytest.approx(0.5)


def test_gp_and_independent_beliefs_coincide_without_correlation():
    grid = ProfileGrid.equally_spaced(3)
    sched = default_schedule(3, 3, 0.1)
    gp = GPBelief(grid, KernelSpec.se(1e-3), 0.05, sched)
    ind = IndependentBelief(9, 0.05, sched)
    rng = np.random.default_rng(0)
    for t in range(1, 60):
        k, v = int(rng.integers(9)), float(rng.normal())
        gp.observe(k, v)
        ind.observe(k, v)
        for a, b in zip(gp.intervals(t), ind.intervals(t)):
            np.testing.assert_allclose(a, b, atol=1e-8)


def test_m_g_lucb_noiseless_toy():
    hits = sum(m_g_lucb(GameSimulator(TOY, 0.0, s), TOY.grid, 0.0, 0.1, noise=1e-8).profile == (0, 1)
               for s in range(100))
    assert hits >= 99


def test_hoeffding_width_scaling():
    b1 = HoeffdingBelief(4, 0.1, 1.0)
    b2 = HoeffdingBelief(4, 0.1, 2.0)
    for b in (b1, b2):
        for k, v in [(0, 0.1), (0, 0.3), (1, 0.5), (3, 0.2)]:
            b.observe(k, v)
    for t in (1, 5, 50):
        w1, w2 = b1.half_width(t), b2.half_width(t)
        np.testing.assert_allclose(w2[np.isfinite(w1)], 2 * w1[np.isfinite(w1)])
        np.testing.assert_allclose(w1[0], math.sqrt(math.log(4 * 4 * t * t / 0.1) / 4))
    assert np.isinf(b1.half_width(3)[2])


def test_m_lucb_noiseless_toy():
    hits = 0
    for s in range(100):
        res = m_lucb(GameSimulator(TOY, 0.0, s), TOY.grid, 0.0, 0.1, utility_range=0.8)
        hits += res.profile == (0, 1) and res.terminated
    assert hits >= 99


# fixed budget --------------------------------------------------------------


def test_logbar_and_small_schedule():
    assert logbar(2) == 1.0
    assert logbar(4) == pytest.approx(1.583333, abs=1e-6)
    assert phase_lengths(10, 2).lengths == (0, 4)


def test_phase_lengths_example():
    sched = phase_lengths(100, 4)
    assert sched.lengths[1:] == (16, 21, 31)
    assert sched.increments() == [16, 5, 10]
    assert sched.total_queries() == 99


def test_phase_lengths_rejects_small_budget():
    with pytest.raises(ParameterError):
        phase_lengths(4, 4)
    with pytest.raises(ParameterError):
        phase_lengths(10, 1)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 400), st.integers(1, 10**6))
def test_budget_identity(P, extra):
    T = P + extra
    sched = phase_lengths(T, P)
    assert list(sched.lengths) == sorted(sched.lengths)
    assert sched.total_queries() <= T


def test_gp_se_noiseless_toy():
    res = gp_se(GameSimulator(TOY, 0.0, 0), TOY.grid, 100, SPEC, noise=1e-8, belief="independent")
    assert res.profile == (0, 1)
    res = gp_se(GameSimulator(TOY, 0.0, 0), TOY.grid, 100, SPEC, noise=1e-8)
    assert res.profile == (0, 1)
    assert res.rounds_used == 99


def test_gp_se_first_elimination():
    # noiseless queries make the means exact; phase 2 must skip the dismissed (x2, y2)
    res = gp_se(GameSimulator(TOY, 0.0, 0), TOY.grid, 100, SPEC, noise=1e-8, belief="independent")
    t, x, y, _ = res.query_log.arrays()
    phase2 = set(zip(x[64:79].tolist(), y[64:79].tolist()))
    assert phase2 == {(0, 0), (0, 1), (1, 0)}


def test_gp_se_per_phase_counts():
    game = FiniteGame.from_table(np.arange(12.0).reshape(3, 4) % 5)
    T = 500
    res = gp_se(GameSimulator(game, 0.1, 1), game.grid, T, SPEC)
    sched = phase_lengths(T, 12)
    _, x, y, _ = res.query_log.arrays()
    counts = np.bincount(x * 4 + y, minlength=12)
    assert sorted(counts.tolist()) == sorted(list(sched.lengths[1:]) + [sched.lengths[-1]])
    assert res.rounds_used == sched.total_queries() <= T


def test_query_log_csv():
    import io

    log = QueryLog()
    log.append(0, 1, 0.1)
    log.extend(1, 0, np.array([1 / 3, -2.5]))
    buf = io.StringIO()
    log.write_csv(buf)
    assert buf.getvalue() == "t,x_index,y_index,u_tilde\n1,0,1,0.1\n2,1,0,0.3333333333333333\n3,1,0,-2.5\n"
