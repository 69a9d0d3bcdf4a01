"""Dynamic querying algorithms for maximin identification.

Fixed confidence: :func:`m_gp_lucb` and its baselines :func:`m_g_lucb` and
:func:`m_lucb`. They share one selection/stopping loop and differ only in the
belief that produces confidence intervals.

Fixed budget: :func:`gp_se`, successive elimination over ``P - 1`` phases.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from sbg.errors import ParameterError
from sbg.games import Simulator
from sbg.gp import (
    GPPosterior,
    KernelSpec,
    ProfileGrid,
    aggregated_mean,
    grid_covariance,
    posterior_aggregated,
    update_recursive,
)

Schedule = Callable[[int], float]


def default_schedule(n: int, m: int, delta: float) -> Schedule:
    """``b_t = 2 log(n m pi^2 t^2 / (6 delta))``, the finite-game exploration term."""
    c = n * m * math.pi**2 / (6.0 * delta)
    return lambda t: 2.0 * math.log(c * t * t)


def discretized_schedule(n: int, m: int, delta: float) -> Schedule:
    """``b_t = 2 log(n m pi^2 t^2 / (3 delta))``, used on discretized infinite games."""
    c = n * m * math.pi**2 / (3.0 * delta)
    return lambda t: 2.0 * math.log(c * t * t)


class QueryLog:
    """Append-only record of ``(t, x_index, y_index, u_tilde)`` rows, ``t`` starting at 1."""

    def __init__(self):
        self._x: list[np.ndarray] = []
        self._y: list[np.ndarray] = []
        self._u: list[np.ndarray] = []
        self._len = 0

    def append(self, i: int, j: int, value: float) -> None:
        self.extend(i, j, np.array([value]))

    def extend(self, i: int, j: int, values: np.ndarray) -> None:
        k = len(values)
        self._x.append(np.full(k, i, dtype=np.int64))
        self._y.append(np.full(k, j, dtype=np.int64))
        self._u.append(np.asarray(values, dtype=float))
        self._len += k

    def __len__(self):
        return self._len

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if not self._len:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy(), np.zeros(0)
        x = np.concatenate(self._x)
        y = np.concatenate(self._y)
        u = np.concatenate(self._u)
        self._x, self._y, self._u = [x], [y], [u]
        return np.arange(1, self._len + 1), x, y, u

    def rows(self):
        t, x, y, u = self.arrays()
        return list(zip(t.tolist(), x.tolist(), y.tolist(), u.tolist()))

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x_index", "y_index", "u_tilde"])
        for t, x, y, u in self.rows():
            writer.writerow([t, x, y, repr(u)])


@dataclass
class SolverResult:
    profile: tuple[int, int]
    point: tuple[float, float]
    rounds_used: int
    terminated: bool
    query_log: QueryLog = field(repr=False)
    wall_time: float = 0.0


@dataclass(frozen=True)
class PhaseSchedule:
    """Cumulative per-profile query counts ``T_0 = 0, T_1, ..., T_{P-1}``."""

    P: int
    T: int
    logbar: float
    lengths: tuple[int, ...]

    def increments(self) -> list[int]:
        return [self.lengths[p] - self.lengths[p - 1] for p in range(1, self.P)]

    def total_queries(self) -> int:
        # the profile eliminated in phase p got T_p queries; the survivor T_{P-1}
        return sum(self.lengths[1:]) + self.lengths[-1]


def logbar(P: int) -> float:
    return 0.5 + sum(1.0 / i for i in range(2, P + 1))


def phase_lengths(T: int, P: int) -> PhaseSchedule:
    if P < 2:
        raise ParameterError("need at least two profiles")
    if T <= P:
        raise ParameterError(f"budget T={T} must exceed the number of profiles P={P}")
    lb = logbar(P)
    lengths = [0] + [math.ceil((T - P) / (lb * (P + 1 - p))) for p in range(1, P)]
    return PhaseSchedule(P, T, lb, tuple(lengths))


def _check_grid(grid: ProfileGrid) -> None:
    if grid.n < 2 or grid.m < 2:
        raise ParameterError("both players need at least two strategies")


# ---------------------------------------------------------------------------
# beliefs for the LUCB loop


class GPBelief:
    """GP posterior over the grid, updated recursively or recomputed from counts."""

    def __init__(self, grid: ProfileGrid, kernel: KernelSpec, noise: float, schedule: Schedule,
                 update: str = "recursive"):
        if update not in ("recursive", "aggregated"):
            raise ParameterError("update must be 'recursive' or 'aggregated'")
        self.post = GPPosterior.prior(grid, kernel, noise)
        self._prior = self.post.cov.copy()
        self.schedule = schedule
        self.update = update
        self._stale = False

    def observe(self, k: int, value: float) -> None:
        if self.update == "recursive":
            update_recursive(self.post, k, value)
        else:
            self.post.counts[k] += 1
            self.post.obs_sum[k] += value
            self.post.t += 1
            self._stale = True

    def _refresh(self) -> None:
        if self._stale:
            p = self.post
            with np.errstate(invalid="ignore", divide="ignore"):
                means = np.where(p.counts > 0, p.obs_sum / np.maximum(p.counts, 1), 0.0)
            fresh = posterior_aggregated(p.grid, p.kernel, p.noise, p.counts, means, self._prior)
            p.mean, p.cov = fresh.mean, fresh.cov
            self._stale = False

    def intervals(self, t: int):
        self._refresh()
        width = math.sqrt(self.schedule(max(t, 1))) * self.post.std
        mu = self.post.mean
        return mu, mu - width, mu + width


class IndependentBelief:
    """Independent Gaussian per profile: the GP posterior under a diagonal prior."""

    def __init__(self, size: int, noise: float, schedule: Schedule, prior_variance: float = 1.0):
        self.noise = noise
        self.ratio = noise / prior_variance
        self.counts = np.zeros(size, dtype=np.int64)
        self.sums = np.zeros(size)
        self.schedule = schedule

    def observe(self, k: int, value: float) -> None:
        self.counts[k] += 1
        self.sums[k] += value

    def moments(self):
        denom = self.ratio + self.counts
        return self.sums / denom, self.noise / denom

    def intervals(self, t: int):
        mu, var = self.moments()
        width = math.sqrt(self.schedule(max(t, 1))) * np.sqrt(var)
        return mu, mu - width, mu + width


class HoeffdingBelief:
    """Sample means with range-scaled Hoeffding intervals.

    Half-width ``utility_range * sqrt(beta(t) / (2 N))`` with
    ``beta(t) = log(4 n m t^2 / delta)``; unobserved profiles get infinite width.
    """

    def __init__(self, size: int, delta: float, utility_range: float):
        if not utility_range > 0:
            raise ParameterError("utility_range must be positive")
        self.size = size
        self.delta = delta
        self.utility_range = float(utility_range)
        self.counts = np.zeros(size, dtype=np.int64)
        self.sums = np.zeros(size)

    def observe(self, k: int, value: float) -> None:
        self.counts[k] += 1
        self.sums[k] += value

    def beta(self, t: int) -> float:
        return math.log(4.0 * self.size * max(t, 1) ** 2 / self.delta)

    def half_width(self, t: int) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.utility_range * np.sqrt(self.beta(t) / (2.0 * self.counts))

    def intervals(self, t: int):
        n = np.maximum(self.counts, 1)
        mu = np.where(self.counts > 0, self.sums / n, 0.0)
        w = self.half_width(t)
        return mu, mu - w, mu + w


# ---------------------------------------------------------------------------
# fixed confidence


class _Selection:
    __slots__ = ("x_bar", "pi1", "pi2", "stop")


def _select(mu, lower, upper, n, m, eps) -> _Selection:
    mu_t = mu.reshape(n, m)
    low_t = lower.reshape(n, m)
    up_t = upper.reshape(n, m)
    rows = np.arange(n)
    gamma = np.argmin(low_t, axis=1)
    x_bar = int(np.argmax(mu_t.min(axis=1)))
    challenger_up = up_t[rows, gamma]
    challenger_up[x_bar] = -np.inf
    x2 = int(np.argmax(challenger_up))
    sel = _Selection()
    sel.x_bar = x_bar
    sel.pi1 = x_bar * m + int(gamma[x_bar])
    sel.pi2 = x2 * m + int(gamma[x2])
    sel.stop = bool(lower[sel.pi1] > upper[sel.pi2] - eps)
    return sel


def _lucb_loop(sim: Simulator, grid: ProfileGrid, belief, eps: float, round_cap: int,
               warmup: bool = False) -> SolverResult:
    _check_grid(grid)
    if eps < 0:
        raise ParameterError("eps must be non-negative")
    if round_cap < 0:
        raise ParameterError("round_cap must be non-negative")
    round_cap += round_cap % 2
    start = time.perf_counter()
    n, m = grid.shape
    xs, ys = grid.xs, grid.ys
    log = QueryLog()
    t = 0

    def observe(k):
        i, j = divmod(k, m)
        value = sim.query(xs[i], ys[j])
        belief.observe(k, value)
        log.append(i, j, value)

    if warmup:
        for k in range(min(grid.size, round_cap)):
            observe(k)
        t = len(log)

    sel = _select(*belief.intervals(t), n, m, eps)
    terminated = False
    while t + 2 <= round_cap:
        observe(sel.pi1)
        observe(sel.pi2)
        t += 2
        sel = _select(*belief.intervals(t), n, m, eps)
        if sel.stop:
            terminated = True
            break
    i, j = divmod(sel.pi1, m)
    return SolverResult((i, j), (float(xs[i]), float(ys[j])), t, terminated, log,
                        time.perf_counter() - start)


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")


def m_gp_lucb(sim: Simulator, grid: ProfileGrid, eps: float, delta: float, kernel: KernelSpec,
              noise: float | None = None, schedule: Schedule | None = None,
              round_cap: int = 30_000, update: str = "recursive") -> SolverResult:
    """Fixed-confidence maximin identification with GP confidence intervals.

    Every decision step queries the current candidate ``(x_bar, gamma(x_bar))``
    and the challenger with the highest upper bound among the other rows'
    lower-bound best responses, then stops once the candidate's lower bound
    exceeds the challenger's upper bound minus ``eps``.

    Parameters
    ----------
    noise : float, optional
        Observation-noise variance assumed by the posterior; defaults to
        ``sim.noise``.
    schedule : callable, optional
        Exploration term ``b_t``; defaults to :func:`default_schedule`.
    round_cap : int
        Hard limit on queries, rounded up to an even number.
    update : {"recursive", "aggregated"}
        How the posterior absorbs observations.
    """
    _check_delta(delta)
    noise = sim.noise if noise is None else noise
    schedule = schedule or default_schedule(grid.n, grid.m, delta)
    belief = GPBelief(grid, kernel, noise, schedule, update)
    return _lucb_loop(sim, grid, belief, eps, round_cap)


def m_g_lucb(sim: Simulator, grid: ProfileGrid, eps: float, delta: float,
             noise: float | None = None, schedule: Schedule | None = None,
             round_cap: int = 30_000, prior_variance: float = 1.0) -> SolverResult:
    """Same loop as :func:`m_gp_lucb` with independent per-profile Gaussian beliefs."""
    _check_delta(delta)
    noise = sim.noise if noise is None else noise
    if not noise > 0:
        raise ParameterError("observation noise must be positive")
    schedule = schedule or default_schedule(grid.n, grid.m, delta)
    belief = IndependentBelief(grid.size, noise, schedule, prior_variance)
    return _lucb_loop(sim, grid, belief, eps, round_cap)


def m_lucb(sim: Simulator, grid: ProfileGrid, eps: float, delta: float, utility_range: float,
           round_cap: int = 30_000) -> SolverResult:
    """Sample-mean LUCB baseline with Hoeffding intervals scaled by the utility range.

    Every profile is queried once before the first decision step.
    """
    _check_delta(delta)
    belief = HoeffdingBelief(grid.size, delta, utility_range)
    return _lucb_loop(sim, grid, belief, eps, round_cap, warmup=True)


# ---------------------------------------------------------------------------
# fixed budget


def gp_se(sim: Simulator, grid: ProfileGrid, T: int, kernel: KernelSpec | None = None,
          noise: float | None = None, belief: str = "gp") -> SolverResult:
    """Fixed-budget successive elimination.

    In phase ``p`` every surviving profile is queried ``T_p - T_{p-1}`` times.
    Then the row holding the smallest posterior mean among survivors is
    located, and that row's surviving profile with the largest mean is
    dismissed. The last survivor is returned.

    Parameters
    ----------
    kernel : KernelSpec
        Prior for the GP belief (required unless ``belief="independent"``).
    belief : {"gp", "independent"}
        ``"gp"`` uses the full posterior mean over all observations;
        ``"independent"`` uses per-profile sample means.
    """
    _check_grid(grid)
    sched = phase_lengths(T, grid.size)
    if belief not in ("gp", "independent"):
        raise ParameterError("belief must be 'gp' or 'independent'")
    if belief == "gp":
        if kernel is None:
            raise ParameterError("the GP belief needs a kernel")
        noise = sim.noise if noise is None else noise
        if not noise > 0:
            raise ParameterError("observation noise must be positive")
        prior = grid_covariance(grid, kernel)
    start = time.perf_counter()
    n, m = grid.shape
    P = grid.size
    alive = np.ones(P, dtype=bool)
    counts = np.zeros(P, dtype=np.int64)
    sums = np.zeros(P)
    log = QueryLog()
    for p in range(1, P):
        reps = sched.lengths[p] - sched.lengths[p - 1]
        for k in np.flatnonzero(alive):
            i, j = divmod(int(k), m)
            values = sim.query_many(grid.xs[i], grid.ys[j], reps)
            counts[k] += reps
            sums[k] += values.sum()
            log.extend(i, j, values)
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        mu = aggregated_mean(prior, noise, counts, means) if belief == "gp" else means
        masked = np.where(alive, mu, np.inf)
        row = int(np.argmin(masked)) // m
        in_row = np.where(alive[row * m:(row + 1) * m], mu[row * m:(row + 1) * m], -np.inf)
        alive[row * m + int(np.argmax(in_row))] = False
    k = int(np.flatnonzero(alive)[0])
    i, j = divmod(k, m)
    return SolverResult((i, j), (float(grid.xs[i]), float(grid.ys[j])), len(log), True, log,
                        time.perf_counter() - start)
