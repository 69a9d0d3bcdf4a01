"""Hardness terms and closed-form sample-complexity and confidence bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from sbg.errors import DegenerateGameError, InfeasibleError, ParameterError
from sbg.games import FiniteGame, brute_force_maximin, k_epsilon
from sbg.solvers import logbar, default_schedule

PRECONDITION_FLOOR = 4.85


@dataclass(frozen=True)
class HardnessProfile:
    h_star: float
    h_one: float
    h_two: float
    gaps: tuple[float, ...]
    x_second: int
    midpoint: float


def _maximin_pair(game: FiniteGame):
    mins = game.row_minima()
    if mins.size < 2:
        raise ParameterError("hardness needs at least two first-player strategies")
    order = np.argsort(-mins, kind="stable")
    x_best, x_second = int(order[0]), int(order[1])
    if mins[x_best] == mins[x_second]:
        raise DegenerateGameError("best and second-best maximin values coincide")
    return mins, x_best, x_second


def c_values(game: FiniteGame) -> np.ndarray:
    """Per-profile terms whose sum is ``H*``.

    ``c(x, y) = 1 / max{(u(x, y) - min_y' u(x, y'))^2, (mid - min_y' u(x, y'))^2}``
    where ``mid`` is the average of the best and second-best row minima.
    """
    mins, x_best, x_second = _maximin_pair(game)
    mid = 0.5 * (mins[x_best] + mins[x_second])
    own = (game.u - mins[:, None]) ** 2
    to_mid = np.broadcast_to(((mid - mins) ** 2)[:, None], game.shape)
    return 1.0 / np.maximum(own, to_mid)


def h_star(game: FiniteGame) -> float:
    """Fixed-confidence hardness ``H*(u)``."""
    return float(c_values(game).sum())


def sorted_gaps(game: FiniteGame) -> np.ndarray:
    """Gaps ``|u(pi*) - u(pi)|`` in increasing order, with the maximin profile's own
    (zero) gap replaced by the smallest gap among the other profiles."""
    star = brute_force_maximin(game)
    gaps = np.abs(game.u - star.value).ravel()
    k_star = star.x * game.shape[1] + star.y
    others = np.delete(gaps, k_star)
    if others.size == 0 or np.all(game.u == game.u.flat[0]):
        raise DegenerateGameError("all utilities are equal")
    gaps[k_star] = others.min()
    return np.sort(gaps)


def h_one(game: FiniteGame) -> float:
    gaps = sorted_gaps(game)
    with np.errstate(divide="ignore"):
        return float(np.sum(1.0 / gaps**2))


def h_two(game: FiniteGame) -> float:
    gaps = sorted_gaps(game)
    i = np.arange(1, gaps.size + 1)
    with np.errstate(divide="ignore"):
        return float(np.max(i / gaps**2))


def hardness(game: FiniteGame) -> HardnessProfile:
    mins, x_best, x_second = _maximin_pair(game)
    return HardnessProfile(h_star(game), h_one(game), h_two(game), tuple(sorted_gaps(game).tolist()),
                           x_second, float(0.5 * (mins[x_best] + mins[x_second])))


def _precondition(noise: float, n: int, m: int, delta: float) -> float:
    return 64.0 * noise * math.pi * math.sqrt(n * m / (6.0 * delta))


def t_delta_bound(h: float, noise: float, n: int, m: int, delta: float) -> float:
    """Closed-form upper bound on the number of rounds of M-GP-LUCB.

    ``64 H lambda (log z + 2 log log z)`` with ``z = 64 H lambda pi sqrt(n m / (6 delta))``.
    Requires ``64 lambda pi sqrt(n m / (6 delta)) > 4.85``.
    """
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    if not (h > 0 and noise > 0):
        raise ParameterError("hardness and noise must be positive")
    if not _precondition(noise, n, m, delta) > PRECONDITION_FLOOR:
        raise ParameterError("bound requires 64 * lambda * pi * sqrt(n m / (6 delta)) > 4.85")
    scale = 64.0 * h * noise
    z = scale * math.pi * math.sqrt(n * m / (6.0 * delta))
    return scale * (math.log(z) + 2.0 * math.log(math.log(z)))


def t_delta_inf(h: float, noise: float, n: int, m: int, prior_variance: float = 1.0,
                schedule: Callable[[int], float] | None = None, delta: float = 0.1,
                chunk: int = 65536, t_max: int = 10**10) -> int:
    """Smallest ``t >= 1`` with ``8 H b_t lambda - lambda n m / sigma^2 < t``.

    ``schedule`` defaults to ``2 log(n m pi^2 t^2 / (6 delta))``.
    """
    b = schedule or default_schedule(n, m, delta)
    offset = noise * n * m / prior_variance
    coef = 8.0 * h * noise
    start = 1
    while start <= t_max:
        ts = np.arange(start, start + chunk)
        lhs = np.array([coef * b(int(t)) for t in ts]) if schedule else \
            coef * 2.0 * np.log(n * m * math.pi**2 * ts.astype(float) ** 2 / (6.0 * delta))
        hit = np.flatnonzero(lhs - offset < ts)
        if hit.size:
            return int(ts[hit[0]])
        start += chunk
    raise InfeasibleError(f"no t up to {t_max} satisfies the stopping inequality")


def delta_T(T: int, P: int, n: int, m: int, noise: float, h2: float) -> float:
    """Failure-probability bound of GP-SE with budget ``T``; may exceed 1."""
    if T <= P:
        raise ParameterError("T must exceed P")
    return 2.0 * P * (n + m - 2) * math.exp(-(T - P) / (8.0 * noise * logbar(P) * h2))


def clamp_probability(value: float) -> float:
    return min(1.0, max(0.0, value))


def delta_T_eps_terms(T: int, eps: float, delta: float, a: float, b: float, noise: float, h2: float,
                      exponent: str = "displayed") -> tuple[int, float, float]:
    """``(K_eps, budget term, discretization term)`` of the discretized fixed-budget bound.

    ``exponent="displayed"`` uses ``2a exp(-b^2 / (4 eps^2 (K-1)^2))``;
    ``exponent="inverted"`` uses ``2a exp(-4 eps^2 (K-1)^2 / b^2)``, which equals
    ``delta / 2`` when the ceiling in ``K_eps`` is exact.
    """
    k = k_epsilon(eps, delta, a, b)
    P = k * k
    if T <= P:
        raise ParameterError(f"T={T} must exceed K_eps^2={P}")
    budget = 4.0 * P * (k - 1) * math.exp(-(T - P) / (8.0 * noise * logbar(P) * h2))
    if exponent == "displayed":
        ratio = b * b / (4.0 * eps * eps * (k - 1) ** 2)
    elif exponent == "inverted":
        ratio = 4.0 * eps * eps * (k - 1) ** 2 / (b * b)
    else:
        raise ParameterError("exponent must be 'displayed' or 'inverted'")
    return k, budget, 2.0 * a * math.exp(-ratio)


def delta_T_eps(T: int, eps: float, delta: float, a: float, b: float, noise: float, h2: float,
                exponent: str = "displayed") -> float:
    _, budget, disc = delta_T_eps_terms(T, eps, delta, a, b, noise, h2, exponent)
    return budget + disc


def _delta_interval(k: int, eps: float, a: float, b: float) -> tuple[float, float]:
    """Half-open interval ``[lo, hi)`` of deltas for which ``k_epsilon`` returns ``k``."""
    c = b / (2.0 * eps)
    lo = 4.0 * a * math.exp(-((k - 1) / c) ** 2)
    hi = 4.0 * a * math.exp(-((k - 2) / c) ** 2) if k > 2 else math.inf
    return lo, hi


def delta_opt(T: int, eps: float, a: float, b: float, noise: float,
              h_two_of_k: Callable[[int], float], lo: float = 1e-6, hi: float = 1 - 1e-6,
              exponent: str = "displayed") -> tuple[float, float]:
    """Confidence level in ``[lo, hi]`` minimizing the discretized fixed-budget bound.

    The bound depends on ``delta`` only through ``K_eps``, a non-increasing step
    function of ``delta``, so the search enumerates every reachable ``K_eps``
    and evaluates the bound once per step. Ties go to the smallest ``delta``.
    Returns ``(delta, bound)``.
    """
    if not 0 < lo < hi < 1:
        raise ParameterError("search range must satisfy 0 < lo < hi < 1")
    k_hi = k_epsilon(eps, lo, a, b)
    k_lo = k_epsilon(eps, hi, a, b)
    best = None
    for k in range(k_lo, k_hi + 1):
        d_lo, d_hi = _delta_interval(k, eps, a, b)
        d = max(lo, d_lo)
        if d > hi or d >= d_hi:
            continue
        # the interval edge can land on the neighbouring step after rounding
        while k_epsilon(eps, d, a, b) > k and d < min(hi, d_hi):
            d = math.nextafter(d, math.inf)
        if k_epsilon(eps, d, a, b) != k:
            continue
        if T <= k * k:
            continue
        value = delta_T_eps(T, eps, d, a, b, noise, h_two_of_k(k), exponent)
        if best is None or value < best[1] or (value == best[1] and d < best[0]):
            best = (d, value)
    if best is None:
        raise InfeasibleError(f"T={T} does not exceed K_eps^2 for any delta in [{lo}, {hi}]")
    return best
