"""Finite zero-sum games, noisy simulators and discretization of [0, 1]^2.

The first player (rows, ``x``) maximizes the utility ``u``; the second player
(columns, ``y``) best-responds by minimizing it. All argmin/argmax ties are
broken towards the lowest index.
"""

from __future__ import annotations

import json
import math
from typing import Callable, NamedTuple

import numpy as np

from sbg.errors import ParameterError
from sbg.gp import KernelSpec, ProfileGrid, sample_utility


class FiniteGame:
    """A two-player zero-sum game with finite strategy sets.

    Parameters
    ----------
    grid : ProfileGrid
        Strategy coordinates of both players.
    u : array_like, shape (n, m)
        First-player utility of every profile.
    """

    def __init__(self, grid: ProfileGrid, u):
        u = np.array(u, dtype=float)
        if u.shape != grid.shape:
            raise ParameterError(f"utility table shape {u.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(u)):
            raise ParameterError("utility table must be finite")
        u.setflags(write=False)
        self.grid = grid
        self.u = u

    @classmethod
    def from_table(cls, u) -> "FiniteGame":
        """Game on equally spaced coordinates in [0, 1] (a single point sits at 0)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        n, m = u.shape
        return cls(ProfileGrid(np.linspace(0, 1, n), np.linspace(0, 1, m)), u)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def row_minima(self) -> np.ndarray:
        return self.u.min(axis=1)

    def to_dict(self) -> dict:
        return {"xs": self.grid.xs.tolist(), "ys": self.grid.ys.tolist(), "u": self.u.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "FiniteGame":
        try:
            return cls(ProfileGrid(doc["xs"], doc["ys"]), doc["u"])
        except KeyError as exc:
            raise ParameterError(f"game document lacks field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FiniteGame":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FiniteGame":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def __eq__(self, other):
        if not isinstance(other, FiniteGame):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.u, other.u)

    def __repr__(self):
        return f"FiniteGame(n={self.shape[0]}, m={self.shape[1]})"


class Maximin(NamedTuple):
    x: int
    y: int
    value: float


def best_response(game: FiniteGame, x: int) -> int:
    """Column minimizing row ``x``."""
    if not 0 <= x < game.shape[0]:
        raise ParameterError(f"row {x} out of range")
    return int(np.argmin(game.u[x]))


def brute_force_maximin(game: FiniteGame) -> Maximin:
    """Exact maximin profile by enumeration."""
    mins = game.row_minima()
    x = int(np.argmax(mins))
    y = best_response(game, x)
    return Maximin(x, y, float(game.u[x, y]))


def maximin_gap(game: FiniteGame) -> float:
    """Difference between the best and second-best row minima."""
    mins = np.sort(game.row_minima())
    if mins.size < 2:
        raise ParameterError("a game with one row has no second-best strategy")
    return float(mins[-1] - mins[-2])


def is_nondegenerate(game: FiniteGame, tol: float = 1e-9) -> bool:
    """True when the maximin value is separated from the runner-up by more than ``tol``."""
    return maximin_gap(game) > tol


def random_gp_game(grid: ProfileGrid, kernel: KernelSpec, seed=None) -> FiniteGame:
    return FiniteGame(grid, sample_utility(grid, kernel, seed))


class Simulator:
    """Black-box noisy utility oracle on [0, 1]^2.

    Subclasses implement :meth:`_draw`. Every returned value increments
    :attr:`count` by one.
    """

    noise: float = 0.0

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)
        self.count = 0

    def query(self, x: float, y: float) -> float:
        self.count += 1
        return float(self._draw(x, y, 1)[0])

    def query_many(self, x: float, y: float, size: int) -> np.ndarray:
        if size < 0:
            raise ParameterError("size must be non-negative")
        self.count += size
        return self._draw(x, y, size)

    def _draw(self, x: float, y: float, size: int) -> np.ndarray:
        raise NotImplementedError


class GameSimulator(Simulator):
    """Returns ``u(x, y) + e`` with ``e ~ N(0, noise)`` for profiles on a finite game's grid.

    ``noise = 0`` gives a noiseless oracle.
    """

    def __init__(self, game: FiniteGame, noise: float, seed=None):
        if noise < 0:
            raise ParameterError("noise variance must be non-negative")
        super().__init__(seed)
        self.game = game
        self.noise = float(noise)
        self._sd = math.sqrt(self.noise)
        self._row = {float(v): i for i, v in enumerate(game.grid.xs)}
        self._col = {float(v): j for j, v in enumerate(game.grid.ys)}

    def _index(self, x: float, y: float) -> tuple[int, int]:
        try:
            return self._row[float(x)], self._col[float(y)]
        except KeyError:
            raise ParameterError(f"profile ({x}, {y}) is not on the game grid") from None

    def _draw(self, x, y, size):
        i, j = self._index(x, y)
        mean = self.game.u[i, j]
        if self._sd == 0.0:
            return np.full(size, mean)
        return mean + self._sd * self.rng.standard_normal(size)


class FunctionSimulator(Simulator):
    """Wraps a deterministic function ``f(x, y)`` with additive Gaussian noise."""

    def __init__(self, f: Callable[[float, float], float], noise: float, seed=None):
        if noise < 0:
            raise ParameterError("noise variance must be non-negative")
        super().__init__(seed)
        self.f = f
        self.noise = float(noise)

    def _draw(self, x, y, size):
        mean = float(self.f(x, y))
        if self.noise == 0.0:
            return np.full(size, mean)
        return mean + math.sqrt(self.noise) * self.rng.standard_normal(size)


def discretize(f: Callable[[float, float], float], k: int) -> FiniteGame:
    """Restrict ``f`` to ``k`` equally spaced points per player, ``i / (k - 1)``."""
    if k < 2:
        raise ParameterError("discretization needs K >= 2")
    grid = ProfileGrid.equally_spaced(k)
    u = np.array([[f(x, y) for y in grid.ys] for x in grid.xs], dtype=float)
    return FiniteGame(grid, u)


def _check_confidence(delta: float, a: float, b: float) -> float:
    if not 0 < delta < 2:
        raise ParameterError("delta must lie in (0, 2)")
    if not (a > 0 and b > 0):
        raise ParameterError("smoothness constants a and b must be positive")
    log_term = math.log(4.0 * a / delta)
    if log_term < 0:
        raise ParameterError("log(4a/delta) is negative; delta must not exceed 4a")
    return log_term


def smoothness_constants(kernel: KernelSpec) -> tuple[float, float]:
    """Conservative ``(a, b)`` with ``P(sup |du/dx| > L) <= a exp(-L^2 / b^2)`` for draws of ``kernel``.

    A partial derivative of a draw is a stationary Gaussian field with standard
    deviation ``s``. Taking ``b = 2 s`` leaves a factor ``exp(L^2 / (4 s^2))``
    of slack over the single-point Gaussian tail, and ``a`` counts the
    length-scale cells of the unit square as a union-bound multiplicity.
    """
    var = kernel.derivative_variance()
    if not math.isfinite(var):
        raise ParameterError("draws of this kernel are not differentiable")
    b = 2.0 * math.sqrt(var)
    a = 1.0 + (1.0 + 1.0 / kernel.length_scale) ** 2
    return a, b


def k_epsilon(eps: float, delta: float, a: float, b: float) -> int:
    """Points per dimension of an equally spaced grid whose maximin is ``eps``-accurate
    with probability at least ``1 - delta / 2``."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    log_term = _check_confidence(delta, a, b)
    return max(2, math.ceil(b / (2.0 * eps) * math.sqrt(log_term)) + 1)


def covering_distances(xs, ys) -> tuple[float, float]:
    """Largest distance from a point of [0, 1] to the nearest listed strategy, per player."""
    return _covering_radius(xs), _covering_radius(ys)


def _covering_radius(points) -> float:
    p = np.sort(np.asarray(points, dtype=float))
    if p.size == 0:
        raise ParameterError("strategy list must be non-empty")
    if p[0] < 0 or p[-1] > 1:
        raise ParameterError("strategies must lie in [0, 1]")
    radius = max(p[0], 1.0 - p[-1])
    if p.size > 1:
        radius = max(radius, float(np.max(np.diff(p))) / 2.0)
    return float(radius)


def arbitrary_discretization_bound(delta: float, a: float, b: float, dx_max: float, dy_max: float) -> float:
    """Error radius on the maximin value of a finite sub-game, valid with probability
    at least ``1 - delta / 2``."""
    log_term = _check_confidence(delta, a, b)
    return b * math.sqrt(log_term) * max(dx_max, dy_max)


def eps_hat(returned_x: float, reference: FiniteGame) -> float:
    """Empirical suboptimality of a returned first-player strategy against a reference game.

    ``returned_x`` is mapped to the nearest reference row; the result is the gap
    between the reference maximin value and that row's best-response value.
    """
    xs = reference.grid.xs
    i = int(np.argmin(np.abs(xs - returned_x)))
    best = brute_force_maximin(reference).value
    return abs(best - float(reference.u[i].min()))
