"""Missile-versus-flare security game ("Hit-the-Spitfire").

The defender launches a missile at angle ``theta`` in [0, 1] rad towards an
airplane detected ``h_perp`` meters away and flying perpendicular to the line
of sight at ``v_d``. The airplane answers by releasing a flare at relative
position ``s_d`` in [0, 1] of the reachable stretch ``[0, s_max]``. The
defender's utility is the damage dealt, in [0, 1].

Outcome of one engagement, evaluated in order:

1. Flare gate. If the missile's horizontal position at flare altitude,
   ``(h_perp - h_f) tan(theta)``, lies within ``ell / 4`` of the flare point
   ``s_d * s_max``, the flare is hit. The missile still reaches the airplane
   with probability ``1 - |s_d s_max - x_d| / s_max`` (``x_d`` is the airplane
   position at that moment) and then strikes a uniform point of the fuselage.
2. Direct gate. Otherwise, if ``h_perp tan(theta)`` lies within ``ell / 2`` of
   the airplane position at interception, the missile hits at that offset.
3. Otherwise the missile misses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from sbg.errors import ParameterError
from sbg.games import FiniteGame, Simulator
from sbg.gp import ProfileGrid

# mean of d(U) for U uniform over the fuselage: 1 - (4 / ell^2)(ell^2 / 12)
UNIFORM_HIT_DAMAGE = 2.0 / 3.0


@dataclass(frozen=True)
class SpitfireParams:
    h_perp: float = 100.0
    h_f: float = 10.0
    v_a: float = 500.0
    v_d: float = 120.0
    ell: float = 15.0

    def __post_init__(self):
        if not self.v_a > self.v_d > 0:
            raise ParameterError("speeds must satisfy v_a > v_d > 0")
        if not self.h_perp > self.h_f > 0:
            raise ParameterError("distances must satisfy h_perp > h_f > 0")
        if not self.ell > 0:
            raise ParameterError("airplane length must be positive")


class Branch(enum.Enum):
    DEFLECTED = "flare-deflected"
    HIT_ANYWAY = "flare-hit-anyway"
    DIRECT_HIT = "direct-hit"
    MISS = "miss"


@dataclass(frozen=True)
class SpitfireOutcome:
    branch: Branch
    damage: float
    hit_point: float | None = None


def s_max(params: SpitfireParams) -> float:
    """Farthest reachable interception point from the detection point, in meters."""
    return params.v_d * params.h_perp / (params.v_a * math.cos(1.0))


def damage(x: float, ell: float = SpitfireParams.ell) -> float:
    """Damage of a hit ``x`` meters from the airplane's center."""
    if abs(x) > ell / 2 + 1e-12:
        raise ParameterError(f"hit point {x} lies outside the fuselage")
    return max(0.0, 1.0 - 4.0 * x * x / (ell * ell))


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, float(v)))


def flare_gate(params: SpitfireParams, theta: float, s_d: float) -> bool:
    flare = s_d * s_max(params)
    reach = (params.h_perp - params.h_f) * math.tan(theta)
    return flare - params.ell / 4 <= reach <= flare + params.ell / 4


def deflection_survival(params: SpitfireParams, theta: float, s_d: float, clamp: bool = True) -> float:
    """Probability that the missile still hits after striking the flare."""
    sm = s_max(params)
    x_d = params.v_d * (params.h_perp - params.h_f) / (params.v_a * math.cos(theta))
    p = 1.0 - abs(s_d * sm - x_d) / sm
    return _clamp01(p) if clamp else p


def direct_offset(params: SpitfireParams, theta: float) -> float:
    """Signed distance between the missile and the airplane center at interception."""
    plane = params.v_d * params.h_perp / (params.v_a * math.cos(theta))
    return params.h_perp * math.tan(theta) - plane


def simulate(params: SpitfireParams, theta: float, s_d: float, rng: np.random.Generator) -> SpitfireOutcome:
    """Play one engagement. Draws a Bernoulli, then a uniform, only on the flare branch."""
    theta = _clamp01(theta)
    s_d = _clamp01(s_d)
    if flare_gate(params, theta, s_d):
        if rng.random() < deflection_survival(params, theta, s_d):
            q = rng.uniform(-params.ell / 2, params.ell / 2)
            return SpitfireOutcome(Branch.HIT_ANYWAY, damage(q, params.ell), q)
        return SpitfireOutcome(Branch.DEFLECTED, 0.0)
    off = direct_offset(params, theta)
    if abs(off) <= params.ell / 2:
        return SpitfireOutcome(Branch.DIRECT_HIT, damage(abs(off), params.ell), abs(off))
    return SpitfireOutcome(Branch.MISS, 0.0)


def expected_damage(params: SpitfireParams, theta: float, s_d: float) -> float:
    """Exact mean of :func:`simulate`'s damage."""
    theta = _clamp01(theta)
    s_d = _clamp01(s_d)
    if flare_gate(params, theta, s_d):
        return deflection_survival(params, theta, s_d) * UNIFORM_HIT_DAMAGE
    off = direct_offset(params, theta)
    if abs(off) <= params.ell / 2:
        return damage(abs(off), params.ell)
    return 0.0


def expected_damage_game(params: SpitfireParams, grid: ProfileGrid) -> FiniteGame:
    """Table of expected damages over a ``(theta, s_d)`` grid."""
    u = [[expected_damage(params, th, s) for s in grid.ys] for th in grid.xs]
    return FiniteGame(grid, u)


class SpitfireSimulator(Simulator):
    """Simulator over [0, 1]^2 returning ``role_sign * damage`` of one engagement.

    With ``role_sign = 1`` the first player is the defender (choosing ``theta``)
    and maximizes damage.
    """

    def __init__(self, params: SpitfireParams = SpitfireParams(), role_sign: int = 1, seed=None):
        if role_sign not in (1, -1):
            raise ParameterError("role_sign must be +1 or -1")
        super().__init__(seed)
        self.params = params
        self.role_sign = role_sign

    def _draw(self, x, y, size):
        out = np.empty(size)
        for k in range(size):
            out[k] = simulate(self.params, x, y, self.rng).damage
        return self.role_sign * out


def as_simulator(params: SpitfireParams = SpitfireParams(), role_sign: int = 1, seed=None) -> SpitfireSimulator:
    return SpitfireSimulator(params, role_sign, seed)
