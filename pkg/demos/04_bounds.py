"""
Sample-complexity and confidence bounds
=======================================

Hardness terms of a small game, the fixed-confidence round bound, the
fixed-budget failure bound, and the grid size needed to discretize a
continuous game.
"""

from sbg import complexity, games
from sbg.games import FiniteGame
from sbg.gp import KernelSpec

game = FiniteGame.from_table([[1.0, 0.5], [0.2, 0.8]])
prof = complexity.hardness(game)
print(f"H* = {prof.h_star:.3f}, H1 = {prof.h_one:.3f}, H2 = {prof.h_two:.3f}")

noise, delta = 0.1, 0.1
print("closed-form round bound:", round(complexity.t_delta_bound(prof.h_star, noise, 2, 2, delta), 1))
print("smallest t of the inequality:", complexity.t_delta_inf(prof.h_star, noise, 2, 2, delta=delta))
for T in (100, 1000, 5000):
    raw = complexity.delta_T(T, 4, 2, 2, noise, prof.h_two)
    print(f"delta_T at T={T}: {raw:.3g} (reported {complexity.clamp_probability(raw):.3g})")

# discretizing [0, 1]^2 for a smooth kernel
a, b = games.smoothness_constants(KernelSpec.se(0.1))
for eps in (1.0, 0.5, 0.25):
    k = games.k_epsilon(eps, delta, a, b)
    print(f"eps={eps}: K_eps={k}, covering-radius bound {games.arbitrary_discretization_bound(delta, a, b, 0.5 / (k - 1), 0.5 / (k - 1)):.3f}")

# best confidence split for a discretized fixed-budget run; the displayed
# discretization term is vacuous here, the inverted one is not
for exponent in ("displayed", "inverted"):
    d, value = complexity.delta_opt(10**7, 1.0, a, b, noise, lambda k: 50.0 * k * k, exponent=exponent)
    print(f"{exponent}: delta_opt = {d:.4g}, bound there = {value:.4g}")
