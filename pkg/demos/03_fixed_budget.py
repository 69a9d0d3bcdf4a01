"""
Fixed budget: successive elimination with GP-SE
===============================================

Spend a fixed number of queries in phases, dismissing one profile per phase.
"""

import math

from sbg import complexity, games, solvers
from sbg.games import GameSimulator
from sbg.gp import KernelSpec, ProfileGrid

grid = ProfileGrid.equally_spaced(3)
kernel = KernelSpec.se(0.1)
game = games.random_gp_game(grid, kernel, seed=4)
h2 = complexity.h_two(game)
P = grid.size

# phase schedule: cumulative per-profile query counts
T = min(10 * P * math.ceil(h2), 30_000)
sched = solvers.phase_lengths(T, P)
print("budget", T, "phase lengths", sched.lengths[1:])
print("queries actually spent", sched.total_queries())

noise = 0.01
print("failure bound delta_T =", complexity.clamp_probability(complexity.delta_T(T, P, 3, 3, noise, h2)))
star = games.brute_force_maximin(game)
wins = 0
for seed in range(50):
    res = solvers.gp_se(GameSimulator(game, noise, seed), grid, T, kernel)
    wins += res.profile[0] == star.x
print(f"GP-SE found the maximin strategy in {wins}/50 runs")
