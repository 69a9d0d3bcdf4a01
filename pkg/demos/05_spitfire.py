"""
Hit the Spitfire: a missile-versus-flare security game
======================================================

The defender picks a launch angle, the airplane picks where to drop a flare.
The expected-damage oracle gives the true table of every discretization, so
the solver's choice can be graded.
"""

import numpy as np

from sbg import games, solvers, spitfire
from sbg.gp import KernelSpec, ProfileGrid

params = spitfire.SpitfireParams()
print("reachable stretch s_max =", round(spitfire.s_max(params), 4), "m")

rng = np.random.default_rng(0)
for theta, s_d in [(0.25, 0.5), (0.2424, 0.0), (1.0, 0.0)]:
    out = spitfire.simulate(params, theta, s_d, rng)
    print(f"theta={theta}, s_d={s_d}: {out.branch.value}, damage {out.damage:.3f}, "
          f"expected {spitfire.expected_damage(params, theta, s_d):.4f}")

reference = spitfire.expected_damage_game(params, ProfileGrid.equally_spaced(100))
print("reference maximin value", round(games.brute_force_maximin(reference).value, 4))

kernel = KernelSpec.se(0.1)
for k in (4, 8):
    grid = ProfileGrid.equally_spaced(k)
    res = solvers.m_gp_lucb(spitfire.as_simulator(params, seed=1), grid, 0.0, 0.1, kernel,
                            noise=0.25, round_cap=10_000)
    print(f"K={k}: angle {res.point[0]:.3f}, rounds {res.rounds_used}, "
          f"eps_hat {games.eps_hat(res.point[0], reference):.4f}")
