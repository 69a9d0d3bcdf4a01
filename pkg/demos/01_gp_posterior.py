"""
Gaussian-process beliefs over a grid of strategy profiles
=========================================================

Draw a random utility table, observe a few noisy profiles and watch the
posterior tighten. Batch, recursive and aggregated updates agree.
"""

import numpy as np

from sbg.gp import (
    GPPosterior,
    KernelSpec,
    ProfileGrid,
    posterior_aggregated,
    posterior_batch,
    sample_utility,
    update_recursive,
    variance_bound,
)

grid = ProfileGrid.equally_spaced(4)
kernel = KernelSpec.matern(0.5, 2.5)
noise = 0.05

# a "true" utility table drawn from the prior
u = sample_utility(grid, kernel, seed=1)
print("true utilities\n", np.round(u, 3))

# observe the diagonal a few times each
rng = np.random.default_rng(2)
history = []
for i in range(4):
    for _ in range(3):
        history.append(((i, i), u[i, i] + np.sqrt(noise) * rng.normal()))

post = GPPosterior.prior(grid, kernel, noise)
for profile, value in history:
    update_recursive(post, profile, value)
print("posterior mean\n", np.round(post.mean_table(), 3))
print("posterior std\n", np.round(post.std.reshape(grid.shape), 3))

# the same belief, computed in one shot
batch = posterior_batch(grid, kernel, noise, history)
print("max |recursive - batch| =", np.abs(post.mean - batch.mean).max())

# per-profile counts and sample means are a sufficient statistic
counts = np.zeros(grid.size)
sums = np.zeros(grid.size)
for profile, value in history:
    counts[grid.flat(profile)] += 1
    sums[grid.flat(profile)] += value
agg = posterior_aggregated(grid, kernel, noise, counts, sums / np.maximum(counts, 1))
print("max |aggregated - batch| =", np.abs(agg.mean - batch.mean).max())

# variances never exceed the independent-profile bound
print("bound respected:", bool(np.all(post.variance <= variance_bound(counts, noise) + 1e-12)))
