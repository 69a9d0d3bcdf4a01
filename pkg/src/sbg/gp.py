"""Gaussian-process machinery over finite grids of strategy profiles.

A profile grid is the Cartesian product ``xs x ys`` of first- and
second-player strategies in [0, 1]. Profiles are addressed either by a pair
``(i, j)`` or by the row-major flat index ``i * m + j``.

Three posterior representations are provided and agree to round-off:

* :func:`posterior_batch` solves the full ``t x t`` system over the raw
  observation history;
* :func:`update_recursive` applies rank-one updates, one observation at a time;
* :func:`posterior_aggregated` solves only over the distinct queried profiles,
  using per-profile averages with noise ``noise / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg, special

from sbg.errors import NumericError, ParameterError

SQUARED_EXPONENTIAL = "se"
MATERN = "matern"

_JITTERS = (1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance function on [0, 1]^2.

    Parameters
    ----------
    kind : {"se", "matern"}
        Squared exponential or Matérn.
    length_scale : float
        Positive length scale ``l``.
    nu : float, optional
        Matérn smoothness. 0.5, 1.5 and 2.5 use closed forms; any other
        positive value goes through the modified Bessel function.
    variance : float
        Prior variance ``k(pi, pi)``. Defaults to 1.
    """

    kind: str = SQUARED_EXPONENTIAL
    length_scale: float = 0.1
    nu: float | None = None
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in (SQUARED_EXPONENTIAL, MATERN):
            raise ParameterError(f"unknown kernel kind {self.kind!r}")
        if not self.length_scale > 0:
            raise ParameterError("length_scale must be positive")
        if not 0 < self.variance <= 1:
            raise ParameterError("prior variance must lie in (0, 1]")
        if self.kind == MATERN:
            if self.nu is None or not self.nu > 0:
                raise ParameterError("Matern kernel needs a positive nu")

    @classmethod
    def se(cls, length_scale: float, variance: float = 1.0) -> "KernelSpec":
        return cls(SQUARED_EXPONENTIAL, length_scale, None, variance)

    @classmethod
    def matern(cls, length_scale: float, nu: float, variance: float = 1.0) -> "KernelSpec":
        return cls(MATERN, length_scale, nu, variance)

    @property
    def separable(self) -> bool:
        """True when k((x, y), (x', y')) factors as k1(x, x') k1(y, y')."""
        return self.kind == SQUARED_EXPONENTIAL

    def of_distance(self, r) -> np.ndarray:
        """Evaluate the kernel as a function of Euclidean distance."""
        r = np.abs(np.asarray(r, dtype=float))
        l = self.length_scale
        if self.kind == SQUARED_EXPONENTIAL:
            return self.variance * np.exp(-0.5 * (r / l) ** 2)
        nu = self.nu
        if nu == 0.5:
            k = np.exp(-r / l)
        elif nu == 1.5:
            s = math.sqrt(3.0) * r / l
            k = (1.0 + s) * np.exp(-s)
        elif nu == 2.5:
            s = math.sqrt(5.0) * r / l
            k = (1.0 + s + s * s / 3.0) * np.exp(-s)
        else:
            k = _matern_bessel(r, l, nu)
        return self.variance * k

    def derivative_variance(self) -> float:
        """Variance of a partial derivative of a draw, ``-d^2 k / dx^2`` at 0.

        Infinite for Matérn with ``nu <= 1`` (draws are not differentiable).
        """
        l = self.length_scale
        if self.kind == SQUARED_EXPONENTIAL:
            return self.variance / l**2
        if self.nu <= 1:
            return math.inf
        return self.variance * self.nu / ((self.nu - 1.0) * l**2)


def _matern_bessel(r: np.ndarray, l: float, nu: float) -> np.ndarray:
    scaled = math.sqrt(2.0 * nu) * r / l
    out = np.ones_like(scaled)
    pos = scaled > 0
    s = scaled[pos]
    with np.errstate(over="ignore", invalid="ignore"):
        vals = (2.0 ** (1.0 - nu) / special.gamma(nu)) * s**nu * special.kv(nu, s)
    # kv underflows to 0 for large arguments, and s**nu * kv -> 1 as s -> 0
    vals = np.where(np.isfinite(vals), vals, 0.0)
    out[pos] = np.clip(vals, 0.0, 1.0)
    return out


def kernel_eval(spec: KernelSpec, p: Sequence[float], q: Sequence[float]) -> float:
    """Covariance between two profiles ``p = (x, y)`` and ``q = (x', y')``."""
    d = math.hypot(p[0] - q[0], p[1] - q[1])
    return float(spec.of_distance(d))


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Covariance matrix between two arrays of profiles of shape (N, 2)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    diff = a[:, None, :] - b[None, :, :]
    return spec.of_distance(np.sqrt(np.sum(diff * diff, axis=-1)))


class ProfileGrid:
    """Finite grid ``xs x ys`` of strategy profiles.

    Coordinates must be strictly increasing. Grids with a single row or column
    are representable (useful for oracles) although the solvers reject them.
    """

    def __init__(self, xs: Iterable[float], ys: Iterable[float]):
        xs = np.asarray(list(xs), dtype=float)
        ys = np.asarray(list(ys), dtype=float)
        for name, v in (("xs", xs), ("ys", ys)):
            if v.ndim != 1 or v.size == 0:
                raise ParameterError(f"{name} must be a non-empty 1-d sequence")
            if not np.all(np.isfinite(v)):
                raise ParameterError(f"{name} must be finite")
            if np.any(np.diff(v) <= 0):
                raise ParameterError(f"{name} must be strictly increasing (no duplicates)")
        xs.setflags(write=False)
        ys.setflags(write=False)
        self.xs = xs
        self.ys = ys

    @classmethod
    def equally_spaced(cls, n: int, m: int | None = None) -> "ProfileGrid":
        """Grid of ``n`` (and ``m``) equally spaced points in [0, 1], endpoints included."""
        m = n if m is None else m
        if n < 2 or m < 2:
            raise ParameterError("an equally spaced grid needs at least 2 points per side")
        return cls(np.linspace(0.0, 1.0, n), np.linspace(0.0, 1.0, m))

    @property
    def n(self) -> int:
        return self.xs.size

    @property
    def m(self) -> int:
        return self.ys.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.m)

    @property
    def size(self) -> int:
        return self.n * self.m

    def points(self) -> np.ndarray:
        """All profiles as an array of shape (n*m, 2), row-major."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def flat(self, profile) -> int:
        """Flat index of a profile given as ``(i, j)`` or an int."""
        if isinstance(profile, (int, np.integer)):
            k = int(profile)
            if not 0 <= k < self.size:
                raise ParameterError(f"profile index {k} out of range")
            return k
        i, j = profile
        if not (0 <= i < self.n and 0 <= j < self.m):
            raise ParameterError(f"profile {(i, j)} out of range")
        return int(i) * self.m + int(j)

    def unflat(self, k: int) -> tuple[int, int]:
        return divmod(int(k), self.m)

    def __eq__(self, other):
        if not isinstance(other, ProfileGrid):
            return NotImplemented
        return np.array_equal(self.xs, other.xs) and np.array_equal(self.ys, other.ys)

    def __hash__(self):
        return hash((self.xs.tobytes(), self.ys.tobytes()))

    def __repr__(self):
        return f"ProfileGrid(n={self.n}, m={self.m})"


def grid_covariance(grid: ProfileGrid, spec: KernelSpec) -> np.ndarray:
    """Prior covariance over all profiles of ``grid``."""
    return kernel_matrix(spec, grid.points())


def jittered_cholesky(a: np.ndarray, jitters: Sequence[float] = _JITTERS) -> np.ndarray:
    """Lower Cholesky factor of ``a + jitter * I`` with escalating jitter."""
    eye = np.eye(a.shape[0])
    for jitter in jitters:
        try:
            return linalg.cholesky(a + jitter * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise NumericError(f"factorization failed with jitter up to {jitters[-1]:g}")


def _solve_pd(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # a already carries the noise on its diagonal; jitter only on failure
    factor = jittered_cholesky(a, (0.0,) + _JITTERS)
    return linalg.cho_solve((factor, True), rhs, check_finite=False)


def sample_utility(grid: ProfileGrid, spec: KernelSpec, seed=None) -> np.ndarray:
    """Draw a utility table of shape (n, m) from GP(0, k) restricted to ``grid``.

    Separable kernels are sampled through the Kronecker factorization
    ``L_x Z L_y^T``; other kernels through the Cholesky factor of the full
    ``nm x nm`` covariance.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(grid.shape)
    if spec.separable:
        unit = KernelSpec.se(spec.length_scale)
        lx = jittered_cholesky(kernel_matrix(unit, np.column_stack([grid.xs, np.zeros(grid.n)])))
        ly = jittered_cholesky(kernel_matrix(unit, np.column_stack([grid.ys, np.zeros(grid.m)])))
        return math.sqrt(spec.variance) * (lx @ z @ ly.T)
    factor = jittered_cholesky(grid_covariance(grid, spec))
    return (factor @ z.ravel()).reshape(grid.shape)


@dataclass(eq=False)
class GPPosterior:
    """Posterior belief over every profile of a grid.

    ``mean`` and ``cov`` are indexed by flat profile index. ``counts`` and
    ``obs_sum`` are the per-profile number and sum of observations, and ``t``
    the total number of observations absorbed.
    """

    grid: ProfileGrid
    kernel: KernelSpec
    noise: float
    mean: np.ndarray
    cov: np.ndarray
    counts: np.ndarray
    obs_sum: np.ndarray
    t: int = 0

    @classmethod
    def prior(cls, grid: ProfileGrid, kernel: KernelSpec, noise: float,
              prior_cov: np.ndarray | None = None) -> "GPPosterior":
        _check_noise(noise)
        cov = grid_covariance(grid, kernel) if prior_cov is None else np.array(prior_cov, dtype=float)
        p = grid.size
        return cls(grid, kernel, float(noise), np.zeros(p), cov,
                   np.zeros(p, dtype=np.int64), np.zeros(p), 0)

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    def mean_table(self) -> np.ndarray:
        return self.mean.reshape(self.grid.shape)

    def copy(self) -> "GPPosterior":
        return GPPosterior(self.grid, self.kernel, self.noise, self.mean.copy(), self.cov.copy(),
                           self.counts.copy(), self.obs_sum.copy(), self.t)


def _check_noise(noise: float) -> None:
    if not noise > 0:
        raise ParameterError("observation noise must be positive")


def _history_arrays(grid: ProfileGrid, history) -> tuple[np.ndarray, np.ndarray]:
    idx = np.fromiter((grid.flat(p) for p, _ in history), dtype=np.int64, count=len(history))
    obs = np.fromiter((float(y) for _, y in history), dtype=float, count=len(history))
    return idx, obs


def posterior_batch(grid: ProfileGrid, kernel: KernelSpec, noise: float, history,
                    prior_cov: np.ndarray | None = None) -> GPPosterior:
    """Posterior from the full observation history ``[(profile, value), ...]``.

    Solves ``(K_t + noise I)`` directly; the reference implementation the other
    two forms are checked against.
    """
    post = GPPosterior.prior(grid, kernel, noise, prior_cov)
    history = list(history)
    if not history:
        return post
    idx, obs = _history_arrays(grid, history)
    prior = post.cov
    k_hist = prior[:, idx]
    system = prior[np.ix_(idx, idx)] + noise * np.eye(idx.size)
    alpha = _solve_pd(system, np.column_stack([obs, k_hist.T]))
    post.mean = k_hist @ alpha[:, 0]
    post.cov = prior - k_hist @ alpha[:, 1:]
    post.cov = 0.5 * (post.cov + post.cov.T)
    post.counts = np.bincount(idx, minlength=grid.size).astype(np.int64)
    post.obs_sum = np.bincount(idx, weights=obs, minlength=grid.size)
    post.t = idx.size
    return post


def update_recursive(post: GPPosterior, profile, value: float) -> GPPosterior:
    """Absorb one observation in place with a rank-one update and return ``post``."""
    k = post.grid.flat(profile)
    col = post.cov[:, k].copy()
    denom = post.noise + col[k]
    post.mean += col * ((value - post.mean[k]) / denom)
    v = col / math.sqrt(denom)
    post.cov -= np.outer(v, v)
    post.counts[k] += 1
    post.obs_sum[k] += value
    post.t += 1
    return post


def _aggregated_system(prior: np.ndarray, noise: float, counts: np.ndarray, means: np.ndarray):
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise ParameterError("observation counts must be non-negative")
    support = np.flatnonzero(counts)
    system = prior[np.ix_(support, support)] + np.diag(noise / counts[support])
    return support, system, np.asarray(means, dtype=float)[support]


def aggregated_mean(prior: np.ndarray, noise: float, counts, means) -> np.ndarray:
    """Posterior mean only, from per-profile counts and sample means."""
    support, system, ubar = _aggregated_system(prior, noise, counts, means)
    if support.size == 0:
        return np.zeros(prior.shape[0])
    return prior[:, support] @ _solve_pd(system, ubar)


def posterior_aggregated(grid: ProfileGrid, kernel: KernelSpec, noise: float, counts, means,
                         prior_cov: np.ndarray | None = None) -> GPPosterior:
    """Posterior from per-profile observation counts and sample means.

    Equivalent to :func:`posterior_batch` on any history with those sufficient
    statistics, but the linear system is only as large as the number of
    distinct queried profiles.
    """
    post = GPPosterior.prior(grid, kernel, noise, prior_cov)
    counts = np.asarray(counts, dtype=np.int64).ravel()
    means = np.asarray(means, dtype=float).ravel()
    if counts.size != grid.size or means.size != grid.size:
        raise ParameterError("counts and means must have one entry per profile")
    support, system, ubar = _aggregated_system(post.cov, noise, counts, means)
    if support.size == 0:
        return post
    k_sup = post.cov[:, support]
    alpha = _solve_pd(system, np.column_stack([ubar, k_sup.T]))
    post.mean = k_sup @ alpha[:, 0]
    post.cov = post.cov - k_sup @ alpha[:, 1:]
    post.cov = 0.5 * (post.cov + post.cov.T)
    post.counts = counts.copy()
    post.obs_sum = np.where(counts > 0, counts * means, 0.0)
    post.t = int(counts.sum())
    return post


def variance_bound(n_obs: int, noise: float, prior_variance: float = 1.0) -> float:
    """Upper bound ``noise / (noise / sigma^2 + N)`` on the posterior variance of a profile
    observed ``N`` times."""
    return noise / (noise / prior_variance + n_obs)
