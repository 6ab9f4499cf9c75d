"""Gaussian base measure, truncated Gibbs measures and renormalization functionals.

Samples of the Gaussian measure are random Fourier series

    u = sum_{|n| <= K} g_n / sqrt(1 + |n|^alpha) e_n,

with ``g_n`` independent standard complex Gaussians (E|g_n|^2 = 1).  The
Gaussians are drawn mode by mode in the order 0, 1, -1, 2, -2, ... so that a
sample on |n| <= K is a prefix of the sample on |n| <= K' > K drawn from the
same stream.  Using the same stream for every cutoff therefore couples all
truncations through one realisation of the ``g_n``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import rng as rngmod
from .errors import AcceptanceStarvation
from .spectral import (
    FourierState,
    check_alpha,
    cubic_batch,
    dealiased_grid_size,
    mass_batch,
    quartic_batch,
    resize,
)

__all__ = [
    "RenormConstants",
    "GibbsSample",
    "Functionals",
    "alpha_N",
    "sample_mu",
    "sample_mu_batch",
    "functionals",
    "functionals_batch",
    "renorm_nonlinearity",
    "centered_nonlinearity",
    "sample_rho",
    "sample_rho_ensemble",
    "weighted_mean",
    "partition_estimates",
]


def alpha_N(alpha, N):
    """Expected squared L^2 norm of Pi_N u under the Gaussian measure."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    n = np.arange(1, int(N) + 1, dtype=float)
    # summed from the smallest terms up
    return 1.0 + 2.0 * math.fsum((1.0 / (1.0 + n**alpha))[::-1])


@dataclass(frozen=True)
class RenormConstants:
    alpha: float
    N: int
    alpha_N: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha_N", alpha_N(self.alpha, self.N))


@dataclass(frozen=True, eq=False)
class GibbsSample:
    state: FourierState
    log_weight: float = 0.0
    accepted: bool = True
    seed_path: tuple = ()
    attempts: int = 1


class Functionals(NamedTuple):
    V: float
    b_N: float
    f_N: float
    g_N: float


def _draw_order(K):
    """Array positions (index n + K) in the draw order 0, 1, -1, 2, -2, ..."""
    order = [K]
    for n in range(1, K + 1):
        order += [K + n, K - n]
    return np.array(order)


def _gaussian_coeffs(gen, K):
    z = gen.standard_normal((2 * K + 1, 2))
    g = np.empty(2 * K + 1, dtype=complex)
    g[_draw_order(K)] = (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)
    return g


def _mu_scale(alpha, K):
    n = np.abs(np.arange(-K, K + 1)).astype(float)
    return 1.0 / np.sqrt(1.0 + n**alpha)


def sample_mu(rng, alpha, K):
    """One draw of the Gaussian base measure on modes |n| <= K."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    return FourierState(_gaussian_coeffs(rng, K) * _mu_scale(alpha, K))


def sample_mu_batch(seed, alpha, K, count, start=0, tag="mu"):
    """``count`` independent draws, sample i taken from stream ``(seed, tag, start + i)``."""
    scale = _mu_scale(alpha, K)
    out = np.empty((count, 2 * K + 1), dtype=complex)
    for i in range(count):
        out[i] = _gaussian_coeffs(rngmod.stream(seed, start + i, tag), K) * scale
    return out


# --------------------------------------------------------------------------
# functionals


def _truncate(c, N):
    """Pi_N of coefficient arrays, returned on the mode range -N..N."""
    return resize(c, N)


def functionals_batch(c, rc, G=None):
    """(V, b_N, f_N, g_N) of Pi_N u for coefficient arrays of any mode range."""
    p = _truncate(c, rc.N)
    if G is None:
        G = dealiased_grid_size(rc.N)
    m = mass_batch(p)
    q = quartic_batch(p, G)
    a = rc.alpha_N
    V = 0.5 * q
    b = m - a
    f = 0.5 * q - 2.0 * a * m + a * a
    g = 0.5 * q - m * m
    return V, b, f, g


def functionals(u, rc, G=None):
    """V, b_N, f_N, g_N evaluated at Pi_N u."""
    return Functionals(*(float(x) for x in functionals_batch(u.coeffs, rc, G)))


def renorm_nonlinearity(u, rc, G=None):
    """F_N(u) = Pi_N(|Pi_N u|^2 Pi_N u) - 2 alpha_N Pi_N u, on the mode range of ``u``."""
    p = _truncate(u.coeffs, rc.N)
    if G is None:
        G = dealiased_grid_size(rc.N)
    out = cubic_batch(p, G) - 2.0 * rc.alpha_N * p
    return FourierState(resize(out, u.K))


def centered_nonlinearity(u, N, G=None):
    """G_N(u) = Pi_N(|Pi_N u|^2 Pi_N u) - 2 ||Pi_N u||^2 Pi_N u."""
    p = _truncate(u.coeffs, N)
    if G is None:
        G = dealiased_grid_size(N)
    out = cubic_batch(p, G) - 2.0 * mass_batch(p) * p
    return FourierState(resize(out, u.K))


# --------------------------------------------------------------------------
# Gibbs sampling


def _default_density(alpha):
    return "unrenormalized" if alpha > 1 else "renormalized"


def log_density_batch(c, rc, density):
    """Log of the Gibbs weight relative to the Gaussian measure (up to normalization)."""
    V, b, f, g = functionals_batch(c, rc)
    if density == "renormalized":
        return -f
    if density == "unrenormalized":
        return -V
    raise ValueError(f"unknown density {density!r}")


def _log_accept_shift(rc, density):
    # log densities shifted so that the acceptance probability is <= 1
    return rc.alpha_N**2 if density == "renormalized" else 0.0


def sample_rho(rng, alpha, N, mode="rejection", density=None, K=None, max_attempts=100_000, seed_path=()):
    """One draw of the truncated Gibbs measure.

    ``density`` is 'renormalized' (weight exp(-f_N)) or 'unrenormalized'
    (weight exp(-V(Pi_N u)), meaningful for alpha > 1); the default follows
    alpha.  In rejection mode a Gaussian draw is accepted with probability
    exp(-f_N - alpha_N^2) resp. exp(-V); in importance mode the Gaussian draw is
    returned with its log weight.
    """
    check_alpha(alpha)
    density = density or _default_density(alpha)
    rc = RenormConstants(alpha, N)
    K = N if K is None else K
    if mode == "importance":
        u = sample_mu(rng, alpha, K)
        lw = float(log_density_batch(u.coeffs, rc, density))
        return GibbsSample(u, lw, True, tuple(seed_path), 1)
    if mode != "rejection":
        raise ValueError("mode must be 'rejection' or 'importance'")
    shift = _log_accept_shift(rc, density)
    for attempt in range(1, max_attempts + 1):
        u = sample_mu(rng, alpha, K)
        log_acc = float(log_density_batch(u.coeffs, rc, density)) - shift
        if math.log(rng.random()) < log_acc:
            return GibbsSample(u, 0.0, True, tuple(seed_path), attempt)
    raise AcceptanceStarvation(max_attempts, 0)


def sample_rho_ensemble(seed, alpha, N, count, mode="importance", density=None, K=None, max_attempts=100_000, tag="rho"):
    """``count`` Gibbs samples from independent streams (seed, tag, i)."""
    out = []
    for i in range(count):
        gen = rngmod.stream(seed, i, tag)
        out.append(
            sample_rho(gen, alpha, N, mode, density, K, max_attempts, seed_path=rngmod.seed_path(seed, i, tag))
        )
    return out


def weighted_mean(x, log_w=None):
    """Self-normalized mean and delta-method standard error.

    Without weights this is the sample mean with the usual standard error.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if log_w is None:
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n))
    lw = np.asarray(log_w, dtype=float)
    w = np.exp(lw - lw.max())
    w /= w.sum()
    m = float(np.sum(w * x))
    se = float(math.sqrt(np.sum(w**2 * (x - m) ** 2) * n / (n - 1)))
    return m, se


def effective_sample_size(log_w):
    lw = np.asarray(log_w, dtype=float)
    w = np.exp(lw - lw.max())
    return float(w.sum() ** 2 / np.sum(w**2))


class PartitionEstimate(NamedTuple):
    mean: float
    se: float
    trials: int


def partition_estimates(alpha, N, p, trials, seed=0, density="renormalized"):
    """Monte Carlo estimate of E_mu[exp(-p f_N)] with its standard error."""
    if not (7 / 8 < alpha <= 1) and density == "renormalized":
        warnings.warn(f"alpha={alpha} lies outside (7/8, 1]; integrability is not guaranteed", stacklevel=2)
    if p == 0:
        return PartitionEstimate(1.0, 0.0, trials)
    rc = RenormConstants(alpha, N)
    c = sample_mu_batch(seed, alpha, N, trials, tag="partition")
    x = np.exp(p * log_density_batch(c, rc, density))
    return PartitionEstimate(*weighted_mean(x), trials)
