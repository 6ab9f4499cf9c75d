import math

import numpy as np
import pytest
from scipy import integrate

from conftest import random_state, rel
from fracnls import rng as rngmod
from fracnls.errors import AcceptanceStarvation
from fracnls.gibbs import (
    RenormConstants,
    alpha_N,
    centered_nonlinearity,
    effective_sample_size,
    functionals,
    functionals_batch,
    partition_estimates,
    renorm_nonlinearity,
    sample_mu,
    sample_mu_batch,
    sample_rho,
    sample_rho_ensemble,
    weighted_mean,
)
from fracnls.spectral import FourierState, grid_lp_norm, mass, project


def _quad_mode0(fn):
    """E over a standard complex Gaussian g of fn(|g|^2), as a 2-D quadrature in (Re g, Im g)."""
    L = 8.0
    val, _ = integrate.dblquad(
        lambda y, x: fn(x * x + y * y) * math.exp(-(x * x + y * y)) / math.pi, -L, L, -L, L, epsabs=1e-12
    )
    return val


# ---------------------------------------------------------------- alpha_N


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.5, 2.0])
def test_alpha_N_zero(alpha):
    assert alpha_N(alpha, 0) == 1.0


def test_alpha_N_values():
    assert alpha_N(1.0, 1) == 2.0
    assert alpha_N(2.0, 2) == pytest.approx(1 + 1 + 2 / 5)
    vals = [alpha_N(0.95, N) for N in range(10)]
    assert np.all(np.diff(vals) > 0)
    rc = RenormConstants(0.95, 9)
    assert rc.alpha_N == vals[-1] >= 1.0
    with pytest.raises(ValueError):
        alpha_N(1.0, -1)


def test_alpha_N_monte_carlo():
    alpha, N, n = 1.5, 6, 100_000
    c = sample_mu_batch(7, alpha, N, n)
    m = np.sum(np.abs(c) ** 2, axis=1)
    assert abs(m.mean() - alpha_N(alpha, N)) < 4 * m.std(ddof=1) / math.sqrt(n)
    v0 = np.abs(c[:, N]) ** 2
    assert abs(v0.mean() - 1.0) < 4 * v0.std(ddof=1) / math.sqrt(n)
    # real and imaginary parts carry half the variance each
    re = c[:, N + 2].real
    var = 1.0 / (2 * (1 + 2**alpha))
    assert abs(np.mean(re**2) - var) < 4 * np.std(re**2, ddof=1) / math.sqrt(n)


def test_sample_mu_determinism():
    a = sample_mu(rngmod.stream(3, 5, "t"), 1.2, 6)
    b = sample_mu(rngmod.stream(3, 5, "t"), 1.2, 6)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    batch = sample_mu_batch(3, 1.2, 6, 4, start=3, tag="t")
    np.testing.assert_array_equal(batch[2], a.coeffs)
    with pytest.raises(ValueError):
        sample_mu(rngmod.stream(0), 1.2, -1)


def test_sample_mu_prefix_coupling():
    # coefficients on common modes do not depend on the truncation level
    lo = sample_mu_batch(5, 1.5, 4, 3)
    hi = sample_mu_batch(5, 1.5, 16, 3)
    w = np.sqrt((1 + np.abs(np.arange(-4, 5)) ** 1.5) / (1 + np.abs(np.arange(-4, 5)) ** 1.5))
    np.testing.assert_array_equal(hi[:, 12:21] * w, lo)


# ---------------------------------------------------------------- functionals


def test_functionals_examples():
    rc = RenormConstants(0.95, 4)
    a = rc.alpha_N
    z = functionals(FourierState.zeros(4), rc)
    assert z.b_N == -a and z.f_N == pytest.approx(a * a) and z.g_N == 0
    c = 0.7 - 1.3j
    F = functionals(FourierState([c]), rc)
    a2 = abs(c) ** 2
    assert F.f_N == pytest.approx(0.5 * a2**2 - 2 * a * a2 + a * a, rel=1e-13)
    assert F.g_N == pytest.approx(-0.5 * a2**2, rel=1e-13)
    assert F.V == pytest.approx(0.5 * a2**2, rel=1e-13)


@pytest.mark.parametrize("alpha", [0.95, 1.5])
@pytest.mark.parametrize("N", [4, 16])
def test_functional_identities(alpha, N):
    rc = RenormConstants(alpha, N)
    c = sample_mu_batch(11, alpha, N + 3, 1000)
    V, b, f, g = functionals_batch(c, rc)
    scale = np.maximum(np.abs(f), np.abs(b) ** 2)
    assert np.max(np.abs(g - (f - b * b)) / scale) < 1e-10
    assert np.all(f >= -rc.alpha_N**2)
    # f_N + alpha_N^2 = 1/2 int (|Pi_N u|^2 - 2 alpha_N)^2 on an independent grid
    G = 8 * N + 8
    modes = np.arange(-N, N + 1)
    p = c[:, 3:-3] @ np.exp(2j * np.pi * np.outer(modes, np.arange(G)) / G)
    sq = 0.5 * np.mean((np.abs(p) ** 2 - 2 * rc.alpha_N) ** 2, axis=1)
    assert rel(f + rc.alpha_N**2, sq) < 1e-10


def test_functionals_single_state(rng):
    u = random_state(rng, 5)
    rc = RenormConstants(1.5, 3)
    F = functionals(u, rc)
    p = project(u, 3)
    assert F.V == pytest.approx(0.5 * grid_lp_norm(p, 4) ** 4, rel=1e-12)
    assert F.b_N == pytest.approx(mass(p) - rc.alpha_N, rel=1e-12)


def test_mu_centering():
    # E b_N = 0 and E f_N = 0 under mu
    alpha, N, n = 1.5, 8, 20_000
    rc = RenormConstants(alpha, N)
    V, b, f, g = functionals_batch(sample_mu_batch(2, alpha, N, n), rc)
    for x in (b, f):
        assert abs(x.mean()) < 4 * x.std(ddof=1) / math.sqrt(n)


def test_renorm_nonlinearity(rng):
    rc = RenormConstants(0.95, 6)
    c = 0.4 + 0.8j
    out = renorm_nonlinearity(FourierState.from_modes({2: c}, K=6), rc)
    assert out[2] == pytest.approx((abs(c) ** 2 - 2 * rc.alpha_N) * c, rel=1e-13)
    assert np.all(renorm_nonlinearity(FourierState.zeros(6), rc).coeffs == 0)
    for _ in range(100):
        u = random_state(rng, 8)
        F = renorm_nonlinearity(u, rc)
        G = centered_nonlinearity(u, 6)
        b = functionals(u, rc).b_N
        assert rel(F.coeffs, (G + 2 * b * project(u, 6)).coeffs) < 1e-12


# ---------------------------------------------------------------- Gibbs sampling


def test_acceptance_rate_quadrature():
    # N = 0, unrenormalized: accept with prob exp(-|g|^4 / 2)
    n = 20_000
    attempts = np.array([s.attempts for s in sample_rho_ensemble(4, 1.5, 0, n, mode="rejection")])
    rate = n / attempts.sum()
    exact = _quad_mode0(lambda r2: math.exp(-0.5 * r2 * r2))
    # attempts are geometric(p): delta method for n / sum
    se = math.sqrt((1 - exact) / exact**2 / n) * exact**2
    assert abs(rate - exact) < 4 * se
    assert attempts.min() == 1


def test_importance_vs_rejection():
    alpha, N, n = 1.5, 4, 4000
    rej = sample_rho_ensemble(1, alpha, N, n, mode="rejection")
    imp = sample_rho_ensemble(2, alpha, N, n, mode="importance")
    for obs in (lambda u: mass(u), lambda u: abs(u[0]) ** 2, lambda u: grid_lp_norm(u, 4) ** 4):
        m1, s1 = weighted_mean([obs(s.state) for s in rej])
        m2, s2 = weighted_mean([obs(s.state) for s in imp], [s.log_weight for s in imp])
        assert abs(m1 - m2) < 4 * math.hypot(s1, s2)


def test_rejection_determinism():
    a = sample_rho_ensemble(9, 0.95, 2, 20, mode="rejection")
    b = sample_rho_ensemble(9, 0.95, 2, 20, mode="rejection")
    assert [s.attempts for s in a] == [s.attempts for s in b]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.state.coeffs, y.state.coeffs)
        assert x.seed_path == y.seed_path


def test_importance_log_weight():
    s = sample_rho(rngmod.stream(0, 0, "w"), 0.95, 4, mode="importance")
    assert s.log_weight == pytest.approx(-functionals(s.state, RenormConstants(0.95, 4)).f_N)
    assert math.isfinite(s.log_weight)


def test_acceptance_starvation():
    with pytest.raises(AcceptanceStarvation, match="acceptance starvation"):
        sample_rho(rngmod.stream(0), 0.6, 64, mode="rejection", max_attempts=5)


def test_bad_mode():
    with pytest.raises(ValueError):
        sample_rho(rngmod.stream(0), 1.5, 2, mode="mcmc")


def test_weighted_mean():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    m, se = weighted_mean(x)
    assert m == 2.5 and se == pytest.approx(np.std(x, ddof=1) / 2)
    m, _ = weighted_mean(x, np.log([1.0, 1.0, 1.0, 5.0]))
    assert m == pytest.approx((1 + 2 + 3 + 20) / 8)
    assert effective_sample_size(np.zeros(10)) == pytest.approx(10)


# ---------------------------------------------------------------- partition function


def test_partition_p0():
    assert partition_estimates(0.95, 8, 0.0, 10).mean == 1.0


@pytest.mark.parametrize("alpha,p", [(0.95, 1.0), (1.0, 2.0)])
def test_partition_quadrature(alpha, p):
    est = partition_estimates(alpha, 0, p, 50_000, seed=3)
    # alpha_0 = 1: f_0 = |g|^4 / 2 - 2 |g|^2 + 1
    exact = _quad_mode0(lambda r2: math.exp(-p * (0.5 * r2 * r2 - 2 * r2 + 1)))
    assert abs(est.mean - exact) < 4 * est.se


def test_partition_warns_outside_range():
    with pytest.warns(UserWarning):
        partition_estimates(0.8, 2, 1.0, 100)
