import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracnls.gibbs import RenormConstants, functionals_batch
from fracnls.report import fmt
from fracnls.resonance import CountingQuery, count_set, resonance_phi
from fracnls.spectral import (
    FourierState,
    cubic_nonlinearity,
    dealiased_grid_size,
    from_grid,
    gauge,
    linear_flow,
    mass,
    project,
    to_grid,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def states(draw, max_K=10):
    K = draw(st.integers(0, max_K))
    re = draw(arrays(np.float64, 2 * K + 1, elements=finite))
    im = draw(arrays(np.float64, 2 * K + 1, elements=finite))
    return FourierState(re + 1j * im)


alphas = st.floats(0.55, 2.0)


@given(states())
def test_grid_round_trip(u):
    v = from_grid(to_grid(u, dealiased_grid_size(u.K)), u.K)
    assert np.allclose(v.coeffs, u.coeffs, rtol=0, atol=1e-12 * max(1.0, np.abs(u.coeffs).max(initial=0)))


@given(states(), st.integers(0, 12))
def test_projection(u, N):
    p = project(u, N)
    np.testing.assert_array_equal(project(p, N).coeffs, p.coeffs)
    assert mass(p) <= mass(u) * (1 + 1e-15) + 1e-300


@given(states(), alphas, st.floats(-50, 50))
def test_linear_flow_unitary(u, alpha, t):
    v = linear_flow(u, t, alpha)
    np.testing.assert_allclose(np.abs(v.coeffs), np.abs(u.coeffs), rtol=1e-13, atol=1e-300)


@given(states(), st.floats(-5, 5), st.floats(0, 100))
def test_gauge_inverse(u, t, m0):
    back = gauge(gauge(u, t, m0), t, m0, "backward")
    np.testing.assert_allclose(back.coeffs, u.coeffs, rtol=1e-12, atol=1e-12)


@settings(deadline=None)
@given(states(max_K=6))
def test_cubic_conserves_mass_direction(u):
    # <Pi_N(|u|^2 u), u> = int |u|^4 is real and nonnegative
    N = u.K
    inner = np.vdot(u.coeffs, cubic_nonlinearity(u, N).coeffs)
    scale = max(1.0, mass(u) ** 2)
    assert abs(inner.imag) <= 1e-10 * scale and inner.real >= -1e-10 * scale


@given(states(max_K=8), alphas, st.integers(0, 8))
def test_functional_algebra(u, alpha, N):
    rc = RenormConstants(alpha, N)
    V, b, f, g = (float(x) for x in functionals_batch(u.coeffs, rc))
    scale = max(1.0, abs(f), b * b)
    assert abs(g - (f - b * b)) <= 1e-10 * scale
    assert f + rc.alpha_N**2 >= -1e-10 * scale


@given(st.integers(-200, 200), st.integers(-200, 200), st.integers(-200, 200), st.floats(1.01, 2.0))
def test_phi_antisymmetric(n1, n2, n3, alpha):
    n = n1 - n2 + n3
    a = resonance_phi(n1, n2, n3, alpha)
    b = resonance_phi(n2, n1, n, alpha)
    assert abs(a + b) <= 1e-9 * max(1.0, abs(a))


@given(st.integers(-60, 60), st.floats(0, 300), st.integers(1, 20), st.integers(1, 20),
       st.floats(0.01, 5), st.floats(0.01, 5), st.floats(1.01, 1.99))
def test_count_monotone_in_r(a, l, N1, N2, r1, r2, alpha):
    lo, hi = sorted((r1, r2))
    assert count_set(CountingQuery(a, l, N1, N2, lo, alpha)) <= count_set(CountingQuery(a, l, N1, N2, hi, alpha))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trip(x):
    assert float(fmt(x)) == x
