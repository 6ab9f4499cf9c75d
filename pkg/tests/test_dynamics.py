import json

import numpy as np
import pytest

from conftest import random_state
from fracnls import rng as rngmod
from fracnls.dynamics import (
    EquationVariant,
    Trajectory,
    auto_integrate,
    conservation_report,
    evolve,
    gauge_conjugacy_check,
    integrate_batch,
    integrate_uniform,
    phase_conjugacy_check,
    single_mode_solution,
)
from fracnls.errors import BlowupError
from fracnls.gibbs import alpha_N, sample_mu
from fracnls.spectral import FourierState, hamiltonian, linear_flow, mass, mass_batch, wick_hamiltonian


def _e8(seed=0, alpha=1.5, N=8):
    return sample_mu(rngmod.stream(seed, 0, "dyn-test"), alpha, N)


def test_variant_validation():
    with pytest.raises(ValueError):
        EquationVariant.make("focusing", 1.5, 4)
    eq = EquationVariant.make("renormalized", 0.95, 6)
    assert eq.renorm_constant == alpha_N(0.95, 6)
    assert EquationVariant.make("truncated", 1.5, 4).renorm_constant == 0.0


@pytest.mark.parametrize("variant", ["truncated", "renormalized", "wick"])
@pytest.mark.parametrize("k", [0, -2, 3])
def test_single_mode_closed_form(variant, k):
    # rk4 phase error is ~ rate^5 dt^4 T / 120, below 1e-10 for rates up to ~5.9 at dt = 1e-3
    alpha, N, c = 1.5, 4, 0.6 - 0.3j
    eq = EquationVariant.make(variant, alpha, N)
    u0 = FourierState.from_modes({k: c}, K=N)
    tr = evolve(u0, eq, 1.0, 1e-3)
    exact = single_mode_solution(c, k, alpha, tr.times, variant, eq.renorm_constant)
    assert np.max(np.abs(tr.states[:, k + N] - exact)) < 1e-10
    others = np.delete(tr.states, k + N, axis=1)
    assert np.max(np.abs(others)) < 1e-14


def test_energy_matches_spectral_hamiltonians():
    u = _e8(1)
    for tag, ref in (("truncated", hamiltonian(u, 1.5)), ("wick", wick_hamiltonian(u, 1.5))):
        eq = EquationVariant.make(tag, 1.5, 8)
        assert float(eq.energy(u.coeffs)) == pytest.approx(ref, rel=1e-12)


def test_zero_data():
    eq = EquationVariant.make("truncated", 1.5, 4)
    tr = evolve(FourierState.zeros(4), eq, 1.0, 0.01)
    assert np.all(tr.states == 0)
    rep = gauge_conjugacy_check(FourierState.zeros(4), 1.5, 4, 1.0, 0.01)
    assert rep["max_discrepancy"] == 0.0 and rep["mass0"] == 0.0


def test_evolve_rejects_data_outside_EN():
    eq = EquationVariant.make("truncated", 1.5, 2)
    with pytest.raises(ValueError):
        evolve(FourierState.from_modes({3: 1.0}), eq, 1.0, 0.1)
    with pytest.raises(ValueError):
        evolve(FourierState.zeros(2), eq, 1.0, 0.0)


def test_time_grid():
    eq = EquationVariant.make("truncated", 1.5, 4)
    tr = evolve(_e8(2, N=4), eq, 1.0, 0.03, stride=5)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == pytest.approx(1.0) and tr.times[0] == 0.0
    # 34 steps of 1/34: outputs at 0, 5, 10, ..., 30 and the final step
    assert len(tr) == 8
    t, s = integrate_uniform(_e8(2, N=4).coeffs, eq, 1.0, 0.03, 10)
    np.testing.assert_allclose(t, np.linspace(0, 1, 11), atol=1e-14)


def test_phase_conjugacy_single_mode():
    c, k, alpha, N = 0.5 + 0.5j, 1, 0.95, 4
    kappa = alpha_N(alpha, N)
    t = np.linspace(0, 1, 11)
    u = single_mode_solution(c, k, alpha, t, "truncated")
    w = single_mode_solution(c, k, alpha, t, "renormalized", kappa)
    assert np.max(np.abs(np.exp(-2j * t * kappa) * u - w)) < 1e-14
    rep = phase_conjugacy_check(FourierState.from_modes({k: c}, K=N), alpha, N, 1.0, 1e-3)
    assert rep["max_discrepancy"] < 1e-10


def test_phase_conjugacy_random():
    rep = phase_conjugacy_check(_e8(3), 1.5, 8, 1.0, 1e-3)
    assert rep["max_discrepancy"] < 1e-6
    assert rep["renorm_constant"] == alpha_N(1.5, 8)


def test_phase_conjugacy_degenerate():
    rep = phase_conjugacy_check(_e8(4), 1.5, 8, 0.5, 1e-2, renorm_constant=0.0)
    assert rep["max_discrepancy"] == 0.0


def test_gauge_conjugacy():
    c, k = 1.1 - 0.2j, -2
    rep = gauge_conjugacy_check(FourierState.from_modes({k: c}, K=4), 1.5, 4, 1.0, 1e-3)
    assert rep["max_discrepancy"] < 1e-10
    rep = gauge_conjugacy_check(_e8(5), 1.5, 8, 1.0, 1e-3)
    assert rep["max_discrepancy"] < 1e-6


def test_linear_flow_conservation_exact():
    u = _e8(6)
    times = np.linspace(0, 5, 51)
    states = np.array([linear_flow(u, t, 1.5).coeffs for t in times])
    eq = EquationVariant.make("truncated", 1.5, 8, coupling=0.0)
    tr = Trajectory(times, states, mass_batch(states), eq.energy(states), "linear", 1.5, 8, 0.1, "exact")
    r = conservation_report(tr)
    assert r["max_rel_drift_mass"] < 1e-13 and r["max_rel_drift_energy"] < 1e-13


@pytest.mark.parametrize("variant", ["truncated", "renormalized", "wick"])
def test_auto_integrate_meets_tolerance(variant):
    eq = EquationVariant.make(variant, 1.5, 8)
    dt, times, states = auto_integrate(_e8(7), eq, 1.0, tol=1e-8)
    m = mass_batch(states)
    e = eq.energy(states)
    assert np.max(np.abs(m - m[0])) / m[0] < 1e-8
    assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-8
    assert dt > 0 and len(times) == len(states)


def test_rk4_order():
    eq = EquationVariant.make("truncated", 1.5, 8)
    u = _e8(8).coeffs
    ref = integrate_batch(u, eq, 1.0, 1e-4)[1][-1]
    errs = [np.linalg.norm(integrate_batch(u, eq, 1.0, dt)[1][-1] - ref) for dt in (4e-3, 2e-3)]
    assert 12 < errs[0] / errs[1] < 20


def test_strang_first_order():
    # the projected pointwise-rotation substep limits Strang to first order here
    eq = EquationVariant.make("truncated", 1.5, 8)
    u = _e8(9).coeffs
    ref = integrate_batch(u, eq, 1.0, 1e-3)[1][-1]
    errs = [np.linalg.norm(integrate_batch(u, eq, 1.0, dt, "strang")[1][-1] - ref) for dt in (2e-3, 1e-3, 5e-4)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.8) & (ratios < 2.2))
    assert errs[-1] < 1e-2


def test_strang_linear_exact():
    eq = EquationVariant.make("truncated", 1.5, 8, coupling=0.0)
    u = _e8(10)
    _, s = integrate_batch(u.coeffs, eq, 1.0, 0.1, "strang")
    np.testing.assert_allclose(s[-1], linear_flow(u, 1.0, 1.5).coeffs, atol=1e-13)


def test_time_reversibility():
    eq = EquationVariant.make("truncated", 1.5, 8)
    u = _e8(11).coeffs
    dt = 2e-3
    fwd = integrate_batch(u, eq, 1.0, dt)[1][-1]
    ref = integrate_batch(u, eq, 1.0, dt / 8)[1][-1]
    one_way = np.linalg.norm(fwd - ref)
    back = integrate_batch(fwd, eq, -1.0, dt)[1][-1]
    assert np.linalg.norm(back - u) <= 2 * one_way + 1e-14


def test_group_law():
    eq = EquationVariant.make("wick", 1.2, 6)
    u = _e8(12, 1.2, 6).coeffs
    a = integrate_batch(u, eq, 0.7, 1e-3)[1][-1]
    ab = integrate_batch(integrate_batch(u, eq, 0.4, 1e-3)[1][-1], eq, 0.3, 1e-3)[1][-1]
    assert np.linalg.norm(a - ab) < 1e-10


def test_blowup_detection():
    eq = EquationVariant.make("truncated", 1.5, 4)
    u = FourierState(10.0 * np.ones(9))
    with np.errstate(all="ignore"), pytest.raises(BlowupError, match="blowup/instability") as info:
        integrate_batch(u.coeffs, eq, 100.0, 1.0, seed=17)
    assert info.value.seed == 17 and info.value.t > 0


def test_unknown_scheme():
    eq = EquationVariant.make("truncated", 1.5, 2)
    with pytest.raises(ValueError):
        integrate_batch(np.zeros(5), eq, 1.0, 0.1, "euler")


def test_batch_matches_single():
    eq = EquationVariant.make("renormalized", 0.95, 6)
    batch = np.stack([_e8(s, 0.95, 6).coeffs for s in range(3)])
    _, sb = integrate_batch(batch, eq, 0.5, 1e-2)
    _, s1 = integrate_batch(batch[1], eq, 0.5, 1e-2)
    np.testing.assert_allclose(sb[:, 1], s1, rtol=0, atol=1e-13)


def test_trajectory_export(tmp_path):
    eq = EquationVariant.make("truncated", 1.5, 2)
    tr = evolve(FourierState.from_modes({1: 0.5}, K=2), eq, 0.2, 0.05, drift_tol=1e-30)
    tr.write(tmp_path / "t.csv", tmp_path / "t.json")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,n,re,im"
    assert len(lines) == 1 + len(tr) * 5
    man = json.loads((tmp_path / "t.json").read_text())
    assert set(man) >= {"variant", "alpha", "N", "dt", "scheme", "drift", "drift_flagged"}
    assert man["drift_flagged"] is tr.drift_flagged
    assert mass(tr.state(-1)) == pytest.approx(0.25)
