"""Time integration of the Galerkin-truncated equations on E_N.

Three variants share the form ``i u_t = -|D|^alpha u - NL(u)``:

* ``truncated``:    NL(u) = Pi_N(|u|^2 u)
* ``renormalized``: NL(u) = Pi_N(|u|^2 u) - 2 kappa u, kappa = alpha_N by default
* ``wick``:         NL(u) = Pi_N(|u|^2 u) - 2 ||u||^2 u

States are coefficient arrays on -N..N.  The integrators accept arbitrary
leading axes so whole ensembles are stepped together.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowupError
from .gibbs import alpha_N as _alpha_N
from .spectral import (
    FourierState,
    ModelParams,
    cubic_batch,
    grid_coeffs_batch,
    grid_values_batch,
    kinetic_batch,
    mass_batch,
    quartic_batch,
    resize,
    sobolev_norm_batch,
)

__all__ = [
    "EquationVariant",
    "Trajectory",
    "evolve",
    "integrate_batch",
    "select_dt",
    "auto_integrate",
    "integrate_uniform",
    "conservation_report",
    "phase_conjugacy_check",
    "gauge_conjugacy_check",
    "single_mode_solution",
]

VARIANTS = ("truncated", "renormalized", "wick")

# below this cutoff a single state's cubic term is cheaper by direct convolution than by FFT
_DIRECT_MAX_N = 8


def _cubic_direct(c):
    K = (c.shape[-1] - 1) // 2
    full = np.convolve(np.convolve(c, np.conj(c[::-1])), c)
    return full[2 * K : 4 * K + 1]


@dataclass(frozen=True)
class EquationVariant:
    """Equation tag plus parameters.

    ``renorm_constant`` overrides alpha_N in the renormalized variant and
    ``coupling`` scales the whole nonlinearity (both exist for negative
    controls; leave at the defaults for the physical equations).
    """

    tag: str
    params: ModelParams
    renorm_constant: float = None
    coupling: float = 1.0

    def __post_init__(self):
        if self.tag not in VARIANTS:
            raise ValueError(f"unknown equation variant {self.tag!r}")
        if self.renorm_constant is None:
            kappa = _alpha_N(self.params.alpha, self.params.cutoff_N) if self.tag == "renormalized" else 0.0
            object.__setattr__(self, "renorm_constant", kappa)

    @classmethod
    def make(cls, tag, alpha, N, **kw):
        return cls(tag, ModelParams(alpha, N), **kw)

    @property
    def N(self):
        return self.params.cutoff_N

    @property
    def alpha(self):
        return self.params.alpha

    def symbol(self):
        return np.abs(np.arange(-self.N, self.N + 1)).astype(float) ** self.alpha

    def nonlinearity(self, c):
        if c.ndim == 1 and self.N <= _DIRECT_MAX_N:
            out = _cubic_direct(c)
        else:
            out = cubic_batch(c, self.params.grid_size)
        if self.tag == "renormalized":
            out = out - 2.0 * self.renorm_constant * c
        elif self.tag == "wick":
            out = out - 2.0 * mass_batch(c)[..., None] * c
        return self.coupling * out

    def pointwise_phase(self, vals, c):
        """Local rotation rate theta(x) whose flow u -> exp(i theta dt) u is the nonlinear substep."""
        theta = np.abs(vals) ** 2
        if self.tag == "renormalized":
            theta = theta - 2.0 * self.renorm_constant
        elif self.tag == "wick":
            theta = theta - 2.0 * mass_batch(c)[..., None]
        return self.coupling * theta

    def energy(self, c):
        """Conserved energy of the variant (H, H_N or the Wick Hamiltonian)."""
        G = self.params.grid_size
        kin = kinetic_batch(c, self.alpha)
        q = 0.5 * quartic_batch(c, G)
        m = mass_batch(c)
        if self.tag == "truncated":
            pot = q
        elif self.tag == "renormalized":
            k = self.renorm_constant
            pot = q - 2.0 * k * m + k * k
        else:
            pot = q - m * m
        return kin + self.coupling * pot


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    variant: str
    alpha: float
    N: int
    dt: float
    scheme: str
    drift_tol: float = 1e-8
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i):
        return FourierState(self.states[i], cutoff_N=self.N)

    @property
    def drift_flagged(self):
        r = conservation_report(self)
        return max(r["max_rel_drift_mass"], r["max_rel_drift_energy"]) > self.drift_tol

    def to_csv(self, path):
        """Rows (t, n, Re u_n, Im u_n), 17 significant digits."""
        modes = np.arange(-self.N, self.N + 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "n", "re", "im"])
            for t, c in zip(self.times, self.states):
                for n, z in zip(modes, c):
                    w.writerow([f"{t:.17g}", int(n), f"{z.real:.17g}", f"{z.imag:.17g}"])

    def manifest(self):
        r = conservation_report(self)
        return {
            "variant": self.variant,
            "alpha": self.alpha,
            "N": self.N,
            "dt": self.dt,
            "scheme": self.scheme,
            "n_outputs": len(self.times),
            "T": float(self.times[-1]),
            "drift": r,
            "drift_tol": self.drift_tol,
            "drift_flagged": bool(self.drift_flagged),
            **self.meta,
        }

    def write(self, path_csv, path_json):
        self.to_csv(path_csv)
        with open(path_json, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)


def _rk4_step(c, h, lam, eq):
    def f(x):
        return 1j * (lam * x + eq.nonlinearity(x))

    k1 = f(c)
    k2 = f(c + 0.5 * h * k1)
    k3 = f(c + 0.5 * h * k2)
    k4 = f(c + h * k3)
    return c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _strang_step(c, h, half_lin, eq):
    c = half_lin * c
    vals = grid_values_batch(c, eq.params.grid_size)
    vals = np.exp(1j * h * eq.pointwise_phase(vals, c)) * vals
    c = grid_coeffs_batch(vals, eq.N)
    return half_lin * c


def integrate_batch(c0, eq, T, dt, scheme="rk4", stride=1, seed=None):
    """Step coefficient arrays (..., 2N+1) to time T.

    The step count is ceil(|T|/dt) and the step is shrunk to land on T exactly.
    Returns (times, states) with states of shape (n_out, ..., 2N+1); the
    initial state and the final state are always recorded.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    c = np.array(resize(c0, eq.N), dtype=complex)
    nsteps = max(1, int(math.ceil(abs(T) / dt - 1e-9))) if T != 0 else 0
    h = T / nsteps if nsteps else 0.0
    lam = eq.symbol()
    half_lin = np.exp(0.5j * h * lam)
    times = [0.0]
    states = [c.copy()]
    for k in range(1, nsteps + 1):
        if scheme == "rk4":
            c = _rk4_step(c, h, lam, eq)
        elif scheme == "strang":
            c = _strang_step(c, h, half_lin, eq)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if not np.all(np.isfinite(c)):
            raise BlowupError(k * h, seed)
        if k % stride == 0 or k == nsteps:
            times.append(k * h)
            states.append(c.copy())
    return np.array(times), np.array(states)


def evolve(u0, eq, T, dt, scheme="rk4", stride=1, drift_tol=1e-8):
    """Integrate one state of E_N and log mass and energy at every output."""
    N = eq.N
    if u0.K > N and (np.any(u0.coeffs[: u0.K - N] != 0) or np.any(u0.coeffs[u0.K + N + 1 :] != 0)):
        raise ValueError(f"initial state is not in E_{N}")
    times, states = integrate_batch(u0.coeffs, eq, T, dt, scheme, stride)
    nsteps = max(1, int(math.ceil(abs(T) / dt - 1e-9))) if T != 0 else 0
    return Trajectory(
        times=times,
        states=states,
        mass=mass_batch(states),
        energy=eq.energy(states),
        variant=eq.tag,
        alpha=eq.alpha,
        N=N,
        dt=T / nsteps if nsteps else dt,
        scheme=scheme,
        drift_tol=drift_tol,
    )


def _rel_drift(x):
    x = np.asarray(x, dtype=float)
    ref = abs(x[0])
    d = np.max(np.abs(x - x[0]))
    return float(d / ref) if ref > 0 else float(d)


def conservation_report(traj):
    """Maximum relative drift of mass and energy against their t=0 values."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    return {
        "max_rel_drift_mass": _rel_drift(traj.mass),
        "max_rel_drift_energy": _rel_drift(traj.energy),
    }


def _max_rel_drift(eq, states):
    m = mass_batch(states)
    e = eq.energy(states)
    dm = np.abs(m - m[0]) / np.maximum(np.abs(m[0]), 1e-300)
    de = np.abs(e - e[0]) / np.maximum(np.abs(e[0]), 1e-300)
    return float(max(np.max(dm), np.max(de)))


def _initial_dt(c, eq):
    """Step resolving the fastest linear and nonlinear rotation rates of the data."""
    lam_max = float(eq.N) ** eq.alpha
    amp = float(np.max(np.abs(grid_values_batch(c, eq.params.grid_size)) ** 2)) if c.size else 0.0
    rate = lam_max + abs(eq.coupling) * (amp + 2.0 * abs(eq.renorm_constant) + 2.0 * float(np.max(mass_batch(c))))
    return min(0.05, 1.0 / max(rate, 1e-12))


def integrate_uniform(c0, eq, T, dt_max, n_out, scheme="rk4", seed=None):
    """Integrate with the largest step <= dt_max that puts outputs exactly at k T / n_out."""
    per = max(1, int(math.ceil(abs(T) / (dt_max * n_out) - 1e-9)))
    return integrate_batch(c0, eq, T, abs(T) / (per * n_out), scheme, stride=per, seed=seed)


def auto_integrate(u0, eq, T, tol=1e-8, dt0=None, max_halvings=20, scheme="rk4", n_out=None):
    """Halving study: the largest dt0 / 2^k whose mass and energy drift over [0, T] stay below tol.

    After a failing trial the next k is predicted from the observed drift
    assuming fourth order (never fewer than one halving), so the final step
    is still of the form dt0 / 2^k.  Returns (dt, times, states) of the
    accepted run; ``n_out`` fixes uniformly spaced output times.
    """
    c = np.asarray(resize(u0.coeffs if isinstance(u0, FourierState) else u0, eq.N))
    dt = _initial_dt(c, eq) if dt0 is None else dt0
    k = 0
    while k <= max_halvings:
        if n_out is None:
            times, states = integrate_batch(c, eq, T, dt, scheme)
        else:
            times, states = integrate_uniform(c, eq, T, dt, n_out, scheme)
        drift = _max_rel_drift(eq, states)
        if drift < tol:
            return dt, times, states
        jump = max(1, int(math.ceil(math.log2(drift / tol) / 4.0))) if drift > 0 and math.isfinite(drift) else 1
        jump = min(jump, max_halvings + 1 - k) if k < max_halvings else 1
        dt *= 0.5**jump
        k += jump
    raise RuntimeError(f"no dt >= {dt:.3g} meets the drift tolerance {tol}")


def select_dt(u0, eq, T, tol=1e-8, dt0=None, max_halvings=20, scheme="rk4"):
    """Largest dt0 / 2^k whose relative mass and energy drift over [0, T] is below tol."""
    return auto_integrate(u0, eq, T, tol, dt0, max_halvings, scheme)[0]


def single_mode_solution(c, k, alpha, t, variant="truncated", renorm_constant=0.0):
    """Closed-form coefficient of c e_k at time t for each variant."""
    lam = abs(k) ** alpha
    a2 = abs(c) ** 2
    rate = {"truncated": lam + a2, "renormalized": lam + a2 - 2.0 * renorm_constant, "wick": lam - a2}[variant]
    return c * np.exp(1j * rate * np.asarray(t))


def _h0_distance(a, b):
    return sobolev_norm_batch(a - b, 0.0)


def phase_conjugacy_check(u0, alpha, N, T, dt, renorm_constant=None, scheme="rk4", stride=1):
    """max_t ||exp(-2 i t kappa) u(t) - w(t)||_{L^2}, u truncated and w renormalized."""
    tr = EquationVariant.make("truncated", alpha, N)
    rn = EquationVariant.make("renormalized", alpha, N, renorm_constant=renorm_constant)
    kappa = rn.renorm_constant
    t, u = integrate_batch(u0.coeffs, tr, T, dt, scheme, stride)
    _, w = integrate_batch(u0.coeffs, rn, T, dt, scheme, stride)
    phase = np.exp(-2j * t * kappa)[:, None]
    d = _h0_distance(phase * u, w)
    return {"max_discrepancy": float(np.max(d)), "renorm_constant": kappa, "times": t, "discrepancy": d}


def gauge_conjugacy_check(u0, alpha, N, T, dt, scheme="rk4", stride=1):
    """max_t ||gauge(u(t)) - v(t)||_{L^2}, u truncated and v Wick-ordered, same data."""
    tr = EquationVariant.make("truncated", alpha, N)
    wk = EquationVariant.make("wick", alpha, N)
    t, u = integrate_batch(u0.coeffs, tr, T, dt, scheme, stride)
    _, v = integrate_batch(u0.coeffs, wk, T, dt, scheme, stride)
    m0 = float(mass_batch(resize(u0.coeffs, N)))
    phase = np.exp(-2j * t * m0)[:, None]
    d = _h0_distance(phase * u, v)
    return {"max_discrepancy": float(np.max(d)), "mass0": m0, "times": t, "discrepancy": d}
