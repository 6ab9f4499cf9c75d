"""Resonance function, lattice counting, Strichartz probes and a Bourgain-norm diagnostic.

All probes here are deterministic given their inputs (and the generator passed
in); scans return :class:`~fracnls.report.Table` objects whose ``meta`` holds
the fitted slopes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError, TimeAliasingError
from .report import Table, linear_fit
from .spectral import japanese_bracket

__all__ = [
    "resonance_phi",
    "resonance_lower_bound_scan",
    "CountingQuery",
    "count_set",
    "max_count",
    "counting_bound_scan",
    "dyadic_shell",
    "strichartz_l4_norm",
    "strichartz_l4_probe",
    "bilinear_strichartz_probe",
    "proba_strichartz_tail",
    "bourgain_norm",
    "modulation_profile",
]


def _pow(n, alpha):
    return np.abs(np.asarray(n, dtype=float)) ** alpha


def resonance_phi(n1, n2, n3, alpha):
    """|n1|^a - |n2|^a + |n3|^a - |n|^a with n = n1 - n2 + n3 (broadcasts)."""
    n1, n2, n3 = (np.asarray(v) for v in (n1, n2, n3))
    n = n1 - n2 + n3
    out = _pow(n1, alpha) - _pow(n2, alpha) + _pow(n3, alpha) - _pow(n, alpha)
    return out if out.ndim else float(out)


def resonance_lower_bound_scan(alpha, n_max):
    """Exhaustive min of |Phi| / (|n1-n2| |n2-n3| |n|_max^(alpha-2)) over |n1|,|n2|,|n3| <= n_max.

    Degenerate triples (n2 = n1 or n2 = n3, i.e. {n1,n3} = {n2,n}) are skipped.
    Also counts nondegenerate triples on which Phi vanishes exactly.
    """
    if not 1 < alpha <= 2:
        raise ValueError("the lower-bound scan needs 1 < alpha <= 2")
    if n_max > 512:
        raise ValueError("n_max is capped at 512 (cost grows like n_max^3)")
    r = np.arange(-n_max, n_max + 1)
    n2, n3 = np.meshgrid(r, r, indexing="ij")
    p2, p3 = _pow(n2, alpha), _pow(n3, alpha)
    a2, a3 = np.abs(n2), np.abs(n3)
    best, arg, n_zero, n_checked = np.inf, None, 0, 0
    for n1 in r:
        n = n1 - n2 + n3
        phi = abs(float(n1)) ** alpha - p2 + p3 - _pow(n, alpha)
        ok = (n2 != n1) & (n2 != n3)
        top = np.maximum(np.maximum(abs(n1), a2), np.maximum(a3, np.abs(n)))
        den = np.abs(n1 - n2) * np.abs(n2 - n3) * np.maximum(top, 1).astype(float) ** (alpha - 2)
        ratio = np.where(ok, np.abs(phi) / np.where(ok, den, 1.0), np.inf)
        n_zero += int(np.count_nonzero(ok & (phi == 0)))
        n_checked += int(np.count_nonzero(ok))
        j = np.unravel_index(np.argmin(ratio), ratio.shape)
        if ratio[j] < best:
            best, arg = float(ratio[j]), (int(n1), int(n2[j]), int(n3[j]))
    return {"min_ratio": best, "argmin": arg, "n_zero": n_zero, "n_checked": n_checked, "n_max": n_max}


# --------------------------------------------------------------------------
# counting sets


@dataclass(frozen=True)
class CountingQuery:
    a: int
    l: float
    N1: int
    N2: int
    r: float
    alpha: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.N1 < 1 or self.N2 < 1:
            raise ValueError("N1, N2 must be >= 1")


def _shell(N):
    k = np.arange(N, 2 * N + 1)
    return np.concatenate([-k[::-1], k])


def _admissible(a, N1, N2):
    k = _shell(N1)
    m = np.abs(a - k)
    return k[(m >= N2) & (m <= 2 * N2)]


def _phase_values(a, k, alpha):
    return _pow(k, alpha) + _pow(a - k, alpha)


def count_set(q):
    """#{k : N1<=|k|<=2N1, N2<=|a-k|<=2N2, -r < |k|^a + |a-k|^a - l <= r}."""
    k = _admissible(q.a, q.N1, q.N2)
    d = _phase_values(q.a, k, q.alpha) - q.l
    return int(np.count_nonzero((d > -q.r) & (d <= q.r)))


def max_count(alpha, a, N1, N2, r):
    """Exact sup over real l of #A_{a,l,N1,N2}(r), by a sliding window over sorted phases.

    A set of phases fits in some (l-r, l+r] iff its spread is below 2r.
    Returns (count, l attaining it).
    """
    k = _admissible(a, N1, N2)
    if k.size == 0:
        return 0, 0.0
    v = np.sort(_phase_values(a, k, alpha))
    j = np.searchsorted(v, v + 2 * r, side="left")
    cnt = j - np.arange(v.size)
    i = int(np.argmax(cnt))
    return int(cnt[i]), float(v[i] + r - 1e-9 * max(1.0, r))


def counting_bound_scan(alpha, N_list, r=0.5, queries_per_N=200, rng=None):
    """max #A_{a,l,N,N}(r) over a in [-4N, 4N] and l, against the bound N^(1 - alpha/2) r^(1/2).

    For every N the table reports the exact sup over all (a, l) (sliding
    window) next to the max over a sampled query set: uniform random (a, l),
    structured l = |k0|^a + |a-k0|^a, and a near 0 and near +-2N.  The fitted
    log-log slope of the exact sup is in ``meta['slope']``.
    """
    if not 1 < alpha < 2:
        raise ValueError("counting bound needs 1 < alpha < 2")
    if r < 0.01:
        raise ValueError("r must be >= 1/100")
    rng = rng if rng is not None else np.random.default_rng(0)
    rows = []
    for N in N_list:
        sup, sup_a = 0, 0
        for a in range(-4 * N, 4 * N + 1):
            c, _ = max_count(alpha, a, N, N, r)
            if c > sup:
                sup, sup_a = c, a
        sampled = 0
        for i in range(queries_per_N):
            kind = i % 3
            if kind == 0:
                a = int(rng.integers(-4 * N, 4 * N + 1))
                l = float(rng.uniform(0, 2 * (2 * N) ** alpha + (4 * N) ** alpha))
            else:
                if kind == 1:
                    a = int(rng.integers(-2, 3))
                else:
                    a = int(rng.choice([-1, 1]) * (2 * N + rng.integers(-2, 3)))
                k = _admissible(a, N, N)
                if k.size == 0:
                    continue
                k0 = k[rng.integers(k.size)]
                l = float(_phase_values(a, k0, alpha))
            sampled = max(sampled, count_set(CountingQuery(a, l, N, N, r, alpha)))
        bound = N ** (1 - alpha / 2) * math.sqrt(r)
        rows.append((N, r, sup, sup / bound, sampled, sup_a))
    Ns = np.array([row[0] for row in rows], dtype=float)
    sups = np.array([row[2] for row in rows], dtype=float)
    slope = linear_fit(np.log(Ns), np.log(sups))[0] if len(rows) > 1 else float("nan")
    target = 1 - alpha / 2
    return Table(
        ("N", "r", "max_count", "ratio", "sampled_max", "argmax_a"),
        rows,
        {"slope": slope, "target_slope": target, "tolerance": 0.15, "passed": bool(slope <= target + 0.15)},
    )


# --------------------------------------------------------------------------
# Strichartz probes


def dyadic_shell(N):
    """Modes n with N <= <n> <= 2N."""
    n = np.arange(-2 * N, 2 * N + 1)
    br = japanese_bracket(n)
    return n[(br >= N) & (br <= 2 * N)]


def _pow2_at_least(n):
    return 1 << (int(n) - 1).bit_length()


def _time_grid(T0, T1, lam_max, oversample, dt=None):
    """Trapezoid nodes and weights on [T0, T1]; dt must resolve the fastest phase."""
    limit = 1.0 / (2.0 * lam_max) if lam_max > 0 else np.inf
    if dt is None:
        nt = max(2, int(math.ceil(oversample * 2.0 * lam_max * (T1 - T0))))
        dt = (T1 - T0) / nt
    if dt >= limit:
        raise TimeAliasingError(dt, limit)
    nt = max(1, int(round((T1 - T0) / dt)))
    t = np.linspace(T0, T1, nt + 1)
    w = np.full(nt + 1, (T1 - T0) / nt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return t, w


def _space_time_values(modes, coef, phases, t, G):
    """u(t_i, x_j) = sum_n coef_n e^{i t phase_n} e^{2 pi i n x_j} on a G-point grid."""
    coef = np.asarray(coef)
    spec = np.zeros(coef.shape[:-1] + (t.size, G), dtype=complex)
    spec[..., np.asarray(modes) % G] = coef[..., None, :] * np.exp(1j * np.outer(t, phases))
    return np.fft.ifft(spec, axis=-1) * G


def strichartz_l4_norm(alpha, modes, coef, T=1.0, dt=None, oversample=1.25, chunk=1024):
    """||S_alpha(t) f||_{L^4([0,T] x T)} by spatial FFT (exact) and trapezoid in time."""
    modes = np.asarray(modes)
    coef = np.asarray(coef, dtype=complex)
    lam = _pow(modes, alpha)
    t, w = _time_grid(0.0, T, float(lam.max(initial=0.0)), oversample, dt)
    G = _pow2_at_least(4 * int(np.abs(modes).max(initial=0)) + 2)
    total = 0.0
    for i in range(0, t.size, chunk):
        u = _space_time_values(modes, coef, lam, t[i : i + chunk], G)
        total += float(np.dot(w[i : i + chunk], np.mean(np.abs(u) ** 4, axis=-1)))
    return total**0.25


def _probe_coefficients(modes, samples, rng):
    """Unit-norm test functions: flat, one-sided flat, then Gaussian draws."""
    out = []
    flat = np.ones(modes.size, dtype=complex)
    out.append(("flat", flat / np.linalg.norm(flat)))
    half = (modes > 0).astype(complex)
    if half.any():
        out.append(("one_sided", half / np.linalg.norm(half)))
    for _ in range(samples):
        g = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
        out.append(("gaussian", g / np.linalg.norm(g)))
    return out


def strichartz_l4_probe(alpha, N_list, samples=2, rng=None, T=1.0, oversample=1.25, r=0.5):
    """Max over test functions of ||S_alpha P_N f||_{L^4([0,T] x T)} / ||f||_{L^2} for each N.

    The table also carries ``reduction_C`` = norm^2 / sqrt(sup_{a,l} #A_{a,l,N}(r)),
    the constant in the L^4-to-counting reduction.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    rows = []
    for N in N_list:
        modes = dyadic_shell(N)
        norms = {}
        for kind, c in _probe_coefficients(modes, samples, rng):
            v = strichartz_l4_norm(alpha, modes, c, T, oversample=oversample)
            norms[kind] = max(norms.get(kind, 0.0), v)
        best = max(norms.values())
        cnt = max(max_count(alpha, a, N, N, r)[0] for a in range(-4 * N, 4 * N + 1)) if 1 < alpha < 2 else 1
        rows.append((N, best, norms["flat"], norms.get("gaussian", float("nan")), best**2 / math.sqrt(max(cnt, 1))))
    Ns = np.array([row[0] for row in rows], dtype=float)
    slope = linear_fit(np.log(Ns), np.log([row[1] for row in rows]))[0] if len(rows) > 1 else float("nan")
    target = 0.5 * (0.5 - alpha / 4)
    return Table(
        ("N", "norm", "flat_norm", "gaussian_norm", "reduction_C"),
        rows,
        {"slope": slope, "target_slope": target, "tolerance": 0.1, "passed": bool(slope <= target + 0.1)},
    )


def bilinear_strichartz_probe(alpha, M_list, N, samples=2, rng=None, T=1.0, oversample=1.25):
    """Max of ||S P_M f . S P_N g||_{L^2([0,T] x T)} / (||f|| ||g||) for each M (M << N)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    nmodes = dyadic_shell(N)
    gs = _probe_coefficients(nmodes, samples, rng)
    lam_n = _pow(nmodes, alpha)
    rows = []
    for M in M_list:
        mmodes = dyadic_shell(M)
        lam_m = _pow(mmodes, alpha)
        t, w = _time_grid(0.0, T, float(max(lam_n.max(), lam_m.max())), oversample)
        G = _pow2_at_least(2 * (int(np.abs(nmodes).max()) + int(np.abs(mmodes).max())) + 1)
        best = 0.0
        for _, f in _probe_coefficients(mmodes, samples, rng):
            uf = _space_time_values(mmodes, f, lam_m, t, G)
            for _, g in gs:
                ug = _space_time_values(nmodes, g, lam_n, t, G)
                val = math.sqrt(float(np.dot(w, np.mean(np.abs(uf * ug) ** 2, axis=-1))))
                best = max(best, val)
        rows.append((M, N, best))
    Ms = np.array([row[0] for row in rows], dtype=float)
    slope = linear_fit(np.log(Ms), np.log([row[2] for row in rows]))[0] if len(rows) > 1 else float("nan")
    target = 0.5 - alpha / 4
    return Table(
        ("M", "N", "norm"), rows, {"slope": slope, "target_slope": target, "tolerance": 0.1, "passed": bool(slope <= target + 0.1)}
    )


def proba_strichartz_tail(alpha, q, T, R_grid=None, trials=10_000, rng=None, K=8, nt=None, G=64, chunk=250):
    """Exceedance probabilities P(||f^w||_{L^q([-T,T] x T)} > R ||c||_{l^2}).

    f^w(t, x) = sum_{|n|<=K} c_n g_n e^{i(2 pi n x - [n]^alpha t)} with
    c_n = (1+|n|^alpha)^(-1/2) normalized to unit l^2 norm and [n]^alpha = 1 + |n|^alpha.
    log P is fitted against R^2 over the tail (R above the median norm, P > 0).
    The default R grid runs from 0 to the empirical (1 - 10/trials) quantile
    so that the smallest probed probability has about 10 expected exceedances.
    """
    if not 2 <= q < np.inf:
        raise ValueError("q must lie in [2, inf)")
    if T > 1:
        raise ValueError("T must be <= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = np.arange(-K, K + 1)
    c = 1.0 / np.sqrt(1.0 + _pow(n, alpha))
    c /= np.linalg.norm(c)
    phases = -(1.0 + _pow(n, alpha))
    lam_max = float(np.abs(phases).max())
    t, w = _time_grid(-T, T, lam_max, 2.0, None if nt is None else 2 * T / nt)
    norms = np.empty(trials)
    for i in range(0, trials, chunk):
        m = min(chunk, trials - i)
        g = (rng.standard_normal((m, n.size)) + 1j * rng.standard_normal((m, n.size))) / math.sqrt(2.0)
        u = _space_time_values(n, g * c, phases, t, G)
        norms[i : i + m] = (np.abs(u) ** q).mean(axis=-1) @ w
    norms = norms ** (1.0 / q)
    if R_grid is None:
        R_grid = np.linspace(0.0, float(np.quantile(norms, 1.0 - 10.0 / trials)), 16)
    R_grid = np.asarray(R_grid, dtype=float)
    counts = np.array([int(np.count_nonzero(norms > R)) for R in R_grid])
    probs = counts / trials
    med = float(np.median(norms))
    tail = (R_grid >= med) & (counts > 0)
    if np.count_nonzero(tail) >= 2:
        slope, icpt, r2 = linear_fit(R_grid[tail] ** 2, np.log(probs[tail]))
    else:
        slope, icpt, r2 = float("nan"), float("nan"), float("nan")
    rows = [(float(R), int(k), float(p)) for R, k, p in zip(R_grid, counts, probs)]
    return Table(
        ("R", "exceed", "prob"),
        rows,
        {
            "slope": slope,
            "intercept": icpt,
            "r2": r2,
            "median_norm": med,
            "mean_norm": float(norms.mean()),
            "passed": bool(slope < 0),
            "norms": norms,
        },
    )


# --------------------------------------------------------------------------
# Bourgain norm


def _window_samples(times, states, window):
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise InsufficientSamplesError("need at least two output times")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12 * max(1.0, abs(times[-1]))):
        raise ValueError("trajectory must be uniformly sampled")
    m = int(math.floor(window / dt + 1e-9))
    m = min(m, times.size)
    if m < 4:
        raise InsufficientSamplesError(f"window {window} holds {m} output strides; need at least 4")
    return times[:m], np.asarray(states)[:m], dt


def _taper(m, taper):
    if taper in (None, "none"):
        return np.ones(m)
    if taper == "hann":
        # periodic raised cosine, zero at the left end only
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(m) / m)
    raise ValueError(f"unknown taper {taper!r}")


def _modulation_spectrum(traj, window, taper, alpha):
    times = traj.times if hasattr(traj, "times") else traj[0]
    states = traj.states if hasattr(traj, "states") else traj[1]
    alpha = getattr(traj, "alpha", alpha)
    t, u, dt = _window_samples(times, states, window)
    m = t.size
    K = u.shape[-1] // 2
    n = np.arange(-K, K + 1)
    x = _taper(m, taper)[:, None] * u
    F = np.fft.fft(x, axis=0)  # F_k = sum_j x_j e^{-2 pi i j k / m}: frequency tau_k for e^{i tau t}
    # time origin at t[0]; only |F| is used so the phase of that shift is irrelevant
    lam = _pow(n, alpha)
    dtau = 2 * np.pi / (m * dt)
    k = np.arange(m)[:, None]
    tau = k * dtau
    # tau is defined mod 2 pi/dt; take the representative closest to |n|^alpha
    period = m * dtau
    mod = (tau - lam[None, :] + 0.5 * period) % period - 0.5 * period
    return n, mod, np.abs(F) ** 2 * dt / m, m * dt


def bourgain_norm(traj, s, b, window, taper="hann", alpha=None):
    """Discrete X^{s,b} norm of the tapered trajectory over [t0, t0 + window).

    With the DFT normalized by dt/m, b = 0 gives exactly the trapezoid-free
    Riemann sum of ||w(t) u(t)||_{H^s}^2 over the window (discrete Parseval).
    """
    n, mod, energy, _ = _modulation_spectrum(traj, window, taper, alpha)
    weight = japanese_bracket(n)[None, :] ** (2 * s) * japanese_bracket(mod) ** (2 * b)
    return math.sqrt(float(np.sum(weight * energy)))


def modulation_profile(traj, window, taper="hann", alpha=None, shells=6):
    """Fraction of the (s=0) space-time energy in modulation shells |tau - |n|^a| < 1, [1,2), [2,4), ..."""
    _, mod, energy, _ = _modulation_spectrum(traj, window, taper, alpha)
    a = np.abs(mod)
    edges = [0.0, 1.0] + [2.0**j for j in range(1, shells)] + [np.inf]
    tot = float(energy.sum())
    return np.array([float(energy[(a >= lo) & (a < hi)].sum()) / tot if tot > 0 else 0.0 for lo, hi in zip(edges[:-1], edges[1:])])
