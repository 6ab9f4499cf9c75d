"""Fourier-side fields on the unit torus.

A field is stored by its coefficients on the modes ``n = -K..K`` in increasing
order, so index ``j`` of the coefficient array holds mode ``j - K``.  Physical
samples live on ``x_j = j / G`` and are related to the coefficients by

    u(x_j) = sum_n u_hat(n) exp(2 pi i n x_j).

The exponentials are orthonormal on the unit torus, so ``||u||_{L^2}^2`` is the
plain sum of ``|u_hat(n)|^2`` and the mean over grid points is the integral.
Dispersion acts on the integer mode index as ``|n|**alpha``.

Most routines come in two flavours: the public ones take and return
:class:`FourierState`, the ``*_batch`` helpers work on raw coefficient arrays
with arbitrary leading (ensemble) axes and are what the integrators use.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AliasingError

__all__ = [
    "ModelParams",
    "FourierState",
    "DispersionSymbol",
    "dealiased_grid_size",
    "project",
    "linear_flow",
    "to_grid",
    "from_grid",
    "norm",
    "sobolev_norm",
    "fourier_lebesgue_norm",
    "grid_lp_norm",
    "mass",
    "hamiltonian",
    "cubic_nonlinearity",
    "trilinear_N0",
    "trilinear_N1",
    "wick_nonlinearity",
    "wick_hamiltonian",
    "gauge",
]


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


def dealiased_grid_size(K):
    """Smallest power of two ``G >= 4K + 2``; cubic products of modes |n| <= K are exact on it."""
    need = 4 * int(K) + 2
    return 1 << (need - 1).bit_length()


def check_alpha(alpha):
    if not (0.5 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (1/2, 2], got {alpha}")
    return float(alpha)


@dataclass(frozen=True)
class ModelParams:
    """Dispersion exponent, Galerkin cutoff and the physical grid used for products."""

    alpha: float
    cutoff_N: int
    grid_size: int = None
    torus: str = "unit"

    def __post_init__(self):
        check_alpha(self.alpha)
        if int(self.cutoff_N) != self.cutoff_N or self.cutoff_N < 0:
            raise ValueError("cutoff_N must be a nonnegative integer")
        if self.torus != "unit":
            raise ValueError("only the unit-length torus convention is supported")
        if self.grid_size is None:
            object.__setattr__(self, "grid_size", dealiased_grid_size(self.cutoff_N))
        G = int(self.grid_size)
        if not _is_pow2(G):
            raise ValueError(f"grid_size must be a power of two, got {G}")
        if G < 4 * self.cutoff_N + 2:
            raise AliasingError(4 * self.cutoff_N + 2, G)


@dataclass(frozen=True, eq=False)
class FourierState:
    """Immutable coefficient vector on modes -K..K.

    If ``cutoff_N`` is given the state is declared to lie in E_N and any
    nonzero coefficient with |n| > N is rejected.
    """

    coeffs: np.ndarray
    cutoff_N: int = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient array must be 1-D with odd length 2K+1")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        K = c.size // 2
        if self.cutoff_N is not None:
            N = int(self.cutoff_N)
            if N < 0:
                raise ValueError("cutoff_N must be nonnegative")
            if N < K and (np.any(c[: K - N] != 0) or np.any(c[K + N + 1 :] != 0)):
                raise ValueError(f"state tagged as lying in E_{N} has modes beyond |n| = {N}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self):
        return self.coeffs.size // 2

    @property
    def modes(self):
        return np.arange(-self.K, self.K + 1)

    @classmethod
    def zeros(cls, K, cutoff_N=None):
        return cls(np.zeros(2 * K + 1, dtype=complex), cutoff_N)

    @classmethod
    def from_modes(cls, amplitudes, K=None, cutoff_N=None):
        """Build a state from a ``{mode: amplitude}`` mapping."""
        kmax = max((abs(int(n)) for n in amplitudes), default=0)
        K = kmax if K is None else int(K)
        if kmax > K:
            raise ValueError(f"mode {kmax} outside range |n| <= {K}")
        c = np.zeros(2 * K + 1, dtype=complex)
        for n, a in amplitudes.items():
            c[int(n) + K] += a
        return cls(c, cutoff_N)

    def __getitem__(self, n):
        n = int(n)
        if abs(n) > self.K:
            return 0j
        return self.coeffs[n + self.K]

    def resized(self, K):
        """Same field on the mode range -K..K (truncating if K is smaller)."""
        return FourierState(resize(self.coeffs, K), self.cutoff_N if self.cutoff_N is None or self.cutoff_N <= K else None)

    def _binary(self, other, op):
        if not isinstance(other, FourierState):
            return NotImplemented
        K = max(self.K, other.K)
        return FourierState(op(resize(self.coeffs, K), resize(other.coeffs, K)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, FourierState):
            return NotImplemented
        return FourierState(self.coeffs * complex(scalar), self.cutoff_N)

    __rmul__ = __mul__

    def __neg__(self):
        return FourierState(-self.coeffs, self.cutoff_N)

    def __repr__(self):
        return f"FourierState(K={self.K}, cutoff_N={self.cutoff_N})"


@dataclass(frozen=True)
class DispersionSymbol:
    """``values[j] = |n|^alpha`` and ``weights[j] = 1 + |n|^alpha`` for n = j - K."""

    alpha: float
    K: int
    values: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = np.abs(np.arange(-self.K, self.K + 1)).astype(float)
        lam = n ** self.alpha
        object.__setattr__(self, "values", lam)
        object.__setattr__(self, "weights", 1.0 + lam)


def _coeffs(u):
    return u.coeffs if isinstance(u, FourierState) else np.asarray(u)


def resize(c, K):
    """Pad or truncate coefficient arrays (last axis) to the mode range -K..K."""
    c = np.asarray(c)
    K0 = c.shape[-1] // 2
    if K == K0:
        return c
    if K < K0:
        return c[..., K0 - K : K0 + K + 1]
    out = np.zeros(c.shape[:-1] + (2 * K + 1,), dtype=np.result_type(c, complex))
    out[..., K - K0 : K + K0 + 1] = c
    return out


def populated_radius(c):
    """Largest |n| carrying a nonzero coefficient (0 for the zero field)."""
    c = np.asarray(c)
    K = c.shape[-1] // 2
    nz = np.nonzero(np.any(c.reshape(-1, c.shape[-1]) != 0, axis=0))[0]
    if nz.size == 0:
        return 0
    return int(max(abs(nz[0] - K), abs(nz[-1] - K)))


def japanese_bracket(n):
    return np.sqrt(1.0 + np.asarray(n, dtype=float) ** 2)


# --------------------------------------------------------------------------
# grid transforms


def _mode_index(K, G):
    return np.arange(-K, K + 1) % G


def grid_values_batch(c, G):
    c = np.asarray(c)
    K = c.shape[-1] // 2
    buf = np.zeros(c.shape[:-1] + (G,), dtype=complex)
    buf[..., _mode_index(K, G)] = c
    return np.fft.ifft(buf, axis=-1) * G


def grid_coeffs_batch(samples, K):
    samples = np.asarray(samples)
    G = samples.shape[-1]
    return np.fft.fft(samples, axis=-1)[..., _mode_index(K, G)] / G


def to_grid(u, G):
    """Samples ``u(j/G)``, j = 0..G-1; raises ``AliasingError`` if G < 2K'+1 for the populated radius K'."""
    c = _coeffs(u)
    kp = populated_radius(c)
    if G < 2 * kp + 1:
        raise AliasingError(2 * kp + 1, G)
    K = c.shape[-1] // 2
    if 2 * K + 1 > G:
        c = resize(c, kp)
    return grid_values_batch(c, G)


def from_grid(samples, K=None):
    samples = np.asarray(samples, dtype=complex)
    G = samples.shape[-1]
    if K is None:
        K = (G - 1) // 2
    if 2 * K + 1 > G:
        raise AliasingError(2 * K + 1, G)
    return FourierState(grid_coeffs_batch(samples, K))


# --------------------------------------------------------------------------
# projection and linear flow


def project_batch(c, N):
    c = np.array(c, dtype=complex)
    K = c.shape[-1] // 2
    if N < K:
        c[..., : K - N] = 0
        c[..., K + N + 1 :] = 0
    return c


def project(u, N):
    """Pi_N: keep modes |n| <= N, zero the rest (same mode range as ``u``)."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    return FourierState(project_batch(u.coeffs, N), cutoff_N=min(N, u.K) if u.cutoff_N is None else min(N, u.cutoff_N))


def linear_flow(u, t, sym):
    """exp(i t |D|^alpha) applied mode by mode. ``sym`` may be a DispersionSymbol or alpha."""
    if not isinstance(sym, DispersionSymbol) or sym.K != u.K:
        alpha = sym.alpha if isinstance(sym, DispersionSymbol) else float(sym)
        sym = DispersionSymbol(alpha, u.K)
    return FourierState(np.exp(1j * t * sym.values) * u.coeffs, u.cutoff_N)


# --------------------------------------------------------------------------
# norms and conserved quantities


def _grid_for(c, order, G):
    """Grid size on which a degree-``order`` product of ``c`` is exactly integrated."""
    kp = populated_radius(c)
    need = order * kp + 1
    if G is None:
        return max(dealiased_grid_size(kp), 1 << (need - 1).bit_length())
    if G < need:
        raise AliasingError(need, G)
    return G


def sobolev_norm_batch(c, sigma):
    c = np.asarray(c)
    K = c.shape[-1] // 2
    w = japanese_bracket(np.arange(-K, K + 1)) ** (2 * sigma)
    return np.sqrt(np.sum(w * np.abs(c) ** 2, axis=-1))


def sobolev_norm(u, sigma):
    return float(sobolev_norm_batch(_coeffs(u), sigma))


def fourier_lebesgue_norm(u, s, r):
    c = _coeffs(u)
    K = c.shape[-1] // 2
    a = japanese_bracket(np.arange(-K, K + 1)) ** s * np.abs(c)
    if np.isinf(r):
        return float(np.max(a))
    return float(np.sum(a**r) ** (1.0 / r))


def grid_lp_norm(u, p, G=None):
    """(mean_j |u(x_j)|^p)^(1/p); exact for even integer p when G > p * K'."""
    c = _coeffs(u)
    order = int(p) if float(p).is_integer() and int(p) % 2 == 0 else 4
    G = _grid_for(c, max(order, 2), G)
    vals = grid_values_batch(resize(c, populated_radius(c)), G)
    return float(np.mean(np.abs(vals) ** p) ** (1.0 / p))


def norm(u, kind, **params):
    """Dispatch on ``kind``: 'sobolev' (sigma), 'fourier_lebesgue' (s, r) or 'grid_lp' (p, G)."""
    if kind == "sobolev":
        return sobolev_norm(u, params["sigma"])
    if kind == "fourier_lebesgue":
        return fourier_lebesgue_norm(u, params["s"], params["r"])
    if kind == "grid_lp":
        return grid_lp_norm(u, params["p"], params.get("G"))
    raise ValueError(f"unknown norm kind {kind!r}")


def mass_batch(c):
    return np.sum(np.abs(np.asarray(c)) ** 2, axis=-1)


def quartic_batch(c, G):
    """Integral of |u|^4 over the torus, evaluated on grid G (exact if G > 4K)."""
    vals = grid_values_batch(c, G)
    return np.mean(np.abs(vals) ** 4, axis=-1)


def kinetic_batch(c, alpha):
    c = np.asarray(c)
    K = c.shape[-1] // 2
    lam = np.abs(np.arange(-K, K + 1)) ** float(alpha)
    return np.sum(lam * np.abs(c) ** 2, axis=-1)


def mass(u):
    return float(mass_batch(_coeffs(u)))


def hamiltonian(u, alpha, G=None):
    """sum |n|^alpha |u_n|^2 + 1/2 int |u|^4."""
    c = _coeffs(u)
    G = _grid_for(c, 4, G)
    c = resize(c, populated_radius(c))
    return float(kinetic_batch(c, alpha) + 0.5 * quartic_batch(c, G))


def wick_hamiltonian(u, alpha, G=None):
    """Energy conserved by the Wick-ordered flow: kinetic + 1/2 ||u||_4^4 - ||u||_2^4."""
    c = _coeffs(u)
    G = _grid_for(c, 4, G)
    c = resize(c, populated_radius(c))
    m = mass_batch(c)
    return float(kinetic_batch(c, alpha) + 0.5 * quartic_batch(c, G) - m**2)


# --------------------------------------------------------------------------
# nonlinearities


def cubic_batch(c, G):
    """Pi_K(|u|^2 u) for coefficient arrays on -K..K; requires G >= 4K+1."""
    c = np.asarray(c)
    K = c.shape[-1] // 2
    vals = grid_values_batch(c, G)
    return grid_coeffs_batch(np.abs(vals) ** 2 * vals, K)


def cubic_nonlinearity(u, N, G=None):
    """Pi_N(|Pi_N u|^2 Pi_N u), returned on the mode range of ``u``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    Ne = min(N, u.K)
    c = resize(u.coeffs, Ne)
    if G is None:
        G = dealiased_grid_size(Ne)
    elif G < 4 * Ne + 1:
        raise AliasingError(4 * Ne + 1, G)
    out = cubic_batch(c, G)
    return FourierState(resize(out, u.K), cutoff_N=Ne)


def _conv_full(f1, f2, f3):
    """Full trilinear convolution sum f1(n1) conj(f2(n2)) f3(n3) at n1 - n2 + n3.

    Inputs share the range -K..K; the result lives on -3K..3K.
    """
    return np.convolve(np.convolve(f1, np.conj(f2[::-1])), f3)


def _trilinear_inputs(f1, f2, f3):
    K = max(f.K for f in (f1, f2, f3))
    return [resize(f.coeffs, K) for f in (f1, f2, f3)], K


def trilinear_N0(f1, f2, f3):
    """Diagonal part: f1(n) conj(f2(n)) f3(n)."""
    (a, b, c), _ = _trilinear_inputs(f1, f2, f3)
    return FourierState(a * np.conj(b) * c)


def trilinear_N1(f1, f2, f3):
    """Sum over n2 != n1, n3 of f1(n1) conj(f2(n2)) f3(n3) e_{n1-n2+n3}, on modes -3K..3K.

    Computed as the full convolution minus the two pairings n2 = n1 and n2 = n3,
    adding back the doubly removed diagonal.
    """
    (a, b, c), K = _trilinear_inputs(f1, f2, f3)
    full = _conv_full(a, b, c)
    corr = np.vdot(b, a) * c + np.vdot(b, c) * a - a * np.conj(b) * c
    full[2 * K : 4 * K + 1] -= corr
    return FourierState(full)


def wick_batch(c, G):
    """Pi_K((|v|^2 - 2||v||^2) v) for arrays on -K..K."""
    m = mass_batch(c)
    return cubic_batch(c, G) - 2.0 * m[..., None] * np.asarray(c)


def wick_nonlinearity(v, G=None):
    """Pi_K((|v|^2 - 2||v||_{L^2}^2) v) on the mode range of ``v``.

    The mass term of the unit torus appears with coefficient 2 since
    |v|^2 v = N1(v,v,v) + 2||v||^2 v - N0(v,v,v).
    """
    K = v.K
    if G is None:
        G = dealiased_grid_size(K)
    elif G < 4 * K + 1:
        raise AliasingError(4 * K + 1, G)
    return FourierState(wick_batch(v.coeffs, G), v.cutoff_N)


def gauge(u, t, mass0, direction="forward"):
    """v = u exp(-2 i t mass0) (forward) and its inverse (backward)."""
    if direction == "forward":
        phase = np.exp(-2j * t * mass0)
    elif direction == "backward":
        phase = np.exp(2j * t * mass0)
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    return FourierState(u.coeffs * phase, u.cutoff_N)
