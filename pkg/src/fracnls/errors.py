"""Exception types raised by the simulator and the samplers."""


class AliasingError(ValueError):
    """Grid too small to represent a product of band-limited fields exactly."""

    def __init__(self, needed, got):
        super().__init__(f"aliasing: grid of size {got} cannot hold modes; need at least {needed}")
        self.needed = needed
        self.got = got


class TimeAliasingError(ValueError):
    """Time step too coarse for the fastest phase of a space-time quadrature."""

    def __init__(self, dt, limit):
        super().__init__(f"time aliasing: dt={dt:.3g} must be below {limit:.3g}")
        self.dt = dt
        self.limit = limit


class BlowupError(RuntimeError):
    """Non-finite coefficient encountered during time stepping."""

    def __init__(self, t, seed=None):
        msg = f"blowup/instability: non-finite state at t={t:.6g}"
        if seed is not None:
            msg += f" (seed {seed})"
        super().__init__(msg)
        self.t = t
        self.seed = seed


class AcceptanceStarvation(RuntimeError):
    """Rejection sampler hit its attempt cap."""

    def __init__(self, attempts, accepted):
        rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"acceptance starvation: {accepted} accepted in {attempts} attempts (rate {rate:.3g})"
        )
        self.attempts = attempts
        self.rate = rate


class InsufficientSamplesError(ValueError):
    pass
