"""Rational approximation of scale factors and polyphase U/L resampling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from rdcnn import _kernels
from rdcnn.errors import ConfigurationError, InfeasibleError, ShapeError
from rdcnn.signal_model import Signal

DEFAULT_EPSILON = 0.1
DEFAULT_TAPS_PER_PHASE = 24
DEFAULT_ATTENUATION_DB = 80.0
MAX_CF_ITERS = 64
MAX_DENOMINATOR = 10**6


class Method(str, enum.Enum):
    GCD = "gcd"
    SEARCH = "search"
    CONTINUED_FRACTION = "continued_fraction"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class RationalFactor:
    """Scale factor ``target`` approximated by ``up / down``."""

    up: int
    down: int
    target: float
    achieved_error: float
    method: Method

    def __post_init__(self):
        if self.up < 1 or self.down < 1:
            raise ConfigurationError(f"U and L must be >= 1, got {self.up}/{self.down}")
        g = math.gcd(self.up, self.down)
        if g != 1:
            object.__setattr__(self, "up", self.up // g)
            object.__setattr__(self, "down", self.down // g)
        object.__setattr__(self, "method", Method(self.method))

    @classmethod
    def make(cls, up, down, target, method):
        if up < 1 or down < 1:
            raise ConfigurationError(f"U and L must be >= 1, got {up}/{down}")
        g = math.gcd(up, down)
        up, down = up // g, down // g
        return cls(up, down, float(target), abs(float(target) - up / down), method)

    @classmethod
    def explicit(cls, up, down):
        """A factor given directly as ``U/L`` rather than approximated."""
        return cls.make(up, down, up / down, Method.EXPLICIT)

    @property
    def ratio(self) -> float:
        return self.up / self.down

    def __str__(self):
        return f"{self.up}/{self.down}"


def rational_from_gcd(f_hz: float, f0_hz: float, precision_hz: float = 0.01) -> RationalFactor:
    """``U = F / gcd(F, F0)``, ``L = F0 / gcd(F, F0)`` on a ``precision_hz`` grid."""
    if not (f_hz > 0 and f0_hz > 0):
        raise ConfigurationError(f"frequencies must be positive, got F={f_hz}, F0={f0_hz}")
    f_int = int(round(f_hz / precision_hz))
    f0_int = int(round(f0_hz / precision_hz))
    if f_int < 1 or f0_int < 1:
        raise ConfigurationError(f"frequencies vanish at precision {precision_hz} Hz")
    g = math.gcd(f_int, f0_int)
    return RationalFactor.make(f_int // g, f0_int // g, f_hz / f0_hz, Method.GCD)


def rational_search(s: float, epsilon: float = DEFAULT_EPSILON, max_sum: int = 200) -> RationalFactor:
    """Coprime ``U/L`` with ``|s - U/L| <= epsilon`` minimising ``U + L``.

    Ties on the sum go to the smaller error, then the smaller ``L``.
    """
    if not s > 0:
        raise ConfigurationError(f"s must be positive, got {s}")
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    best = None
    for down in range(1, max_sum):
        if best is not None and down + 1 > best[0][0]:
            break
        # the smallest feasible numerator is the only candidate for this denominator
        up = max(1, math.ceil((s - epsilon) * down) - 1)
        while up + down <= max_sum and up / down <= s + epsilon:
            err = abs(s - up / down)
            if err <= epsilon:
                if math.gcd(up, down) == 1:
                    key = (up + down, err, down)
                    if best is None or key < best[0]:
                        best = (key, up, down)
                break
            up += 1
    if best is None:
        raise InfeasibleError(f"no U/L with U + L <= {max_sum} lies within {epsilon} of {s}")
    _, up, down = best
    return RationalFactor.make(up, down, s, Method.SEARCH)


@dataclass(frozen=True)
class Convergent:
    """One step of the continued-fraction recurrence (``up`` may be 0)."""

    index: int
    a: int
    up: int
    down: int


def continued_fraction_expansion(s: float, epsilon: float = 0.0, max_iters: int = MAX_CF_ITERS) -> list[Convergent]:
    """Partial quotients and convergents of ``s``.

    Runs on the exact rational value of the float ``s``, so every quotient is
    correct. Stops once a convergent with ``up >= 1`` is within ``epsilon``,
    when the remainder vanishes, after ``max_iters`` terms, or when the next
    denominator would exceed ``MAX_DENOMINATOR``.
    """
    if not s > 0:
        raise ConfigurationError(f"s must be positive, got {s}")
    exact = Fraction(s)
    a = math.floor(exact)
    r = exact - a
    u_prev2, u_prev = 0, 1
    l_prev2, l_prev = 1, 0
    out = []
    for n in range(max_iters):
        if n > 0:
            a = math.floor(1 / r)
            r = 1 / r - a
        up = a * u_prev + u_prev2
        down = a * l_prev + l_prev2
        if out and down > MAX_DENOMINATOR:
            break
        out.append(Convergent(n, a, up, down))
        u_prev2, u_prev = u_prev, up
        l_prev2, l_prev = l_prev, down
        if r == 0:
            break
        if up >= 1 and abs(s - up / down) <= epsilon:
            break
    return out


def continued_fraction_convergents(s: float, epsilon: float = DEFAULT_EPSILON,
                                   max_iters: int = MAX_CF_ITERS) -> list[RationalFactor]:
    """Usable convergents (``U >= 1``) as factors; the last one is the answer."""
    return [
        RationalFactor.make(c.up, c.down, s, Method.CONTINUED_FRACTION)
        for c in continued_fraction_expansion(s, epsilon, max_iters)
        if c.up >= 1
    ]


def rational_factor(s: float, epsilon: float = DEFAULT_EPSILON, method=Method.CONTINUED_FRACTION,
                    f_hz: float | None = None, f0_hz: float | None = None) -> RationalFactor:
    """Pick U/L for ``s`` with the named method."""
    method = Method(method)
    if method is Method.GCD:
        if f_hz is None or f0_hz is None:
            raise ConfigurationError("the gcd method needs both frequencies")
        return rational_from_gcd(f_hz, f0_hz)
    if method is Method.EXPLICIT:
        raise ConfigurationError("explicit factors are built with RationalFactor.explicit")
    if method is Method.SEARCH:
        return rational_search(s, epsilon, max_sum=2 * MAX_DENOMINATOR)
    return continued_fraction_convergents(s, epsilon)[-1]


@dataclass(frozen=True, eq=False)
class FirFilter:
    taps: np.ndarray
    gain: float
    cutoff: float
    transition: float = 0.0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def is_identity(self) -> bool:
        return self.taps.size == 1 and self.taps[0] == 1.0


def kaiser_beta(attenuation_db: float) -> float:
    a = attenuation_db
    if a > 50:
        return 0.1102 * (a - 8.7)
    if a >= 21:
        return 0.5842 * (a - 21) ** 0.4 + 0.07886 * (a - 21)
    return 0.0


def design_lowpass(up: int, down: int, taps_per_phase: int = DEFAULT_TAPS_PER_PHASE,
                   attenuation_db: float = DEFAULT_ATTENUATION_DB) -> FirFilter:
    """Kaiser-windowed sinc for U/L resampling.

    Cutoff is ``1 / max(U, L)`` of the upsampled Nyquist and the DC gain is
    ``U``. ``transition`` records the full Kaiser transition width (same
    normalisation) implied by the length and attenuation.
    """
    if up < 1 or down < 1:
        raise ConfigurationError(f"U and L must be >= 1, got {up}/{down}")
    if taps_per_phase < 2:
        raise ConfigurationError(f"taps_per_phase must be >= 2, got {taps_per_phase}")
    if up == 1 and down == 1:
        return FirFilter(np.ones(1), 1.0, 1.0)
    n = up * taps_per_phase
    if n % 2 == 0:
        n += 1
    cutoff = 1.0 / max(up, down)
    half = (n - 1) / 2
    t = np.arange(n) - half
    ideal = cutoff * np.sinc(cutoff * t)
    taps = ideal * np.kaiser(n, kaiser_beta(attenuation_db))
    taps *= up / taps.sum()
    transition = (attenuation_db - 7.95) / (2.285 * (n - 1) * np.pi)
    return FirFilter(taps, float(up), cutoff, float(transition))


def output_length(n_in: int, factor: RationalFactor) -> int:
    return -(-n_in * factor.up // factor.down)


def settled_length(n_in: int, factor: RationalFactor, fir: FirFilter | None = None) -> int:
    """Number of leading output samples whose filter support ends inside the input.

    Later samples read past the last input sample (zero padding) and carry an
    edge transient.
    """
    if factor.up == 1 and factor.down == 1:
        return n_in
    if fir is None:
        fir = design_lowpass(factor.up, factor.down)
    delay = (fir.taps.size - 1) // 2
    last = ((n_in - 1) * factor.up - delay) // factor.down
    return max(0, min(output_length(n_in, factor), last + 1))


def resample(signal: Signal, factor: RationalFactor, fir: FirFilter | None = None) -> Signal:
    """Resample by ``U/L``; output sample ``m`` sits at input time ``m * L / U``."""
    if len(signal) == 0:
        raise ShapeError("cannot resample an empty signal")
    rate = signal.sample_rate_hz * factor.up / factor.down
    if factor.up == 1 and factor.down == 1:
        return Signal(signal.samples.copy(), rate, signal.label)
    if fir is None:
        fir = design_lowpass(factor.up, factor.down)
    y = _kernels.polyphase_resample(
        np.ascontiguousarray(signal.samples), np.ascontiguousarray(fir.taps),
        factor.up, factor.down, output_length(len(signal), factor),
    )
    return Signal(y, rate, signal.label)
