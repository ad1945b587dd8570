"""Synthetic periodic observations, additive noise and SNR measurement.

An observation is ``y[n] = x[n] + eta[n]``: ``x`` is a sum of harmonics of a
fundamental frequency and ``eta`` is white or moving-average Gaussian noise
whose power is calibrated exactly against ``x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rdcnn.errors import ConfigurationError, FormatError, MeasurementError, ShapeError

SIGNAL_MAGIC = "rdcnn-signal v1"


class Label(str, enum.Enum):
    CLEAN = "clean"
    NOISY = "noisy"
    ESTIMATE = "estimate"


@dataclass(frozen=True)
class Harmonic:
    order: int
    amplitude: float
    phase: float


@dataclass(frozen=True)
class SignalSpec:
    """Generative description of a clean periodic signal."""

    fundamental_hz: float
    harmonics: tuple[Harmonic, ...]
    sample_rate_hz: float
    duration_s: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "harmonics", tuple(h if isinstance(h, Harmonic) else Harmonic(*h) for h in self.harmonics)
        )
        self.validate()

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    def validate(self):
        if not self.fundamental_hz > 0:
            raise ConfigurationError(f"fundamental_hz must be positive, got {self.fundamental_hz}")
        if not self.harmonics:
            raise ConfigurationError("harmonic list is empty")
        orders = [h.order for h in self.harmonics]
        if len(set(orders)) != len(orders):
            raise ConfigurationError(f"harmonic orders must be distinct: {orders}")
        if any(int(o) != o or o < 1 for o in orders):
            raise ConfigurationError(f"harmonic orders must be positive integers: {orders}")
        if 1 not in orders:
            raise ConfigurationError("the fundamental (order 1) must be present")
        for h in self.harmonics:
            if h.amplitude < 0:
                raise ConfigurationError(f"negative amplitude {h.amplitude} for order {h.order}")
            if not 0.0 <= h.phase < 2 * math.pi:
                raise ConfigurationError(f"phase {h.phase} for order {h.order} outside [0, 2pi)")
        top = max(orders) * self.fundamental_hz
        if not self.sample_rate_hz > 2 * top:
            raise ConfigurationError(
                f"Nyquist violation: harmonic at {top} Hz needs sample rate above {2 * top} Hz, "
                f"got {self.sample_rate_hz}"
            )
        if self.n_samples < 1:
            raise ConfigurationError(f"duration {self.duration_s} s yields no samples")


class NoiseKind(str, enum.Enum):
    WHITE = "white"
    MOVING_AVERAGE = "moving_average"


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise description.

    For ``moving_average`` the noise is ``eta[n] = sum_j b_j * eps[n - j]``
    for ``j = 1..J`` with ``b = ma_coefficients``.
    """

    snr_db: float
    kind: NoiseKind = NoiseKind.WHITE
    ma_coefficients: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        object.__setattr__(self, "ma_coefficients", tuple(float(b) for b in self.ma_coefficients))
        if not math.isfinite(self.snr_db):
            raise ConfigurationError(f"snr_db must be finite, got {self.snr_db}")
        if self.kind is NoiseKind.MOVING_AVERAGE and not self.ma_coefficients:
            raise ConfigurationError("moving_average noise needs at least one coefficient")


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled real sequence.

    ``valid_from`` marks the first trustworthy sample; estimates produced by
    causal predictors carry a warm-up prefix that is left at zero.
    """

    samples: np.ndarray
    sample_rate_hz: float
    label: Label = Label.CLEAN
    valid_from: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise ShapeError("a signal needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("signal samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ConfigurationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not 0 <= self.valid_from <= arr.size:
            raise ConfigurationError(f"valid_from {self.valid_from} outside [0, {arr.size}]")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "label", Label(self.label))

    def __len__(self):
        return self.samples.size

    def valid(self) -> np.ndarray:
        return self.samples[self.valid_from:]

    def power(self) -> float:
        return float(np.mean(self.samples**2))


def synthesize_clean(spec: SignalSpec) -> Signal:
    n = np.arange(spec.n_samples, dtype=np.float64)
    x = np.zeros(spec.n_samples)
    for h in spec.harmonics:
        x += h.amplitude * np.sin(2 * np.pi * h.order * spec.fundamental_hz * n / spec.sample_rate_hz + h.phase)
    return Signal(x, spec.sample_rate_hz, Label.CLEAN)


def noise_realization(n_samples: int, noise: NoiseSpec) -> np.ndarray:
    """Unscaled noise draw of the requested kind."""
    rng = np.random.default_rng(noise.seed)
    if noise.kind is NoiseKind.WHITE:
        return rng.standard_normal(n_samples)
    b = np.asarray(noise.ma_coefficients)
    j = b.size
    eps = rng.standard_normal(n_samples + j)
    # eta[n] = sum_{i=1..J} b_i eps[n - i]; eps index shifted by J
    eta = np.zeros(n_samples)
    for i in range(1, j + 1):
        eta += b[i - 1] * eps[j - i:j - i + n_samples]
    return eta


def add_noise(clean: Signal, noise: NoiseSpec) -> Signal:
    """Add noise scaled so the realised SNR equals ``noise.snr_db``."""
    p_sig = clean.power()
    if p_sig == 0:
        raise MeasurementError("clean signal has zero power; SNR is undefined")
    eta = noise_realization(len(clean), noise)
    p_eta = float(np.mean(eta**2))
    if p_eta == 0:
        raise MeasurementError("noise realisation has zero power")
    eta *= math.sqrt(p_sig / (p_eta * 10.0 ** (noise.snr_db / 10.0)))
    return Signal(clean.samples + eta, clean.sample_rate_hz, Label.NOISY)


def measure_snr(reference: Signal, test: Signal, skip: int = 0) -> float:
    """SNR in dB of ``test`` against ``reference``, ignoring the first ``skip`` samples.

    Returns ``math.inf`` when the residual is exactly zero.
    """
    if len(reference) != len(test):
        raise ShapeError(f"length mismatch: {len(reference)} vs {len(test)}")
    if reference.sample_rate_hz != test.sample_rate_hz:
        raise ShapeError(f"sample rate mismatch: {reference.sample_rate_hz} vs {test.sample_rate_hz}")
    if not 0 <= skip < len(reference):
        raise ShapeError(f"skip {skip} must lie in [0, {len(reference)})")
    ref = reference.samples[skip:]
    err = test.samples[skip:] - ref
    p_ref = float(np.dot(ref, ref))
    if p_ref == 0:
        raise MeasurementError("reference has zero power over the evaluated region")
    p_err = float(np.dot(err, err))
    if p_err == 0:
        return math.inf
    return 10.0 * math.log10(p_ref / p_err)


# -- file formats -------------------------------------------------------------


def write_csv(signal: Signal, path) -> None:
    lines = ["sample"] + [repr(float(v)) for v in signal.samples]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path, sample_rate_hz: float, label=Label.NOISY) -> Signal:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != "sample":
        raise FormatError(f"{path}: expected header line 'sample'")
    values = []
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: not a number: {line!r}") from None
    return Signal(np.array(values), sample_rate_hz, label)


def _sidecar(path) -> Path:
    return Path(str(path) + ".meta")


def write_raw(signal: Signal, path) -> None:
    """Little-endian float64 samples plus a ``<path>.meta`` key-value sidecar."""
    Path(path).write_bytes(signal.samples.astype("<f8").tobytes())
    meta = [
        SIGNAL_MAGIC,
        f"sample_rate_hz = {signal.sample_rate_hz!r}",
        f"length = {len(signal)}",
        f"label = {signal.label.value}",
        f"valid_from = {signal.valid_from}",
    ]
    _sidecar(path).write_text("\n".join(meta) + "\n", encoding="utf-8")


def read_raw(path) -> Signal:
    meta_lines = _sidecar(path).read_text(encoding="utf-8").splitlines()
    if not meta_lines or meta_lines[0].strip() != SIGNAL_MAGIC:
        raise FormatError(f"{_sidecar(path)}: missing '{SIGNAL_MAGIC}' header")
    meta = {}
    for line in meta_lines[1:]:
        if line.strip():
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    try:
        length = int(meta["length"])
        rate = float(meta["sample_rate_hz"])
        label = Label(meta.get("label", "noisy"))
        valid_from = int(meta.get("valid_from", 0))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{_sidecar(path)}: bad metadata ({exc})") from None
    if data.size != length:
        raise FormatError(f"{path}: sidecar says {length} samples, file holds {data.size}")
    return Signal(data.astype(np.float64), rate, label, valid_from)


def load_signal(path, sample_rate_hz: float = 2000.0, label=Label.NOISY) -> Signal:
    """Read CSV (``.csv``) or raw float64 (anything with a ``.meta`` sidecar)."""
    if str(path).endswith(".csv"):
        return read_csv(path, sample_rate_hz, label)
    return read_raw(path)


def save_signal(signal: Signal, path) -> None:
    if str(path).endswith(".csv"):
        write_csv(signal, path)
    else:
        write_raw(signal, path)
