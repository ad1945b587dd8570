"""Linear dilated CNN predictor: architecture, training and denoising.

Layer ``l`` computes ``h_r[n] = sum_c sum_k w[r, c, k] * h_c[n - k * d_l]``
with no bias and no activation, so the whole stack is one causal FIR filter
of length ``receptive_field``. Output ``n`` predicts input ``n + delay``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rdcnn import _kernels
from rdcnn.errors import ConfigurationError, FormatError, ShapeError, StateError, TrainingError
from rdcnn.resampler import (
    DEFAULT_EPSILON,
    FirFilter,
    Method,
    RationalFactor,
    rational_factor,
    resample,
)
from rdcnn.signal_model import Label, Signal

MODEL_MAGIC = "rdcnn-model v1"
MIN_SCALE, MAX_SCALE = 1.0 / 16.0, 16.0


@dataclass(frozen=True)
class LayerSpec:
    kernel_len: int
    in_channels: int
    out_channels: int
    dilation: int

    def __post_init__(self):
        for name in ("kernel_len", "in_channels", "out_channels", "dilation"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v}")

    @property
    def shape(self):
        return (self.out_channels, self.in_channels, self.kernel_len)


@dataclass(frozen=True, eq=False)
class DcnnModel:
    layers: tuple[LayerSpec, ...]
    weights: tuple[np.ndarray, ...]
    delay: int = 1
    trained: bool = False
    train_f0_hz: float | None = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ConfigurationError("a model needs at least one layer")
        if layers[0].in_channels != 1 or layers[-1].out_channels != 1:
            raise ConfigurationError("first layer must take 1 channel and last layer must emit 1")
        for prev, cur in zip(layers, layers[1:]):
            if cur.in_channels != prev.out_channels:
                raise ConfigurationError(
                    f"channel mismatch: {prev.out_channels} out feeds {cur.in_channels} in"
                )
        if len(self.weights) != len(layers):
            raise ConfigurationError(f"{len(layers)} layers but {len(self.weights)} weight tensors")
        weights = []
        for spec, w in zip(layers, self.weights):
            w = np.array(w, dtype=np.float64)
            if w.shape != spec.shape:
                raise ConfigurationError(f"weight shape {w.shape} does not match layer {spec.shape}")
            if not np.all(np.isfinite(w)):
                raise ConfigurationError("weights must be finite")
            w.setflags(write=False)
            weights.append(w)
        if int(self.delay) != self.delay or self.delay < 1:
            raise ConfigurationError(f"delay must be a positive integer, got {self.delay}")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "weights", tuple(weights))

    @property
    def dilations(self) -> tuple[int, ...]:
        return tuple(layer.dilation for layer in self.layers)

    @property
    def receptive_field(self) -> int:
        return 1 + sum((layer.kernel_len - 1) * layer.dilation for layer in self.layers)

    @property
    def n_params(self) -> int:
        return sum(layer.in_channels * layer.out_channels * layer.kernel_len for layer in self.layers)

    @property
    def warmup(self) -> int:
        """Samples to skip when scoring an estimate (receptive field + delay)."""
        return self.receptive_field + self.delay

    def with_weights(self, weights, **changes) -> "DcnnModel":
        return replace(self, weights=tuple(weights), **changes)

    def impulse_response(self) -> np.ndarray:
        """Equivalent single FIR ``g``: output[n] = sum_j g[j] * input[n - j]."""
        rf = self.receptive_field
        delta = np.zeros((1, 2 * rf - 1))
        delta[0, rf - 1] = 1.0
        return _forward_stack(self.weights, self.dilations, delta)[-1][0].copy()


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 2000
    batch_size: int | str = "full"
    seed: int = 0
    init_scale: float = 0.5

    def __post_init__(self):
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise ConfigurationError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigurationError(f"epochs must be a positive integer, got {self.epochs}")
        if self.batch_size != "full" and (int(self.batch_size) != self.batch_size or self.batch_size < 1):
            raise ConfigurationError(f"batch_size must be 'full' or a positive integer, got {self.batch_size}")
        if not self.init_scale > 0:
            raise ConfigurationError(f"init_scale must be positive, got {self.init_scale}")


def init_weights(layers, init_scale: float, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.uniform(-init_scale, init_scale, size=layer.shape) for layer in layers]


def build_default(n_layers: int, kernel_len: int = 8, channels: int = 1, delay: int = 1,
                  init_scale: float = 0.5, seed: int = 0) -> DcnnModel:
    """Untrained model with dilations 1, 2, 4, ..., 2**(n_layers - 1)."""
    if n_layers < 1:
        raise ConfigurationError(f"n_layers must be >= 1, got {n_layers}")
    layers = []
    for i in range(n_layers):
        c_in = 1 if i == 0 else channels
        c_out = 1 if i == n_layers - 1 else channels
        layers.append(LayerSpec(kernel_len, c_in, c_out, 2**i))
    return DcnnModel(tuple(layers), tuple(init_weights(layers, init_scale, seed)), delay)


# -- forward / backward -------------------------------------------------------


def _forward_stack(weights, dilations, x):
    acts = [np.ascontiguousarray(x, dtype=np.float64)]
    for w, d in zip(weights, dilations):
        acts.append(_kernels.dilated_conv_forward(acts[-1], w, d))
    return acts


def _backward_stack(acts, weights, dilations, grad_out):
    grads = [None] * len(weights)
    g = np.ascontiguousarray(grad_out, dtype=np.float64)
    for i in range(len(weights) - 1, -1, -1):
        g_in, grads[i] = _kernels.dilated_conv_backward(acts[i], weights[i], dilations[i], g)
        g = g_in
    return grads


def _check_length(model: DcnnModel, n: int):
    need = model.receptive_field + model.delay
    if n <= need:
        raise ShapeError(f"input has {n} samples; need more than receptive field + delay = {need}")


def forward(model: DcnnModel, signal: Signal) -> Signal:
    """Prediction sequence; sample ``n`` (for ``n >= receptive_field - 1``) predicts ``signal[n + delay]``."""
    _check_length(model, len(signal))
    rf = model.receptive_field
    out = _forward_stack(model.weights, model.dilations, signal.samples[None, :])[-1][0]
    full = np.zeros(len(signal))
    full[rf - 1:] = out
    return Signal(full, signal.sample_rate_hz, Label.ESTIMATE, valid_from=rf - 1)


def _residual_terms(model, y):
    rf, delay = model.receptive_field, model.delay
    acts = _forward_stack(model.weights, model.dilations, y[None, :])
    pred = acts[-1][0]
    n_valid = pred.size - delay
    err = pred[:n_valid] - y[rf - 1 + delay:]
    return acts, err, n_valid


def loss(model: DcnnModel, observation: Signal) -> float:
    """``(1 / 2N) * sum (prediction - target)**2`` over the N valid predictions."""
    _check_length(model, len(observation))
    _, err, n_valid = _residual_terms(model, observation.samples)
    return float(np.dot(err, err) / (2 * n_valid))


def gradient(model: DcnnModel, observation: Signal) -> list[np.ndarray]:
    """Exact gradient of :func:`loss` by back-propagation through the linear stack."""
    _check_length(model, len(observation))
    acts, err, n_valid = _residual_terms(model, observation.samples)
    grad_out = np.zeros((1, acts[-1].shape[1]))
    grad_out[0, :n_valid] = err / n_valid
    return _backward_stack(acts, model.weights, model.dilations, grad_out)


# -- training -----------------------------------------------------------------


class _Quadratic:
    """Loss as a quadratic form in the equivalent FIR ``g``.

    ``loss = 0.5 * (g' R g - 2 p' g + c)`` with ``R``, ``p``, ``c`` the lagged
    second moments of the observation, which makes every epoch independent of
    the signal length.
    """

    def __init__(self, y, rf, delay, start=0, stop=None):
        windows = np.ascontiguousarray(sliding_window_view(y, rf)[:, ::-1])
        n_valid = y.size - rf + 1 - delay
        stop = n_valid if stop is None else stop
        x = windows[start:stop]
        t = y[rf - 1 + delay + start:rf - 1 + delay + stop]
        n = stop - start
        self.gram = x.T @ x / n
        self.cross = x.T @ t / n
        self.const = float(t @ t / n)

    def value(self, g):
        return 0.5 * (g @ self.gram @ g - 2.0 * self.cross @ g + self.const)

    def grad(self, g):
        return self.gram @ g - self.cross


def train(model: DcnnModel, observation: Signal, cfg: TrainConfig | None = None,
          f0_hz: float | None = None, history: list | None = None) -> DcnnModel:
    """Gradient descent on the single observation; returns a new trained model.

    The observation is scaled to unit RMS first (the predictor is linear, so
    the weights apply unchanged to the raw signal). The returned weights are
    the lowest-loss iterate, which is the last one whenever descent is
    monotone. ``history`` (if given) receives the loss before every epoch
    followed by the final loss.
    """
    cfg = cfg or TrainConfig()
    rf, delay = model.receptive_field, model.delay
    n = len(observation)
    if n <= rf + delay + 1:
        raise ShapeError(f"observation has {n} samples; training needs more than {rf + delay + 1}")
    y = observation.samples
    rms = math.sqrt(float(np.mean(y**2)))
    if rms == 0:
        raise ShapeError("cannot train on an all-zero observation")
    y = y / rms

    full = _Quadratic(y, rf, delay)
    n_valid = n - rf + 1 - delay
    if cfg.batch_size == "full" or cfg.batch_size >= n_valid:
        weights, losses, bad_epoch = _kernels.gd_full_batch(
            list(model.weights), list(model.dilations), full.gram, full.cross, full.const,
            float(cfg.learning_rate), int(cfg.epochs),
        )
    else:
        weights, losses, bad_epoch = _minibatch(model, y, full, n_valid, cfg)
    if history is not None:
        history.extend(float(v) for v in losses)
    if bad_epoch >= 0:
        raise TrainingError(f"training diverged at epoch {bad_epoch} (loss {losses[-1]:.6g})", epoch=bad_epoch)
    return model.with_weights(weights, trained=True,
                              train_f0_hz=model.train_f0_hz if f0_hz is None else float(f0_hz))


def _minibatch(model, y, full, n_valid, cfg):
    """Shuffled contiguous batches, one step per batch; same return contract as the fused kernel."""
    rf, delay, dil = model.receptive_field, model.delay, model.dilations
    bounds = list(range(0, n_valid, int(cfg.batch_size))) + [n_valid]
    batches = [_Quadratic(y, rf, delay, a, b) for a, b in zip(bounds, bounds[1:])]
    rng = np.random.default_rng(cfg.seed)
    delta = np.zeros((1, 2 * rf - 1))
    delta[0, rf - 1] = 1.0
    weights = [w.copy() for w in model.weights]

    def current():
        return full.value(_forward_stack(weights, dil, delta)[-1][0])

    initial = current()
    best, best_w = initial, [w.copy() for w in weights]
    losses = []
    for epoch in range(cfg.epochs + 1):
        cur = initial if epoch == 0 else current()
        losses.append(cur)
        if not math.isfinite(cur) or cur > 10.0 * initial:
            return best_w, np.array(losses), epoch
        if cur < best or (epoch == cfg.epochs and cur <= best):
            best, best_w = cur, [w.copy() for w in weights]
        if epoch == cfg.epochs:
            break
        for b in rng.permutation(len(batches)):
            acts = _forward_stack(weights, dil, delta)
            dg = batches[b].grad(acts[-1][0])
            for w, gw in zip(weights, _backward_stack(acts, weights, dil, dg[None, :])):
                w -= cfg.learning_rate * gw
    return best_w, np.array(losses), -1


# -- inference ----------------------------------------------------------------


def denoise(model: DcnnModel, observation: Signal) -> Signal:
    """Estimate of the periodic component aligned to the observation's time axis."""
    if not model.trained:
        raise StateError("model is not trained")
    pred = forward(model, observation)
    start = model.receptive_field - 1 + model.delay
    est = np.zeros(len(observation))
    est[start:] = pred.samples[model.receptive_field - 1:len(observation) - model.delay]
    return Signal(est, observation.sample_rate_hz, Label.ESTIMATE, valid_from=start)


def scale_factor(model: DcnnModel, observed_f0_hz: float) -> float:
    if model.train_f0_hz is None:
        raise StateError("model has no training fundamental frequency recorded")
    if not observed_f0_hz > 0:
        raise ConfigurationError(f"observed_f0_hz must be positive, got {observed_f0_hz}")
    s = observed_f0_hz / model.train_f0_hz
    if not MIN_SCALE <= s <= MAX_SCALE:
        raise ConfigurationError(f"scale {s:.6g} outside supported range [1/16, 16]")
    return s


def denoise_scaled(model: DcnnModel, observation: Signal, observed_f0_hz: float,
                   resampler_precision: float = DEFAULT_EPSILON, method=Method.GCD,
                   fir: FirFilter | None = None) -> tuple[Signal, RationalFactor]:
    """Resample by ``U/L ~ observed_f0 / train_f0`` and denoise with the fixed weights.

    The estimate lives in the resampled domain. ``resampler_precision`` is the
    tolerance for the search and continued-fraction methods; the gcd method
    works on a 0.01 Hz grid instead.
    """
    if not model.trained:
        raise StateError("model is not trained")
    s = scale_factor(model, observed_f0_hz)
    factor = rational_factor(s, resampler_precision, method, f_hz=observed_f0_hz, f0_hz=model.train_f0_hz)
    resampled = resample(observation, factor, fir)
    return denoise(model, resampled), factor


# -- persistence --------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps_model(model: DcnnModel) -> str:
    lines = [
        MODEL_MAGIC,
        f"delay {model.delay}",
        f"train_f0_hz {'none' if model.train_f0_hz is None else _fmt(model.train_f0_hz)}",
        f"trained {int(model.trained)}",
        f"layers {len(model.layers)}",
    ]
    for layer, w in zip(model.layers, model.weights):
        lines.append(f"layer {layer.kernel_len} {layer.in_channels} {layer.out_channels} {layer.dilation}")
        lines.append("weights " + " ".join(_fmt(v) for v in w.reshape(-1)))
    body = "\n".join(lines) + "\n"
    return body + f"checksum sha256 {hashlib.sha256(body.encode('utf-8')).hexdigest()}\n"


def loads_model(text: str) -> DcnnModel:
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise FormatError(f"not a model file (expected '{MODEL_MAGIC}' header)")
    if not lines[-1].startswith("checksum sha256 "):
        raise FormatError("missing checksum line")
    body = "\n".join(lines[:-1]) + "\n"
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != lines[-1].split()[-1]:
        raise FormatError("checksum mismatch; model file is corrupted")

    def field_(i, key):
        parts = lines[i].split(" ", 1)
        if parts[0] != key or len(parts) != 2:
            raise FormatError(f"line {i + 1}: expected '{key} ...'")
        return parts[1]

    try:
        delay = int(field_(1, "delay"))
        f0_raw = field_(2, "train_f0_hz")
        train_f0 = None if f0_raw == "none" else float(f0_raw)
        trained = bool(int(field_(3, "trained")))
        n_layers = int(field_(4, "layers"))
        layers, weights = [], []
        for i in range(n_layers):
            spec = LayerSpec(*(int(v) for v in field_(5 + 2 * i, "layer").split()))
            w = np.array([float(v) for v in field_(6 + 2 * i, "weights").split()]).reshape(spec.shape)
            layers.append(spec)
            weights.append(w)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed model file: {exc}") from None
    if len(lines) != 6 + 2 * n_layers:
        raise FormatError("unexpected trailing content in model file")
    return DcnnModel(tuple(layers), tuple(weights), delay, trained, train_f0)


def save_model(model: DcnnModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> DcnnModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
