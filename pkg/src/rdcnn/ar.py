"""Per-observation least-squares linear predictor (AR baseline).

``x_hat[n] = sum_{m=1..M} w_m * y[n - delay - m + 1]``, fitted on the
observation itself by the covariance method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.lib.stride_tricks import sliding_window_view

from rdcnn.errors import ConfigurationError, NumericalError, ShapeError
from rdcnn.signal_model import Label, Signal

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class ArModel:
    coefficients: np.ndarray
    delay: int = 1

    def __post_init__(self):
        w = np.array(self.coefficients, dtype=np.float64).reshape(-1)
        if w.size < 1:
            raise ConfigurationError("an AR model needs at least one coefficient")
        if not np.all(np.isfinite(w)):
            raise ConfigurationError("AR coefficients must be finite")
        if int(self.delay) != self.delay or self.delay < 1:
            raise ConfigurationError(f"delay must be a positive integer, got {self.delay}")
        w.setflags(write=False)
        object.__setattr__(self, "coefficients", w)

    @property
    def window_len(self) -> int:
        return self.coefficients.size

    @property
    def warmup(self) -> int:
        return self.window_len + self.delay


def design_matrix(y: np.ndarray, window_len: int, delay: int):
    """Regressors and targets; row ``i`` predicts ``y[window_len + delay - 1 + i]``.

    Column ``m - 1`` holds ``y[n - delay - m + 1]``.
    """
    first = window_len + delay - 1
    x = sliding_window_view(y[:y.size - delay], window_len)[:, ::-1]
    return x, y[first:]


def fit(observation: Signal, window_len: int, delay: int = 1, ridge: float = DEFAULT_RIDGE) -> ArModel:
    """Least-squares fit through the normal equations.

    ``ridge`` is relative: the penalty added to the diagonal is
    ``ridge * trace(X'X) / M``.
    """
    if window_len < 1 or delay < 1:
        raise ConfigurationError(f"window_len and delay must be >= 1, got {window_len}, {delay}")
    if ridge < 0:
        raise ConfigurationError(f"ridge must be non-negative, got {ridge}")
    if len(observation) < 2 * (window_len + delay):
        raise ShapeError(f"observation has {len(observation)} samples; need {2 * (window_len + delay)}")
    x, t = design_matrix(observation.samples, window_len, delay)
    gram = x.T @ x
    rhs = x.T @ t
    if ridge > 0:
        gram[np.diag_indices_from(gram)] += ridge * np.trace(gram) / window_len
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalError("normal matrix is singular; use ridge > 0") from None
    diag = np.diag(factor[0])
    if diag.min() <= np.sqrt(np.finfo(float).eps) * diag.max():
        raise NumericalError("normal matrix is numerically singular; use ridge > 0")
    w = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    return ArModel(w, delay)


def denoise(model: ArModel, observation: Signal) -> Signal:
    m, delay = model.window_len, model.delay
    if len(observation) <= m + delay:
        raise ShapeError(f"observation has {len(observation)} samples; need more than {m + delay}")
    x, _ = design_matrix(observation.samples, m, delay)
    start = m + delay - 1
    est = np.zeros(len(observation))
    est[start:] = x @ model.coefficients
    return Signal(est, observation.sample_rate_hz, Label.ESTIMATE, valid_from=start)
