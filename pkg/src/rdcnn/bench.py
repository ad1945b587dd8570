"""Monte Carlo comparison of R-DCNN, per-observation DCNN and AR denoising.

Every realization is a pure function of ``(master_seed, iteration, index,
n_harmonics)``; the noise draw is shared across SNR levels and only its
scale changes, so all methods and SNRs see the same underlying data.
"""

from __future__ import annotations

import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from rdcnn import ar, dcnn
from rdcnn.errors import ConfigurationError, ContractError, NumericalError, TrainingError
from rdcnn.resampler import Method, design_lowpass, rational_factor, resample, settled_length
from rdcnn.signal_model import (
    Harmonic,
    NoiseSpec,
    Signal,
    SignalSpec,
    add_noise,
    measure_snr,
    synthesize_clean,
)

METHODS = ("rdcnn", "dcnn_per_obs", "ar")
NYQUIST_GUARD = 0.95
RESULT_HEADER = "method,hyper,n_harmonics,input_snr_db,output_snr_db,f0_hz,scale_s,iteration,index"
SUMMARY_HEADER = (
    "view,method,hyper,n_harmonics,input_snr_db,mean_output_snr_db,std_output_snr_db,count,n_infinite,n_failed"
)


@dataclass(frozen=True)
class ExperimentConfig:
    sample_rate_hz: float = 2000.0
    duration_s: float = 2.0
    signals_per_iteration: int = 100
    iterations: int = 100
    f0_range_hz: tuple[float, float] = (20.0, 50.0)
    harmonic_counts: tuple[int, ...] = (5, 10, 20)
    input_snr_db: tuple[float, ...] = (-10.0, -5.0, 0.0, 15.0)
    dcnn_layer_counts: tuple[int, ...] = (2, 3, 4, 5)
    kernel_len: int = 8
    ar_window_lens: tuple[int, ...] = (20, 40, 60, 80, 100)
    resample_epsilon: float = 0.1
    rational_method: str = "gcd"
    delay: int = 1
    train_cfg: dcnn.TrainConfig = field(default_factory=dcnn.TrainConfig)
    master_seed: int = 0
    methods: tuple[str, ...] = METHODS
    ar_ridge: float = ar.DEFAULT_RIDGE
    taps_per_phase: int = 24
    attenuation_db: float = 80.0

    def __post_init__(self):
        for name in ("f0_range_hz", "harmonic_counts", "input_snr_db", "dcnn_layer_counts",
                     "ar_window_lens", "methods"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        for name in ("harmonic_counts", "input_snr_db", "dcnn_layer_counts", "ar_window_lens", "methods"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must not be empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods: {sorted(unknown)}")
        lo, hi = self.f0_range_hz if len(self.f0_range_hz) == 2 else (None, None)
        if lo is None or not 0 < lo <= hi:
            raise ConfigurationError(f"f0_range_hz must be two values 0 < lo <= hi, got {self.f0_range_hz}")
        limit = NYQUIST_GUARD * self.sample_rate_hz / 2
        if lo * max(self.harmonic_counts) >= limit:
            raise ConfigurationError(
                f"f0 {lo} Hz with {max(self.harmonic_counts)} harmonics exceeds {NYQUIST_GUARD} x Nyquist"
            )
        for name in ("signals_per_iteration", "iterations", "kernel_len", "delay", "taps_per_phase"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if min(self.harmonic_counts) < 1 or min(self.dcnn_layer_counts) < 1 or min(self.ar_window_lens) < 1:
            raise ConfigurationError("harmonic counts, layer counts and window lengths must be >= 1")
        try:
            Method(self.rational_method)
        except ValueError:
            raise ConfigurationError(f"unknown rational_method {self.rational_method!r}") from None
        if not self.resample_epsilon > 0:
            raise ConfigurationError("resample_epsilon must be positive")
        if not (self.sample_rate_hz > 0 and self.duration_s > 0):
            raise ConfigurationError("sample_rate_hz and duration_s must be positive")


DESK_CONFIG = dict(signals_per_iteration=10, iterations=10)


@dataclass(frozen=True)
class ResultRecord:
    method: str
    hyper: int
    n_harmonics: int
    input_snr_db: float
    output_snr_db: float
    f0_hz: float
    scale_s: float
    iteration: int
    index: int

    @property
    def failed(self) -> bool:
        return math.isnan(self.output_snr_db)

    def csv_row(self) -> str:
        return ",".join([
            self.method, str(self.hyper), str(self.n_harmonics), _g(self.input_snr_db),
            _g(self.output_snr_db), _g(self.f0_hz), _g(self.scale_s), str(self.iteration), str(self.index),
        ])


def _g(v: float) -> str:
    return format(float(v), ".9g")


# -- realizations -------------------------------------------------------------


def _seed(cfg: ExperimentConfig, *parts: int) -> int:
    return int(np.random.SeedSequence([cfg.master_seed, *parts]).generate_state(1, dtype=np.uint64)[0])


def generate_realization(cfg: ExperimentConfig, iteration: int, index: int, n_harmonics: int,
                         input_snr_db: float):
    """``(spec, clean, noisy)`` for one cell of the sweep."""
    rng = np.random.default_rng(_seed(cfg, iteration, index, n_harmonics))
    lo, hi = cfg.f0_range_hz
    limit = NYQUIST_GUARD * cfg.sample_rate_hz / 2
    while True:
        f0 = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        if n_harmonics * f0 < limit:
            break
    amps = rng.uniform(0.0, 1.0, n_harmonics)
    phases = rng.uniform(0.0, np.pi / 2, n_harmonics)
    spec = SignalSpec(
        f0,
        tuple(Harmonic(h + 1, float(a), float(p)) for h, (a, p) in enumerate(zip(amps, phases))),
        cfg.sample_rate_hz,
        cfg.duration_s,
        seed=_seed(cfg, iteration, index, n_harmonics),
    )
    clean = synthesize_clean(spec)
    noise = NoiseSpec(input_snr_db, seed=_seed(cfg, iteration, index, n_harmonics, 1))
    return spec, clean, add_noise(clean, noise)


def _train(cfg, noisy, n_layers, f0, *seed_parts):
    model = dcnn.build_default(n_layers, cfg.kernel_len, delay=cfg.delay,
                               init_scale=cfg.train_cfg.init_scale, seed=_seed(cfg, 7, *seed_parts))
    return dcnn.train(model, noisy, cfg.train_cfg, f0_hz=f0)


def _head(sig: Signal, n: int) -> Signal:
    return Signal(sig.samples[:n], sig.sample_rate_hz, sig.label, sig.valid_from)


def _snr(clean: Signal, est: Signal, skip: int) -> float:
    return measure_snr(clean, est, skip=skip)


# -- work units ---------------------------------------------------------------


def _factor(cfg, s, f_hz, f0_hz):
    """U/L by the configured method, falling back to continued fractions if it misses epsilon."""
    factor = rational_factor(s, cfg.resample_epsilon, cfg.rational_method, f_hz=f_hz, f0_hz=f0_hz)
    if factor.achieved_error > cfg.resample_epsilon:
        factor = rational_factor(s, cfg.resample_epsilon, Method.CONTINUED_FRACTION)
    return factor


def _unit_rdcnn(cfg, iteration, n_harm, snr, n_layers):
    """Train on realization 0, then reuse the frozen weights on the rest."""
    out = []
    spec0, clean0, noisy0 = generate_realization(cfg, iteration, 0, n_harm, snr)
    try:
        model = _train(cfg, noisy0, n_layers, spec0.fundamental_hz, iteration, 0, n_harm, cfg.input_snr_db.index(snr), n_layers)
    except TrainingError:
        return [ResultRecord("rdcnn", n_layers, n_harm, snr, math.nan, spec0.fundamental_hz, 1.0, iteration, i)
                for i in range(cfg.signals_per_iteration)]
    out.append(ResultRecord("rdcnn", n_layers, n_harm, snr,
                            _snr(clean0, dcnn.denoise(model, noisy0), model.warmup),
                            spec0.fundamental_hz, 1.0, iteration, 0))
    filters = {}
    for index in range(1, cfg.signals_per_iteration):
        spec, clean, noisy = generate_realization(cfg, iteration, index, n_harm, snr)
        s = dcnn.scale_factor(model, spec.fundamental_hz)
        factor = _factor(cfg, s, spec.fundamental_hz, model.train_f0_hz)
        key = (factor.up, factor.down)
        if key not in filters:
            filters[key] = design_lowpass(factor.up, factor.down, cfg.taps_per_phase, cfg.attenuation_db)
        keep = settled_length(len(noisy), factor, filters[key])
        est = _head(dcnn.denoise(model, resample(noisy, factor, filters[key])), keep)
        ref = _head(resample(clean, factor, filters[key]), keep)
        out.append(ResultRecord("rdcnn", n_layers, n_harm, snr, _snr(ref, est, model.warmup),
                                spec.fundamental_hz, s, iteration, index))
    return out


def _unit_dcnn(cfg, iteration, n_harm, snr):
    out = []
    for index in range(cfg.signals_per_iteration):
        spec, clean, noisy = generate_realization(cfg, iteration, index, n_harm, snr)
        for n_layers in cfg.dcnn_layer_counts:
            try:
                model = _train(cfg, noisy, n_layers, spec.fundamental_hz,
                               iteration, index, n_harm, cfg.input_snr_db.index(snr), n_layers)
                value = _snr(clean, dcnn.denoise(model, noisy), model.warmup)
            except TrainingError:
                value = math.nan
            out.append(ResultRecord("dcnn_per_obs", n_layers, n_harm, snr, value,
                                    spec.fundamental_hz, 1.0, iteration, index))
    return out


def _fit_ar(noisy, window, delay, ridge):
    for attempt in range(3):
        try:
            return ar.fit(noisy, window, delay, ridge)
        except NumericalError:
            ridge = max(ridge, 1e-10) * 1e3
    return None


def _unit_ar(cfg, iteration, n_harm, snr):
    out = []
    for index in range(cfg.signals_per_iteration):
        spec, clean, noisy = generate_realization(cfg, iteration, index, n_harm, snr)
        for window in cfg.ar_window_lens:
            model = _fit_ar(noisy, window, cfg.delay, cfg.ar_ridge)
            value = math.nan if model is None else _snr(clean, ar.denoise(model, noisy), model.warmup)
            out.append(ResultRecord("ar", window, n_harm, snr, value, spec.fundamental_hz, 1.0, iteration, index))
    return out


_UNITS = {"rdcnn": _unit_rdcnn, "dcnn_per_obs": _unit_dcnn, "ar": _unit_ar}


def _units(cfg: ExperimentConfig, method: str):
    for iteration in range(cfg.iterations):
        for n_harm in cfg.harmonic_counts:
            for snr in cfg.input_snr_db:
                if method == "rdcnn":
                    for n_layers in cfg.dcnn_layer_counts:
                        yield (method, cfg, iteration, n_harm, snr, n_layers)
                else:
                    yield (method, cfg, iteration, n_harm, snr)


def _run_unit(unit):
    method, *args = unit
    return _UNITS[method](*args)


def resolve_workers(workers: int | None = None) -> int:
    """``workers`` if given, else ``RDCNN_THREADS`` (0 or unset = all CPUs)."""
    if workers is None:
        try:
            workers = int(os.environ.get("RDCNN_THREADS", "0"))
        except ValueError:
            raise ConfigurationError("RDCNN_THREADS must be an integer") from None
    if workers < 0:
        raise ConfigurationError(f"worker count must be >= 0, got {workers}")
    return workers or os.cpu_count() or 1


def _execute(units, workers):
    workers = resolve_workers(workers)
    if workers == 1 or len(units) <= 1:
        chunks = [_run_unit(u) for u in units]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_unit, units))
    return [rec for chunk in chunks for rec in chunk]


def run_rdcnn(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRecord]:
    """Single-observation training per iteration, frozen-weight inference on the rest."""
    return _execute(list(_units(cfg, "rdcnn")), workers)


def run_dcnn_per_observation(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRecord]:
    return _execute(list(_units(cfg, "dcnn_per_obs")), workers)


def run_ar(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRecord]:
    return _execute(list(_units(cfg, "ar")), workers)


def run_all(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRecord]:
    units = [u for m in METHODS if m in cfg.methods for u in _units(cfg, m)]
    return _execute(units, workers)


# -- aggregation --------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    view: str
    method: str
    hyper: str
    n_harmonics: int
    input_snr_db: float
    mean: float
    std: float
    count: int
    n_infinite: int
    n_failed: int

    def csv_row(self) -> str:
        return ",".join([
            self.view, self.method, self.hyper, str(self.n_harmonics), _g(self.input_snr_db),
            _g(self.mean), _g(self.std), str(self.count), str(self.n_infinite), str(self.n_failed),
        ])


def _stats(values):
    finite = [v for v in values if math.isfinite(v)]
    n_inf = sum(1 for v in values if v == math.inf)
    n_failed = sum(1 for v in values if math.isnan(v))
    if finite:
        arr = np.array(finite)
        return float(arr.mean()), float(arr.std()), len(finite), n_inf, n_failed
    return math.nan, math.nan, 0, n_inf, n_failed


def aggregate(records) -> list[SummaryRow]:
    """Summary rows in four views.

    ``hyper``: one row per (method, hyper, harmonics, SNR).
    ``pooled``: all hypers of a method together.
    ``best_cell``: the hyper with the highest mean, chosen per (harmonics, SNR).
    ``best_overall``: one hyper per (method, harmonics), chosen by the mean
    over the whole SNR range.
    Infinite outputs are counted in ``n_infinite`` and failures in
    ``n_failed``; neither enters mean or std.
    """
    records = list(records)
    if not records:
        raise ContractError("cannot aggregate an empty record list")
    by_hyper = defaultdict(list)
    pooled = defaultdict(list)
    for r in records:
        by_hyper[(r.method, r.hyper, r.n_harmonics, r.input_snr_db)].append(r.output_snr_db)
        pooled[(r.method, r.n_harmonics, r.input_snr_db)].append(r.output_snr_db)

    def order(key):
        return (METHODS.index(key[0]),) + tuple(key[1:])

    rows = []
    hyper_rows = {}
    for key in sorted(by_hyper, key=order):
        method, hyper, n_harm, snr = key
        row = SummaryRow("hyper", method, str(hyper), n_harm, snr, *_stats(by_hyper[key]))
        hyper_rows[key] = row
        rows.append(row)
    for key in sorted(pooled, key=order):
        method, n_harm, snr = key
        rows.append(SummaryRow("pooled", method, "all", n_harm, snr, *_stats(pooled[key])))

    def score(row):
        return -math.inf if math.isnan(row.mean) else row.mean

    for key in sorted(pooled, key=order):
        method, n_harm, snr = key
        cands = [row for k, row in hyper_rows.items() if (k[0], k[2], k[3]) == key]
        best = max(sorted(cands, key=lambda r: int(r.hyper)), key=score)
        rows.append(replace(best, view="best_cell"))

    overall = defaultdict(list)
    for r in records:
        overall[(r.method, r.n_harmonics, r.hyper)].append(r.output_snr_db)
    for method, n_harm in sorted({k[:2] for k in overall}, key=order):
        hypers = sorted(k[2] for k in overall if k[:2] == (method, n_harm))
        means = {h: _stats(overall[(method, n_harm, h)])[0] for h in hypers}
        best_h = max(hypers, key=lambda h: -math.inf if math.isnan(means[h]) else means[h])
        for key in sorted(hyper_rows, key=order):
            if key[:3] == (method, best_h, n_harm):
                rows.append(replace(hyper_rows[key], view="best_overall"))
    return rows


# -- CSV I/O ------------------------------------------------------------------


def write_results(records, path) -> None:
    lines = [RESULT_HEADER] + [r.csv_row() for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_results(path) -> list[ResultRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != RESULT_HEADER:
        raise ConfigurationError(f"{path}: unexpected header")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        p = line.split(",")
        out.append(ResultRecord(p[0], int(p[1]), int(p[2]), float(p[3]), float(p[4]), float(p[5]),
                                float(p[6]), int(p[7]), int(p[8])))
    return out


def write_summary(rows, path) -> None:
    lines = [SUMMARY_HEADER] + [r.csv_row() for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_summary(path) -> list[SummaryRow]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SUMMARY_HEADER:
        raise ConfigurationError(f"{path}: unexpected header")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        p = line.split(",")
        out.append(SummaryRow(p[0], p[1], p[2], int(p[3]), float(p[4]), float(p[5]), float(p[6]),
                              int(p[7]), int(p[8]), int(p[9])))
    return out

