"""``rdcnn`` command-line front end.

Exit status: 0 on success, 1 for invalid input or configuration, 2 for
runtime and numerical failures. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from rdcnn import ar, bench, dcnn
from rdcnn.config import parse_config, with_seed, write_config
from rdcnn.errors import (
    ConfigurationError,
    ContractError,
    FormatError,
    InfeasibleError,
    MeasurementError,
    NumericalError,
    ShapeError,
    StateError,
    TrainingError,
)
from rdcnn.plot import emit_plot
from rdcnn.resampler import Method, RationalFactor, design_lowpass, rational_factor, resample
from rdcnn.signal_model import (
    Harmonic,
    NoiseSpec,
    SignalSpec,
    add_noise,
    load_signal,
    save_signal,
    synthesize_clean,
)

log = logging.getLogger("rdcnn")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
_INVALID = (ConfigurationError, ShapeError, FormatError, ContractError, StateError, InfeasibleError,
            FileNotFoundError)
_RUNTIME = (TrainingError, NumericalError, MeasurementError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _batch(text):
    if text == "full":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'full' or an integer, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdcnn", description="Resampling-based dilated CNN denoising of periodic signals.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic harmonic signal")
    s.add_argument("--f0", type=float, required=True, help="fundamental frequency in Hz")
    s.add_argument("--harmonics", type=int, default=10, help="number of harmonics (random amplitudes/phases)")
    s.add_argument("--amplitudes", type=_floats, help="explicit amplitudes for orders 1..H")
    s.add_argument("--phases", type=_floats, help="explicit phases in radians for orders 1..H")
    s.add_argument("--fs", type=float, default=2000.0, help="sample rate in Hz")
    s.add_argument("--duration", type=float, default=2.0, help="duration in seconds")
    s.add_argument("--snr", type=float, help="add noise at this SNR in dB")
    s.add_argument("--noise", choices=["white", "moving_average"], default="white")
    s.add_argument("--ma-coeffs", type=_floats, default=(), help="MA coefficients b_1..b_J")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output signal (.csv or raw binary)")
    s.add_argument("--clean-out", help="also write the clean signal here")

    t = sub.add_parser("train", help="train a dilated CNN on one observation")
    t.add_argument("--in", dest="inp", required=True)
    t.add_argument("--fs", type=float, default=2000.0, help="sample rate for CSV input")
    t.add_argument("--f0", type=float, help="fundamental of the training signal, stored in the model")
    t.add_argument("--layers", type=int, default=4)
    t.add_argument("--kernel", type=int, default=8)
    t.add_argument("--channels", type=int, default=1)
    t.add_argument("--delay", type=int, default=1)
    t.add_argument("--lr", type=float, default=dcnn.TrainConfig.learning_rate)
    t.add_argument("--epochs", type=int, default=dcnn.TrainConfig.epochs)
    t.add_argument("--batch", type=_batch, default="full")
    t.add_argument("--init-scale", type=float, default=dcnn.TrainConfig.init_scale)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="model file")

    d = sub.add_parser("denoise", help="denoise a signal with a trained model or an AR fit")
    d.add_argument("--model", help="model file (omit with --ar)")
    d.add_argument("--ar", type=int, metavar="M", help="fit an AR predictor of window M instead")
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--fs", type=float, default=2000.0)
    d.add_argument("--f0", type=float, help="fundamental of this observation; enables resampling")
    d.add_argument("--epsilon", type=float, default=0.1)
    d.add_argument("--method", choices=["gcd", "search", "continued_fraction"], default="gcd")
    d.add_argument("--out", required=True)

    r = sub.add_parser("resample", help="rational resampling by U/L")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--fs", type=float, default=2000.0)
    r.add_argument("--up", type=int)
    r.add_argument("--down", type=int)
    r.add_argument("--scale", type=float, help="approximate this ratio instead of --up/--down")
    r.add_argument("--epsilon", type=float, default=0.1)
    r.add_argument("--method", choices=["search", "continued_fraction"], default="continued_fraction")
    r.add_argument("--taps-per-phase", type=int, default=24)
    r.add_argument("--attenuation", type=float, default=80.0)
    r.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="run the Monte Carlo comparison")
    b.add_argument("--config", help="key = value config file (defaults: full-scale study)")
    b.add_argument("--out", default="bench_out", help="output directory")
    b.add_argument("--seed", type=int, help="override master_seed")
    b.add_argument("--threads", type=int, help="worker processes (0 = all CPUs; default RDCNN_THREADS)")
    b.add_argument("--no-plots", action="store_true")

    g = sub.add_parser("plot", help="render a summary CSV as SVG")
    g.add_argument("--summary", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--view", choices=["hyper", "pooled", "best_cell", "best_overall"], default="best_cell")
    g.add_argument("--method", choices=list(bench.METHODS))
    g.add_argument("--harmonics", type=int)
    g.add_argument("--title")
    return p


# -- subcommands --------------------------------------------------------------


def _synth(a):
    rng = np.random.default_rng(a.seed)
    n = len(a.amplitudes) if a.amplitudes else a.harmonics
    amps = a.amplitudes or tuple(rng.uniform(0.0, 1.0, n))
    phases = a.phases or tuple(rng.uniform(0.0, np.pi / 2, n))
    if len(amps) != len(phases):
        raise ConfigurationError(f"{len(amps)} amplitudes but {len(phases)} phases")
    spec = SignalSpec(a.f0, tuple(Harmonic(i + 1, float(x), float(ph)) for i, (x, ph) in enumerate(zip(amps, phases))),
                      a.fs, a.duration, seed=a.seed)
    clean = synthesize_clean(spec)
    out = clean
    if a.snr is not None:
        out = add_noise(clean, NoiseSpec(a.snr, a.noise, a.ma_coeffs, seed=a.seed + 1))
    save_signal(out, a.out)
    if a.clean_out:
        save_signal(clean, a.clean_out)
    log.info("wrote %d samples to %s", len(out), a.out)


def _train(a):
    obs = load_signal(a.inp, a.fs)
    cfg = dcnn.TrainConfig(a.lr, a.epochs, a.batch, a.seed, a.init_scale)
    model = dcnn.build_default(a.layers, a.kernel, a.channels, a.delay, a.init_scale, a.seed)
    history = []
    trained = dcnn.train(model, obs, cfg, f0_hz=a.f0, history=history)
    dcnn.save_model(trained, a.out)
    log.info("trained %d layers (RF %d), loss %.6g -> %.6g", a.layers, trained.receptive_field,
             history[0], min(history))


def _denoise(a):
    obs = load_signal(a.inp, a.fs)
    if (a.model is None) == (a.ar is None):
        raise ConfigurationError("give exactly one of --model and --ar")
    if a.ar is not None:
        est = ar.denoise(ar.fit(obs, a.ar), obs)
    elif a.f0 is None:
        est = dcnn.denoise(dcnn.load_model(a.model), obs)
    else:
        model = dcnn.load_model(a.model)
        est, factor = dcnn.denoise_scaled(model, obs, a.f0, a.epsilon, Method(a.method))
        log.info("s = %.6g, U/L = %s", a.f0 / model.train_f0_hz, factor)
    save_signal(est, a.out)


def _resample(a):
    sig = load_signal(a.inp, a.fs)
    if a.scale is not None:
        if a.up is not None or a.down is not None:
            raise ConfigurationError("give either --scale or --up/--down")
        factor = rational_factor(a.scale, a.epsilon, Method(a.method))
    elif a.up is not None and a.down is not None:
        factor = RationalFactor.explicit(a.up, a.down)
    else:
        raise ConfigurationError("give --scale or both --up and --down")
    fir = design_lowpass(factor.up, factor.down, a.taps_per_phase, a.attenuation)
    out = resample(sig, factor, fir)
    save_signal(out, a.out)
    log.info("U/L = %s, %d -> %d samples", factor, len(sig), len(out))


def _plots(rows, cfg, out_dir):
    for h in cfg.harmonic_counts:
        emit_plot(rows, out_dir / f"methods_h{h}.svg", "best_cell", n_harmonics=h,
                  title=f"Method comparison, {h} harmonics")
        for method in cfg.methods:
            emit_plot(rows, out_dir / f"{method}_h{h}.svg", "hyper", method=method, n_harmonics=h,
                      title=f"{method} sweep, {h} harmonics")


def _bench(a):
    cfg = parse_config(a.config) if a.config else bench.ExperimentConfig()
    if a.seed is not None:
        cfg = with_seed(cfg, a.seed)
    out_dir = Path(a.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out_dir / "config.resolved.cfg")
    records = bench.run_all(cfg, workers=a.threads)
    bench.write_results(records, out_dir / "results.csv")
    rows = bench.aggregate(records)
    bench.write_summary(rows, out_dir / "summary.csv")
    if not a.no_plots:
        _plots(rows, cfg, out_dir)
    failed = sum(r.failed for r in records)
    log.info("%d records (%d failed) written to %s", len(records), failed, out_dir)


def _plot(a):
    emit_plot(bench.read_summary(a.summary), a.out, a.view, a.method, a.harmonics, a.title)


_COMMANDS = {"synth": _synth, "train": _train, "denoise": _denoise, "resample": _resample,
             "bench": _bench, "plot": _plot}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        _COMMANDS[args.command](args)
    except _INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _RUNTIME as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
