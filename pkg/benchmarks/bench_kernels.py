#!/usr/bin/env python3
"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from rdcnn import _pykernels
from rdcnn.dcnn import _Quadratic, build_default
from rdcnn.resampler import design_lowpass

try:
    from rdcnn import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    x = rng.standard_normal((1, 4000))
    w = rng.standard_normal((1, 1, 8))
    g = rng.standard_normal((1, 4000 - 7 * 4))
    xm = rng.standard_normal((4, 4000))
    wm = rng.standard_normal((4, 4, 8))
    sig = rng.standard_normal(4000)
    fir = np.ascontiguousarray(design_lowpass(3, 2).taps)
    model = build_default(4, 8, seed=0)
    quad = _Quadratic(rng.standard_normal(4000), model.receptive_field, 1)

    def train_args(epochs):
        return ([v.copy() for v in model.weights], list(model.dilations), quad.gram, quad.cross, quad.const,
                0.05, epochs)

    return [
        ("conv forward 1ch T=4000 K=8 d=4", lambda k: k.dilated_conv_forward(x, w, 4)),
        ("conv forward 4ch T=4000 K=8 d=4", lambda k: k.dilated_conv_forward(xm, wm, 4)),
        ("conv backward 1ch T=4000 K=8 d=4", lambda k: k.dilated_conv_backward(x, w, 4, g)),
        ("polyphase 3/2 N=4000", lambda k: k.polyphase_resample(sig, fir, 3, 2, 6000)),
        ("training L=4 K=8 200 epochs", lambda k: k.gd_full_batch(*train_args(200))),
    ]


def time_call(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--csv", help="also write the table as CSV")
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback can be timed", file=sys.stderr)

    rows = []
    for name, call in cases(np.random.default_rng(0)):
        t_py = time_call(lambda: call(_pykernels), args.repeat)
        t_c = time_call(lambda: call(_ckernels), args.repeat) if _ckernels else float("nan")
        rows.append((name, t_c, t_py, t_py / t_c))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'cython ms':>10}  {'numpy ms':>10}  {'speedup':>8}")
    for name, t_c, t_py, ratio in rows:
        print(f"{name:<{width}}  {t_c * 1e3:>10.3f}  {t_py * 1e3:>10.3f}  {ratio:>7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            out = csv.writer(f)
            out.writerow(["kernel", "cython_s", "numpy_s", "speedup"])
            out.writerows(rows)


if __name__ == "__main__":
    main()
