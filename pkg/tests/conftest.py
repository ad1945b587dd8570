import numpy as np
import pytest

from rdcnn.signal_model import Harmonic, Signal, SignalSpec, synthesize_clean

FS = 2000.0


def harmonic_signal(f0, amplitudes, phases=None, fs=FS, duration=2.0):
    phases = phases if phases is not None else [0.0] * len(amplitudes)
    spec = SignalSpec(f0, [Harmonic(i + 1, a, p) for i, (a, p) in enumerate(zip(amplitudes, phases))], fs, duration)
    return synthesize_clean(spec)


def random_signal(n, seed=0, fs=FS):
    return Signal(np.random.default_rng(seed).standard_normal(n), fs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
