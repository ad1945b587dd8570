"""Denoising of periodic signals with a linear dilated CNN that is trained once
and reused across fundamental frequencies by rational resampling."""

from rdcnn._kernels import BACKEND
from rdcnn.ar import ArModel
from rdcnn.bench import ExperimentConfig, ResultRecord, aggregate, run_all
from rdcnn.dcnn import DcnnModel, LayerSpec, TrainConfig, build_default, denoise, denoise_scaled, train
from rdcnn.errors import RdcnnError
from rdcnn.resampler import RationalFactor, design_lowpass, rational_factor, resample
from rdcnn.signal_model import (
    Harmonic,
    NoiseSpec,
    Signal,
    SignalSpec,
    add_noise,
    measure_snr,
    synthesize_clean,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ArModel",
    "DcnnModel",
    "ExperimentConfig",
    "Harmonic",
    "LayerSpec",
    "NoiseSpec",
    "RationalFactor",
    "RdcnnError",
    "ResultRecord",
    "Signal",
    "SignalSpec",
    "TrainConfig",
    "add_noise",
    "aggregate",
    "build_default",
    "denoise",
    "denoise_scaled",
    "design_lowpass",
    "measure_snr",
    "rational_factor",
    "resample",
    "run_all",
    "synthesize_clean",
    "train",
]
