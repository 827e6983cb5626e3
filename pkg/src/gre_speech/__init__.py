"""Rotation-equivariant dual-stream speech enhancement built on a small numpy autodiff tape."""

from .losses import LossWeights, composite_loss, omni_loss, pd_metric, phase_loss, si_sdr, wopd_metric
from .network import SMALL, STANDARD, GRENet, ModelConfig, SpectrumPair, enhance, featurize, param_count
from .signal import DEFAULT_STFT, DegradationSpec, StftConfig, degrade, istft, stft
from .tensor import Tape, Tensor, backward

__all__ = [
    "DEFAULT_STFT",
    "DegradationSpec",
    "GRENet",
    "LossWeights",
    "ModelConfig",
    "SMALL",
    "STANDARD",
    "SpectrumPair",
    "StftConfig",
    "Tape",
    "Tensor",
    "backward",
    "composite_loss",
    "degrade",
    "enhance",
    "featurize",
    "istft",
    "omni_loss",
    "param_count",
    "pd_metric",
    "phase_loss",
    "si_sdr",
    "stft",
    "wopd_metric",
]
