"""Encoder / dual-path bottleneck / decoder assembly and the enhancement pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import signal as sig
from . import tensor as T
from .hadf import BREAK_MODES, DualPath
from .layers import MPICM, DenseBlock, StreamPair, complex_conv2d, output_bins
from .module import Module, complex_uniform, real_uniform
from .tensor import Tensor

ZERO_MAG = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    C_mag: int = 48
    C_pha: int = 16
    C_mag_head: int = 12
    C_pha_head: int = 6
    C_mag_hidden: int = 96
    C_pha_hidden: int = 64
    n_heads: int = 4
    n_dual_path: int = 4
    dense_depth: int = 4
    F: int = 201
    alpha: float = 0.3

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("compression alpha must lie in (0, 1]")
        widths = (self.C_mag, self.C_pha, self.C_mag_head, self.C_pha_head, self.C_mag_hidden, self.C_pha_hidden)
        if min(widths) <= 0 or self.n_heads <= 0 or self.dense_depth <= 0 or self.n_dual_path < 0:
            raise ValueError("channel widths and structural counts must be positive")
        if self.F < 5 or self.F % 2 == 0:
            raise ValueError("F must be odd and >= 5 so down/up-sampling round-trips")

    @property
    def F_down(self) -> int:
        return output_bins("downsample", self.F)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown ModelConfig keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls.from_dict(json.loads(text))


SMALL = ModelConfig(32, 16, 8, 6, 64, 64)
STANDARD = ModelConfig(48, 16, 12, 6, 96, 64)
PRESETS = {"small": SMALL, "standard": STANDARD}


@dataclass
class SpectrumPair:
    """Compressed magnitude ``[1,T,F]`` and unit-modulus phase ``[1,T,F]``."""

    mag: Tensor
    pha: Tensor

    def as_streams(self) -> StreamPair:
        return StreamPair(self.mag, self.pha)

    def rotate(self, theta: float) -> "SpectrumPair":
        return SpectrumPair(self.mag, self.pha * np.exp(1j * theta))


def featurize(spec: np.ndarray, alpha: float = 0.3) -> SpectrumPair:
    """``|Y|**alpha`` and ``Y/|Y|``; cells with ``|Y| < 1e-12`` get phase 1+0j."""
    spec = np.asarray(spec, dtype=complex)
    r = np.abs(spec)
    ok = r >= ZERO_MAG
    pha = np.where(ok, spec / np.where(ok, r, 1.0), 1.0 + 0j)
    return SpectrumPair(Tensor((r**alpha)[None]), Tensor(pha[None]))


class GRENet(Module):
    """Dual-stream enhancement network with a rotation-equivariant phase stream.

    ``decode_mag=False`` drops the magnitude head (phase-only output), as used
    for phase retrieval; the magnitude stream still drives the phase gates.
    """

    def __init__(self, config: ModelConfig = STANDARD, seed: int = 0, break_mode: str = "none", decode_mag: bool = True):
        if break_mode not in BREAK_MODES:
            raise ValueError(f"unknown break mode {break_mode!r}; expected one of {BREAK_MODES}")
        rng = np.random.default_rng(seed)
        c = config
        bm = break_mode == "mpicm"
        self.config = c
        self.break_mode = break_mode
        self.decode_mag = decode_mag
        self.expand = MPICM(1, 1, c.C_mag, c.C_pha, c.F, "expand-no-gate", rng=rng)
        self.enc_dense = DenseBlock(c.C_mag, c.C_pha, c.F, c.dense_depth, rng, bm)
        self.down = MPICM(c.C_mag, c.C_pha, c.C_mag, c.C_pha, c.F_down, "downsample", rng=rng, break_gate=bm)
        self.bottleneck = DualPath.build(
            c.n_dual_path, c.C_mag, c.C_pha, c.C_mag_head, c.C_pha_head, c.C_mag_hidden, c.C_pha_hidden,
            c.n_heads, rng, break_mode,
        )
        self.dec_dense = DenseBlock(c.C_mag, c.C_pha, c.F_down, c.dense_depth, rng, bm)
        self.up = MPICM(c.C_mag, c.C_pha, c.C_mag, c.C_pha, c.F, "upsample", rng=rng, break_gate=bm)
        if decode_mag:
            self.head_mag_w = real_uniform(rng, (1, c.C_mag, 3, 3), 9 * c.C_mag)
            self.head_mag_b = real_uniform(rng, (1,), 9 * c.C_mag)
        self.head_pha_w = complex_uniform(rng, (1, c.C_pha, 3, 3), 9 * c.C_pha)

    def trunk(self, x: StreamPair) -> StreamPair:
        x = self.expand(x)
        x = self.enc_dense(x)
        x = self.down(x)
        x = self.bottleneck(x)
        x = self.dec_dense(x)
        return self.up(x)

    def __call__(self, pair: SpectrumPair) -> SpectrumPair:
        if pair.mag.ndim != 3 or pair.mag.shape[1] < 1:
            raise ValueError(f"need at least one frame, got magnitude shape {pair.mag.shape}")
        if pair.mag.shape[2] != self.config.F:
            raise ValueError(f"expected {self.config.F} frequency bins, got {pair.mag.shape[2]}")
        x = self.trunk(pair.as_streams())
        pha = T.unit(complex_conv2d(x.pha, self.head_pha_w, padding=1))
        if self.decode_mag:
            mag = T.relu(T.conv2d(x.mag, self.head_mag_w, self.head_mag_b, padding=1))
        else:
            mag = pair.mag
        return SpectrumPair(mag, pha)

    forward = __call__


def param_count(config: ModelConfig) -> int:
    """Scalar parameter count of :class:`GRENet` for ``config`` (complex counts twice)."""
    return GRENet(config, seed=0).num_params()


def enhance_spectrum(spec: np.ndarray, model: Callable[[SpectrumPair], SpectrumPair], alpha: float = 0.3) -> np.ndarray:
    """Featurize, run ``model``, decompress the magnitude and recombine with the phase."""
    out = model(featurize(spec, alpha))
    return (out.mag.data[0] ** (1.0 / alpha)) * out.pha.data[0]


def enhance(waveform, model: Callable[[SpectrumPair], SpectrumPair], stft_config: sig.StftConfig = sig.DEFAULT_STFT, alpha: float = 0.3) -> np.ndarray:
    """Waveform in, waveform out; the output has exactly the input length."""
    x = np.asarray(waveform, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("enhance needs a non-empty mono waveform")
    padded = sig.pad_to_hop(x, stft_config)
    if padded.size < stft_config.win_len:
        padded = np.concatenate([padded, np.zeros(stft_config.win_len - padded.size)])
    spec = sig.stft(padded, stft_config)
    out = sig.istft(enhance_spectrum(spec, model, alpha), padded.size, stft_config)
    return out[: x.size]


def identity_model(pair: SpectrumPair) -> SpectrumPair:
    return pair
