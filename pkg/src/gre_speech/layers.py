"""Dual-stream convolutional building blocks.

The phase stream is complex and kept globally rotation-equivariant: every map
applied to it is either bias-free complex-linear or an elementwise product
with a real, rotation-invariant gate. The magnitude stream is an ordinary real
conv/norm/activation stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .module import Module, complex_uniform, param, real_uniform
from .tensor import ShapeError, Tensor

GATE_SCALE = 3.0
NORM_EPS = 1e-8
MODES = ("standard", "expand-no-gate", "downsample", "upsample")


@dataclass
class StreamPair:
    """Magnitude features ``[C_mag, T, K]`` and phase features ``[C_pha, T, K]``."""

    mag: Tensor
    pha: Tensor

    def __post_init__(self):
        if self.mag.ndim != 3 or self.pha.ndim != 3:
            raise ShapeError(f"stream pair expects [C,T,K] tensors, got {self.mag.shape} and {self.pha.shape}")
        if self.mag.shape[1:] != self.pha.shape[1:]:
            raise ShapeError(f"stream spatial dims differ: mag {self.mag.shape} vs pha {self.pha.shape}")

    def rotate(self, theta: float) -> "StreamPair":
        return StreamPair(self.mag, self.pha * np.exp(1j * theta))


def complex_conv2d(x: Tensor, kernel: Tensor, stride=1, dilation=1, padding=0) -> Tensor:
    """Bias-free complex convolution; there is deliberately no bias argument."""
    if not kernel.is_complex:
        raise TypeError("complex_conv2d needs a complex kernel")
    return T.conv2d(x, kernel, None, stride=stride, dilation=dilation, padding=padding)


def crms_norm(x: Tensor, gamma: Tensor, eps: float = NORM_EPS, axes=(1, 2)) -> Tensor:
    """Divide by the RMS modulus over ``axes`` and scale by a real ``gamma``.

    No additive term, so the map commutes with a global phase rotation.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    ms = T.mean(T.abs2(x), axis=axes, keepdims=True)
    return x / T.sqrt(ms + eps) * gamma


def rms_norm(x: Tensor, gamma: Tensor, beta: Tensor | None = None, eps: float = NORM_EPS, axes=(1, 2)) -> Tensor:
    if eps <= 0:
        raise ValueError("eps must be positive")
    ms = T.mean(x * x, axis=axes, keepdims=True)
    y = x / T.sqrt(ms + eps) * gamma
    return y if beta is None else y + beta


def rms_norm_silu(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = NORM_EPS) -> Tensor:
    return T.silu(rms_norm(x, gamma, beta, eps))


def gate_psi(x: Tensor, a: Tensor) -> Tensor:
    """3 * sigmoid(a * x): a bounded multiplicative gate in (0, 3)."""
    return T.sigmoid(x * a) * GATE_SCALE


def _geometry(mode: str, dilation: int):
    if mode == "standard":
        return dict(kernel=(3, 3), stride=(1, 1), dilation=(dilation, 1), padding=(dilation, 1))
    if mode == "expand-no-gate":
        return dict(kernel=(3, 3), stride=(1, 1), dilation=(1, 1), padding=(1, 1))
    if mode in ("downsample", "upsample"):
        return dict(kernel=(1, 3), stride=(1, 2), dilation=(1, 1), padding=(0, 0))
    raise ValueError(f"unknown MPICM mode {mode!r}; expected one of {MODES}")


def output_bins(mode: str, bins: int) -> int:
    """Frequency size after an MPICM of the given mode."""
    if mode == "downsample":
        return (bins - 3) // 2 + 1
    if mode == "upsample":
        return (bins - 1) * 2 + 3
    return bins


class MPICM(Module):
    """Magnitude-phase interactive convolution.

    Parallel real and complex convolutions, each followed by its norm, then
    cross gating: the magnitude gate reads ``|P~|`` and the phase gate reads
    ``M~``. ``break_gate`` swaps ``|P~|`` for ``Re P~ + Im P~`` (an ablation that
    destroys rotation invariance of the magnitude path).
    """

    def __init__(
        self,
        in_mag: int,
        in_pha: int,
        out_mag: int,
        out_pha: int,
        out_bins: int,
        mode: str = "standard",
        dilation: int = 1,
        rng: np.random.Generator | None = None,
        break_gate: bool = False,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        geo = _geometry(mode, dilation)
        self.mode = mode
        self.stride = geo["stride"]
        self.dilation = geo["dilation"]
        self.padding = geo["padding"]
        self.gated = mode != "expand-no-gate"
        self.break_gate = break_gate
        kh, kw = geo["kernel"]
        if mode == "upsample":
            self.w_mag = real_uniform(rng, (in_mag, out_mag, kh, kw), in_mag * kh * kw)
            self.w_pha = complex_uniform(rng, (in_pha, out_pha, kh, kw), in_pha * kh * kw)
        else:
            self.w_mag = real_uniform(rng, (out_mag, in_mag, kh, kw), in_mag * kh * kw)
            self.w_pha = complex_uniform(rng, (out_pha, in_pha, kh, kw), in_pha * kh * kw)
        self.b_mag = real_uniform(rng, (out_mag,), in_mag * kh * kw)
        self.gamma_pha = param(np.ones((out_pha, 1, out_bins)))
        self.gamma_mag = param(np.ones((out_mag, 1, 1)))
        self.beta_mag = param(np.zeros((out_mag, 1, 1)))
        if self.gated:
            self.w_p2m = real_uniform(rng, (out_mag, out_pha, 1, 1), out_pha)
            self.b_p2m = real_uniform(rng, (out_mag,), out_pha)
            self.w_m2p = real_uniform(rng, (out_pha, out_mag, 1, 1), out_mag)
            self.b_m2p = real_uniform(rng, (out_pha,), out_mag)
            self.a_mag = param(np.ones((out_mag, 1, out_bins)))
            self.a_pha = param(np.ones((out_pha, 1, out_bins)))

    def features(self, x: StreamPair) -> StreamPair:
        """The pre-gating features (M~, P~)."""
        if self.mode == "upsample":
            m = T.conv_transpose2d(x.mag, self.w_mag, self.b_mag, stride=self.stride)
            p = T.conv_transpose2d(x.pha, self.w_pha, None, stride=self.stride)
        else:
            m = T.conv2d(x.mag, self.w_mag, self.b_mag, self.stride, self.dilation, self.padding)
            p = complex_conv2d(x.pha, self.w_pha, self.stride, self.dilation, self.padding)
        return StreamPair(rms_norm_silu(m, self.gamma_mag, self.beta_mag), crms_norm(p, self.gamma_pha))

    def gate(self, feats: StreamPair) -> StreamPair:
        """Cross-stream interactive gating on already-extracted features."""
        m, p = feats.mag, feats.pha
        src = T.real(p) + T.imag(p) if self.break_gate else T.modulus(p)
        m_out = m * gate_psi(T.conv2d(src, self.w_p2m, self.b_p2m), self.a_mag)
        p_out = p * gate_psi(T.conv2d(m, self.w_m2p, self.b_m2p), self.a_pha)
        return StreamPair(m_out, p_out)

    def __call__(self, x: StreamPair) -> StreamPair:
        feats = self.features(x)
        return self.gate(feats) if self.gated else feats


def mpicm_forward(x: StreamPair, block: MPICM) -> StreamPair:
    return block(x)


class DenseBlock(Module):
    """Dilated dense stack of standard MPICMs with aligned concatenation.

    Layer ``i`` sees ``[out_{i-1}, ..., out_0, input]`` concatenated along
    channels, in the same order for both streams, so magnitude channel ``c``
    and phase channel ``c`` always come from the same source.
    """

    def __init__(self, c_mag: int, c_pha: int, bins: int, depth: int = 4, rng=None, break_gate: bool = False):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.depth = depth
        self.layers = [
            MPICM((i + 1) * c_mag, (i + 1) * c_pha, c_mag, c_pha, bins, "standard", 2**i, rng, break_gate)
            for i in range(depth)
        ]

    @staticmethod
    def input_order(i: int) -> list[str]:
        return [f"layer{j}" for j in range(i - 1, -1, -1)] + ["input"]

    def __call__(self, x: StreamPair) -> StreamPair:
        skip = x
        out = x
        for i, layer in enumerate(self.layers):
            out = layer(skip)
            if i + 1 < self.depth:
                skip = StreamPair(T.concat([out.mag, skip.mag], axis=0), T.concat([out.pha, skip.pha], axis=0))
        return out
