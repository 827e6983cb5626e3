"""Hybrid-attention dual-FFN bottleneck blocks and the dual-path wrapper."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import NORM_EPS, StreamPair, crms_norm, rms_norm
from .module import Module, complex_uniform, param, real_uniform
from .tensor import ShapeError, Tensor

BREAK_MODES = ("none", "mpicm", "attn", "ffn")
CSV_HEADER = ("head", "row", "col", "score", "mag_component", "pha_component")


@dataclass
class AttentionMapExport:
    """Per-head softmax scores and the two additive pre-softmax logit parts.

    Arrays are ``[B', H, L, L]``; ``mag_component + pha_component`` are the
    fused logits that go into the softmax.
    """

    scores: np.ndarray
    mag_component: np.ndarray
    pha_component: np.ndarray

    def rows(self, item: int = 0):
        s, m, p = self.scores[item], self.mag_component[item], self.pha_component[item]
        heads, length, _ = s.shape
        for h in range(heads):
            for i in range(length):
                for j in range(length):
                    yield h, i, j, s[h, i, j], m[h, i, j], p[h, i, j]

    def to_csv(self, item: int = 0) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for h, i, j, s, m, p in self.rows(item):
            writer.writerow([h, i, j, repr(float(s)), repr(float(m)), repr(float(p))])
        return buf.getvalue()


def _heads(x: Tensor, heads: int) -> Tensor:
    b, length, width = x.shape
    return T.transpose(T.reshape(x, (b, length, heads, width // heads)), (0, 2, 1, 3))


def _merge(x: Tensor) -> Tensor:
    b, heads, length, d = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, length, heads * d))


class HybridAttention(Module):
    """Attention whose scores fuse real magnitude and complex phase queries/keys.

    Per head, ``Q = [Q_mag, Re Q_pha, Im Q_pha]`` (likewise ``K``); the phase part
    of ``Q K^T`` equals ``Re(Q_pha K_pha^H)``, which a global rotation of the
    phase stream leaves unchanged. Values stay in their own streams.
    """

    def __init__(self, c_mag, c_pha, mag_head, pha_head, heads=4, rng=None, break_query: bool = False):
        if min(c_mag, c_pha, mag_head, pha_head, heads) <= 0:
            raise ValueError("attention widths and head count must be positive")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.heads = heads
        self.mag_head = mag_head
        self.pha_head = pha_head
        self.break_query = break_query
        self.record = False
        self.last_maps: AttentionMapExport | None = None
        wm, wp = heads * mag_head, heads * pha_head
        self.wq_mag = real_uniform(rng, (c_mag, wm), c_mag)
        self.wk_mag = real_uniform(rng, (c_mag, wm), c_mag)
        self.wv_mag = real_uniform(rng, (c_mag, wm), c_mag)
        self.wq_pha = complex_uniform(rng, (c_pha, wp), c_pha)
        self.wk_pha = complex_uniform(rng, (c_pha, wp), c_pha)
        self.wv_pha = complex_uniform(rng, (c_pha, wp), c_pha)
        self.wo_mag = real_uniform(rng, (wm, c_mag), wm)
        self.bo_mag = real_uniform(rng, (1, 1, c_mag), wm)
        self.wo_pha = complex_uniform(rng, (wp, c_pha), wp)

    @property
    def d_k(self) -> int:
        return self.mag_head + 2 * self.pha_head

    def __call__(self, z_mag: Tensor, z_pha: Tensor):
        if z_mag.ndim != 3 or z_pha.ndim != 3 or z_mag.shape[:2] != z_pha.shape[:2]:
            raise ShapeError(f"attention expects [B,L,C] streams with equal (B,L), got {z_mag.shape} and {z_pha.shape}")
        if z_mag.shape[1] == 0:
            raise ValueError("attention over an empty sequence (L=0)")
        h = self.heads
        qm, km, vm = (_heads(z_mag @ w, h) for w in (self.wq_mag, self.wk_mag, self.wv_mag))
        qp, kp, vp = (_heads(z_pha @ w, h) for w in (self.wq_pha, self.wk_pha, self.wv_pha))
        q_re = -T.real(qp) if self.break_query else T.real(qp)
        q = T.concat([qm, q_re, T.imag(qp)], axis=-1)
        k = T.concat([km, T.real(kp), T.imag(kp)], axis=-1)
        scale = 1.0 / np.sqrt(self.d_k)
        logits = (q @ T.transpose(k, (0, 1, 3, 2))) * scale
        s = T.softmax(logits, axis=-1)
        h_mag = _merge(s @ vm) @ self.wo_mag + self.bo_mag
        h_pha = _merge(s @ vp) @ self.wo_pha
        maps = None
        if self.record:
            mag_part = np.matmul(qm.data, km.data.transpose(0, 1, 3, 2)) * scale
            maps = AttentionMapExport(s.data.copy(), mag_part, logits.data - mag_part)
            self.last_maps = maps
        return h_mag, h_pha, maps


def hybrid_attention(z_mag: Tensor, z_pha: Tensor, attn: HybridAttention):
    return attn(z_mag, z_pha)


class MagFFN(Module):
    """Bidirectional GRU to ``hidden`` features, LeakyReLU, linear back to ``c``."""

    def __init__(self, c: int, hidden: int, rng=None):
        if hidden % 2:
            raise ValueError("magnitude FFN hidden width must be even (two GRU directions)")
        rng = rng if rng is not None else np.random.default_rng(0)
        half = hidden // 2
        self.fw = [real_uniform(rng, s, half) for s in ((3 * half, c), (3 * half, half), (3 * half,), (3 * half,))]
        self.bw = [real_uniform(rng, s, half) for s in ((3 * half, c), (3 * half, half), (3 * half,), (3 * half,))]
        self.w_out = real_uniform(rng, (hidden, c), hidden)
        self.b_out = real_uniform(rng, (1, 1, c), hidden)

    def hidden(self, z: Tensor) -> Tensor:
        return T.concat([T.gru(z, *self.fw), T.gru(z, *self.bw, reverse=True)], axis=-1)

    def __call__(self, z: Tensor) -> Tensor:
        return T.leaky_relu(self.hidden(z), 0.01) @ self.w_out + self.b_out


def mag_ffn(z: Tensor, ffn: MagFFN) -> Tensor:
    return ffn(z)


def _conv_seq(z: Tensor, w: Tensor) -> Tensor:
    # [B, L, C] -> conv along L with a (1, k) kernel -> [B, L, C_out]
    k = w.shape[-1]
    y = T.conv2d(T.transpose(z, (2, 0, 1)), w, None, padding=(0, k // 2))
    return T.transpose(y, (1, 2, 0))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = T.mean(x, axis=-1, keepdims=True)
    d = x - mu
    var = T.mean(d * d, axis=-1, keepdims=True)
    return d / T.sqrt(var + eps) * gamma + beta


class PhaFFN(Module):
    """Complex gated FFN: expand, split, gate ``Z1`` by ``SiLU(LayerNorm(|Z2|))``, project.

    ``break_glu`` applies the gate to real and imaginary parts separately
    (no modulus), which breaks rotation equivariance.
    """

    def __init__(self, c: int, hidden: int, kernel: int = 3, rng=None, break_glu: bool = False, expand_width=None):
        width = 2 * hidden if expand_width is None else expand_width
        if width % 2 or width <= 0:
            raise ValueError(f"phase FFN expansion width must be positive and even, got {width}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden = width // 2
        self.break_glu = break_glu
        self.w_expand = complex_uniform(rng, (width, c, 1, kernel), c * kernel)
        self.w_proj = complex_uniform(rng, (c, self.hidden, 1, kernel), self.hidden * kernel)
        self.ln_gamma = param(np.ones((1, 1, self.hidden)))
        self.ln_beta = param(np.zeros((1, 1, self.hidden)))

    def __call__(self, z: Tensor) -> Tensor:
        y = _conv_seq(z, self.w_expand)
        z1, z2 = y[:, :, : self.hidden], y[:, :, self.hidden :]
        if self.break_glu:
            g_re = T.silu(layer_norm(T.real(z2), self.ln_gamma, self.ln_beta))
            g_im = T.silu(layer_norm(T.imag(z2), self.ln_gamma, self.ln_beta))
            gated = T.complex_(T.real(z1) * g_re, T.imag(z1) * g_im)
        else:
            gated = z1 * T.silu(layer_norm(T.modulus(z2), self.ln_gamma, self.ln_beta))
        return _conv_seq(gated, self.w_proj)


def pha_ffn(z: Tensor, ffn: PhaFFN) -> Tensor:
    return ffn(z)


class HADF(Module):
    """Pre-norm attention and dual-FFN sub-layers, post-norm, plus a block residual."""

    def __init__(self, c_mag, c_pha, mag_head, pha_head, mag_hidden, pha_hidden, heads=4, rng=None, break_mode="none"):
        if break_mode not in BREAK_MODES:
            raise ValueError(f"unknown break mode {break_mode!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.attn = HybridAttention(c_mag, c_pha, mag_head, pha_head, heads, rng, break_query=break_mode == "attn")
        self.mag_ffn = MagFFN(c_mag, mag_hidden, rng)
        self.pha_ffn = PhaFFN(c_pha, pha_hidden, rng=rng, break_glu=break_mode == "ffn")
        self.norm_mag = [param(np.ones((1, 1, c_mag))) for _ in range(3)]
        self.norm_pha = [param(np.ones((1, 1, c_pha))) for _ in range(3)]

    def _rms(self, x, i):
        return rms_norm(x, self.norm_mag[i], axes=-1)

    def _crms(self, x, i):
        return crms_norm(x, self.norm_pha[i], NORM_EPS, axes=-1)

    def __call__(self, z_mag: Tensor, z_pha: Tensor):
        h_mag, h_pha, _ = self.attn(self._rms(z_mag, 0), self._crms(z_pha, 0))
        y_mag = z_mag + h_mag
        y_pha = z_pha + h_pha
        f_mag = self.mag_ffn(self._rms(y_mag, 1))
        f_pha = self.pha_ffn(self._crms(y_pha, 1))
        out_mag = self._rms(y_mag + f_mag, 2)
        out_pha = self._crms(y_pha + f_pha, 2)
        return out_mag + z_mag, out_pha + z_pha


def hadf_block(z_mag: Tensor, z_pha: Tensor, block: HADF):
    return block(z_mag, z_pha)


# [C, T, F] <-> [F, T, C] and [C, T, F] <-> [T, F, C]
TIME_AXES = (2, 1, 0)
FREQ_AXES = (1, 2, 0)
FREQ_INVERSE = (2, 0, 1)


class DualPath(Module):
    """Alternating time-axis and frequency-axis HADF blocks."""

    def __init__(self, blocks):
        self.blocks = list(blocks)

    @classmethod
    def build(cls, n, c_mag, c_pha, mag_head, pha_head, mag_hidden, pha_hidden, heads=4, rng=None, break_mode="none"):
        rng = rng if rng is not None else np.random.default_rng(0)
        args = (c_mag, c_pha, mag_head, pha_head, mag_hidden, pha_hidden, heads)
        return cls(
            (HADF(*args, rng=rng, break_mode=break_mode), HADF(*args, rng=rng, break_mode=break_mode)) for _ in range(n)
        )

    def __call__(self, x: StreamPair) -> StreamPair:
        m, p = x.mag, x.pha
        for time_block, freq_block in self.blocks:
            mt, pt = time_block(T.transpose(m, TIME_AXES), T.transpose(p, TIME_AXES))
            m, p = T.transpose(mt, TIME_AXES), T.transpose(pt, TIME_AXES)
            mf, pf = freq_block(T.transpose(m, FREQ_AXES), T.transpose(p, FREQ_AXES))
            m, p = T.transpose(mf, FREQ_INVERSE), T.transpose(pf, FREQ_INVERSE)
        return StreamPair(m, p)


def dual_path(x: StreamPair, bottleneck: DualPath) -> StreamPair:
    return bottleneck(x)
