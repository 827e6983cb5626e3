"""Real/complex tensors and a small reverse-mode tape.

Complex values are stored as ``complex128`` arrays, i.e. interleaved real and
imaginary planes. Gradients of complex tensors follow the paired-real
convention: ``grad = dL/d(re) + 1j * dL/d(im)``, so a plain gradient step
``z -= lr * grad`` updates the real and imaginary parts independently.

Operations only record onto a tape when one is active (``with Tape() as t``)
and at least one input requires a gradient. Inference outside a tape has no
bookkeeping overhead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_RANK = 4

_ACTIVE_TAPES: list["Tape"] = []


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    """A rank <= 4 float64 or complex128 array with an optional gradient slot."""

    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=False)
        else:
            arr = arr.astype(np.float64, copy=False)
        if arr.ndim > MAX_RANK:
            raise ShapeError(f"tensor rank {arr.ndim} exceeds {MAX_RANK} (shape {arr.shape})")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_complex(self) -> bool:
        return self.data.dtype == np.complex128

    @property
    def re(self) -> "Tensor":
        return real(self)

    @property
    def im(self) -> "Tensor":
        return imag(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self) -> str:
        kind = "complex" if self.is_complex else "real"
        return f"Tensor({kind}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


@dataclass
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of primitive applications.

    Nodes are appended as operations execute, so every node's inputs were
    produced by earlier nodes (or are leaves): the list is topologically sorted.
    """

    nodes: list[Node] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPES.remove(self)

    def backward(self, loss: Tensor, wrt: Sequence[Tensor] | None = None) -> dict[int, np.ndarray]:
        return backward(self, loss, wrt)


def backward(tape: Tape, loss: Tensor, wrt: Sequence[Tensor] | None = None) -> dict[int, np.ndarray]:
    """Propagate d(loss) back through ``tape``.

    Populates ``.grad`` on every leaf that requires a gradient (overwriting any
    previous value) and returns ``{id(leaf): grad}``. Tensors listed in ``wrt``
    that the loss does not depend on receive a zero gradient.
    """
    if loss.size != 1 or loss.is_complex:
        raise ValueError(f"loss must be a real scalar, got {loss!r}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(node.output) for node in tape.nodes}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            gi = _fit(gi, t)
            key = id(t)
            grads[key] = grads[key] + gi if key in grads else gi
            if key not in produced:
                leaves[key] = t
    if id(loss) not in produced and loss.requires_grad:
        leaves[id(loss)] = loss
    result = {}
    for key, t in leaves.items():
        t.grad = grads[key]
        result[key] = t.grad
    for t in wrt or ():
        if id(t) not in result:
            t.grad = np.zeros_like(t.data)
            result[id(t)] = t.grad
    return result


# --------------------------------------------------------------------------
# helpers


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if _ACTIVE_TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _ACTIVE_TAPES[-1].nodes.append(Node(op, inputs, out, vjp))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _fit(g: np.ndarray, t: Tensor) -> np.ndarray:
    if not t.is_complex and np.iscomplexobj(g):
        g = g.real
    return _unbroadcast(g, t.shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    # singleton broadcasting at equal rank only; 0-d operands act as scalars
    if a.ndim == 0 or b.ndim == 0:
        return
    if a.ndim != b.ndim or any(x != y and x != 1 and y != 1 for x, y in zip(a.shape, b.shape)):
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# --------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return _emit("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _emit("neg", -a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    """Elementwise product; complex operands use the complex product rule."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data
    return _emit("mul", ad * bd, (a, b), lambda g: (g * np.conj(bd), g * np.conj(ad)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def vjp(g):
        ga = g / np.conj(bd)
        return ga, -ga * np.conj(out)

    return _emit("div", out, (a, b), vjp)


def conj(a) -> Tensor:
    a = as_tensor(a)
    return _emit("conj", np.conj(a.data), (a,), lambda g: (np.conj(g),))


def real(a) -> Tensor:
    a = as_tensor(a)
    return _emit("real", a.data.real.copy(), (a,), lambda g: (g.astype(np.complex128) if a.is_complex else g,))


def imag(a) -> Tensor:
    a = as_tensor(a)
    return _emit("imag", a.data.imag.copy(), (a,), lambda g: (1j * g,))


def complex_(re, im) -> Tensor:
    """Assemble a complex tensor from real and imaginary planes."""
    re, im = as_tensor(re), as_tensor(im)
    if re.is_complex or im.is_complex:
        raise TypeError("complex_ expects real planes")
    if re.shape != im.shape:
        raise ShapeError(f"complex_: incompatible shapes {re.shape} and {im.shape}")
    return _emit("complex", re.data + 1j * im.data, (re, im), lambda g: (g.real, g.imag))


def modulus(a) -> Tensor:
    """|a|; the gradient at exactly zero is taken as zero."""
    a = as_tensor(a)
    ad = a.data
    out = np.abs(ad)

    def vjp(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(out > 0, ad / np.where(out > 0, out, 1.0), 0.0)
        return (g * unit,)

    return _emit("modulus", out, (a,), vjp)


def abs2(a) -> Tensor:
    """re^2 + im^2 (smooth everywhere, unlike modulus)."""
    a = as_tensor(a)
    ad = a.data
    return _emit("abs2", (ad * np.conj(ad)).real, (a,), lambda g: (2.0 * g * ad,))


def angle(a) -> Tensor:
    """atan2(im, re) of a complex tensor."""
    a = as_tensor(a)
    ad = a.data
    out = np.angle(ad)

    def vjp(g):
        r2 = (ad * np.conj(ad)).real
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.where(r2 > 0, 1j * ad / np.where(r2 > 0, r2, 1.0), 0.0)
        return (g * d,)

    return _emit("angle", out, (a,), vjp)


def unit(a, tiny: float = 1e-12) -> Tensor:
    """a / |a| with the value 1+0j wherever |a| < tiny."""
    a = as_tensor(a)
    ad = a.data.astype(np.complex128)
    r = np.abs(ad)
    ok = r >= tiny
    safe = np.where(ok, r, 1.0)
    u = np.where(ok, ad / safe, 1.0 + 0j)

    def vjp(g):
        proj = g - u * (np.conj(u) * g).real
        return (np.where(ok, proj / safe, 0.0),)

    return _emit("unit", u, (a,), vjp)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _emit("exp", out, (a,), lambda g: (g * np.conj(out),))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _emit("log", np.log(ad), (a,), lambda g: (g / np.conj(ad),))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _emit("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def power(a, p: float) -> Tensor:
    """a ** p for real non-negative a; the gradient at 0 is 0 when p > 1."""
    a = as_tensor(a)
    ad = a.data
    out = ad**p

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(ad > 0, p * ad ** (p - 1.0), 0.0 if p > 1 else np.inf)
        return (g * d,)

    return _emit("power", out, (a,), vjp)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _emit("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _emit("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _emit("relu", np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0),))


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _emit("leaky_relu", np.where(ad > 0, ad, slope * ad), (a,), lambda g: (np.where(ad > 0, g, slope * g),))


def silu(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    s = _sigmoid(ad)
    return _emit("silu", ad * s, (a,), lambda g: (g * (s * (1.0 + ad * (1.0 - s))),))


def anti_wrap(a) -> Tensor:
    """Circular absolute error |x - 2*pi*round(x / 2*pi)|, valued in [0, pi]."""
    a = as_tensor(a)
    w = a.data - 2.0 * np.pi * np.round(a.data / (2.0 * np.pi))
    return _emit("anti_wrap", np.abs(w), (a,), lambda g: (g * np.sign(w),))


def elementwise(op: str, a, b=None) -> Tensor:
    """Dispatch one of the basic elementwise primitives by name."""
    if op == "add":
        return add(a, b)
    if op == "mul-complex":
        return mul(a, b)
    if op == "scale-by-real":
        if as_tensor(b).is_complex:
            raise TypeError("scale-by-real expects a real scale")
        return mul(a, b)
    if op == "modulus":
        return modulus(a)
    if op == "conj":
        return conj(a)
    raise ValueError(f"unknown elementwise op {op!r}")


# --------------------------------------------------------------------------
# reductions and shape manipulation


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _emit("sum", out, (a,), vjp)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        n = int(np.prod([a.shape[i] for i in axes]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _emit("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    return _emit("transpose", a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    key = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(k, (slice, int, type(Ellipsis))) or k is None for k in key)

    def vjp(g):
        full = np.zeros(a.shape, dtype=np.result_type(g, a.data))
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _emit("getitem", a.data[index].copy(), (a,), vjp)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    ref = ts[0].shape
    ax = axis % len(ref)
    for t in ts:
        if len(t.shape) != len(ref) or any(t.shape[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape}")
    splits = np.cumsum([t.shape[ax] for t in ts])[:-1]
    out = np.concatenate([t.data for t in ts], axis=ax)
    return _emit("concat", out, ts, lambda g: tuple(np.split(g, splits, axis=ax)))


def pad(a, widths) -> Tensor:
    """Zero padding; ``widths`` as for ``np.pad``."""
    a = as_tensor(a)
    index = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return _emit("pad", np.pad(a.data, widths), (a,), lambda g: (g[index],))


# --------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Batched ``a @ b``: either equal leading dims, or a 2-D right operand.

    Never adds a bias; complex operands contract with the complex product.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ for {a.shape} and {b.shape}")
    if b.ndim != 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: batch dimensions differ for {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    out = np.matmul(ad, bd)

    def vjp(g):
        ga = np.matmul(g, np.conj(bd).swapaxes(-1, -2))
        if bd.ndim == 2:
            gb = np.conj(ad.reshape(-1, ad.shape[-1])).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.matmul(np.conj(ad).swapaxes(-1, -2), g)
        return ga, gb

    return _emit("matmul", out, (a, b), vjp)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return _emit("softmax", s, (a,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


# --------------------------------------------------------------------------
# convolution


def _pair(v) -> tuple[int, int]:
    return (v, v) if isinstance(v, int) else (int(v[0]), int(v[1]))


def conv2d(x, w, bias=None, stride=1, dilation=1, padding=0) -> Tensor:
    """2-D cross-correlation of ``x[C_in, H, W]`` with ``w[C_out, C_in, kh, kw]``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected x[C,H,W] and w[O,C,kh,kw], got {x.shape} and {w.shape}")
    if x.shape[0] != w.shape[1]:
        raise ShapeError(f"conv2d: input channels {x.shape[0]} do not match kernel {w.shape}")
    sh, sw = _pair(stride)
    dh, dw = _pair(dilation)
    ph, pw = _pair(padding)
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ho = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    wo = (wd + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    if ho <= 0 or wo <= 0:
        raise ValueError(f"conv2d: output size ({ho}, {wo}) is not positive for input {x.shape}")
    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw))) if ph or pw else x.data
    wd_ = w.data
    dtype = np.result_type(xp, wd_)

    def window(i, j):
        return (slice(None), slice(i * dh, i * dh + sh * (ho - 1) + 1, sh), slice(j * dw, j * dw + sw * (wo - 1) + 1, sw))

    out = np.zeros((c_out, ho, wo), dtype=dtype)
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(wd_[:, :, i, j], xp[window(i, j)], axes=(1, 0))
    inputs = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[:, None, None]
        inputs = (x, w, bias)

    def vjp(g):
        gxp = np.zeros(xp.shape, dtype=np.result_type(g, wd_))
        gw = np.zeros(wd_.shape, dtype=np.result_type(g, xp))
        wc = np.conj(wd_)
        for i in range(kh):
            for j in range(kw):
                idx = window(i, j)
                gxp[idx] += np.tensordot(wc[:, :, i, j], g, axes=(0, 0))
                gw[:, :, i, j] = np.tensordot(g, np.conj(xp[idx]), axes=([1, 2], [1, 2]))
        gx = gxp[:, ph : ph + h, pw : pw + wd]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(1, 2)))
        return grads

    return _emit("conv2d", out, inputs, vjp)


def conv_transpose2d(x, w, bias=None, stride=1, dilation=1) -> Tensor:
    """Transposed convolution of ``x[C_in, H, W]`` with ``w[C_in, C_out, kh, kw]``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 4 or x.shape[0] != w.shape[0]:
        raise ShapeError(f"conv_transpose2d: incompatible shapes {x.shape} and {w.shape}")
    sh, sw = _pair(stride)
    dh, dw = _pair(dilation)
    _, h, wd = x.shape
    _, c_out, kh, kw = w.shape
    ho = (h - 1) * sh + dh * (kh - 1) + 1
    wo = (wd - 1) * sw + dw * (kw - 1) + 1
    xd, wd_ = x.data, w.data

    def window(i, j):
        return (slice(None), slice(i * dh, i * dh + sh * (h - 1) + 1, sh), slice(j * dw, j * dw + sw * (wd - 1) + 1, sw))

    out = np.zeros((c_out, ho, wo), dtype=np.result_type(xd, wd_))
    for i in range(kh):
        for j in range(kw):
            out[window(i, j)] += np.tensordot(wd_[:, :, i, j], xd, axes=(0, 0))
    inputs = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[:, None, None]
        inputs = (x, w, bias)

    def vjp(g):
        gx = np.zeros(xd.shape, dtype=np.result_type(g, wd_))
        gw = np.zeros(wd_.shape, dtype=np.result_type(g, xd))
        wc, xc = np.conj(wd_), np.conj(xd)
        for i in range(kh):
            for j in range(kw):
                gi = g[window(i, j)]
                gx += np.tensordot(wc[:, :, i, j], gi, axes=(1, 0))
                gw[:, :, i, j] = np.tensordot(xc, gi, axes=([1, 2], [1, 2]))
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(1, 2)))
        return grads

    return _emit("conv_transpose2d", out, inputs, vjp)


# --------------------------------------------------------------------------
# recurrent


def gru(x, w_ih, w_hh, b_ih, b_hh, reverse: bool = False) -> Tensor:
    """Single-direction GRU over ``x[B, L, I]`` from a zero initial state.

    Gate layout follows the usual (reset, update, new) stacking of the
    ``[3H, *]`` weight matrices:

        r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
        z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
        n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
        h' = (1 - z) * n + z * h
    """
    x, w_ih, w_hh, b_ih, b_hh = (as_tensor(t) for t in (x, w_ih, w_hh, b_ih, b_hh))
    bsz, length, _ = x.shape
    hid = w_hh.shape[1]
    if w_ih.shape[0] != 3 * hid or w_ih.shape[1] != x.shape[2]:
        raise ShapeError(f"gru: weight {w_ih.shape} does not fit input {x.shape} and hidden {hid}")
    xd, wi, wh, bi, bh = x.data, w_ih.data, w_hh.data, b_ih.data, b_hh.data
    gi = xd @ wi.T + bi
    order = range(length - 1, -1, -1) if reverse else range(length)
    out = np.zeros((bsz, length, hid))
    cache = []
    h = np.zeros((bsz, hid))
    for t in order:
        gh = h @ wh.T + bh
        r = _sigmoid(gi[:, t, :hid] + gh[:, :hid])
        z = _sigmoid(gi[:, t, hid : 2 * hid] + gh[:, hid : 2 * hid])
        n = np.tanh(gi[:, t, 2 * hid :] + r * gh[:, 2 * hid :])
        cache.append((t, h, r, z, n, gh[:, 2 * hid :]))
        h = (1.0 - z) * n + z * h
        out[:, t] = h

    def vjp(g):
        dgi = np.zeros_like(gi)
        dwh = np.zeros_like(wh)
        dbh = np.zeros_like(bh)
        dh_next = np.zeros((bsz, hid))
        for t, h_prev, r, z, n, ghn in reversed(cache):
            dh = g[:, t] + dh_next
            da_n = dh * (1.0 - z) * (1.0 - n * n)
            da_z = dh * (h_prev - n) * z * (1.0 - z)
            da_r = da_n * ghn * r * (1.0 - r)
            dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
            dgi[:, t] = np.concatenate([da_r, da_z, da_n], axis=1)
            dwh += dgh.T @ h_prev
            dbh += dgh.sum(axis=0)
            dh_next = dh * z + dgh @ wh
        flat = dgi.reshape(-1, 3 * hid)
        dx = dgi @ wi
        dwi = flat.T @ xd.reshape(-1, xd.shape[2])
        return dx, dwi, dwh, flat.sum(axis=0), dbh

    return _emit("gru", out, (x, w_ih, w_hh, b_ih, b_hh), vjp)


# --------------------------------------------------------------------------
# spectral


def rfft(a) -> Tensor:
    """One-sided DFT along the last axis of a real tensor."""
    a = as_tensor(a)
    n = a.shape[-1]
    return _emit("rfft", np.fft.rfft(a.data, axis=-1), (a,), lambda g: (n * np.fft.ifft(g, n=n, axis=-1).real,))


def irfft(a, n: int) -> Tensor:
    """Inverse of :func:`rfft` for even ``n``; imaginary parts of DC/Nyquist are ignored."""
    a = as_tensor(a)
    if n % 2 or a.shape[-1] != n // 2 + 1:
        raise ShapeError(f"irfft: {a.shape[-1]} bins do not match even length {n}")
    weight = np.full(n // 2 + 1, 2.0 / n)
    weight[0] = weight[-1] = 1.0 / n
    return _emit("irfft", np.fft.irfft(a.data, n=n, axis=-1), (a,), lambda g: (weight * np.fft.rfft(g, axis=-1),))


def frame(a, win: int, hop: int) -> Tensor:
    """Slice a 1-D signal into overlapping frames ``[T, win]``."""
    a = as_tensor(a)
    if a.ndim != 1:
        raise ShapeError(f"frame expects a 1-D signal, got {a.shape}")
    n = a.shape[0]
    if n < win:
        raise ValueError(f"signal of length {n} is shorter than one window ({win})")
    count = 1 + (n - win) // hop
    idx = hop * np.arange(count)[:, None] + np.arange(win)[None, :]
    return _emit("frame", a.data[idx], (a,), lambda g: (_ola(g, hop, n),))


def _ola(frames: np.ndarray, hop: int, length: int) -> np.ndarray:
    count, win = frames.shape
    out = np.zeros(length, dtype=frames.dtype)
    if win % hop == 0:
        for q in range(win // hop):
            out[q * hop : q * hop + count * hop] += frames[:, q * hop : (q + 1) * hop].reshape(-1)
    else:
        for t in range(count):
            out[t * hop : t * hop + win] += frames[t]
    return out


def overlap_add(a, hop: int) -> Tensor:
    """Overlap-add frames ``[T, win]`` into a signal of length ``(T-1)*hop + win``."""
    a = as_tensor(a)
    count, win = a.shape
    length = (count - 1) * hop + win
    idx = hop * np.arange(count)[:, None] + np.arange(win)[None, :]
    return _emit("overlap_add", _ola(a.data, hop, length), (a,), lambda g: (g[idx],))
