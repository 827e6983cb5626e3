"""Central finite-difference checks for tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tape, Tensor


def _scalarize(out: Tensor, proj: np.ndarray | None) -> Tensor:
    if out.size == 1 and not out.is_complex:
        return T.reshape(out, ())
    # random projection turns any output into a real scalar
    return T.sum(T.real(T.mul(out, Tensor(np.conj(proj)))))


def numerical_gradient(loss_fn: Callable[[], float], t: Tensor, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``loss_fn`` w.r.t. every real coordinate of ``t``.

    Complex tensors are perturbed along re and im separately and the result is
    packed as ``d/dre + 1j*d/dim``.
    """
    flat = t.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=t.data.dtype)
    steps = (h, 1j * h) if t.is_complex else (h,)
    for i in range(flat.size):
        orig = flat[i]
        for step in steps:
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            d = (up - down) / (2 * h)
            grad[i] += d if step == h else 1j * d
    return grad.reshape(t.shape)


def check_gradients(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max of |analytic - numeric| / max(1, |analytic|) over all input coordinates."""
    rng = np.random.default_rng(seed)
    for t in inputs:
        t.requires_grad = True
    probe = fn(*inputs)
    proj = None
    if not (probe.size == 1 and not probe.is_complex):
        proj = rng.standard_normal(probe.shape)
        if probe.is_complex:
            proj = proj + 1j * rng.standard_normal(probe.shape)

    with Tape() as tape:
        loss = _scalarize(fn(*inputs), proj)
    T.backward(tape, loss, wrt=inputs)
    analytic = [t.grad.copy() for t in inputs]

    def value() -> float:
        return float(_scalarize(fn(*inputs), proj).data)

    worst = 0.0
    for t, a in zip(inputs, analytic):
        num = numerical_gradient(value, t, h)
        for part in (np.real, np.imag) if t.is_complex else (np.real,):
            av, nv = part(a), part(num)
            err = np.abs(av - nv) / np.maximum(1.0, np.abs(av))
            worst = max(worst, float(err.max(initial=0.0)))
    return worst


def _rand(rng, shape, complex_=False, lo=-2.0, hi=2.0):
    x = rng.uniform(lo, hi, shape)
    if complex_:
        x = x + 1j * rng.uniform(lo, hi, shape)
    return Tensor(x)


def primitive_cases(seed: int = 0) -> dict[str, tuple[Callable[..., Tensor], list[Tensor]]]:
    """One small randomized invocation per registered primitive."""
    rng = np.random.default_rng(seed)
    r = lambda *s: _rand(rng, s)  # noqa: E731
    c = lambda *s: _rand(rng, s, True)  # noqa: E731
    pos = lambda *s: _rand(rng, s, lo=0.5, hi=2.0)  # noqa: E731
    return {
        "add": (T.add, [c(2, 3), c(2, 1)]),
        "sub": (T.sub, [r(2, 3), r(1, 3)]),
        "neg": (T.neg, [c(3)]),
        "mul_real": (T.mul, [r(2, 3), r(2, 3)]),
        "mul_complex": (T.mul, [c(2, 3), c(2, 3)]),
        "mul_mixed": (T.mul, [r(2, 3), c(2, 3)]),
        "div": (T.div, [c(2, 3), pos(2, 1)]),
        "conj": (T.conj, [c(2, 2)]),
        "real": (T.real, [c(2, 2)]),
        "imag": (T.imag, [c(2, 2)]),
        "complex": (T.complex_, [r(3), r(3)]),
        "modulus": (T.modulus, [c(2, 3)]),
        "abs2": (T.abs2, [c(2, 3)]),
        "angle": (T.angle, [c(2, 3)]),
        "unit": (T.unit, [c(2, 3)]),
        "exp": (T.exp, [r(3)]),
        "log": (T.log, [pos(3)]),
        "sqrt": (T.sqrt, [pos(3)]),
        "power": (lambda a: T.power(a, 1.0 / 0.3), [pos(4)]),
        "sigmoid": (T.sigmoid, [r(4)]),
        "tanh": (T.tanh, [r(4)]),
        "relu": (T.relu, [Tensor(np.array([-1.5, -0.3, 0.4, 1.7]))]),
        "leaky_relu": (T.leaky_relu, [Tensor(np.array([-1.5, -0.3, 0.4, 1.7]))]),
        "silu": (T.silu, [r(4)]),
        "anti_wrap": (T.anti_wrap, [Tensor(np.array([-5.0, -1.0, 0.5, 2.0, 7.0]))]),
        "sum": (lambda a: T.sum(a, axis=1), [c(2, 3)]),
        "mean": (lambda a: T.mean(a, axis=(0, 2), keepdims=True), [r(2, 3, 2)]),
        "reshape": (lambda a: T.reshape(a, (3, 2)), [r(2, 3)]),
        "transpose": (lambda a: T.transpose(a, (2, 0, 1)), [c(2, 3, 2)]),
        "getitem": (lambda a: a[:, 1:], [c(2, 3)]),
        "concat": (lambda a, b: T.concat([a, b], axis=-1), [r(2, 2), r(2, 3)]),
        "pad": (lambda a: T.pad(a, ((1, 2),)), [r(3)]),
        "matmul": (T.matmul, [c(2, 3, 4), c(4, 2)]),
        "matmul_batched": (T.matmul, [r(2, 3, 4), r(2, 4, 2)]),
        "matmul_mixed": (T.matmul, [r(2, 3, 3), c(2, 3, 2)]),
        "softmax": (T.softmax, [r(2, 4)]),
        "conv2d": (lambda x, w, b: T.conv2d(x, w, b, stride=(1, 2), dilation=(2, 1), padding=(2, 1)), [r(2, 5, 6), r(3, 2, 3, 3), r(3)]),
        "conv2d_complex": (lambda x, w: T.conv2d(x, w, padding=1), [c(2, 4, 4), c(2, 2, 3, 3)]),
        "conv_transpose2d": (lambda x, w: T.conv_transpose2d(x, w, stride=(1, 2)), [c(2, 3, 4), c(2, 3, 1, 3)]),
        "gru": (lambda x, a, b, c_, d: T.gru(x, a, b, c_, d), [r(2, 3, 2), r(9, 2), r(9, 3), r(9), r(9)]),
        "gru_reverse": (lambda x, a, b, c_, d: T.gru(x, a, b, c_, d, reverse=True), [r(2, 3, 2), r(9, 2), r(9, 3), r(9), r(9)]),
        "rfft": (T.rfft, [r(2, 8)]),
        "irfft": (lambda a: T.irfft(a, 8), [c(2, 5)]),
        "frame": (lambda a: T.frame(a, 8, 2), [r(14)]),
        "overlap_add": (lambda a: T.overlap_add(a, 2), [r(4, 8)]),
    }
