import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal as sps

from gre_speech import tensor as T
from gre_speech.gradcheck import check_gradients, primitive_cases
from gre_speech.tensor import ShapeError, Tape, Tensor

CASES = primitive_cases(seed=3)


@pytest.mark.parametrize("name", sorted(CASES))
def test_primitive_gradients_match_finite_differences(name):
    fn, inputs = CASES[name]
    assert check_gradients(fn, inputs) <= 1e-6


def test_registry_covers_core_primitives():
    for name in ("conv2d", "conv_transpose2d", "gru", "matmul", "softmax", "rfft", "irfft", "overlap_add", "unit"):
        assert any(k.startswith(name) for k in CASES), name


def test_dtypes_are_promoted():
    assert Tensor(np.arange(3)).data.dtype == np.float64
    assert Tensor(np.ones(2, dtype=np.complex64)).data.dtype == np.complex128


def test_rank_above_four_is_rejected():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((1, 1, 1, 1, 1)))


def test_broadcast_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(3, 2\)"):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((3, 2)))


def test_backward_needs_real_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ValueError):
        T.backward(tape, y)
    with Tape() as tape:
        z = T.sum(x * (1 + 1j))
    with pytest.raises(ValueError):
        T.backward(tape, z)


def test_backward_overwrites_and_zero_fills():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    unused = Tensor(np.ones(4), requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            loss = T.sum(x * x)
        grads = T.backward(tape, loss, wrt=[x, unused])
    np.testing.assert_array_equal(x.grad, [2.0, 4.0])
    np.testing.assert_array_equal(unused.grad, np.zeros(4))
    assert set(grads) == {id(x), id(unused)}


def test_no_tape_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    y = x * 3.0
    assert not y.requires_grad


def test_complex_gradient_convention():
    # L = |z|^2 has grad dL/dre + j dL/dim = 2 z
    z = Tensor(np.array([1.0 + 2.0j, -0.5 + 0.25j]), requires_grad=True)
    with Tape() as tape:
        loss = T.sum(T.abs2(z))
    T.backward(tape, loss)
    np.testing.assert_allclose(z.grad, 2 * z.data)


def test_conv2d_matches_scipy_correlate():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 7, 9))
    w = rng.standard_normal((2, 3, 3, 2))
    out = T.conv2d(Tensor(x), Tensor(w)).data
    want = np.stack([sum(sps.correlate(x[c], w[o, c], mode="valid") for c in range(3)) for o in range(2)])
    np.testing.assert_allclose(out, want, atol=1e-12)


def test_conv2d_dilation_and_padding_shape():
    x = Tensor(np.zeros((1, 16, 24)))
    w = Tensor(np.zeros((1, 1, 3, 3)))
    assert T.conv2d(x, w, dilation=(4, 1), padding=(4, 1)).shape == (1, 16, 24)


def test_conv2d_rejects_empty_output():
    with pytest.raises(ValueError):
        T.conv2d(Tensor(np.zeros((1, 2, 2))), Tensor(np.zeros((1, 1, 3, 3))))


def test_conv_transpose_is_adjoint_of_strided_conv():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((3, 2, 1, 3)) + 1j * rng.standard_normal((3, 2, 1, 3))
    z = rng.standard_normal((2, 4, 201)) + 1j * rng.standard_normal((2, 4, 201))
    y = rng.standard_normal((3, 4, 100)) + 1j * rng.standard_normal((3, 4, 100))
    lhs = np.vdot(y, T.conv2d(Tensor(z), Tensor(w), stride=(1, 2)).data)
    up = T.conv_transpose2d(Tensor(y), Tensor(np.conj(w)), stride=(1, 2)).data
    assert up.shape == (2, 4, 201)
    assert abs(lhs - np.vdot(up, z)) <= 1e-10 * abs(lhs)


def _gru_reference(x, w_ih, w_hh, b_ih, b_hh):
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))  # noqa: E731
    hid = w_hh.shape[1]
    h = np.zeros((x.shape[0], hid))
    out = []
    for t in range(x.shape[1]):
        a = x[:, t] @ w_ih.T + b_ih
        b = h @ w_hh.T + b_hh
        r = sig(a[:, :hid] + b[:, :hid])
        z = sig(a[:, hid : 2 * hid] + b[:, hid : 2 * hid])
        n = np.tanh(a[:, 2 * hid :] + r * b[:, 2 * hid :])
        h = (1 - z) * n + z * h
        out.append(h)
    return np.stack(out, axis=1)


def test_gru_matches_loop_reference_both_directions():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 5, 3))
    params = [rng.standard_normal(s) * 0.5 for s in ((12, 3), (12, 4), (12,), (12,))]
    fw = T.gru(Tensor(x), *map(Tensor, params)).data
    np.testing.assert_allclose(fw, _gru_reference(x, *params), atol=1e-12)
    bw = T.gru(Tensor(x), *map(Tensor, params), reverse=True).data
    np.testing.assert_allclose(bw, _gru_reference(x[:, ::-1], *params)[:, ::-1], atol=1e-12)


def test_rfft_irfft_round_trip():
    x = np.random.default_rng(4).standard_normal((3, 8))
    spec = T.rfft(Tensor(x))
    np.testing.assert_allclose(spec.data, np.fft.rfft(x))
    np.testing.assert_allclose(T.irfft(spec, 8).data, x, atol=1e-12)


def test_frame_rejects_short_signal():
    with pytest.raises(ValueError):
        T.frame(Tensor(np.zeros(5)), 8, 2)


def test_softmax_rows_sum_to_one():
    a = Tensor(np.random.default_rng(5).standard_normal((2, 3, 4)) * 50)
    np.testing.assert_allclose(T.softmax(a, axis=-1).data.sum(-1), 1.0, atol=1e-12)


def test_unit_maps_zero_to_one():
    out = T.unit(Tensor(np.array([0j, 3 - 4j]))).data
    np.testing.assert_allclose(out, [1.0, 0.6 - 0.8j])


def test_sigmoid_is_stable_for_large_inputs():
    out = T.sigmoid(Tensor(np.array([-800.0, 800.0]))).data
    np.testing.assert_array_equal(out, [0.0, 1.0])


def test_elementwise_dispatch():
    a = Tensor(np.array([1 + 1j]))
    b = Tensor(np.array([2 - 1j]))
    np.testing.assert_allclose(T.elementwise("mul-complex", a, b).data, [3 + 1j])
    np.testing.assert_allclose(T.elementwise("modulus", a).data, [np.sqrt(2)])
    with pytest.raises(ValueError):
        T.elementwise("pow", a, b)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=6), st.floats(0, 2 * np.pi))
def test_modulus_is_rotation_invariant(vals, theta):
    z = np.array([complex(a, b) for a, b in vals])
    got = T.modulus(Tensor(z * np.exp(1j * theta))).data
    np.testing.assert_allclose(got, np.abs(z), rtol=1e-12, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=6), st.floats(0, 2 * np.pi))
def test_conj_product_is_rotation_invariant(vals, theta):
    z = np.array([complex(a, b) for a, b in vals])
    r = Tensor(z * np.exp(1j * theta))
    got = (r * T.conj(r)).data
    np.testing.assert_allclose(got, np.abs(z) ** 2, rtol=1e-12, atol=1e-6)
