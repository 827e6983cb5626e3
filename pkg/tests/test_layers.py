import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gre_speech import tensor as T
from gre_speech.layers import (
    GATE_SCALE,
    MPICM,
    DenseBlock,
    StreamPair,
    complex_conv2d,
    crms_norm,
    gate_psi,
    output_bins,
    rms_norm,
)
from gre_speech.module import param
from gre_speech.tensor import ShapeError, Tensor


def crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pair(rng, c_mag=4, c_pha=2, t=5, k=9):
    return StreamPair(Tensor(rng.standard_normal((c_mag, t, k))), Tensor(crandn(rng, (c_pha, t, k))))


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


angles = st.floats(-10.0, 10.0, allow_nan=False)


@settings(max_examples=25, deadline=None)
@given(angles)
def test_complex_conv_commutes_with_rotation(theta):
    rng = np.random.default_rng(0)
    x = crandn(rng, (3, 6, 7))
    w = Tensor(crandn(rng, (2, 3, 3, 3)))
    rot = np.exp(1j * theta)
    a = complex_conv2d(Tensor(x * rot), w, padding=1).data
    b = complex_conv2d(Tensor(x), w, padding=1).data * rot
    assert rel(a, b) <= 1e-12


def test_complex_conv_requires_complex_kernel():
    with pytest.raises(TypeError):
        complex_conv2d(Tensor(np.ones((1, 3, 3), complex)), Tensor(np.ones((1, 1, 3, 3))))


def test_crms_normalizes_rms_modulus_per_channel():
    rng = np.random.default_rng(1)
    x = Tensor(crandn(rng, (3, 4, 5)) * np.array([1.0, 10.0, 0.1])[:, None, None])
    out = crms_norm(x, Tensor(np.ones((3, 1, 5)))).data
    np.testing.assert_allclose(np.sqrt(np.mean(np.abs(out) ** 2, axis=(1, 2))), 1.0, rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(angles)
def test_crms_commutes_with_rotation(theta):
    rng = np.random.default_rng(2)
    x = crandn(rng, (2, 4, 6))
    g = Tensor(rng.uniform(0.5, 2, (2, 1, 6)))
    rot = np.exp(1j * theta)
    assert rel(crms_norm(Tensor(x * rot), g).data, crms_norm(Tensor(x), g).data * rot) <= 1e-12


def test_norms_reject_non_positive_eps():
    x = Tensor(np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        rms_norm(x, Tensor(np.ones((1, 1, 1))), eps=0.0)
    with pytest.raises(ValueError):
        crms_norm(x, Tensor(np.ones((1, 1, 1))), eps=-1.0)


def test_gate_is_bounded():
    out = gate_psi(Tensor(np.array([-1e3, -1.0, 0.0, 1.0, 1e3])), Tensor(np.ones(5))).data
    assert np.all(out >= 0) and np.all(out <= GATE_SCALE)
    assert out[2] == pytest.approx(1.5)


@pytest.mark.parametrize(
    "mode,k_in,k_out", [("standard", 201, 201), ("expand-no-gate", 201, 201), ("downsample", 201, 100), ("upsample", 100, 201)]
)
def test_mpicm_frequency_geometry(mode, k_in, k_out):
    rng = np.random.default_rng(3)
    c_in = 1 if mode == "expand-no-gate" else 4
    block = MPICM(c_in, c_in, 4, 2, k_out, mode, rng=rng)
    x = StreamPair(Tensor(rng.standard_normal((c_in, 3, k_in))), Tensor(crandn(rng, (c_in, 3, k_in))))
    out = block(x)
    assert out.mag.shape == (4, 3, k_out) and out.pha.shape == (2, 3, k_out)
    assert output_bins(mode, k_in) == k_out


def test_mpicm_parameter_shapes():
    block = MPICM(4, 2, 6, 3, 11, "standard", rng=np.random.default_rng(0))
    assert block.gamma_pha.shape == (3, 1, 11)
    assert block.a_mag.shape == (6, 1, 11) and block.a_pha.shape == (3, 1, 11)
    assert block.gamma_mag.shape == (6, 1, 1) and block.beta_mag.shape == (6, 1, 1)
    np.testing.assert_array_equal(block.a_mag.data, 1.0)
    assert not hasattr(MPICM(1, 1, 4, 2, 11, "expand-no-gate"), "a_mag")


def test_mpicm_unknown_mode():
    with pytest.raises(ValueError):
        MPICM(1, 1, 1, 1, 5, "sideways")


def test_complex_init_bounds():
    block = MPICM(4, 2, 6, 3, 11, "standard", rng=np.random.default_rng(0))
    bound = np.sqrt(1 / (2 * 2 * 9))
    assert np.abs(block.w_pha.data.real).max() <= bound
    assert np.abs(block.w_pha.data.imag).max() <= bound
    assert np.abs(block.w_mag.data).max() <= np.sqrt(1 / (4 * 9))


@settings(max_examples=15, deadline=None)
@given(angles)
def test_mpicm_is_equivariant_and_magnitude_invariant(theta):
    rng = np.random.default_rng(4)
    block = MPICM(4, 2, 4, 2, 9, "standard", dilation=2, rng=rng)
    x = pair(rng)
    base, moved = block(x), block(x.rotate(theta))
    assert rel(moved.pha.data, base.pha.data * np.exp(1j * theta)) <= 1e-12
    assert rel(moved.mag.data, base.mag.data) <= 1e-12


def test_break_gate_leaks_rotation_into_magnitude():
    rng = np.random.default_rng(5)
    block = MPICM(4, 2, 4, 2, 9, "standard", rng=rng, break_gate=True)
    x = pair(rng)
    assert rel(block(x.rotate(1.0)).mag.data, block(x).mag.data) > 1e-2


def test_dense_block_channel_growth_and_order():
    block = DenseBlock(4, 2, 9, depth=4, rng=np.random.default_rng(0))
    assert [layer.w_mag.shape[1] for layer in block.layers] == [4, 8, 12, 16]
    assert [layer.w_pha.shape[1] for layer in block.layers] == [2, 4, 6, 8]
    assert [layer.dilation[0] for layer in block.layers] == [1, 2, 4, 8]
    assert DenseBlock.input_order(3) == ["layer2", "layer1", "layer0", "input"]


def test_dense_block_concatenation_is_aligned():
    # magnitude and phase channel c of every layer input come from the same source
    rng = np.random.default_rng(6)
    block = DenseBlock(3, 3, 7, depth=3, rng=rng)
    seen = []
    for layer in block.layers:
        orig = layer.features

        def spy(x, orig=orig):
            seen.append((x.mag.data.copy(), x.pha.data.copy()))
            return orig(x)

        layer.features = spy
    x = pair(rng, 3, 3, 4, 7)
    block(x)
    mag2, pha2 = seen[2]
    np.testing.assert_array_equal(mag2[6:], x.mag.data)
    np.testing.assert_array_equal(pha2[6:], x.pha.data)


def test_stream_pair_validates_shapes():
    with pytest.raises(ShapeError):
        StreamPair(Tensor(np.ones((2, 3, 4))), Tensor(np.ones((2, 3, 5), complex)))
    with pytest.raises(ShapeError):
        StreamPair(Tensor(np.ones((3, 4))), Tensor(np.ones((3, 4), complex)))


def test_rms_norm_gradient_through_gamma():
    from gre_speech.gradcheck import check_gradients

    rng = np.random.default_rng(7)
    x = Tensor(rng.standard_normal((2, 3, 4)))
    g = param(rng.uniform(0.5, 1.5, (2, 1, 1)))
    assert check_gradients(lambda a, b: rms_norm(a, b), [x, g]) <= 1e-6
    z = Tensor(crandn(rng, (2, 3, 4)))
    assert check_gradients(lambda a, b: crms_norm(a, b), [z, Tensor(rng.uniform(0.5, 1.5, (2, 1, 4)))]) <= 1e-6


def test_mpicm_gradients():
    from gre_speech.gradcheck import check_gradients

    rng = np.random.default_rng(8)
    block = MPICM(2, 1, 2, 1, 5, "standard", rng=rng)
    x = pair(rng, 2, 1, 3, 5)

    def fn(*_):
        out = block(x)
        return T.sum(out.mag) + T.sum(T.real(out.pha * (0.3 - 0.7j)))

    assert check_gradients(fn, block.parameters()) <= 1e-5
