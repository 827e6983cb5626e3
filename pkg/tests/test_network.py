import json
from dataclasses import replace

import numpy as np
import pytest

from gre_speech import signal as sig
from gre_speech.harness import TINY
from gre_speech.losses import anti_wrap
from gre_speech.network import (
    SMALL,
    STANDARD,
    GRENet,
    ModelConfig,
    SpectrumPair,
    enhance,
    enhance_spectrum,
    featurize,
    identity_model,
    param_count,
)
from gre_speech.tensor import Tensor


def test_presets():
    assert (SMALL.C_mag, SMALL.C_pha, SMALL.C_mag_head, SMALL.C_pha_head, SMALL.C_mag_hidden, SMALL.C_pha_hidden) == (
        32, 16, 8, 6, 64, 64,
    )
    assert (STANDARD.C_mag, STANDARD.C_mag_head, STANDARD.C_mag_hidden) == (48, 12, 96)
    assert (STANDARD.n_heads, STANDARD.n_dual_path, STANDARD.F, STANDARD.alpha, STANDARD.F_down) == (4, 4, 201, 0.3, 100)


def test_config_json_round_trip_and_validation():
    assert ModelConfig.from_json(SMALL.to_json()) == SMALL
    doc = json.loads(SMALL.to_json())
    doc["kernel"] = 5
    with pytest.raises(ValueError):
        ModelConfig.from_dict(doc)
    with pytest.raises(ValueError):
        replace(SMALL, alpha=0.0)
    with pytest.raises(ValueError):
        replace(SMALL, C_pha=0)


def test_featurize_examples():
    spec = np.array([[0j, 8 * np.exp(1j * np.pi / 3)]])
    pair = featurize(spec)
    # 8 ** 0.3 from a 30-digit evaluation
    np.testing.assert_allclose(pair.mag.data[0, 0], [0.0, 1.8660659830736148], atol=1e-12)
    np.testing.assert_allclose(pair.pha.data[0, 0], [1.0, np.exp(1j * np.pi / 3)], atol=1e-12)
    moved = featurize(spec[:, 1:] * np.exp(0.7j))
    np.testing.assert_allclose(moved.pha.data, pair.pha.data[:, :, 1:] * np.exp(0.7j), atol=1e-12)
    np.testing.assert_array_equal(moved.mag.data, pair.mag.data[:, :, 1:])


def random_spec(rng, frames, bins=201):
    return rng.uniform(0.1, 2.0, (frames, bins)) * np.exp(1j * rng.uniform(-np.pi, np.pi, (frames, bins)))


@pytest.fixture(scope="module")
def tiny_net():
    return GRENet(TINY, seed=3)


@pytest.mark.parametrize("frames", [1, 2, 7])
def test_forward_shapes_and_ranges(tiny_net, frames):
    out = tiny_net(featurize(random_spec(np.random.default_rng(frames), frames)))
    assert out.mag.shape == (1, frames, 201) and out.pha.shape == (1, frames, 201)
    assert np.all(out.mag.data >= 0)
    np.testing.assert_allclose(np.abs(out.pha.data), 1.0, atol=1e-12)


def test_forward_rejects_bad_inputs(tiny_net):
    empty = SpectrumPair(Tensor(np.zeros((1, 0, 201))), Tensor(np.zeros((1, 0, 201), complex)))
    with pytest.raises(ValueError):
        tiny_net(empty)
    with pytest.raises(ValueError):
        tiny_net(featurize(random_spec(np.random.default_rng(0), 3, 101)))
    with pytest.raises(ValueError):
        GRENet(TINY, break_mode="loud")


def test_forward_is_bitwise_deterministic(tiny_net):
    pair = featurize(random_spec(np.random.default_rng(1), 4))
    a, b = tiny_net(pair), tiny_net(pair)
    assert np.array_equal(a.mag.data, b.mag.data) and np.array_equal(a.pha.data, b.pha.data)
    c = GRENet(TINY, seed=3)(pair)
    assert np.array_equal(a.pha.data, c.pha.data)


@pytest.mark.parametrize("theta", [0.41, np.pi / 2, 2.0])
def test_end_to_end_rotation_equivariance(theta):
    net = GRENet(SMALL, seed=0)
    spec = random_spec(np.random.default_rng(2), 6)
    a = net(featurize(spec))
    b = net(featurize(spec * np.exp(1j * theta)))
    residual = anti_wrap(np.angle(b.pha.data) - np.angle(a.pha.data) - theta).max()
    assert residual <= 1e-6
    assert np.linalg.norm(b.mag.data - a.mag.data) <= 1e-10 * np.linalg.norm(a.mag.data)


def test_system_level_rotation_of_spectrum(tiny_net):
    spec = random_spec(np.random.default_rng(3), 5)
    a = enhance_spectrum(spec, tiny_net)
    b = enhance_spectrum(spec * np.exp(0.9j), tiny_net)
    np.testing.assert_allclose(np.abs(b), np.abs(a), rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(b, a * np.exp(0.9j), rtol=1e-8, atol=1e-10)


def test_enhance_identity_is_round_trip():
    x = np.random.default_rng(4).standard_normal(12345)
    y = enhance(x, identity_model)
    assert y.shape == x.shape
    assert sig.snr_db(x, y) >= 100.0
    short = np.random.default_rng(5).standard_normal(150)
    assert sig.snr_db(short, enhance(short, identity_model)) >= 100.0
    with pytest.raises(ValueError):
        enhance(np.zeros(0), identity_model)


def test_enhance_random_network_is_finite(tiny_net):
    x = np.random.default_rng(6).standard_normal(16000)
    y = enhance(x, tiny_net)
    assert y.shape == x.shape and np.all(np.isfinite(y))


def test_param_counts():
    small, standard = param_count(SMALL), param_count(STANDARD)
    assert small < standard
    assert abs(standard / 1.55e6 - 1) <= 0.25


def test_doubling_magnitude_width_more_than_doubles_its_conv_params():
    def mag_conv_params(cfg):
        net = GRENet(cfg, seed=0)
        return sum(p.size for name, p in net.named_parameters() if name.endswith("w_mag") and "dense" in name)

    base = replace(TINY, C_mag=4)
    assert mag_conv_params(replace(base, C_mag=8)) > 2 * mag_conv_params(base)


def test_phase_only_decoding_passes_magnitude_through():
    net = GRENet(TINY, seed=0, decode_mag=False)
    pair = featurize(random_spec(np.random.default_rng(7), 3))
    assert np.array_equal(net(pair).mag.data, pair.mag.data)
    assert not any(name.startswith("head_mag") for name, _ in net.named_parameters())


def test_state_dict_round_trip(tmp_path):
    a = GRENet(TINY, seed=1)
    b = GRENet(TINY, seed=2)
    path = tmp_path / "w.npz"
    a.save(path)
    b.load(path)
    pair = featurize(random_spec(np.random.default_rng(8), 2))
    assert np.array_equal(a(pair).pha.data, b(pair).pha.data)
    with pytest.raises(KeyError):
        GRENet(TINY, decode_mag=False).load(path)
