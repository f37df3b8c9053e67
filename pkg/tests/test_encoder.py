"""Strided-free conv1d encoder: geometry, init statistics, scaling."""

import numpy as np
import pytest

from mirnet import numerics as nx
from mirnet.encoder import (FAITHFUL_CHANNELS, KERNELS, EncoderConfig,
                            encode, init_encoder)


def build(config, seed=0):
    store = nx.ParameterStore()
    init_encoder(np.random.default_rng(seed), config, store)
    return store


def test_default_config_matches_reference_stack():
    cfg = EncoderConfig()
    assert cfg.channels == (512, 512, 512, 512, 1500, 514)
    assert cfg.kernels == (5, 3, 3, 1, 1, 1)
    assert cfg.latent_channels == 2 * cfg.bins == 514


def test_first_layer_parameter_count():
    # 512 filters over 257 bins with kernel 5, plus biases
    cfg = EncoderConfig()
    store = build(cfg)
    n = store["enc.conv1.w"].value.size + store["enc.conv1.b"].value.size
    assert n == 512 * 257 * 5 + 512 == 658432


def test_scaled_keeps_latent_at_twice_bins():
    cfg = EncoderConfig.scaled(bins=33, scale=64)
    assert cfg.channels == (8, 8, 8, 8, 23, 66)
    assert cfg.latent_channels == 66
    store = build(cfg)
    y = encode(np.zeros((33, 7)), store, cfg)
    assert y.data.shape == (66, 7)


def test_output_shape_preserves_frames():
    cfg = EncoderConfig.scaled(bins=17, scale=128)
    store = build(cfg)
    for frames in (1, 5, 23):
        y = encode(np.random.default_rng(1).normal(size=(17, frames)), store, cfg)
        assert y.data.shape == (cfg.latent_channels, frames)


def test_zero_parameters_give_zero_output():
    cfg = EncoderConfig.scaled(bins=9, scale=256)
    store = build(cfg)
    for p in store:
        p.value[:] = 0.0
    y = encode(np.random.default_rng(0).normal(size=(9, 4)), store, cfg)
    np.testing.assert_array_equal(y.data, np.zeros(y.data.shape))


def test_init_bounds_and_zero_biases():
    cfg = EncoderConfig.scaled(bins=13, scale=32)
    store = build(cfg, seed=5)
    c_in = cfg.bins
    for i, (c_out, k) in enumerate(zip(cfg.channels, cfg.kernels), start=1):
        w = store[f"enc.conv{i}.w"].value
        bound = np.sqrt(1.0 / (c_in * k))
        assert w.shape == (c_out, c_in, k)
        assert np.abs(w).max() <= bound
        # uniform(-a, a) has std a/sqrt(3); allow wide sampling slack
        assert 0.5 * bound / np.sqrt(3) < w.std() < 1.5 * bound / np.sqrt(3)
        np.testing.assert_array_equal(store[f"enc.conv{i}.b"].value,
                                      np.zeros(c_out))
        c_in = c_out


def test_init_is_seed_deterministic():
    cfg = EncoderConfig.scaled(bins=9, scale=128)
    a, b = build(cfg, seed=3), build(cfg, seed=3)
    for name in a.names():
        np.testing.assert_array_equal(a[name].value, b[name].value)


def test_encode_rejects_wrong_bin_count():
    cfg = EncoderConfig.scaled(bins=9, scale=128)
    store = build(cfg)
    with pytest.raises(ValueError, match="9"):
        encode(np.zeros((10, 4)), store, cfg)


def test_config_validation():
    with pytest.raises(ValueError, match="even"):
        EncoderConfig(channels=(4, 4, 4, 4, 6, 9), kernels=KERNELS)
    with pytest.raises(ValueError, match="odd"):
        EncoderConfig(channels=FAITHFUL_CHANNELS, kernels=(4, 3, 3, 1, 1, 1))
    with pytest.raises(ValueError):
        EncoderConfig(channels=(4, 4), kernels=(3, 3, 3))
    with pytest.raises(ValueError):
        EncoderConfig.scaled(scale=0)


def test_negative_values_pass_through_leaky_slope():
    # single 1x1 layer with identity-ish weights isolates the activation
    cfg = EncoderConfig(bins=2, channels=(2,), kernels=(1,))
    store = nx.ParameterStore()
    store.add("enc.conv1.w", np.eye(2).reshape(2, 2, 1))
    store.add("enc.conv1.b", np.zeros(2))
    y = encode(np.array([[-1.0, 2.0], [3.0, -4.0]]), store, cfg)
    np.testing.assert_allclose(y.data, [[-0.2, 2.0], [3.0, -0.8]])
