"""Residual 2-D backbone, classifier head, and full model assembly."""

import numpy as np
import pytest

from mirnet import numerics as nx
from mirnet.embedder import (BackboneConfig, classify, embed, init_backbone,
                             init_classifier)
from mirnet.frontend import Spectrogram
from mirnet.model import MirnetModel, ModelConfig

from conftest import TINY_FEATURES, tiny_model_config


def build(cfg, seed=0):
    store = nx.ParameterStore()
    init_backbone(np.random.default_rng(seed), cfg, store)
    return store


def test_embedding_has_requested_dimension():
    cfg = BackboneConfig(widths=(4, 6), blocks=1, embed_dim=5)
    store = build(cfg)
    e = embed(np.random.default_rng(0).normal(size=(12, 8)), store, cfg)
    assert e.data.shape == (5,)


def test_zero_parameters_give_zero_embedding():
    cfg = BackboneConfig(widths=(4, 6), blocks=1, embed_dim=5)
    store = build(cfg)
    for p in store:
        p.value[:] = 0.0
    e = embed(np.random.default_rng(1).normal(size=(12, 8)), store, cfg)
    np.testing.assert_array_equal(e.data, np.zeros(5))


def test_min_frames_boundary():
    cfg = BackboneConfig(widths=(4, 6, 8), blocks=0, embed_dim=4)
    assert cfg.min_frames == 4
    store = build(cfg)
    embed(np.zeros((16, 4)), store, cfg)  # boundary survives
    with pytest.raises(ValueError, match="stride-2"):
        embed(np.zeros((16, 3)), store, cfg)


def test_embed_rejects_non_matrix_input():
    cfg = BackboneConfig(widths=(4,), blocks=0, embed_dim=4)
    with pytest.raises(ValueError):
        embed(np.zeros(8), build(cfg), cfg)


def test_parameter_names_follow_stage_block_scheme():
    cfg = BackboneConfig(widths=(4, 6), blocks=2, embed_dim=5)
    store = build(cfg)
    names = store.names()
    assert names[0] == "emb.s1.entry.w"
    assert "emb.s2.block2.conv2.b" in names
    assert names[-2:] == ["emb.head.w", "emb.head.b"]
    # per stage: entry (w, b) + 2 blocks * 2 convs * (w, b); plus the head
    assert len(names) == 2 * (2 + 2 * 4) + 2


def test_zero_blocks_is_entry_only():
    cfg = BackboneConfig(widths=(3, 5), blocks=0, embed_dim=2)
    store = build(cfg)
    assert all(".block" not in n for n in store.names())
    e = embed(np.random.default_rng(2).normal(size=(8, 6)), store, cfg)
    assert e.data.shape == (2,)


def test_residual_blocks_change_the_output():
    cfg = BackboneConfig(widths=(3, 5), blocks=1, embed_dim=2)
    store = build(cfg, seed=4)
    z = np.random.default_rng(5).normal(size=(8, 6))
    with_blocks = embed(z, store, cfg).data.copy()
    for p in store:
        if ".block" in p.name:
            p.value[:] = 0.0
    without = embed(z, store, cfg).data
    assert not np.array_equal(with_blocks, without)


def test_faithful_preset_widths():
    cfg = BackboneConfig.faithful()
    assert cfg.widths == (64, 128, 256, 512)
    assert cfg.blocks == 2 and cfg.embed_dim == 256


def test_config_validation():
    with pytest.raises(ValueError):
        BackboneConfig(widths=())
    with pytest.raises(ValueError):
        BackboneConfig(widths=(4, 0))
    with pytest.raises(ValueError):
        BackboneConfig(blocks=-1)
    with pytest.raises(ValueError):
        BackboneConfig(embed_dim=0)


def test_classifier_hand_values():
    store = nx.ParameterStore()
    store.add("cls.w", np.array([[1.0, 0.0], [0.0, 2.0]]))
    store.add("cls.b", np.array([0.5, -0.5]))
    y = classify(nx.Tensor(np.array([3.0, 4.0])), store)
    np.testing.assert_array_equal(y.data, [3.5, 7.5])


def test_classifier_needs_two_classes():
    store = nx.ParameterStore()
    with pytest.raises(ValueError):
        init_classifier(np.random.default_rng(0), 4, 1, store)


# ------------------------------------------------------------- full model

def test_model_init_is_seed_deterministic():
    cfg = tiny_model_config()
    a = MirnetModel(cfg, seed=3)
    b = MirnetModel(cfg, seed=3)
    for name in a.params.names():
        np.testing.assert_array_equal(a.params[name].value, b.params[name].value)
    c = MirnetModel(cfg, seed=4)
    assert any(not np.array_equal(a.params[n].value, c.params[n].value)
               for n in a.params.names())


def test_model_forward_shapes(tiny_model, rng):
    spec = Spectrogram(rng.normal(size=(TINY_FEATURES.bins, 12)))
    out = tiny_model.forward_mixture(spec)
    assert out.identity_1.data.shape == (8,)
    assert out.identity_2.data.shape == (8,)
    assert out.logits_1.data.shape == (3,)
    assert out.logits_2.data.shape == (3,)
    assert out.weights_1.data.shape == (12,)
    assert out.weights_2.data.shape == (12,)


def test_model_normalizes_before_encoding(tiny_model, rng):
    from mirnet import encoder as enc
    from mirnet.frontend import normalize_log_spectrogram

    spec = Spectrogram(rng.normal(3.0, 5.0, size=(TINY_FEATURES.bins, 9)))
    direct = enc.encode(nx.Tensor(normalize_log_spectrogram(spec).values),
                        tiny_model.params, tiny_model.config.encoder)
    np.testing.assert_array_equal(tiny_model.encode(spec).data, direct.data)


def test_identity_pair_records_no_gradients(tiny_model, rng):
    spec = Spectrogram(rng.normal(size=(TINY_FEATURES.bins, 8)))
    e1, e2 = tiny_model.identity_pair(spec)
    assert isinstance(e1, np.ndarray) and isinstance(e2, np.ndarray)
    assert e1.shape == (8,) and e2.shape == (8,)
    for p in tiny_model.params:
        np.testing.assert_array_equal(p.grad, np.zeros_like(p.grad))


def test_model_config_rejects_bin_mismatch():
    from mirnet.encoder import EncoderConfig

    with pytest.raises(ValueError, match="bins"):
        ModelConfig(features=TINY_FEATURES,
                    encoder=EncoderConfig.scaled(bins=99, scale=64))


def test_model_config_derives_encoder_from_features():
    cfg = ModelConfig(features=TINY_FEATURES)
    assert cfg.encoder.bins == TINY_FEATURES.bins
    assert cfg.encoder.latent_channels == 2 * TINY_FEATURES.bins
