"""Frame attention with half-swapped second branch."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirnet import numerics as nx
from mirnet.attention import (attend_mixture, attend_project, attention_scores,
                              channel_flip, export_attention, init_attention)


def build(channels=6, bins=3, seed=0):
    store = nx.ParameterStore()
    init_attention(np.random.default_rng(seed), channels, bins, store)
    return store


# ------------------------------------------------------------ channel_flip

def test_channel_flip_swaps_halves():
    v = np.array([[1.0], [2.0], [3.0], [4.0]])
    np.testing.assert_array_equal(channel_flip(v).data,
                                  [[3.0], [4.0], [1.0], [2.0]])


def test_channel_flip_is_an_involution():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(10, 7))
    np.testing.assert_array_equal(channel_flip(channel_flip(v)).data, v)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 9))
def test_channel_flip_is_the_half_rotation_permutation(half, frames):
    rng = np.random.default_rng(half * 17 + frames)
    v = rng.normal(size=(2 * half, frames))
    out = channel_flip(v).data
    np.testing.assert_array_equal(out, np.roll(v, half, axis=0))


def test_channel_flip_rejects_odd_channels():
    with pytest.raises(ValueError, match="even"):
        channel_flip(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        channel_flip(np.zeros(4))


# ----------------------------------------------------------------- scoring

def test_scores_one_weight_per_frame_in_open_interval():
    store = build()
    v = nx.Tensor(np.random.default_rng(1).normal(size=(6, 5)))
    w = attention_scores(v, store)
    assert w.data.shape == (5,)
    assert np.all((w.data > 0.0) & (w.data < 1.0))


def test_zero_parameters_give_half_weights():
    store = build()
    for p in store:
        p.value[:] = 0.0
    v = nx.Tensor(np.random.default_rng(2).normal(size=(6, 4)))
    np.testing.assert_array_equal(attention_scores(v, store).data, [0.5] * 4)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1e6, 1e6), st.integers(1, 6))
def test_scores_stay_in_open_interval_for_extreme_inputs(scale, frames):
    store = build()
    v = nx.Tensor(np.full((6, frames), scale))
    w = attention_scores(v, store).data
    assert np.all((w > 0.0) & (w < 1.0))


# -------------------------------------------------------------- projection

def test_attend_project_shape_and_zero_weights():
    store = build()
    v = nx.Tensor(np.random.default_rng(3).normal(size=(6, 5)))
    z = attend_project(v, nx.Tensor(np.full(5, 1e-300)), store)
    assert z.data.shape == (3, 5)
    # near-zero frame weights leave only the bias (zero at init)
    np.testing.assert_allclose(z.data, 0.0, atol=1e-290)


def test_attend_project_requires_one_weight_per_frame():
    store = build()
    v = nx.Tensor(np.zeros((6, 5)))
    with pytest.raises(ValueError, match="per frame"):
        attend_project(v, nx.Tensor(np.zeros(4)), store)


def test_attend_project_scales_linearly_in_weights():
    store = build()
    for p in store:
        if p.name.endswith(".b"):
            p.value[:] = 0.0
    rng = np.random.default_rng(4)
    v = nx.Tensor(np.abs(rng.normal(size=(6, 4))))
    w = nx.Tensor(np.full(4, 0.25))
    w2 = nx.Tensor(np.full(4, 0.5))
    z1 = attend_project(v, w, store).data
    z2 = attend_project(v, w2, store).data
    # positive pre-activations double when the weights double
    pos = z1 > 0
    np.testing.assert_allclose(z2[pos], 2.0 * z1[pos], rtol=1e-12)


# ------------------------------------------------------------ both branches

def test_swap_symmetry_is_bitwise():
    store = build(channels=10, bins=4, seed=7)
    rng = np.random.default_rng(8)
    for _ in range(20):
        v = nx.Tensor(rng.normal(size=(10, 6)) * rng.uniform(0.1, 30))
        w1, z1, w2, z2 = attend_mixture(v, store)
        fw1, fz1, fw2, fz2 = attend_mixture(channel_flip(v), store)
        np.testing.assert_array_equal(w1.data, fw2.data)
        np.testing.assert_array_equal(z1.data, fz2.data)
        np.testing.assert_array_equal(w2.data, fw1.data)
        np.testing.assert_array_equal(z2.data, fz1.data)


def test_branch_two_is_branch_one_of_flipped_input():
    store = build()
    v = nx.Tensor(np.random.default_rng(9).normal(size=(6, 5)))
    w1, z1, w2, z2 = attend_mixture(v, store)
    flipped = channel_flip(v)
    np.testing.assert_array_equal(w2.data, attention_scores(flipped, store).data)
    np.testing.assert_array_equal(
        z2.data, attend_project(flipped, attention_scores(flipped, store),
                                store).data)


def test_branches_share_their_parameters():
    store = build()
    assert store.names() == ["att.fc1.w", "att.fc1.b", "att.fc2.w",
                             "att.fc2.b", "att.proj.w", "att.proj.b"]
    v = nx.Tensor(np.random.default_rng(10).normal(size=(6, 5)),
                  requires_grad=True)
    _, z1, _, z2 = attend_mixture(v, store)
    nx.backward(nx.total(nx.add(z1, z2)))
    # both branches contribute gradient to the single shared projection
    assert np.any(store["att.proj.w"].grad != 0.0)


# ----------------------------------------------------------------- export

def test_export_round_trips_float64_exactly(tmp_path):
    w = np.random.default_rng(11).uniform(0, 1, size=13)
    path = tmp_path / "weights.txt"
    export_attention(w, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 13
    back = np.array([float(s) for s in lines])
    np.testing.assert_array_equal(back, w)


def test_export_empty_weights_writes_empty_file(tmp_path):
    path = tmp_path / "empty.txt"
    export_attention(np.zeros(0), path)
    assert path.read_text() == ""


def test_export_rejects_matrices(tmp_path):
    with pytest.raises(ValueError):
        export_attention(np.zeros((2, 2)), tmp_path / "bad.txt")
