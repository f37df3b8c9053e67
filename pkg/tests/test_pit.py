"""Permutation-invariant loss: exhaustive oracle, tie-breaks, gradients."""

import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirnet import numerics as nx
from mirnet.pit import MAX_SLOTS, assign, pit_loss


def ce_value(logits, label):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def test_two_slot_hand_example():
    l1 = nx.Tensor(np.array([2.0, 0.0, 0.0]))
    l2 = nx.Tensor(np.array([0.0, 2.0, 0.0]))
    out = pit_loss([l1, l2], (0, 1))
    unit = math.log(1.0 + 2.0 * math.exp(-2.0))
    assert out.mapping == (0, 1)
    assert out.loss.item() == pytest.approx(2 * unit, abs=1e-12)
    # the rejected swap scores each slot against the wrong label
    assert out.all_losses[1] == pytest.approx(2 * (2.0 + unit), abs=1e-12)


def test_swapped_labels_swap_the_mapping():
    l1 = nx.Tensor(np.array([2.0, 0.0, 0.0]))
    l2 = nx.Tensor(np.array([0.0, 2.0, 0.0]))
    direct = pit_loss([l1, l2], (0, 1))
    crossed = pit_loss([l1, l2], (1, 0))
    assert crossed.mapping == (1, 0)
    assert crossed.loss.item() == pytest.approx(direct.loss.item(), abs=1e-12)


def test_loss_is_invariant_to_slot_order():
    rng = np.random.default_rng(0)
    slots = [nx.Tensor(rng.normal(size=5)) for _ in range(3)]
    base = pit_loss(slots, (0, 2, 4)).loss.item()
    flipped = pit_loss(slots[::-1], (0, 2, 4)).loss.item()
    assert flipped == pytest.approx(base, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_matches_exhaustive_oracle(n, seed):
    rng = np.random.default_rng(seed)
    classes = n + rng.integers(0, 3)
    logits = [rng.normal(size=classes) * 3 for _ in range(n)]
    labels = tuple(rng.permutation(classes)[:n])
    out = pit_loss([nx.Tensor(l) for l in logits], labels)
    oracle = min(sum(ce_value(logits[i], labels[p[i]]) for i in range(n))
                 for p in permutations(range(n)))
    assert out.loss.item() == pytest.approx(oracle, abs=1e-12)


def test_tie_break_prefers_lexicographically_smallest():
    same = nx.Tensor(np.array([1.0, 1.0]))
    out = pit_loss([same, same], (0, 1))
    assert out.mapping == (0, 1)
    assert out.all_losses[0] == pytest.approx(out.all_losses[1], abs=0)


def test_single_slot():
    out = pit_loss([nx.Tensor(np.array([3.0, 0.0]))], (1,))
    assert out.mapping == (0,)
    assert out.loss.item() == pytest.approx(ce_value([3.0, 0.0], 1), abs=1e-12)


def test_validation_errors():
    l = nx.Tensor(np.zeros(3))
    with pytest.raises(ValueError, match="at least one"):
        pit_loss([], ())
    with pytest.raises(ValueError, match="distinct"):
        pit_loss([l, l], (1, 1))
    with pytest.raises(ValueError, match="labels"):
        pit_loss([l, l], (0,))
    too_many = [nx.Tensor(np.zeros(MAX_SLOTS + 1))] * (MAX_SLOTS + 1)
    with pytest.raises(ValueError, match="cap"):
        pit_loss(too_many, tuple(range(MAX_SLOTS + 1)))


def test_gradient_flows_only_through_winning_assignment():
    x1 = nx.Tensor(np.array([2.0, 0.0, 0.0]), requires_grad=True)
    x2 = nx.Tensor(np.array([0.0, 2.0, 0.0]), requires_grad=True)
    out = pit_loss([x1, x2], (0, 1))
    nx.backward(out.loss)
    pit_g1, pit_g2 = x1.grad.copy(), x2.grad.copy()

    # plain summed cross-entropy of the winning assignment
    y1 = nx.Tensor(np.array([2.0, 0.0, 0.0]), requires_grad=True)
    y2 = nx.Tensor(np.array([0.0, 2.0, 0.0]), requires_grad=True)
    nx.backward(nx.add(nx.cross_entropy(y1, 0), nx.cross_entropy(y2, 1)))
    np.testing.assert_allclose(pit_g1, y1.grad, atol=1e-15)
    np.testing.assert_allclose(pit_g2, y2.grad, atol=1e-15)


def test_all_losses_are_in_lexicographic_permutation_order():
    rng = np.random.default_rng(1)
    logits = [nx.Tensor(rng.normal(size=4)) for _ in range(3)]
    out = pit_loss(logits, (0, 1, 2))
    perms = list(permutations(range(3)))
    assert len(out.all_losses) == 6
    recomputed = [sum(ce_value(logits[i].data, p[i]) for i in range(3))
                  for p in perms]
    np.testing.assert_allclose(out.all_losses, recomputed, atol=1e-12)
    assert out.mapping == perms[int(np.argmin(recomputed))]


# ------------------------------------------------------------------ assign

def test_assign_hand_example():
    cost = [[1.0, 9.0], [9.0, 1.0]]
    assert assign(cost) == (0, 1)
    assert assign([[9.0, 1.0], [1.0, 9.0]]) == (1, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10_000))
def test_assign_matches_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    cost = rng.normal(size=(n, n))
    got = assign(cost)
    best = min(permutations(range(n)),
               key=lambda p: sum(cost[i, p[i]] for i in range(n)))
    assert sum(cost[i, got[i]] for i in range(n)) == pytest.approx(
        sum(cost[i, best[i]] for i in range(n)), abs=1e-12)


def test_assign_tie_breaks_lexicographically():
    assert assign(np.zeros((3, 3))) == (0, 1, 2)


def test_assign_validation():
    with pytest.raises(ValueError, match="square"):
        assign(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="empty"):
        assign(np.zeros((0, 0)))
    with pytest.raises(ValueError, match="finite"):
        assign([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="cap"):
        assign(np.zeros((9, 9)))
