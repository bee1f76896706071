import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from helpers import random_batch, supcon_fd
from scil.network import relative_error
from scil.supcon import (
    LossParams,
    positive_mask,
    supcon_backward,
    supcon_forward,
    supcon_loss_and_grad,
    supcon_oracle,
)

UNIT = LossParams(1.0, 1.0)
WORKED = (np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([0, 0, 1]))
# anchors 1 and 2: -log(e / (e + 1)); anchor 3 has no positive
WORKED_VALUE = 2 * math.log(1 + math.exp(-1)) / 3


def test_positive_mask_examples():
    assert positive_mask([0, 0, 1]).tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]
    assert not positive_mask([3, 1, 2, 0]).any()
    full = positive_mask([5, 5, 5, 5])
    assert np.array_equal(full, 1 - np.eye(4))
    with pytest.raises(ValueError):
        positive_mask([1])


@given(st.lists(st.integers(0, 3), min_size=2, max_size=20))
def test_positive_mask_invariants(labels):
    mask = positive_mask(labels)
    assert np.array_equal(mask, mask.T)
    assert not np.diag(mask).any()
    lab = np.array(labels)
    expected = (lab[:, None] == lab[None, :]) & ~np.eye(len(lab), dtype=bool)
    assert np.array_equal(mask.astype(bool), expected)


def test_worked_example():
    emb, labels = WORKED
    assert supcon_forward(emb, labels, UNIT) == pytest.approx(0.208841, abs=1e-6)
    assert supcon_forward(emb, labels, UNIT) == pytest.approx(WORKED_VALUE, abs=1e-12)
    assert supcon_oracle(emb, labels, UNIT) == pytest.approx(WORKED_VALUE, abs=1e-12)


def test_all_distinct_labels_give_zero():
    rng = np.random.default_rng(1)
    emb = rng.normal(size=(6, 3))
    labels = np.arange(6)
    assert supcon_forward(emb, labels) == 0.0
    assert supcon_oracle(emb, labels) == 0.0
    assert not supcon_backward(emb, labels).any()


def test_pair_with_same_label_is_zero():
    rng = np.random.default_rng(2)
    for _ in range(10):
        emb = rng.normal(size=(2, 5))
        # exact up to eps * exp((1 - cos) / tau) <= 1e-12 * e^2 at tau = 1
        assert 0 <= supcon_forward(emb, [4, 4], UNIT) < 1e-11


def test_eps_sits_after_the_max_shift():
    # the denominator is exp(cos/tau - 1/tau) + 1e-12 for a 2-row batch
    emb = np.array([[1.0, 0.0], [-0.5, math.sqrt(0.75)]])
    tau = 0.07
    expected = math.log(1 + 1e-12 * math.exp((1 + 0.5) / tau))
    assert supcon_forward(emb, [0, 0], LossParams(tau, tau)) == pytest.approx(expected, rel=1e-9)
    assert supcon_oracle(emb, [0, 0], LossParams(tau, tau)) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("seed", range(100))
def test_forward_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 65))
    emb, labels = random_batch(rng, n, int(rng.integers(2, 17)), int(rng.integers(1, 9)))
    params = LossParams(float(rng.choice([0.07, 0.5, 1.0])), 0.07)
    assert abs(supcon_forward(emb, labels, params) - supcon_oracle(emb, labels, params)) < 1e-9


def test_gradient_example_batch():
    rng = np.random.default_rng(0)
    emb, labels = random_batch(rng, 8, 4, 3)
    params = LossParams(0.07, 0.07)
    grad = supcon_backward(emb, labels, params)
    assert relative_error(grad, supcon_fd(emb, labels, params)).max() < 1e-4


@pytest.mark.parametrize("seed", range(25))
def test_gradient_random_shapes(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 33))
    emb, labels = random_batch(rng, n, int(rng.integers(2, 17)), int(rng.integers(1, n + 1)))
    params = LossParams(float(rng.choice([0.07, 0.2, 1.0])), float(rng.choice([0.07, 1.0])))
    grad = supcon_backward(emb, labels, params)
    assert relative_error(grad, supcon_fd(emb, labels, params)).max() < 1e-4


def test_swapping_same_label_rows_swaps_gradients():
    rng = np.random.default_rng(5)
    emb, _ = random_batch(rng, 6, 3, 1)
    labels = np.array([0, 1, 0, 2, 1, 0])
    grad = supcon_backward(emb, labels)
    swapped = emb[[2, 1, 0, 3, 4, 5]]
    assert np.allclose(supcon_backward(swapped, labels), grad[[2, 1, 0, 3, 4, 5]], rtol=1e-12, atol=1e-14)


def test_loss_and_grad_consistent_with_separate_calls():
    rng = np.random.default_rng(9)
    emb, labels = random_batch(rng, 10, 4, 3)
    loss, grad = supcon_loss_and_grad(emb, labels)
    assert loss == supcon_forward(emb, labels)
    assert np.array_equal(grad, supcon_backward(emb, labels))


@pytest.mark.parametrize(
    "emb, labels",
    [
        (np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), [0, 0, 1]),
        (np.array([[1.0, np.nan], [0.0, 1.0]]), [0, 0]),
        (np.array([[1.0, 0.0]]), [0]),
        (np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 0, 1]),
    ],
)
def test_invalid_inputs(emb, labels):
    for fn in (supcon_forward, supcon_backward, supcon_oracle):
        with pytest.raises(ValueError):
            fn(emb, labels)


def test_zero_row_error_names_row():
    with pytest.raises(ValueError, match="row 1"):
        supcon_forward(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), [0, 0, 1])


def test_loss_params_validation():
    with pytest.raises(ValueError):
        LossParams(0.0, 1.0)
    with pytest.raises(ValueError):
        LossParams(1.0, -1.0)


batches = st.integers(2, 24).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, (n, 4), elements=st.floats(-3, 3)).filter(lambda a: np.all(np.linalg.norm(a, axis=1) > 1e-3)),
        arrays(np.int64, n, elements=st.integers(0, 3)),
    )
)


@settings(max_examples=60, deadline=None)
@given(batches, st.floats(0.05, 2.0))
def test_non_negative(batch, tau):
    emb, labels = batch
    assert supcon_forward(emb, labels, LossParams(tau, tau)) >= -1e-12


@settings(max_examples=60, deadline=None)
@given(batches, st.data())
def test_row_scale_invariance(batch, data):
    emb, labels = batch
    scales = np.array(data.draw(st.lists(st.floats(0.01, 100), min_size=len(emb), max_size=len(emb))))
    a = supcon_forward(emb, labels, LossParams(0.5, 0.5))
    b = supcon_forward(emb * scales[:, None], labels, LossParams(0.5, 0.5))
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(batches, st.randoms(use_true_random=False))
def test_permutation_invariance(batch, rnd):
    emb, labels = batch
    perm = list(range(len(emb)))
    rnd.shuffle(perm)
    a = supcon_forward(emb, labels)
    assert supcon_forward(emb[perm], labels[perm]) == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_temperature_ratio_scaling():
    rng = np.random.default_rng(4)
    emb, labels = random_batch(rng, 12, 5, 3)
    base = supcon_forward(emb, labels, LossParams(0.3, 0.3))
    for base_t in (0.1, 0.6, 3.0):
        assert supcon_forward(emb, labels, LossParams(0.3, base_t)) == pytest.approx(base * 0.3 / base_t, rel=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_step_decreases_loss(seed):
    rng = np.random.default_rng(200 + seed)
    emb, labels = random_batch(rng, 16, 6, 4)
    params = LossParams(0.5, 0.5)
    loss, grad = supcon_loss_and_grad(emb, labels, params)
    assert loss > 0
    stepped = emb - 1e-4 * grad / np.linalg.norm(grad)
    assert supcon_forward(stepped, labels, params) < loss


def test_all_anchors_without_positives_contribute_nothing_in_mixed_batch():
    rng = np.random.default_rng(8)
    emb = rng.normal(size=(5, 3))
    labels = np.array([0, 0, 1, 2, 3])
    # only anchors 0 and 1 have positives; removing the others from the average
    full = supcon_forward(emb, labels, UNIT)
    oracle = supcon_oracle(emb, labels, UNIT)
    assert full == pytest.approx(oracle, abs=1e-12)
    grad = supcon_backward(emb, labels, UNIT)
    assert np.isfinite(full) and np.all(np.isfinite(grad))
