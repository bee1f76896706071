import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scil.labeling import (
    ActionSpec,
    Continuous,
    Discrete,
    batch_labels,
    decode_label,
    discretize_dimension,
    encode_label,
    normalize_continuous,
)


@pytest.mark.parametrize(
    "value, lo, hi, expected",
    [(0.0, 0.0, 1.0, 0.0), (-1.0, -1.0, 1.0, 0.0), (0.5, 0.0, 2.0, 0.25), (5.0, 0.0, 1.0, 1.0), (-3.0, 0.0, 1.0, 0.0)],
)
def test_normalize_continuous(value, lo, hi, expected):
    assert normalize_continuous(value, lo, hi) == expected


@pytest.mark.parametrize("args", [(math.nan, 0.0, 1.0), (math.inf, 0.0, 1.0), (0.5, 1.0, 1.0), (0.5, 2.0, 1.0)])
def test_normalize_continuous_errors(args):
    with pytest.raises(ValueError):
        normalize_continuous(*args)


@pytest.mark.parametrize("u, bins, expected", [(0.0, 5, 0), (0.5, 5, 2), (1.0, 5, 4), (0.125, 5, 1), (0.375, 5, 2)])
def test_discretize_dimension(u, bins, expected):
    # 0.125*4 = 0.5 and 0.375*4 = 1.5 exercise half-away-from-zero rounding
    assert discretize_dimension(u, bins) == expected


@pytest.mark.parametrize("u", [-0.01, 1.01, math.nan])
def test_discretize_rejects_out_of_range(u):
    with pytest.raises(ValueError):
        discretize_dimension(u, 5)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(2, 50))
def test_discretize_monotone(u, w, bins):
    lo, hi = sorted((u, w))
    assert discretize_dimension(lo, bins) <= discretize_dimension(hi, bins) <= bins - 1


@pytest.mark.parametrize(
    "v, bases, expected",
    [((0, 0, 0), (5, 5, 3), 0), ((2, 1), (5, 5), 7), ((1, 2, 1), (2, 3, 2), 11)],
)
def test_encode_label_examples(v, bases, expected):
    assert encode_label(v, bases) == expected


def test_decode_label_examples():
    assert decode_label(0, (5, 5, 3)) == (0, 0, 0)
    assert decode_label(7, (5, 5)) == (2, 1)


def _brute_force_label(v, bases):
    # independent: enumerate the box in little-endian order and find v's position
    for position, digits in enumerate(itertools.product(*(range(b) for b in reversed(bases)))):
        if tuple(reversed(digits)) == tuple(v):
            return position
    raise AssertionError


@pytest.mark.parametrize("bases", [(5, 5, 3), (2, 3, 2), (7,), (1, 4, 1, 3), (10, 10, 10, 10)])
def test_encode_is_bijection(bases):
    size = math.prod(bases)
    assert size <= 10**4
    seen = set()
    for v in itertools.product(*(range(b) for b in bases)):
        label = encode_label(v, bases)
        assert 0 <= label < size
        assert decode_label(label, bases) == v
        seen.add(label)
    assert seen == set(range(size))


@pytest.mark.parametrize("bases", [(5, 5, 3), (2, 3, 2)])
def test_encode_matches_enumeration(bases):
    for v in itertools.product(*(range(b) for b in bases)):
        assert encode_label(v, bases) == _brute_force_label(v, bases)


def test_round_trip_all_labels():
    for label in range(75):
        assert encode_label(decode_label(label, (5, 5, 3)), (5, 5, 3)) == label


def test_encode_errors():
    with pytest.raises(ValueError):
        encode_label((5, 0), (5, 5))
    with pytest.raises(ValueError):
        encode_label((0,), (5, 5))
    with pytest.raises(ValueError):
        decode_label(25, (5, 5))
    with pytest.raises(ValueError):
        decode_label(-1, (5, 5))
    with pytest.raises(OverflowError):
        encode_label((0, 0), (2**40, 2**40))


def test_encode_near_uint64_limit():
    bases = (2**32, 2**32 - 1)
    v = (2**32 - 1, 2**32 - 2)
    label = encode_label(v, bases)
    assert label == (2**32 - 1) + (2**32 - 2) * 2**32
    assert decode_label(label, bases) == v


@given(st.lists(st.integers(1, 9), min_size=1, max_size=5), st.data())
def test_monotone_in_each_digit(bases, data):
    v = [data.draw(st.integers(0, b - 1)) for b in bases]
    d = data.draw(st.integers(0, len(bases) - 1))
    if v[d] + 1 < bases[d]:
        w = list(v)
        w[d] += 1
        assert encode_label(w, bases) > encode_label(v, bases)


def test_action_spec_validation():
    with pytest.raises(ValueError):
        Continuous(1.0, 1.0, 5)
    with pytest.raises(ValueError):
        Continuous(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        Discrete(0)
    with pytest.raises(ValueError):
        ActionSpec(tuple(Discrete(2**16) for _ in range(5)))
    spec = ActionSpec((Continuous(-1, 1, 5), Discrete(3)))
    assert spec.bases == (5, 3)
    assert spec.label_space_size == 15
    assert ActionSpec.from_list(spec.to_list()) == spec
    with pytest.raises(ValueError):
        ActionSpec.from_list([{"kind": "discrete", "cardinality": 2, "extra": 1}])
    with pytest.raises(ValueError):
        ActionSpec.from_list([{"kind": "wavelet"}])


MIXED = ActionSpec((Continuous(0.0, 1.0, 5), Discrete(2)))


def test_batch_labels_mixed_example():
    actions = np.array([[0.5, 1.0], [0.5, 0.0]])
    assert batch_labels(actions, MIXED).tolist() == [7, 2]


def test_batch_labels_nearby_continuous_values_share_a_label():
    spec = ActionSpec((Continuous(0.0, 1.0, 5),))
    labels = batch_labels(np.array([[0.50], [0.55]]), spec)
    assert labels[0] == labels[1]


def test_batch_labels_does_not_touch_input():
    actions = np.array([[0.43, 1.0], [2.0, 0.0]])
    before = actions.copy()
    batch_labels(actions, MIXED)
    assert np.array_equal(actions, before)


def test_batch_labels_errors():
    with pytest.raises(ValueError):
        batch_labels(np.zeros((3, 3)), MIXED)
    with pytest.raises(ValueError):
        batch_labels(np.array([[0.5, 2.0]]), MIXED)
    with pytest.raises(ValueError):
        batch_labels(np.array([[0.5, 0.5]]), MIXED)


def test_batch_labels_agree_with_scalar_path():
    rng = np.random.default_rng(3)
    spec = ActionSpec((Continuous(-1, 1, 5), Continuous(-2, 3, 4), Discrete(3), Discrete(2)))
    actions = np.column_stack([rng.uniform(-1.5, 1.5, 200), rng.uniform(-2, 3, 200), rng.integers(0, 3, 200), rng.integers(0, 2, 200)])
    labels = batch_labels(actions, spec)
    for row, label in zip(actions, labels):
        v = [
            discretize_dimension(normalize_continuous(row[0], -1, 1), 5),
            discretize_dimension(normalize_continuous(row[1], -2, 3), 4),
            int(row[2]),
            int(row[3]),
        ]
        assert encode_label(v, spec.bases) == int(label)


@given(st.permutations(list(range(12))))
def test_batch_labels_permutation_equivariant(perm):
    rng = np.random.default_rng(0)
    actions = np.column_stack([rng.uniform(0, 1, 12), rng.integers(0, 2, 12)])
    labels = batch_labels(actions, MIXED)
    assert np.array_equal(batch_labels(actions[list(perm)], MIXED), labels[list(perm)])
