import numpy as np
import pytest
from hypothesis import given, strategies as st

from balsens import Dataset, Interval, flip_treatment, odds_ratio, standardize, validate
from balsens.errors import (
    DomainError,
    EmptyGroupError,
    NonBinaryTreatmentError,
    NonFiniteError,
    ValidationError,
)


def test_validate_counts():
    d = validate(Dataset(y=[1.0, 2.0, 3.0], z=[1, 0, 1],
                         x=[[0.0], [1.0], [2.0]], names=("a",)))
    assert d.n == 3 and d.n1 == 2 and d.n0 == 1 and d.d == 1


def test_validate_empty_group():
    with pytest.raises(EmptyGroupError):
        validate(Dataset(y=[1.0, 2.0, 3.0], z=[1, 1, 1],
                         x=[[0.0], [1.0], [2.0]], names=("a",)))


def test_validate_nan_outcome():
    with pytest.raises(NonFiniteError):
        validate(Dataset(y=[1.0, np.nan], z=[1, 0], x=[[0.0], [1.0]], names=("a",)))


def test_validate_non_binary_treatment():
    with pytest.raises(NonBinaryTreatmentError):
        validate(Dataset(y=[1.0, 2.0], z=[1, 2], x=[[0.0], [1.0]], names=("a",)))


def test_validate_shape_and_name_mismatch():
    with pytest.raises(ValidationError):
        validate(Dataset(y=[1.0, 2.0], z=[1, 0], x=[[0.0]], names=("a",)))
    with pytest.raises(ValidationError):
        validate(Dataset(y=[1.0, 2.0], z=[1, 0], x=[[0.0], [1.0]], names=("a", "b")))


def test_validate_idempotent():
    d = validate(Dataset(y=[1.0, 2.0, 3.0], z=[1, 0, 1],
                         x=[[0.0], [1.0], [2.0]], names=("a",)))
    d2 = validate(d)
    np.testing.assert_array_equal(d.y, d2.y)
    np.testing.assert_array_equal(d.z, d2.z)
    np.testing.assert_array_equal(d.x, d2.x)


def test_standardize_hand_example():
    # column (1,2,3) with the n-1 sd convention has sd 1 -> (-1, 0, 1)
    d = validate(Dataset(y=[0.0, 0.0, 0.0], z=[1, 0, 1],
                         x=[[1.0], [2.0], [3.0]], names=("a",)))
    scaled, scaling = standardize(d)
    np.testing.assert_allclose(scaled.x[:, 0], [-1.0, 0.0, 1.0])
    assert scaling.sd[0] == pytest.approx(1.0)
    assert not scaling.constant[0]


def test_standardize_idempotent():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    d = validate(Dataset(y=np.zeros(50), z=[1] * 25 + [0] * 25, x=x,
                         names=("a", "b", "c")))
    once, _ = standardize(d)
    twice, _ = standardize(once)
    np.testing.assert_allclose(once.x, twice.x, atol=1e-10)


def test_standardize_constant_column_flagged():
    d = validate(Dataset(y=[0.0, 0.0, 0.0], z=[1, 0, 1],
                         x=[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]], names=("c", "v")))
    scaled, scaling = standardize(d)
    assert scaling.constant[0] and not scaling.constant[1]
    np.testing.assert_array_equal(scaled.x[:, 0], 0.0)


def test_standardize_inverse_roundtrip():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((20, 2)) * 3.0 + 5.0
    d = validate(Dataset(y=np.zeros(20), z=[1] * 10 + [0] * 10, x=x,
                         names=("a", "b")))
    scaled, scaling = standardize(d)
    np.testing.assert_allclose(scaling.inverse(scaled.x), x, atol=1e-12)


def test_flip_treatment_involution():
    d = validate(Dataset(y=[1.0, 2.0, 3.0], z=[1, 0, 1],
                         x=[[0.0], [1.0], [2.0]], names=("a",)))
    flipped = flip_treatment(d)
    assert flipped.n1 == d.n0
    np.testing.assert_array_equal(flip_treatment(flipped).z, d.z)


def test_odds_ratio_examples():
    assert odds_ratio(0.5, 0.5) == pytest.approx(1.0)
    assert odds_ratio(2.0 / 3.0, 0.5) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        odds_ratio(0.0, 0.5)
    with pytest.raises(DomainError):
        odds_ratio(0.5, 1.0)


@given(p1=st.floats(0.01, 0.99), p2=st.floats(0.01, 0.99))
def test_odds_ratio_reciprocal(p1, p2):
    assert odds_ratio(p1, p2) * odds_ratio(p2, p1) == pytest.approx(1.0, abs=1e-12)


def test_interval_basics():
    iv = Interval(1.0, 3.0)
    assert iv.contains(1.0) and iv.contains(3.0) and not iv.contains(3.5)
    assert iv.width == 2.0
    with pytest.raises(DomainError):
        Interval(2.0, 1.0)


def test_dataset_take():
    d = validate(Dataset(y=[1.0, 2.0, 3.0], z=[1, 0, 1],
                         x=[[0.0], [1.0], [2.0]], names=("a",)))
    sub = d.take(np.array([2, 0]))
    np.testing.assert_array_equal(sub.y, [3.0, 1.0])
    np.testing.assert_array_equal(sub.z, [1, 1])
