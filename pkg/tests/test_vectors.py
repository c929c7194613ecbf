import numpy as np
import pytest

from splitflow.errors import DimensionMismatchError, NonFiniteError
from splitflow.vectors import as_vector, axpy, inner, norm, vector, zeros


def test_inner_examples():
    assert inner(vector([1, 0]), vector([0, 1])) == 0.0
    assert inner(vector([2, 3]), vector([2, 3])) == 13.0


def test_norm_examples():
    assert norm(vector([3, 4])) == 5.0
    assert norm(zeros(3)) == 0.0


def test_axpy_examples():
    assert axpy(2.0, vector([1, 0]), vector([0, 1])).tolist() == [2.0, 1.0]
    assert axpy(0.0, vector([5, 5]), vector([1, 2])).tolist() == [1.0, 2.0]


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        inner(vector([1, 2]), vector([1, 2, 3]))
    with pytest.raises(DimensionMismatchError):
        axpy(1.0, vector([1]), vector([1, 2]))


def test_vector_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        vector([1.0, float("nan")])
    with pytest.raises(NonFiniteError):
        vector([float("inf")])


def test_axpy_flags_nonfinite_result():
    big = vector([1e308, 0.0])
    with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
        axpy(1e10, big, big)


def test_as_vector_is_contiguous_float64():
    v = as_vector([1, 2, 3])
    assert v.dtype == np.float64
    assert v.flags["C_CONTIGUOUS"]


def test_inner_symmetric_and_linear(rng):
    for _ in range(100):
        a = rng.standard_normal(8)
        b = rng.standard_normal(8)
        c = rng.standard_normal(8)
        t = rng.standard_normal()
        assert inner(a, b) == pytest.approx(inner(b, a), rel=1e-12, abs=1e-12)
        lhs = inner(a, t * b + c)
        rhs = t * inner(a, b) + inner(a, c)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_cauchy_schwarz(rng):
    for _ in range(200):
        a = rng.standard_normal(6)
        b = rng.standard_normal(6)
        assert abs(inner(a, b)) <= norm(a) * norm(b) + 1e-12


def test_parallelogram_law(rng):
    for _ in range(100):
        a = rng.standard_normal(5)
        b = rng.standard_normal(5)
        lhs = norm(a + b) ** 2 + norm(a - b) ** 2
        rhs = 2.0 * (norm(a) ** 2 + norm(b) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-10)
