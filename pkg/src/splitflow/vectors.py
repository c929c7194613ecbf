"""Real inner-product-space core.

Points live in R^n and are represented as contiguous 1-D float64 numpy
arrays, frozen (read-only) after construction. ``VectorH`` is the type alias
used in signatures throughout the package. All binary operations require
equal dimensions, and library operations never hand back non-finite entries.
"""

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, NonFiniteError

VectorH = np.ndarray


def _freeze(arr):
    arr.setflags(write=False)
    return arr


def vector(entries) -> VectorH:
    """Validated construction: finite float64 entries, dimension >= 1."""
    arr = np.atleast_1d(np.asarray(entries, dtype=np.float64)).ravel()
    if arr.size < 1:
        raise ValueError("vector needs at least one entry")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("vector entries must be finite")
    return _freeze(arr.copy())


def zeros(dim: int) -> VectorH:
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    return _freeze(np.zeros(dim, dtype=np.float64))


def as_vector(x) -> VectorH:
    """Coerce to contiguous float64 without the finiteness scan.

    Used at internal boundaries where inputs are already library-produced.
    """
    return np.ascontiguousarray(x, dtype=np.float64)


def check_same_dim(a, b):
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}"
        )


def inner(a, b) -> float:
    """Euclidean inner product <a, b>."""
    a, b = as_vector(a), as_vector(b)
    check_same_dim(a, b)
    return _kernels.dot(a, b)


def norm(a) -> float:
    """Euclidean norm sqrt(<a, a>)."""
    return _kernels.nrm2(as_vector(a))


def axpy(alpha: float, a, b) -> VectorH:
    """alpha*a + b. Errors on dimension mismatch or a non-finite result."""
    a, b = as_vector(a), as_vector(b)
    check_same_dim(a, b)
    out = _kernels.axpy(alpha, a, b)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("axpy produced a non-finite entry")
    return _freeze(out)


def nrm2_of_diff(a, b) -> float:
    """||a - b|| without the validation overhead of axpy."""
    return _kernels.nrm2(_kernels.combine(1.0, as_vector(a), -1.0, as_vector(b)))
