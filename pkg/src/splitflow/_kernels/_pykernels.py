"""Pure-numpy kernel backend.

Same call signatures as the compiled backend. Elementwise kernels are
bit-identical to the compiled versions (both round once per multiply and
once per add, no FMA); the reductions (dot, nrm2) may differ from a straight
loop in the last ulp because numpy delegates them to BLAS.
"""

import numpy as np

BACKEND = "python"


def dot(a, b):
    return float(np.dot(a, b))


def nrm2(a):
    return float(np.linalg.norm(a))


def axpy(alpha, a, b):
    """alpha*a + b, new array."""
    return alpha * a + b


def combine(alpha, a, beta, b):
    """alpha*a + beta*b, new array."""
    return alpha * a + beta * b


def soft_threshold(w, kappa):
    """Componentwise sign(w)*max(|w|-kappa, 0), new array."""
    return np.sign(w) * np.maximum(np.abs(w) - kappa, 0.0)


def clamp(w, lo, hi):
    """Componentwise min(max(w, lo), hi), new array."""
    return np.minimum(np.maximum(w, lo), hi)
