"""Operator taxonomy and instance catalog.

Three kinds of operator appear in the iterations:

- ``ResolventOp``: a maximal monotone operator accessed only through its
  resolvent J_lam = (id + lam*A)^(-1). The operator itself is never
  materialized.
- ``ForwardOp``: a single-valued monotone operator with a known Lipschitz
  constant, evaluated directly.
- ``LinearMap``: a dense matrix with its adjoint and a cached upper bound on
  the spectral norm, used for the coupling term of saddle problems.

Declared operator properties are validated statistically at construction
(100 random pairs); a failure is a hard error, since a silently non-monotone
input would invalidate every convergence diagnostic downstream.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatchError,
    NonFiniteError,
    OperatorValidationError,
    SplitflowError,
)
from .vectors import VectorH, _freeze, as_vector, check_same_dim, inner, norm

_VALIDATION_PAIRS = 100
_MONOTONE_TOL = 1e-10
_LIPSCHITZ_SLACK = 1e-8
_NORM_INFLATION = 1.0 + 1e-6


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class ResolventOp:
    """A monotone operator exposed through its resolvent.

    ``evaluate(lam, w)`` returns J_lam(w) for any lam > 0. ``projection`` marks
    resolvents that are projections onto a set (they ignore lam), which is
    what the reflected projected-gradient method requires.
    """

    evaluate: Callable[[float, VectorH], VectorH]
    name: str
    projection: bool = False

    def __call__(self, lam: float, w) -> VectorH:
        if lam <= 0:
            raise ValueError("resolvent parameter must be positive")
        out = as_vector(self.evaluate(lam, as_vector(w)))
        return _freeze(out)


@dataclass(frozen=True)
class ForwardOp:
    """A single-valued monotone operator with declared Lipschitz constant.

    Monotonicity and the Lipschitz bound are checked on random pairs at
    construction; evaluation purity is checked by re-evaluating one point.
    """

    evaluate: Callable[[VectorH], VectorH]
    lipschitz_L: float
    name: str
    dim: int
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.lipschitz_L < 0:
            raise OperatorValidationError("lipschitz_L must be nonnegative")
        if self.dim < 1:
            raise OperatorValidationError("dim must be >= 1")
        if self.validate:
            _validate_forward(self)

    def __call__(self, x) -> VectorH:
        out = as_vector(self.evaluate(as_vector(x)))
        return _freeze(out)


def _validate_forward(op: ForwardOp):
    rng = np.random.default_rng(0xB0)
    a0 = rng.standard_normal(op.dim)
    if not np.array_equal(op.evaluate(a0), op.evaluate(a0)):
        raise OperatorValidationError(
            f"operator '{op.name}' is not pure: repeated evaluation differs"
        )
    for _ in range(_VALIDATION_PAIRS):
        a = rng.standard_normal(op.dim)
        b = rng.standard_normal(op.dim)
        fa, fb = op.evaluate(a), op.evaluate(b)
        d = a - b
        if inner(fa - fb, d) < -_MONOTONE_TOL:
            raise OperatorValidationError(
                f"operator '{op.name}' failed the monotonicity check"
            )
        if norm(fa - fb) > (op.lipschitz_L + _LIPSCHITZ_SLACK) * norm(d):
            raise OperatorValidationError(
                f"operator '{op.name}' exceeds its declared Lipschitz constant"
            )


@dataclass(frozen=True)
class LinearMap:
    """Dense linear map with adjoint access and a cached norm upper bound."""

    matrix: np.ndarray
    norm_bound: float

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def apply(self, u) -> VectorH:
        u = as_vector(u)
        if u.shape[0] != self.cols:
            raise DimensionMismatchError(
                f"LinearMap.apply: expected dim {self.cols}, got {u.shape[0]}"
            )
        return _freeze(self.matrix @ u)

    def adjoint(self, v) -> VectorH:
        v = as_vector(v)
        if v.shape[0] != self.rows:
            raise DimensionMismatchError(
                f"LinearMap.adjoint: expected dim {self.rows}, got {v.shape[0]}"
            )
        return _freeze(self.matrix.T @ v)


def linear_map(matrix) -> LinearMap:
    """Build a LinearMap; the cached bound is the spectral norm, inflated."""
    m = np.ascontiguousarray(np.atleast_2d(np.asarray(matrix, dtype=np.float64)))
    if m.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix entries must be finite")
    spectral = float(np.linalg.svd(m, compute_uv=False)[0]) if m.size else 0.0
    m.setflags(write=False)
    return LinearMap(matrix=m, norm_bound=spectral * _NORM_INFLATION)


# ---------------------------------------------------------------------------
# proximal/projection building blocks


def soft_threshold(w, kappa: float) -> VectorH:
    """Componentwise shrinkage sign(w_i)*max(|w_i|-kappa, 0)."""
    if kappa < 0:
        raise ValueError("threshold must be nonnegative")
    return _freeze(_kernels.soft_threshold(as_vector(w), float(kappa)))


def project_box(w, lo, hi) -> VectorH:
    """Componentwise clamp of w to [lo, hi]."""
    w, lo, hi = as_vector(w), as_vector(lo), as_vector(hi)
    check_same_dim(w, lo)
    check_same_dim(w, hi)
    if np.any(lo > hi):
        raise ValueError("box bounds violate lo <= hi")
    return _freeze(_kernels.clamp(w, lo, hi))


def project_hyperplane(w, normal, offset: float) -> VectorH:
    """Orthogonal projection onto {x : <normal, x> = offset}."""
    w, normal = as_vector(w), as_vector(normal)
    check_same_dim(w, normal)
    nn = _kernels.dot(normal, normal)
    if nn == 0.0:
        raise ValueError("hyperplane normal must be nonzero")
    coef = (_kernels.dot(normal, w) - offset) / nn
    return _freeze(_kernels.axpy(-coef, normal, w))


# ---------------------------------------------------------------------------
# resolvent catalog


def identity_resolvent() -> ResolventOp:
    """Resolvent of the zero operator: J_lam = id (returns input unchanged)."""
    return ResolventOp(evaluate=lambda lam, w: w, name="identity", projection=True)


def l1_resolvent(mu: float) -> ResolventOp:
    """Resolvent of the scaled l1 subdifferential: shrinkage by lam*mu."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return ResolventOp(
        evaluate=lambda lam, w: soft_threshold(w, lam * mu), name="soft-threshold"
    )


def box_resolvent(lo, hi) -> ResolventOp:
    """Resolvent of the box normal cone: projection, independent of lam."""
    lo, hi = as_vector(lo).copy(), as_vector(hi).copy()
    if np.any(lo > hi):
        raise ValueError("box bounds violate lo <= hi")
    return ResolventOp(
        evaluate=lambda lam, w: project_box(w, lo, hi), name="box", projection=True
    )


def hyperplane_resolvent(normal, offset: float) -> ResolventOp:
    """Resolvent of a hyperplane normal cone: orthogonal projection."""
    normal = as_vector(normal).copy()
    if norm(normal) == 0.0:
        raise ValueError("hyperplane normal must be nonzero")
    return ResolventOp(
        evaluate=lambda lam, w: project_hyperplane(w, normal, offset),
        name="hyperplane",
        projection=True,
    )


def _check_monotone_matrix(M: np.ndarray, name: str):
    sym = 0.5 * (M + M.T)
    lo = float(np.linalg.eigvalsh(sym)[0])
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    if lo < -1e-10 * scale:
        raise OperatorValidationError(
            f"{name}: matrix is not monotone (min symmetric eigenvalue {lo:.3e})"
        )


def resolvent_of_linear(M, lam: float, w) -> VectorH:
    """Resolvent of a monotone linear operator: solve (I + lam*M) x = w.

    Direct dense solve with a residual check; breakdown is reported, never
    silent.
    """
    if lam <= 0:
        raise ValueError("resolvent parameter must be positive")
    A = M.matrix if isinstance(M, LinearMap) else np.asarray(M, dtype=np.float64)
    if A.shape[0] != A.shape[1]:
        raise ValueError("linear resolvent needs a square matrix")
    _check_monotone_matrix(A, "resolvent_of_linear")
    w = as_vector(w)
    check_same_dim(w, A[0])
    system = np.eye(A.shape[0]) + lam * A
    try:
        x = np.linalg.solve(system, w)
    except np.linalg.LinAlgError as exc:
        raise SplitflowError(f"linear resolvent solve broke down: {exc}") from exc
    if norm(system @ x - w) > 1e-10 * max(norm(w), 1e-300):
        raise SplitflowError("linear resolvent residual check failed")
    return _freeze(x)


def affine_monotone_resolvent(H, c=None, name: str = "linear-monotone") -> ResolventOp:
    """Resolvent of x -> H x - c for monotone H: (I + lam*H)^(-1) (w + lam*c).

    H is validated (H + H^T PSD) once; per-lam factorizations are cached so
    repeated solver calls cost a matrix-vector product plus a residual check.
    """
    H = np.ascontiguousarray(np.asarray(H, dtype=np.float64))
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("affine resolvent needs a square matrix")
    _check_monotone_matrix(H, name)
    n = H.shape[0]
    c = np.zeros(n) if c is None else as_vector(c).copy()
    check_same_dim(c, H[0])
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def evaluate(lam, w):
        key = float(lam)
        if key not in cache:
            system = np.eye(n) + key * H
            cache[key] = (system, np.linalg.inv(system))
        system, inv = cache[key]
        rhs = w if not c.any() else _kernels.axpy(key, c, w)
        x = inv @ rhs
        if norm(system @ x - rhs) > 1e-10 * max(norm(rhs), 1e-300):
            x = np.linalg.solve(system, rhs)
            if norm(system @ x - rhs) > 1e-10 * max(norm(rhs), 1e-300):
                raise SplitflowError(f"{name}: resolvent residual check failed")
        return x

    return ResolventOp(evaluate=evaluate, name=name)


def monotone_linear_resolvent(M, name: str = "linear-monotone") -> ResolventOp:
    """Resolvent of a monotone linear operator x -> M x."""
    return affine_monotone_resolvent(M, None, name=name)


# ---------------------------------------------------------------------------
# forward catalog


def zero_forward(dim: int) -> ForwardOp:
    z = np.zeros(dim)
    return ForwardOp(evaluate=lambda x: z, lipschitz_L=0.0, name="zero", dim=dim)


def skew_operator(dim: int) -> ForwardOp:
    """Coordinate-pairing rotation B(x) = (x2, -x1, x4, -x3, ...); L = 1.

    The canonical monotone operator that is not cocoercive: <B(x), x> = 0 for
    every x, so no forward-only iteration can make progress on it.
    """
    if dim < 2 or dim % 2 != 0:
        raise ValueError("skew operator needs an even dimension >= 2")

    def evaluate(x):
        out = np.empty_like(x)
        out[0::2] = x[1::2]
        out[1::2] = -x[0::2]
        return out

    return ForwardOp(evaluate=evaluate, lipschitz_L=1.0, name="skew", dim=dim)


def linear_forward(M, lipschitz_L: float | None = None, name: str = "linear",
                   offset=None) -> ForwardOp:
    """Forward operator x -> M x - offset with measured Lipschitz constant."""
    M = np.ascontiguousarray(np.asarray(M, dtype=np.float64))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("linear forward operator needs a square matrix")
    n = M.shape[0]
    off = np.zeros(n) if offset is None else as_vector(offset).copy()
    check_same_dim(off, M[0])
    if lipschitz_L is None:
        lipschitz_L = float(np.linalg.svd(M, compute_uv=False)[0])

    def evaluate(x):
        return M @ x - off

    return ForwardOp(evaluate=evaluate, lipschitz_L=lipschitz_L, name=name, dim=n)


# ---------------------------------------------------------------------------
# norm estimation


def operator_norm_estimate(K, iters: int, seed: int) -> float:
    """Power-iteration estimate of the spectral norm, inflated by 1 + 1e-6.

    Deterministic given the seed; a zero map returns 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    A = K.matrix if isinstance(K, LinearMap) else np.asarray(K, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return 0.0
    v = v / nv
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(np.linalg.norm(A @ v)) * _NORM_INFLATION


# ---------------------------------------------------------------------------
# name registry (CLI-facing)

by_name = {
    "skew": skew_operator,
    "soft-threshold": l1_resolvent,
    "box": box_resolvent,
    "hyperplane": hyperplane_resolvent,
    "linear-monotone": monotone_linear_resolvent,
}
