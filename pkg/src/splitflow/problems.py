"""Reproducible test-problem generators with certified solutions.

Every generated instance designates a solution (or a solution-set member)
and certifies it at generation time by checking its inclusion residual, so
convergence tests never compare a solver against itself. The oracles used
here (proximal-gradient loop, dense saddle solve, active-set enumeration,
extragradient fallback) are deliberately independent code paths from the
solvers module.

Families addressable by name: skew-vi, composite-l1, bilinear-saddle,
feasibility.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import SplitflowError
from .operators import (
    ForwardOp,
    LinearMap,
    ResolventOp,
    affine_monotone_resolvent,
    box_resolvent,
    hyperplane_resolvent,
    identity_resolvent,
    l1_resolvent,
    linear_forward,
    linear_map,
    monotone_linear_resolvent,
    project_box,
    project_hyperplane,
)
from .vectors import VectorH, _freeze, as_vector, nrm2_of_diff, norm

_CERTIFY_TOL = 1e-8


@dataclass(frozen=True)
class ProblemInstance:
    """Operator bundle plus a certified solution description.

    ``A_res`` is the backward half (resolvent access only); ``B_fwd`` the
    forward half; ``B_res`` is resolvent access to B for the methods that
    treat both halves backward. Saddle instances carry (K, g_prox,
    fstar_prox) and a saddle pair instead.
    """

    family: str
    seed: int
    A_res: ResolventOp | None = None
    B_fwd: ForwardOp | None = None
    B_res: ResolventOp | None = None
    K: LinearMap | None = None
    g_prox: ResolventOp | None = None
    fstar_prox: ResolventOp | None = None
    solution: VectorH | None = None
    saddle: tuple[VectorH, VectorH] | None = None
    solution_kind: str = "point"
    x0: VectorH | None = None
    u0: VectorH | None = None
    v0: VectorH | None = None
    a_is_zero: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def lipschitz(self) -> float | None:
        return None if self.B_fwd is None else self.B_fwd.lipschitz_L


def _certify(A_res, B_fwd, x, lam: float = 1.0, tol: float = _CERTIFY_TOL):
    x = as_vector(x)
    fwd = _kernels.axpy(-lam, B_fwd(x), x)
    r = nrm2_of_diff(x, A_res(lam, fwd))
    if r > tol:
        raise SplitflowError(
            f"generator failed to certify its solution (residual {r:.3e})"
        )
    return r


# ---------------------------------------------------------------------------
# skew VI


def _pairing_matrix(dim: int) -> np.ndarray:
    J = np.zeros((dim, dim))
    for i in range(0, dim, 2):
        J[i, i + 1] = 1.0
        J[i + 1, i] = -1.0
    return J


def _skew_matrix(dim: int, scale: float, rng) -> np.ndarray:
    """Rotation-type matrix with every eigenvalue at +-i*scale.

    Dimension 2 is the canonical coordinate pairing; higher dimensions
    conjugate the block pairing by a random orthogonal matrix, which keeps
    all rotation speeds equal (a raw random skew matrix has eigenvalues
    spread toward 0, making its slowest modes arbitrarily slow to solve).
    """
    J = _pairing_matrix(dim)
    if dim == 2:
        return scale * J
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    S = scale * (Q @ J @ Q.T)
    return 0.5 * (S - S.T)


def _extragradient_oracle(S, lo, hi, dim, max_iters=2_000_000, tol=1e-12):
    """Independent VI oracle: projected extragradient, globally convergent
    for monotone Lipschitz operators at lam < 1/L."""
    L = float(np.linalg.svd(S, compute_uv=False)[0])
    lam = 0.5 / max(L, 1e-12)
    x = project_box(np.zeros(dim), lo, hi)
    for _ in range(max_iters):
        mid = project_box(x - lam * (S @ x), lo, hi)
        x_new = project_box(x - lam * (S @ mid), lo, hi)
        if nrm2_of_diff(x_new, x) <= tol:
            return as_vector(x_new)
        x = x_new
    raise SplitflowError("extragradient oracle did not converge")


def _box_vi_solution(S, lo, hi) -> VectorH:
    """Solve 0 in N_box(x) + S x by enumerating active sets, with KKT
    certification; falls back to an extragradient run if enumeration fails
    numerically."""
    dim = S.shape[0]
    if dim <= 10:
        for assignment in itertools.product((-1, 0, 1), repeat=dim):
            x = np.zeros(dim)
            free = [i for i, a in enumerate(assignment) if a == 0]
            for i, a in enumerate(assignment):
                if a == -1:
                    x[i] = lo[i]
                elif a == 1:
                    x[i] = hi[i]
            if free:
                sub = S[np.ix_(free, free)]
                rhs = -(S[free] @ x)
                try:
                    x[free] = np.linalg.solve(sub, rhs)
                except np.linalg.LinAlgError:
                    continue
            if np.any(x < lo - 1e-10) or np.any(x > hi + 1e-10):
                continue
            g = S @ x
            ok = True
            for i, a in enumerate(assignment):
                if a == 0 and abs(g[i]) > 1e-9:
                    ok = False
                elif a == -1 and g[i] < -1e-9:
                    ok = False
                elif a == 1 and g[i] > 1e-9:
                    ok = False
                if not ok:
                    break
            if not ok:
                continue
            x = np.clip(x, lo, hi)
            r = nrm2_of_diff(x, project_box(x - S @ x, lo, hi))
            if r <= _CERTIFY_TOL:
                return _freeze(x)
    return _extragradient_oracle(S, lo, hi, dim)


def make_skew_vi(dim: int, scale: float = 1.0, seed: int = 0,
                 box=None) -> ProblemInstance:
    """VI with a rotation-type forward operator: 0 in A(x) + S x.

    A is zero (solution: the origin) or, when ``box=(lo, hi)`` is given, the
    normal cone of the box (solution found by active-set search and
    certified). ``scale=0`` degenerates to B = 0, where every point of the
    constraint set solves and the projection of the origin is designated.
    """
    if dim < 2 or dim % 2 != 0:
        raise ValueError("skew-vi needs an even dimension >= 2")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    rng = np.random.default_rng(seed)
    S = _skew_matrix(dim, scale, rng)
    L = float(np.linalg.svd(S, compute_uv=False)[0]) if scale > 0 else 0.0
    B_fwd = linear_forward(S, lipschitz_L=L, name="skew")
    B_res = monotone_linear_resolvent(S)

    if box is None:
        A_res = identity_resolvent()
        solution = _freeze(np.zeros(dim))
        x0_raw = rng.standard_normal(dim)
        x0 = _freeze(x0_raw / norm(x0_raw))
        inst = ProblemInstance(
            family="skew-vi", seed=seed, A_res=A_res, B_fwd=B_fwd,
            B_res=B_res, solution=solution, x0=x0, a_is_zero=True,
            meta={"dim": dim, "scale": scale},
        )
    else:
        lo, hi = box
        lo = as_vector(np.broadcast_to(np.asarray(lo, dtype=np.float64), (dim,)))
        hi = as_vector(np.broadcast_to(np.asarray(hi, dtype=np.float64), (dim,)))
        if np.any(lo > hi):
            raise ValueError("box bounds violate lo <= hi")
        A_res = box_resolvent(lo, hi)
        if scale == 0.0:
            solution = project_box(np.zeros(dim), lo, hi)
        else:
            solution = _box_vi_solution(S, lo, hi)
        x0 = project_box(rng.standard_normal(dim), lo, hi)
        inst = ProblemInstance(
            family="skew-vi", seed=seed, A_res=A_res, B_fwd=B_fwd,
            B_res=B_res, solution=solution, x0=x0, a_is_zero=False,
            meta={"dim": dim, "scale": scale, "box": (lo, hi)},
        )
    _certify(inst.A_res, inst.B_fwd, inst.solution)
    return inst


# ---------------------------------------------------------------------------
# composite l1


def make_composite(m: int, n: int, sparsity: float = 0.1, mu: float = 0.1,
                   seed: int = 0, design=None, offset=None) -> ProblemInstance:
    """min 0.5*||M x - b||^2 + mu*||x||_1 as a splitting instance.

    Backward half: the scaled l1 subdifferential (shrinkage resolvent).
    Forward half: x -> M'M x - M'b, Lipschitz constant measured from the
    spectral norm. The designated solution comes from a long-horizon
    proximal-gradient run (tolerance 1e-10) written inline here, independent
    of the solvers module.

    Random instances scale M to unit spectral norm; ``design``/``offset``
    override the random draw (used for analytic edge cases).
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    rng = np.random.default_rng(seed)
    if design is None:
        G = rng.standard_normal((m, n))
        smax = float(np.linalg.svd(G, compute_uv=False)[0])
        M = G / smax if smax > 0 else G
    else:
        M = np.ascontiguousarray(np.asarray(design, dtype=np.float64))
        if M.shape != (m, n):
            raise ValueError("design shape must be (m, n)")
    if offset is None:
        x_plant = np.zeros(n)
        k = min(n, max(1, int(round(sparsity * n))))
        idx = rng.choice(n, size=k, replace=False)
        x_plant[idx] = rng.standard_normal(k)
        b = M @ x_plant + 0.01 * rng.standard_normal(m)
    else:
        b = as_vector(offset).copy()
        if b.shape[0] != m:
            raise ValueError("offset must have length m")

    H = M.T @ M
    c = M.T @ b
    sv = np.linalg.svd(M, compute_uv=False)
    L = float(sv[0]) ** 2 if sv.size else 0.0

    step = 1.0 / L if L > 0 else 1.0
    x = np.zeros(n)
    for _ in range(5_000_000):
        x_new = _kernels.soft_threshold(
            _kernels.axpy(-step, H @ x - c, x), step * mu
        )
        done = nrm2_of_diff(x_new, x) <= 1e-10 * step
        x = x_new
        if done:
            break
    else:
        raise SplitflowError("proximal-gradient oracle did not converge")

    A_res = l1_resolvent(mu)
    B_fwd = linear_forward(H, lipschitz_L=L, name="least-squares-gradient",
                           offset=c)
    B_res = affine_monotone_resolvent(H, c)
    solution = _freeze(x.copy())
    inst = ProblemInstance(
        family="composite-l1", seed=seed, A_res=A_res, B_fwd=B_fwd,
        B_res=B_res, solution=solution, x0=_freeze(np.zeros(n)),
        meta={"m": m, "n": n, "mu": mu, "sparsity": sparsity},
    )
    _certify(inst.A_res, inst.B_fwd, inst.solution, lam=step)
    return inst


# ---------------------------------------------------------------------------
# bilinear saddle


def _quadratic_prox(center: np.ndarray, name: str) -> ResolventOp:
    center = as_vector(center).copy()

    def evaluate(t, w):
        return _kernels.combine(1.0 / (1.0 + t), w, t / (1.0 + t), center)

    return ResolventOp(evaluate=evaluate, name=name)


def make_saddle(n: int, m: int, seed: int = 0) -> ProblemInstance:
    """Bilinear saddle problem min_u max_v g(u) + <K u, v> - f*(v) with
    strongly convex quadratics g(u) = 0.5*||u - a||^2, f*(v) = 0.5*||v - c||^2.

    The saddle point solves the dense linear system
    [[I, K'], [-K, I]] [u; v] = [a; c], computed and certified at generation.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    for attempt in range(10):
        rng = np.random.default_rng(seed + attempt)
        K0 = rng.standard_normal((m, n))
        a = rng.standard_normal(n)
        c = rng.standard_normal(m)
        kkt = np.block([
            [np.eye(n), K0.T],
            [-K0, np.eye(m)],
        ])
        rhs = np.concatenate([a, c])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            continue
        if norm(kkt @ sol - rhs) <= _CERTIFY_TOL * max(1.0, norm(rhs)):
            break
    else:
        raise SplitflowError("could not build a certified saddle instance")
    u_star, v_star = _freeze(sol[:n].copy()), _freeze(sol[n:].copy())
    return ProblemInstance(
        family="bilinear-saddle", seed=seed,
        K=linear_map(K0),
        g_prox=_quadratic_prox(a, "quadratic"),
        fstar_prox=_quadratic_prox(c, "quadratic"),
        saddle=(u_star, v_star),
        u0=_freeze(np.zeros(n)), v0=_freeze(np.zeros(m)),
        meta={"n": n, "m": m},
    )


# ---------------------------------------------------------------------------
# feasibility


def make_feasibility(dim: int, seed: int = 0) -> ProblemInstance:
    """Find a point on two random hyperplanes planted through a common point.

    Backward half: the normal cone of the first hyperplane. The second is
    exposed both as a projection resolvent (for dr) and as the forward
    operator x -> x - P(x) (1-Lipschitz, monotone, zeros = the hyperplane).
    In R^2 the intersection is the planted point itself; in higher dimension
    the planted point is one member of the solution subspace.
    """
    if dim < 2:
        raise ValueError("feasibility needs dimension >= 2")
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(dim)
    n1 = rng.standard_normal(dim)
    while True:
        n2 = rng.standard_normal(dim)
        cosang = abs(float(np.dot(n1, n2))) / (norm(n1) * norm(n2))
        if cosang <= 0.99:
            break
    o1 = float(np.dot(n1, p))
    o2 = float(np.dot(n2, p))
    A_res = hyperplane_resolvent(n1, o1)
    B_res = hyperplane_resolvent(n2, o2)
    n2c = n2.copy()
    nn2 = float(np.dot(n2c, n2c))

    def gap(x):
        return ((np.dot(n2c, x) - o2) / nn2) * n2c

    B_fwd = ForwardOp(evaluate=gap, lipschitz_L=1.0, name="hyperplane-gap",
                      dim=dim)
    solution = _freeze(p.copy())
    x0 = _freeze(p + 3.0 * rng.standard_normal(dim))
    inst = ProblemInstance(
        family="feasibility", seed=seed, A_res=A_res, B_fwd=B_fwd,
        B_res=B_res, solution=solution,
        solution_kind="point" if dim == 2 else "subspace",
        x0=x0, meta={"dim": dim},
    )
    _certify(inst.A_res, inst.B_fwd, inst.solution)
    return inst


FAMILIES = {
    "skew-vi": make_skew_vi,
    "composite-l1": make_composite,
    "bilinear-saddle": make_saddle,
    "feasibility": make_feasibility,
}
