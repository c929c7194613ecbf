"""Discrete iterations: step functions over explicit state plus a run driver.

Every method is a pure step function ``state -> state``; the driver loops a
step function with residual-based stopping and per-iteration diagnostics.
Stable method names:

    gradient, prox-point, dr, shadow-dr, double-forward-dr, frb,
    pdhg, shadow-pd, reflected-pg

The headline iteration is ``shadow-dr``:

    x+ = J_{lam*A}(x - lam*B(x)) - lam*(B(x) - B(x_prev))

one forward evaluation and one resolvent per step. Its admissible step range
is lam in [eps, (1-3*eps)/(3L)]; configurations outside it are rejected
unless the unsafe-stepsize override is set (the override exists to probe the
conjectured extension of the range toward 1/(2L), where outcomes are
recorded, never asserted).
"""

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .diagnostics import TraceRecord, lemma3_slack, lyapunov_value, pd_lyapunov
from .errors import (
    ConfigError,
    DivergenceError,
    IncompatiblePairingError,
    InnerSolveError,
)
from .vectors import VectorH, _freeze, as_vector, nrm2_of_diff, norm

METHOD_NAMES = (
    "gradient",
    "prox-point",
    "dr",
    "shadow-dr",
    "double-forward-dr",
    "frb",
    "pdhg",
    "shadow-pd",
    "reflected-pg",
)

_PD_METHODS = ("pdhg", "shadow-pd")
_DIVERGENCE_FACTOR = 1e6


@dataclass
class SolverConfig:
    """Step sizes, margins, and stopping rules.

    ``lam``/``tau``/``sigma``/``eps`` left as None are resolved from the
    problem at run start (defaults: eps = 1e-2 and lam = 0.99*(1-3*eps)/(3L)
    when the Lipschitz constant is known and positive).
    """

    lam: float | None = None
    tau: float | None = None
    sigma: float | None = None
    eps: float | None = None
    max_iters: int = 100_000
    tol: float = 1e-8
    unsafe_stepsize: bool = False


@dataclass(frozen=True)
class SolverState:
    """Per-method iterate bundle; fields unused by a method stay None.

    ``b_prev`` caches the forward evaluation at ``x_prev`` bit-identically,
    so methods that reuse it never evaluate the operator twice per step.
    """

    x_curr: VectorH | None = None
    x_prev: VectorH | None = None
    b_prev: VectorH | None = None
    z_curr: VectorH | None = None
    z_prev: VectorH | None = None
    u_curr: VectorH | None = None
    u_prev: VectorH | None = None
    v_curr: VectorH | None = None
    v_prev: VectorH | None = None
    k: int = 0


def init_forward_state(x0, B=None, x_prev=None) -> SolverState:
    """Start state for x-space methods. Default x_prev = x0, so the first
    correction term of shadow-dr/frb vanishes."""
    x0 = _freeze(as_vector(x0).copy())
    xp = x0 if x_prev is None else _freeze(as_vector(x_prev).copy())
    bp = B(xp) if B is not None else None
    return SolverState(x_curr=x0, x_prev=xp, b_prev=bp)


def init_dr_state(z0) -> SolverState:
    return SolverState(z_curr=_freeze(as_vector(z0).copy()))


def init_pd_state(u0, v0) -> SolverState:
    u0 = _freeze(as_vector(u0).copy())
    v0 = _freeze(as_vector(v0).copy())
    return SolverState(u_curr=u0, u_prev=u0, v_curr=v0)


def _finite_or_diverged(arr, state, method):
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(
            f"{method}: iterate left the finite range", state=state
        )
    return arr


# ---------------------------------------------------------------------------
# step functions


def step_gradient(state: SolverState, B, lam: float) -> SolverState:
    """x+ = x - lam*B(x). One forward evaluation."""
    x = state.x_curr
    b = B(x)
    x_new = _kernels.axpy(-lam, b, x)
    _finite_or_diverged(x_new, state, "gradient")
    return replace(state, x_prev=x, x_curr=_freeze(x_new), b_prev=b, k=state.k + 1)


def step_proximal_point(state: SolverState, A, lam: float) -> SolverState:
    """x+ = J_{lam*A}(x)."""
    x = state.x_curr
    x_new = A(lam, x)
    _finite_or_diverged(x_new, state, "prox-point")
    return replace(state, x_prev=x, x_curr=x_new, k=state.k + 1)


def step_dr(state: SolverState, A, B, lam: float) -> SolverState:
    """z+ = z + J_{lam*A}(2*J_{lam*B}(z) - z) - J_{lam*B}(z).

    The governing variable is z; the shadow point J_{lam*B}(z) is what
    converges to a solution and is exposed via ``x_curr``.
    """
    z = state.z_curr
    x_sh = B(lam, z)
    refl = _kernels.combine(2.0, x_sh, -1.0, z)
    a_pt = A(lam, refl)
    z_new = _kernels.axpy(1.0, _kernels.combine(1.0, a_pt, -1.0, x_sh), z)
    _finite_or_diverged(z_new, state, "dr")
    return replace(
        state,
        z_prev=z,
        z_curr=_freeze(z_new),
        x_prev=state.x_curr,
        x_curr=x_sh,
        k=state.k + 1,
    )


def dr_shadow_point(state: SolverState, B, lam: float) -> VectorH:
    """Shadow J_{lam*B}(z_curr) of the current DR governing variable."""
    return B(lam, state.z_curr)


def step_shadow_dr(state: SolverState, A, B, lam: float) -> SolverState:
    """x+ = J_{lam*A}(x - lam*B(x)) - lam*(B(x) - B(x_prev)).

    Exactly one new forward evaluation and one resolvent per step; the
    forward value is cached into ``b_prev`` for the next correction term.
    """
    x = state.x_curr
    b = B(x)
    fwd = _kernels.combine(1.0, x, -lam, b)
    corr = _kernels.combine(lam, b, -lam, state.b_prev)
    res = A(lam, fwd)
    x_new = _kernels.combine(1.0, res, -1.0, corr)
    _finite_or_diverged(x_new, state, "shadow-dr")
    return replace(
        state, x_prev=x, x_curr=_freeze(x_new), b_prev=b, k=state.k + 1
    )


def step_frb(state: SolverState, A, B, lam: float) -> SolverState:
    """x+ = J_{lam*A}(x - lam*B(x) - lam*(B(x) - B(x_prev))).

    Shares its forward/correction arithmetic with step_shadow_dr, so the two
    produce bit-identical iterates whenever the resolvent is the identity.
    """
    x = state.x_curr
    b = B(x)
    fwd = _kernels.combine(1.0, x, -lam, b)
    corr = _kernels.combine(lam, b, -lam, state.b_prev)
    arg = _kernels.combine(1.0, fwd, -1.0, corr)
    x_new = A(lam, arg)
    _finite_or_diverged(x_new, state, "frb")
    return replace(
        state, x_prev=x, x_curr=x_new, b_prev=b, k=state.k + 1
    )


def step_double_forward_dr(
    state: SolverState, A, B, lam: float, inner_tol: float = 1e-14,
    inner_max: int = 500,
) -> SolverState:
    """Implicit variant: x+ = J_{lam*A}(x - lam*B(x)) - lam*(B(x+) - B(x)).

    The implicit relation is solved by an inner fixed-point loop, which
    contracts iff lam*L < 1. Mapping the iterates by z_k = x_k + lam*B(x_k)
    reproduces the classical dr sequence.
    """
    if lam * B.lipschitz_L >= 1.0:
        raise InnerSolveError(
            "double-forward-dr inner loop needs lam*L < 1 "
            f"(got lam*L = {lam * B.lipschitz_L:g})"
        )
    x = state.x_curr
    b = B(x)
    fwd = _kernels.combine(1.0, x, -lam, b)
    base = _kernels.axpy(lam, b, A(lam, fwd))  # constant part: J(...) + lam*B(x)
    scale = max(1.0, norm(base))
    x_new = as_vector(base).copy()
    for _ in range(inner_max):
        x_next = _kernels.axpy(-lam, B(x_new), base)
        delta = nrm2_of_diff(x_next, x_new)
        x_new = x_next
        if delta <= inner_tol * scale:
            break
    else:
        raise InnerSolveError("double-forward-dr inner loop did not converge")
    _finite_or_diverged(x_new, state, "double-forward-dr")
    return replace(
        state, x_prev=x, x_curr=_freeze(x_new), b_prev=b, k=state.k + 1
    )


def step_pdhg(state: SolverState, g_prox, fstar_prox, K, tau: float,
              sigma: float) -> SolverState:
    """u+ = prox_{tau*g}(u - tau*K'v); v+ = prox_{sigma*f*}(v + sigma*K(2u+ - u))."""
    u, v = state.u_curr, state.v_curr
    u_new = g_prox(tau, _kernels.axpy(-tau, K.adjoint(v), u))
    refl = _kernels.combine(2.0, u_new, -1.0, u)
    v_new = fstar_prox(sigma, _kernels.axpy(sigma, K.apply(refl), v))
    _finite_or_diverged(u_new, state, "pdhg")
    _finite_or_diverged(v_new, state, "pdhg")
    return replace(
        state, u_prev=u, u_curr=u_new, v_prev=v, v_curr=v_new, k=state.k + 1
    )


def step_shadow_pd(state: SolverState, g_prox, fstar_prox, K, tau: float,
                   sigma: float) -> SolverState:
    """u+ = prox_{tau*g}(u - tau*K'v);
    v+ = prox_{sigma*f*}(v + sigma*K u+) + sigma*(K u+ - K u)."""
    u, v = state.u_curr, state.v_curr
    u_new = g_prox(tau, _kernels.axpy(-tau, K.adjoint(v), u))
    ku_new = K.apply(u_new)
    ku = K.apply(u)
    prox_part = fstar_prox(sigma, _kernels.axpy(sigma, ku_new, v))
    v_new = _kernels.axpy(
        1.0, _kernels.combine(sigma, ku_new, -sigma, ku), prox_part
    )
    _finite_or_diverged(u_new, state, "shadow-pd")
    _finite_or_diverged(v_new, state, "shadow-pd")
    return replace(
        state, u_prev=u, u_curr=u_new, v_prev=v, v_curr=_freeze(v_new),
        k=state.k + 1,
    )


def step_reflected_pg(state: SolverState, C_project, B, lam: float) -> SolverState:
    """x+ = P_C(x - lam*B(2x - x_prev))."""
    x, xp = state.x_curr, state.x_prev
    refl = _kernels.combine(2.0, x, -1.0, xp)
    b = B(refl)
    x_new = C_project(lam, _kernels.axpy(-lam, b, x))
    _finite_or_diverged(x_new, state, "reflected-pg")
    return replace(state, x_prev=x, x_curr=x_new, b_prev=None, k=state.k + 1)


# ---------------------------------------------------------------------------
# residuals


def residual(method: str, state: SolverState, config: SolverConfig) -> float:
    """Fixed-point residual after a completed step.

    ||x+ - x||/lam for the x-space methods, ||z+ - z|| for dr, and the max of
    the primal/dual step norms for the primal-dual methods. Zero exactly at
    fixed points.
    """
    if method == "dr":
        if state.z_prev is None:
            raise ValueError("residual needs one completed step")
        return nrm2_of_diff(state.z_curr, state.z_prev)
    if method in _PD_METHODS:
        if state.v_prev is None:
            raise ValueError("residual needs one completed step")
        return max(
            nrm2_of_diff(state.u_curr, state.u_prev),
            nrm2_of_diff(state.v_curr, state.v_prev),
        )
    if state.k == 0:
        raise ValueError("residual needs one completed step")
    return nrm2_of_diff(state.x_curr, state.x_prev) / config.lam


# ---------------------------------------------------------------------------
# configuration resolution

_REQUIRED = {
    "gradient": "forward operator with no backward part",
    "prox-point": "resolvent access to the full operator",
    "dr": "resolvent access to both operators",
    "shadow-dr": "a resolvent and a forward operator",
    "double-forward-dr": "a resolvent and a forward operator",
    "frb": "a resolvent and a forward operator",
    "pdhg": "a saddle triple (K, g, f*)",
    "shadow-pd": "a saddle triple (K, g, f*)",
    "reflected-pg": "a projection and a forward operator",
}


def check_compatible(method: str, problem):
    """Raise IncompatiblePairingError unless the problem exposes the operator
    access the method needs."""
    if method not in METHOD_NAMES:
        raise ValueError(f"unknown method '{method}'")
    has_pd = (
        getattr(problem, "K", None) is not None
        and getattr(problem, "g_prox", None) is not None
        and getattr(problem, "fstar_prox", None) is not None
    )
    a_res = getattr(problem, "A_res", None)
    b_fwd = getattr(problem, "B_fwd", None)
    b_res = getattr(problem, "B_res", None)
    a_zero = bool(getattr(problem, "a_is_zero", False))
    ok = {
        "gradient": b_fwd is not None and a_zero,
        "prox-point": b_res is not None and a_zero,
        "dr": a_res is not None and b_res is not None,
        "shadow-dr": a_res is not None and b_fwd is not None,
        "double-forward-dr": a_res is not None and b_fwd is not None,
        "frb": a_res is not None and b_fwd is not None,
        "pdhg": has_pd,
        "shadow-pd": has_pd,
        "reflected-pg": a_res is not None and a_res.projection and b_fwd is not None,
    }[method]
    if not ok:
        raise IncompatiblePairingError(
            f"method '{method}' needs {_REQUIRED[method]}, which problem "
            f"family '{getattr(problem, 'family', '?')}' does not expose"
        )


def shadow_dr_step_range(L: float, eps: float) -> tuple[float, float]:
    """Admissible [lo, hi] for the headline method's step size."""
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if L <= 0:
        return (eps, float("inf"))
    hi = (1.0 - 3.0 * eps) / (3.0 * L)
    if hi < eps:
        raise ConfigError(
            f"empty step range: eps={eps:g} exceeds (1-3*eps)/(3L)={hi:g}"
        )
    return (eps, hi)


def resolve_config(config: SolverConfig, problem, method: str) -> SolverConfig:
    """Fill step-size defaults from the problem and validate admissibility.

    Violations raise ConfigError unless ``unsafe_stepsize`` is set; the
    double-forward inner contraction requirement (lam*L < 1) is structural
    and cannot be overridden.
    """
    errors = []
    cfg = replace(config)
    if cfg.max_iters < 0:
        errors.append("max_iters must be >= 0")
    if cfg.tol < 0 or not math.isfinite(cfg.tol):
        errors.append("tol must be nonnegative (0 runs the full budget)")

    if method in _PD_METHODS:
        K = problem.K
        bound = K.norm_bound
        if cfg.tau is None and cfg.sigma is None:
            if bound <= 0:
                cfg.tau = cfg.sigma = 1.0
            else:
                cfg.tau = cfg.sigma = float(np.sqrt(0.9)) / bound
        elif cfg.tau is None:
            cfg.tau = 0.9 / (cfg.sigma * bound * bound) if bound > 0 else 1.0
        elif cfg.sigma is None:
            cfg.sigma = 0.9 / (cfg.tau * bound * bound) if bound > 0 else 1.0
        if cfg.tau <= 0:
            errors.append("tau must be positive")
        if cfg.sigma <= 0:
            errors.append("sigma must be positive")
        if (
            not errors
            and cfg.tau * cfg.sigma * bound * bound >= 1.0
            and not cfg.unsafe_stepsize
        ):
            errors.append(
                "tau*sigma*||K||^2 must be < 1 "
                f"(got {cfg.tau * cfg.sigma * bound * bound:g}); "
                "set the unsafe-stepsize override to run anyway"
            )
        if errors:
            raise ConfigError(errors)
        return cfg

    B = getattr(problem, "B_fwd", None)
    L = B.lipschitz_L if B is not None else 0.0

    if cfg.lam is None:
        eps0 = 1e-2 if cfg.eps is None else cfg.eps
        if eps0 <= 0:
            raise ConfigError(["epsilon must be positive"])
        if L > 0 and B is not None and method != "prox-point":
            cfg.lam = 0.99 * (1.0 - 3.0 * eps0) / (3.0 * L)
        else:
            cfg.lam = 1.0
        cfg.eps = min(eps0, cfg.lam)
    elif cfg.lam <= 0:
        errors.append("lambda must be positive")
    elif cfg.eps is None:
        # Largest margin compatible with the given step: keeps the admissible
        # interval nonempty whenever lam*L < 1/3.
        cap = (1.0 - 3.0 * cfg.lam * L) / 3.0 if L > 0 else cfg.lam
        cfg.eps = min(1e-2, cfg.lam, cap)
        if cfg.eps <= 0:
            if method == "shadow-dr" and not cfg.unsafe_stepsize:
                errors.append(
                    f"lambda = {cfg.lam:g} is outside the admissible range "
                    f"(needs lam*L < 1/3, got lam*L = {cfg.lam * L:g}); "
                    "set the unsafe-stepsize override to probe it"
                )
            cfg.eps = min(1e-2, cfg.lam)
    elif cfg.eps <= 0:
        errors.append("epsilon must be positive")

    if not errors and method == "shadow-dr" and not cfg.unsafe_stepsize:
        lo, hi = shadow_dr_step_range(L, cfg.eps)
        if not (lo * (1 - 1e-12) <= cfg.lam <= hi * (1 + 1e-12)):
            errors.append(
                f"lambda = {cfg.lam:g} outside [eps, (1-3*eps)/(3L)] = "
                f"[{lo:g}, {hi:g}]; set the unsafe-stepsize override to probe it"
            )
    if not errors and method == "frb" and L > 0 and not cfg.unsafe_stepsize:
        if cfg.lam >= 0.5 / L:
            errors.append(
                f"frb needs lambda < 1/(2L) = {0.5 / L:g} (got {cfg.lam:g}); "
                "set the unsafe-stepsize override to probe it"
            )
    if not errors and method == "double-forward-dr" and cfg.lam * L >= 1.0:
        errors.append(
            f"double-forward-dr needs lam*L < 1 (got {cfg.lam * L:g})"
        )
    if errors:
        raise ConfigError(errors)
    return cfg


# ---------------------------------------------------------------------------
# driver

TERMINATION_CONVERGED = "converged"
TERMINATION_MAX_ITERS = "max-iters"
TERMINATION_DIVERGED = "diverged"


def _step_callable(method: str, problem, cfg: SolverConfig):
    A, B, Bres = problem.A_res, problem.B_fwd, problem.B_res
    lam = cfg.lam
    if method == "gradient":
        return lambda s: step_gradient(s, B, lam)
    if method == "prox-point":
        return lambda s: step_proximal_point(s, Bres, lam)
    if method == "dr":
        return lambda s: step_dr(s, A, Bres, lam)
    if method == "shadow-dr":
        return lambda s: step_shadow_dr(s, A, B, lam)
    if method == "double-forward-dr":
        return lambda s: step_double_forward_dr(s, A, B, lam)
    if method == "frb":
        return lambda s: step_frb(s, A, B, lam)
    if method == "pdhg":
        return lambda s: step_pdhg(
            s, problem.g_prox, problem.fstar_prox, problem.K, cfg.tau, cfg.sigma
        )
    if method == "shadow-pd":
        return lambda s: step_shadow_pd(
            s, problem.g_prox, problem.fstar_prox, problem.K, cfg.tau, cfg.sigma
        )
    if method == "reflected-pg":
        return lambda s: step_reflected_pg(s, A, B, lam)
    raise ValueError(f"unknown method '{method}'")


def _primary_norm(method: str, state: SolverState) -> float:
    if method == "dr":
        return norm(state.z_curr)
    if method in _PD_METHODS:
        return max(norm(state.u_curr), norm(state.v_curr))
    return norm(state.x_curr)


def run(method: str, problem, config: SolverConfig | None = None):
    """Iterate ``method`` on ``problem`` until the residual drops below tol.

    Returns (final_state, trace, termination) with termination one of
    'converged', 'max-iters', 'diverged'. One TraceRecord is appended per
    completed iteration. For dr the reported ``x_curr`` of the final state is
    the shadow point of the final governing variable.
    """
    check_compatible(method, problem)
    cfg = resolve_config(config if config is not None else SolverConfig(),
                         problem, method)

    if method in _PD_METHODS:
        state = init_pd_state(problem.u0, problem.v0)
    elif method == "dr":
        state = init_dr_state(problem.x0)
    elif method in ("prox-point",):
        state = init_forward_state(problem.x0)
    elif method == "reflected-pg":
        state = init_forward_state(problem.x0)
    else:
        state = init_forward_state(problem.x0, B=problem.B_fwd)

    solution = getattr(problem, "solution", None)
    saddle = getattr(problem, "saddle", None)
    pair = None
    if method == "shadow-dr" and solution is not None:
        pair = (as_vector(solution), cfg.lam * problem.B_fwd(solution))

    init_scale = max(1.0, _primary_norm(method, state))
    step = _step_callable(method, problem, cfg)
    trace: list[TraceRecord] = []
    termination = TERMINATION_MAX_ITERS

    for _ in range(cfg.max_iters):
        prev = state
        t0 = time.perf_counter_ns()
        try:
            state = step(state)
        except DivergenceError as err:
            state = err.state if err.state is not None else prev
            termination = TERMINATION_DIVERGED
            break
        wall = time.perf_counter_ns() - t0
        res = residual(method, state, cfg)
        trace.append(
            _trace_record(method, problem, cfg, prev, state, res, wall,
                          pair, solution, saddle)
        )
        if not np.isfinite(res) or _primary_norm(method, state) > \
                _DIVERGENCE_FACTOR * init_scale:
            termination = TERMINATION_DIVERGED
            break
        if res <= cfg.tol:
            termination = TERMINATION_CONVERGED
            break

    if method == "dr" and np.all(np.isfinite(state.z_curr)):
        state = replace(state, x_curr=dr_shadow_point(state, problem.B_res, cfg.lam))
    return state, trace, termination


def _trace_record(method, problem, cfg, prev, state, res, wall, pair,
                  solution, saddle) -> TraceRecord:
    step_x = None
    step_z = None
    lyap = None
    slack = None
    dist = None
    if state.x_curr is not None and state.x_prev is not None:
        step_x = nrm2_of_diff(state.x_curr, state.x_prev)
    if method == "dr":
        step_z = nrm2_of_diff(state.z_curr, state.z_prev)
        if solution is not None and state.x_curr is not None:
            dist = nrm2_of_diff(state.x_curr, solution)
    elif method in _PD_METHODS:
        step_x = nrm2_of_diff(state.u_curr, state.u_prev)
        step_z = nrm2_of_diff(state.v_curr, state.v_prev)
        if saddle is not None:
            du = nrm2_of_diff(state.u_curr, saddle[0])
            dv = nrm2_of_diff(state.v_curr, saddle[1])
            dist = float(np.hypot(du, dv))
            if method == "shadow-pd":
                lyap = pd_lyapunov(state, cfg.tau, cfg.sigma, problem.K, saddle)
    else:
        if solution is not None:
            dist = nrm2_of_diff(state.x_curr, solution)
        if pair is not None:
            lyap = lyapunov_value(state, cfg.lam, pair)
            slack = lemma3_slack(prev, state, cfg.lam, pair)
        if method == "shadow-dr" and prev.b_prev is not None:
            z_now = _kernels.axpy(cfg.lam, state.b_prev, state.x_curr)
            z_before = _kernels.axpy(cfg.lam, prev.b_prev, prev.x_curr)
            step_z = nrm2_of_diff(z_now, z_before)
    return TraceRecord(
        k=state.k,
        residual=res,
        lyapunov=lyap,
        lemma3_slack=slack,
        dist=dist,
        step_x=step_x,
        step_z=step_z,
        wall_nanos=wall,
    )
