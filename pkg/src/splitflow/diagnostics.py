"""Per-iteration measurement of certified quantities.

For the headline method the two certificates are:

- the Lyapunov value V_k = ||z_k - z||^2 + (1/3)||x_k - x_{k-1}||^2 with
  z_k = x_k + y_{k-1}, y_j = lam*B(x_j), and z = x* + y* built from a known
  solution pair; V is non-increasing inside the admissible step range, each
  step decreasing it by at least eps*||x_{k+1} - x_k||^2;
- the per-step inequality slack (see ``lemma3_slack``), which is nonnegative
  as a consequence of monotonicity alone, so it holds even when the backward
  operator is nonsmooth.

Both need a known solution; runs without a certificate skip them (the trace
fields stay empty) rather than substituting anything.
"""

import io
from dataclasses import dataclass

from . import _kernels
from .errors import SplitflowError
from .vectors import as_vector, nrm2_of_diff

CSV_HEADER = "k,residual,lyapunov,lemma3_slack,dist,step_x,step_z,wall_nanos"


@dataclass(frozen=True)
class TraceRecord:
    """One diagnostics row per iteration; None marks a non-applicable field."""

    k: int
    residual: float
    lyapunov: float | None
    lemma3_slack: float | None
    dist: float | None
    step_x: float | None
    step_z: float | None
    wall_nanos: int | None


def _require_pair(pair):
    if pair is None:
        raise SplitflowError(
            "this diagnostic needs a certified solution pair (x, y)"
        )
    x_star, y_star = pair
    return as_vector(x_star), as_vector(y_star)


def lyapunov_value(state, lam: float, pair) -> float:
    """V_k = ||z_k - z||^2 + (1/3)||x_k - x_{k-1}||^2, z_k = x_k + lam*b_prev.

    ``pair`` is (x*, y*) with y* = lam*B(x*); lam enters exactly as in the
    run configuration (never rescaled).
    """
    x_star, y_star = _require_pair(pair)
    z_k = _kernels.axpy(lam, as_vector(state.b_prev), as_vector(state.x_curr))
    z_bar = _kernels.axpy(1.0, y_star, x_star)
    d_z = nrm2_of_diff(z_k, z_bar)
    d_x = nrm2_of_diff(state.x_curr, state.x_prev)
    return d_z * d_z + d_x * d_x / 3.0


def lemma3_slack(state_before, state_after, lam: float, pair) -> float:
    """Right side minus left side of the one-step contraction inequality

        ||(x_{k+1}+y_k) - (x+y)||^2 <= ||(x_k+y_{k-1}) - (x+y)||^2
            - 2<y_k - y, x_k - x> + 4<y_k - y_{k-1}, x_k - x_{k+1}>
            - ||x_{k+1} - x_k||^2 - 3||y_k - y_{k-1}||^2

    with y_j = lam*B(x_j) and (x, y) a solution pair. Monotonicity of the
    backward operator makes the slack nonnegative; no smoothness is needed.
    Uses the forward values cached in the states, so it costs no extra
    operator evaluation.
    """
    x_star, y_star = _require_pair(pair)
    x_k = as_vector(state_before.x_curr)
    x_next = as_vector(state_after.x_curr)
    y_k = lam * as_vector(state_after.b_prev)
    y_prev = lam * as_vector(state_before.b_prev)
    z_bar = x_star + y_star

    lhs = nrm2_of_diff(x_next + y_k, z_bar) ** 2
    rhs = nrm2_of_diff(x_k + y_prev, z_bar) ** 2
    rhs -= 2.0 * _kernels.dot(y_k - y_star, x_k - x_star)
    rhs += 4.0 * _kernels.dot(y_k - y_prev, x_k - x_next)
    rhs -= nrm2_of_diff(x_next, x_k) ** 2
    rhs -= 3.0 * nrm2_of_diff(y_k, y_prev) ** 2
    return rhs - lhs


def pd_lyapunov(state, tau: float, sigma: float, K, saddle) -> float:
    """(1/tau)||u_k - u*||^2 + (1/sigma)||(v_k - sigma*K u_k) - (v* - sigma*K u*)||^2.

    Non-increasing along the corrected primal-dual iteration for any saddle
    point (u*, v*).
    """
    u_star, v_star = as_vector(saddle[0]), as_vector(saddle[1])
    du = nrm2_of_diff(state.u_curr, u_star)
    w_k = _kernels.axpy(-sigma, K.apply(state.u_curr), as_vector(state.v_curr))
    w_star = _kernels.axpy(-sigma, K.apply(u_star), v_star)
    dw = nrm2_of_diff(w_k, w_star)
    return du * du / tau + dw * dw / sigma


def inclusion_residual(x, problem, lam: float) -> float:
    """||x - J_{lam*A}(x - lam*B(x))||: zero exactly on the solution set."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    A, B = problem.A_res, problem.B_fwd
    if A is None or B is None:
        raise SplitflowError(
            "inclusion residual needs resolvent + forward access "
            f"(problem family '{getattr(problem, 'family', '?')}')"
        )
    x = as_vector(x)
    fwd = _kernels.axpy(-lam, B(x), x)
    return nrm2_of_diff(x, A(lam, fwd))


def _field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace_csv(records, path, include_wall: bool = False):
    """Write the trace in the stable schema.

    wall_nanos is written empty unless ``include_wall`` is set: timings vary
    run to run, and the default keeps re-runs of the same configuration
    byte-identical.
    """
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in records:
        wall = r.wall_nanos if include_wall else None
        buf.write(
            ",".join(
                (
                    str(r.k),
                    _field(r.residual),
                    _field(r.lyapunov),
                    _field(r.lemma3_slack),
                    _field(r.dist),
                    _field(r.step_x),
                    _field(r.step_z),
                    _field(wall),
                )
            )
            + "\n"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
