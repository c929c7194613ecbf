"""Fine-step integration of the continuous-time systems behind the solvers.

Three vector fields are integrated:

- the governing-variable flow  dz/dt = J_{lam*A}(2 J_{lam*B}(z) - z) - J_{lam*B}(z),
  whose forward-Euler discretization at unit step is exactly the dr
  iteration;
- the shadow flow of the same system, reported in x = J_{lam*B}(z); it is
  integrated through the z-variable (which is what guarantees trajectories
  exist) with the resolvent of the forward operator computed by an inner
  fixed-point solve of x + lam*B(x) = z, a contraction for lam*L < 1;
- an experimental semi-explicit scheme where the derivative of the forward
  term is finite-differenced along the trajectory. Nothing is proven about
  this system; its trajectories are reported, never asserted, and the
  result is flagged experimental in its metadata.

Default integrator: explicit Euler with the guard h <= lam/10. RK4 is
available for order measurements on smooth (linear) instances.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InnerSolveError, NonFiniteError, SplitflowError
from .vectors import as_vector, norm


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory: times[i] -> points[i]; times strictly increasing
    from 0. ``field_norms`` holds ||dz/dt|| (or ||dx/dt||) at each sample
    when the integrator provides it; ``companion`` carries y(t) for the
    shadow system."""

    times: np.ndarray
    points: np.ndarray
    system: str
    field_norms: np.ndarray | None = None
    companion: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.points):
            raise ValueError("times and points must have equal length")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def _check_h(h: float, lam: float):
    if h <= 0:
        raise ValueError("h must be positive")
    if h > lam / 10.0 * (1.0 + 1e-12):
        raise ValueError(f"h must be at most lam/10 = {lam / 10.0:g}")


def _steps(T: float, h: float) -> int:
    if T <= 0:
        raise ValueError("T must be positive")
    steps = int(round(T / h))
    return max(steps, 1)


def _finite(z, what: str):
    if not np.all(np.isfinite(z)):
        raise NonFiniteError(f"{what} left the finite range")
    return z


def _integrate(field_fn, z0, h: float, T: float, method: str, system: str,
               meta=None):
    if method not in ("euler", "rk4"):
        raise ValueError("integrator must be 'euler' or 'rk4'")
    steps = _steps(T, h)
    z = as_vector(z0).copy()
    points = np.empty((steps + 1, z.shape[0]))
    norms = np.empty(steps + 1)
    points[0] = z
    for i in range(steps):
        k1 = field_fn(z)
        norms[i] = norm(k1)
        if method == "euler":
            z = _kernels.axpy(h, k1, z)
        else:
            k2 = field_fn(_kernels.axpy(0.5 * h, k1, z))
            k3 = field_fn(_kernels.axpy(0.5 * h, k2, z))
            k4 = field_fn(_kernels.axpy(h, k3, z))
            incr = k1 + 2.0 * k2 + 2.0 * k3 + k4
            z = _kernels.axpy(h / 6.0, incr, z)
        _finite(z, system)
        points[i + 1] = z
    norms[steps] = norm(field_fn(z))
    times = h * np.arange(steps + 1)
    return Trajectory(times=times, points=points, system=system,
                      field_norms=norms, meta=dict(meta or {}))


def integrate_dr_flow(A, B, lam: float, z0, h: float, T: float,
                      method: str = "euler") -> Trajectory:
    """Integrate dz/dt = J_{lam*A}(2 J_{lam*B}(z) - z) - J_{lam*B}(z).

    A and B are resolvent operators. The field is built from nonexpansive
    maps, so the flow exists and the distance to any stationary point is
    non-increasing; small-step Euler stays faithful to that.
    """
    _check_h(h, lam)

    def field_fn(z):
        x = B(lam, z)
        return A(lam, _kernels.combine(2.0, x, -1.0, z)) - x

    return _integrate(field_fn, z0, h, T, method, "dr-flow")


def _make_inner_resolver(B, lam: float, inner_tol: float, inner_max: int):
    if lam * B.lipschitz_L >= 1.0:
        raise InnerSolveError(
            "shadow flow needs lam*L < 1 for the inner resolvent solve "
            f"(got lam*L = {lam * B.lipschitz_L:g})"
        )

    def resolve_x(z, x_guess):
        x = x_guess
        scale = max(1.0, norm(z))
        for _ in range(inner_max):
            x_next = _kernels.axpy(-lam, B(x), z)
            delta = norm(x_next - x)
            x = x_next
            if delta <= inner_tol * scale:
                return x
        raise InnerSolveError("inner resolvent solve did not converge")

    return resolve_x


def integrate_shadow_flow(A, B, lam: float, x0, h: float, T: float,
                          method: str = "euler", inner_tol: float = 1e-13,
                          inner_max: int = 300) -> Trajectory:
    """Integrate the shadow system through its governing variable.

    B is a forward operator. Internally runs the dr-flow on
    z = x + lam*B(x), where J_{lam*B}(z) comes from the inner fixed-point
    iteration x <- z - lam*B(x); the reported points are x(t), with the
    companion y(t) = z(t) - x(t).
    """
    _check_h(h, lam)
    resolve_x = _make_inner_resolver(B, lam, inner_tol, inner_max)
    x0 = as_vector(x0).copy()
    z = _kernels.axpy(lam, B(x0), x0)
    steps = _steps(T, h)
    dim = z.shape[0]
    points = np.empty((steps + 1, dim))
    companion = np.empty((steps + 1, dim))
    norms = np.empty(steps + 1)
    x_warm = x0

    def field_at(z, x_warm):
        x = resolve_x(z, x_warm)
        f = A(lam, _kernels.combine(2.0, x, -1.0, z)) - x
        return f, x

    f, x = field_at(z, x_warm)
    points[0] = x
    companion[0] = z - x
    norms[0] = norm(f)
    for i in range(steps):
        if method == "euler":
            z = _kernels.axpy(h, f, z)
        elif method == "rk4":
            k1 = f
            k2, x = field_at(_kernels.axpy(0.5 * h, k1, z), x)
            k3, x = field_at(_kernels.axpy(0.5 * h, k2, z), x)
            k4, x = field_at(_kernels.axpy(h, k3, z), x)
            incr = k1 + 2.0 * k2 + 2.0 * k3 + k4
            z = _kernels.axpy(h / 6.0, incr, z)
        else:
            raise ValueError("integrator must be 'euler' or 'rk4'")
        _finite(z, "shadow-flow")
        f, x = field_at(z, x)
        points[i + 1] = x
        companion[i + 1] = z - x
        norms[i + 1] = norm(f)
    times = h * np.arange(steps + 1)
    return Trajectory(times=times, points=points, system="shadow-flow",
                      field_norms=norms, companion=companion)


def integrate_dyn4_flow(A, B, lam: float, x0, h: float, T: float) -> Trajectory:
    """Semi-explicit integration of the variant whose forward-term derivative
    enters the resolvent argument; that derivative is approximated by finite
    differences along the trajectory.

    Experimental: existence of exact trajectories is open, so results carry
    meta={'experimental': True} and are never used in assertions.
    """
    _check_h(h, lam)
    if lam * B.lipschitz_L >= 1.0:
        raise InnerSolveError(
            f"dyn4 flow needs lam*L < 1 (got lam*L = {lam * B.lipschitz_L:g})"
        )
    x = as_vector(x0).copy()
    y = lam * as_vector(B(x))
    ydot = np.zeros_like(y)
    steps = _steps(T, h)
    points = np.empty((steps + 1, x.shape[0]))
    norms = np.empty(steps + 1)
    points[0] = x
    for i in range(steps):
        arg = x - y - ydot
        xdot = A(lam, arg) - x
        norms[i] = norm(xdot)
        x = _kernels.axpy(h, xdot, x)
        _finite(x, "dyn4-flow")
        y_new = lam * as_vector(B(x))
        ydot = (y_new - y) / h
        y = y_new
        points[i + 1] = x
    norms[steps] = norms[steps - 1] if steps > 0 else 0.0
    times = h * np.arange(steps + 1)
    return Trajectory(times=times, points=points, system="dyn4-flow",
                      field_norms=norms, meta={"experimental": True})


def trajectory_vs_iterates(traj: Trajectory, iterates, lam: float) -> float:
    """Max over k of ||x(k*lam) - x_k|| with x(t) linearly interpolated.

    The trajectory must cover [0, K*lam] for K+1 iterates.
    """
    pts = [as_vector(x) for x in iterates]
    if not pts:
        return 0.0
    horizon = lam * (len(pts) - 1)
    if traj.times[-1] < horizon - 1e-12:
        raise SplitflowError(
            f"trajectory covers [0, {traj.times[-1]:g}] but iterates need "
            f"[0, {horizon:g}]"
        )
    sample_times = lam * np.arange(len(pts))
    dim = traj.points.shape[1]
    sampled = np.column_stack([
        np.interp(sample_times, traj.times, traj.points[:, d])
        for d in range(dim)
    ])
    return max(norm(sampled[k] - x_k) for k, x_k in enumerate(pts))


def write_trajectory_csv(traj: Trajectory, path):
    """Columns: t, one per coordinate, then dz_norm when available."""
    dim = traj.points.shape[1]
    cols = ["t"] + [f"x{i + 1}" for i in range(dim)]
    if traj.field_norms is not None:
        cols.append("dz_norm")
    lines = [",".join(cols)]
    for i, t in enumerate(traj.times):
        row = [repr(float(t))] + [repr(float(v)) for v in traj.points[i]]
        if traj.field_norms is not None:
            row.append(repr(float(traj.field_norms[i])))
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
