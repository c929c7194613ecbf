"""Operator splitting methods for monotone inclusions 0 in (A+B)(x).

The centerpiece is a Douglas-Rachford variant that iterates directly in the
shadow sequence: one forward evaluation of B and one resolvent of A per
step, convergent for merely monotone Lipschitz B (no cocoercivity), with
step sizes up to (1-3*eps)/(3L). Classical baselines (gradient, proximal
point, DR, forward-reflected-backward, PDHG) and a corrected primal-dual
variant ship alongside for comparison, plus integrators for the
continuous-time systems the discretizations come from.

Hot elementwise kernels run through a compiled extension when available and
a pure numpy fallback otherwise; `splitflow.backend()` reports which one is
active and the two produce bit-identical elementwise results.
"""

from ._kernels import backend
from .diagnostics import TraceRecord, inclusion_residual, write_trace_csv
from .errors import (
    ConfigError,
    DimensionMismatchError,
    DivergenceError,
    IncompatiblePairingError,
    InnerSolveError,
    NonFiniteError,
    OperatorValidationError,
    SplitflowError,
)
from .operators import (
    ForwardOp,
    LinearMap,
    ResolventOp,
    box_resolvent,
    hyperplane_resolvent,
    identity_resolvent,
    l1_resolvent,
    linear_forward,
    linear_map,
    monotone_linear_resolvent,
    operator_norm_estimate,
    project_box,
    project_hyperplane,
    skew_operator,
    soft_threshold,
    zero_forward,
)
from .problems import (
    ProblemInstance,
    make_composite,
    make_feasibility,
    make_saddle,
    make_skew_vi,
)
from .solvers import (
    METHOD_NAMES,
    SolverConfig,
    SolverState,
    check_compatible,
    resolve_config,
    run,
    shadow_dr_step_range,
)

__version__ = "0.1.0"

__all__ = [
    "METHOD_NAMES",
    "ConfigError",
    "DimensionMismatchError",
    "DivergenceError",
    "ForwardOp",
    "IncompatiblePairingError",
    "InnerSolveError",
    "LinearMap",
    "NonFiniteError",
    "OperatorValidationError",
    "ProblemInstance",
    "ResolventOp",
    "SolverConfig",
    "SolverState",
    "SplitflowError",
    "TraceRecord",
    "backend",
    "box_resolvent",
    "check_compatible",
    "hyperplane_resolvent",
    "identity_resolvent",
    "inclusion_residual",
    "l1_resolvent",
    "linear_forward",
    "linear_map",
    "make_composite",
    "make_feasibility",
    "make_saddle",
    "make_skew_vi",
    "monotone_linear_resolvent",
    "operator_norm_estimate",
    "project_box",
    "project_hyperplane",
    "resolve_config",
    "run",
    "shadow_dr_step_range",
    "skew_operator",
    "soft_threshold",
    "write_trace_csv",
    "zero_forward",
    "__version__",
]
