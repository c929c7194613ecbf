"""Batch experiment runner.

Subcommands:

    splitflow run <config>        one solve, writes trace.csv + summary.json
    splitflow sweep <config> --param <name> --values <csv>
                                  one run per value, writes sweep.csv
    splitflow integrate <config>  continuous-time flow, writes trajectory.csv

Configs are line-oriented ``key = value`` documents with ``#`` comments.
Unknown keys are rejected; every run is reproducible from config + seed.
Exit codes: 0 converged (or sweep/integrate completed), 1 bad config,
2 diverged, 3 iteration budget exhausted.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

from . import _kernels, dynamics, problems, solvers
from .diagnostics import write_trace_csv
from .errors import ConfigError, SplitflowError

_FLOW_NAMES = ("dr", "shadow", "dyn4")
_INTEGRATORS = ("euler", "rk4")
_SWEEPABLE = ("lambda", "tau", "sigma", "dim", "seed")

# method -> problem pieces it needs; mirrors solvers.check_compatible but is
# static so configs can be rejected before any instance is built.
_PAIRING = {
    "skew-vi": {"gradient", "prox-point", "dr", "shadow-dr",
                "double-forward-dr", "frb", "reflected-pg"},
    "composite-l1": {"dr", "shadow-dr", "double-forward-dr", "frb"},
    "bilinear-saddle": {"pdhg", "shadow-pd"},
    "feasibility": {"dr", "shadow-dr", "double-forward-dr", "frb",
                    "reflected-pg"},
}


@dataclass
class ExperimentConfig:
    """Everything a run needs; None means "use the documented default"."""

    problem: str | None = None
    method: str | None = None
    # problem parameters
    dim: int | None = None
    scale: float | None = None
    m: int | None = None
    n: int | None = None
    sparsity: float | None = None
    mu: float | None = None
    box_lo: float | None = None
    box_hi: float | None = None
    # solver parameters
    lam: float | None = None
    tau: float | None = None
    sigma: float | None = None
    eps: float | None = None
    max_iters: int = 100_000
    tol: float = 1e-8
    seed: int = 0
    # flags and output
    out: str | None = None
    unsafe_stepsize: bool = False
    record_wall_time: bool = False
    emit_trajectory: bool = False
    # dynamics
    flow: str | None = None
    integrator: str = "euler"
    h: float | None = None
    t_end: float | None = None


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _positive(value: float, key: str, errors: list):
    if not math.isfinite(value) or value <= 0:
        errors.append(f"{key} must be positive")


# config key -> (attribute, converter)
_KEYS = {
    "problem": ("problem", str),
    "method": ("method", str),
    "dim": ("dim", int),
    "scale": ("scale", float),
    "m": ("m", int),
    "n": ("n", int),
    "sparsity": ("sparsity", float),
    "mu": ("mu", float),
    "box_lo": ("box_lo", float),
    "box_hi": ("box_hi", float),
    "lambda": ("lam", float),
    "tau": ("tau", float),
    "sigma": ("sigma", float),
    "epsilon": ("eps", float),
    "max_iters": ("max_iters", int),
    "tol": ("tol", float),
    "seed": ("seed", int),
    "out": ("out", str),
    "unsafe_stepsize": ("unsafe_stepsize", _parse_bool),
    "record_wall_time": ("record_wall_time", _parse_bool),
    "emit_trajectory": ("emit_trajectory", _parse_bool),
    "flow": ("flow", str),
    "integrator": ("integrator", str),
    "h": ("h", float),
    "T": ("t_end", float),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document; raises ConfigError with every
    problem found, not just the first."""
    cfg = ExperimentConfig()
    errors = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        attr, conv = _KEYS[key]
        try:
            setattr(cfg, attr, conv(value))
        except ValueError:
            errors.append(
                f"line {lineno}: bad value for {key}: {value!r}"
            )
    _validate(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate(cfg: ExperimentConfig, errors: list):
    if cfg.problem is not None and cfg.problem not in problems.FAMILIES:
        known = ", ".join(sorted(problems.FAMILIES))
        errors.append(f"unknown problem {cfg.problem!r} (known: {known})")
    if cfg.method is not None and cfg.method not in solvers.METHOD_NAMES:
        known = ", ".join(solvers.METHOD_NAMES)
        errors.append(f"unknown method {cfg.method!r} (known: {known})")
    if (cfg.problem in _PAIRING and cfg.method is not None
            and cfg.method in solvers.METHOD_NAMES
            and cfg.method not in _PAIRING[cfg.problem]):
        errors.append(
            f"incompatible method/problem: {cfg.method} cannot run on "
            f"{cfg.problem}"
        )
    if (cfg.problem == "skew-vi" and cfg.method in ("gradient", "prox-point")
            and cfg.box_lo is not None):
        errors.append(
            f"incompatible method/problem: {cfg.method} needs skew-vi "
            "without a box"
        )
    for key, value in (("lambda", cfg.lam), ("tau", cfg.tau),
                       ("sigma", cfg.sigma), ("epsilon", cfg.eps),
                       ("tol", cfg.tol), ("h", cfg.h), ("T", cfg.t_end),
                       ("mu", cfg.mu), ("scale", cfg.scale)):
        if value is None:
            continue
        if key in ("mu", "scale"):
            if not math.isfinite(value) or value < 0:
                errors.append(f"{key} must be nonnegative")
        else:
            _positive(value, key, errors)
    for key, value in (("dim", cfg.dim), ("m", cfg.m), ("n", cfg.n)):
        if value is not None and value < 1:
            errors.append(f"{key} must be at least 1")
    if cfg.max_iters < 0:
        errors.append("max_iters must be nonnegative")
    if cfg.sparsity is not None and not (0.0 <= cfg.sparsity <= 1.0):
        errors.append("sparsity must lie in [0, 1]")
    if (cfg.box_lo is None) != (cfg.box_hi is None):
        errors.append("box_lo and box_hi must be given together")
    if (cfg.box_lo is not None and cfg.box_hi is not None
            and not cfg.box_lo < cfg.box_hi):
        errors.append("box_lo must be strictly below box_hi")
    if cfg.flow is not None and cfg.flow not in _FLOW_NAMES:
        errors.append(f"flow must be one of {', '.join(_FLOW_NAMES)}")
    if cfg.integrator not in _INTEGRATORS:
        errors.append(f"integrator must be one of {', '.join(_INTEGRATORS)}")


def build_problem(cfg: ExperimentConfig):
    """Instantiate the configured problem family with documented defaults."""
    if cfg.problem is None:
        raise ConfigError(["problem is required"])
    seed = cfg.seed
    if cfg.problem == "skew-vi":
        box = None
        if cfg.box_lo is not None:
            box = (cfg.box_lo, cfg.box_hi)
        return problems.make_skew_vi(
            dim=cfg.dim if cfg.dim is not None else 2,
            scale=cfg.scale if cfg.scale is not None else 1.0,
            seed=seed, box=box,
        )
    if cfg.problem == "composite-l1":
        return problems.make_composite(
            m=cfg.m if cfg.m is not None else 20,
            n=cfg.n if cfg.n is not None else 50,
            sparsity=cfg.sparsity if cfg.sparsity is not None else 0.1,
            mu=cfg.mu if cfg.mu is not None else 0.1,
            seed=seed,
        )
    if cfg.problem == "bilinear-saddle":
        return problems.make_saddle(
            n=cfg.n if cfg.n is not None else 5,
            m=cfg.m if cfg.m is not None else 7,
            seed=seed,
        )
    if cfg.problem == "feasibility":
        return problems.make_feasibility(
            dim=cfg.dim if cfg.dim is not None else 2, seed=seed,
        )
    raise ConfigError([f"unknown problem {cfg.problem!r}"])


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _write_summary(path, payload: dict):
    body = {k: _json_safe(v) for k, v in payload.items() if v is not None}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


_EXIT_FOR = {"converged": 0, "diverged": 2, "max-iters": 3}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one configured solve; writes trace.csv and summary.json into the
    output directory (default: current directory)."""
    if cfg.method is None:
        raise ConfigError(["method is required"])
    problem = build_problem(cfg)
    base = solvers.SolverConfig(
        lam=cfg.lam, tau=cfg.tau, sigma=cfg.sigma, eps=cfg.eps,
        max_iters=cfg.max_iters, tol=cfg.tol,
        unsafe_stepsize=cfg.unsafe_stepsize,
    )
    resolved = solvers.resolve_config(base, problem, cfg.method)
    state, trace, termination = solvers.run(cfg.method, problem, resolved)

    outdir = cfg.out or "."
    os.makedirs(outdir, exist_ok=True)
    write_trace_csv(trace, os.path.join(outdir, "trace.csv"),
                    include_wall=cfg.record_wall_time)
    final_residual = trace[-1].residual if trace else None
    summary = {
        "problem": cfg.problem,
        "method": cfg.method,
        "termination": termination,
        "iterations": state.k,
        "final_residual": final_residual,
        "lambda": resolved.lam,
        "tau": resolved.tau,
        "sigma": resolved.sigma,
        "epsilon": resolved.eps,
        "L": problem.lipschitz,
        "seed": cfg.seed,
        "tol": resolved.tol,
        "max_iters": resolved.max_iters,
        "kernel_backend": _kernels.BACKEND,
    }
    if trace and trace[-1].dist is not None:
        summary["final_dist"] = trace[-1].dist
    _write_summary(os.path.join(outdir, "summary.json"), summary)

    if cfg.emit_trajectory:
        traj = _integrate_flow(cfg, problem, lam=resolved.lam)
        dynamics.write_trajectory_csv(
            traj, os.path.join(outdir, "trajectory.csv"))
    return _EXIT_FOR[termination]


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def sweep(cfg: ExperimentConfig, param: str, values) -> int:
    """Run the config once per value of one sweepable parameter.

    Each run writes into its own subdirectory; a sweep.csv summary table
    lands in the output root and is also printed. Divergence inside the
    sweep is data, not an error.
    """
    if param not in _SWEEPABLE:
        raise ConfigError(
            [f"parameter {param!r} is not sweepable "
             f"(choose from {', '.join(_SWEEPABLE)})"]
        )
    attr = {"lambda": "lam"}.get(param, param)
    outdir = cfg.out or "."
    os.makedirs(outdir, exist_ok=True)
    rows = []
    for value in values:
        sub = dataclasses.replace(cfg)
        setattr(sub, attr, value)
        sub.out = os.path.join(outdir, f"{param}-{_format_value(value)}")
        try:
            code = run_experiment(sub)
        except SplitflowError as exc:
            raise ConfigError(
                [f"{param} = {_format_value(value)}: {exc}"]
            ) from exc
        with open(os.path.join(sub.out, "summary.json"),
                  encoding="utf-8") as fh:
            summary = json.load(fh)
        rows.append({
            "value": value,
            "converged": code == 0,
            "termination": summary["termination"],
            "iterations": summary["iterations"],
            "final_residual": summary.get("final_residual"),
        })

    lines = [f"{param},converged,termination,iterations,final_residual"]
    for row in rows:
        res = row["final_residual"]
        lines.append(",".join([
            _format_value(row["value"]),
            "yes" if row["converged"] else "no",
            row["termination"],
            str(row["iterations"]),
            "" if res is None else repr(res),
        ]))
    with open(os.path.join(outdir, "sweep.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"sweep over {param}: {len(rows)} runs")
    for line in lines:
        print("  " + line)
    return 0


def _integrate_flow(cfg: ExperimentConfig, problem, lam: float | None = None):
    flow = cfg.flow
    if flow is None:
        flow = "dr" if problem.B_res is not None and problem.B_fwd is None \
            else "shadow"
    if problem.family == "bilinear-saddle":
        raise ConfigError(
            ["incompatible flow/problem: bilinear-saddle has no single-space "
             "flow to integrate"]
        )
    if lam is None:
        lam = cfg.lam
    if lam is None:
        L = problem.lipschitz
        lam = 0.99 * (1.0 - 3.0 * 1e-2) / (3.0 * L) if L > 0 else 1.0
    h = cfg.h if cfg.h is not None else lam / 100.0
    T = cfg.t_end if cfg.t_end is not None else 10.0
    if flow == "dr":
        if problem.B_res is None:
            raise ConfigError(
                ["flow = dr needs a problem with a resolvent for B"])
        return dynamics.integrate_dr_flow(
            problem.A_res, problem.B_res, lam, problem.x0, h, T,
            method=cfg.integrator)
    if problem.B_fwd is None:
        raise ConfigError(
            [f"flow = {flow} needs a problem with a forward operator"])
    if flow == "shadow":
        return dynamics.integrate_shadow_flow(
            problem.A_res, problem.B_fwd, lam, problem.x0, h, T,
            method=cfg.integrator)
    return dynamics.integrate_dyn4_flow(
        problem.A_res, problem.B_fwd, lam, problem.x0, h, T)


def integrate_experiment(cfg: ExperimentConfig) -> int:
    """Integrate the configured continuous-time flow and write
    trajectory.csv + summary.json."""
    problem = build_problem(cfg)
    traj = _integrate_flow(cfg, problem)
    outdir = cfg.out or "."
    os.makedirs(outdir, exist_ok=True)
    dynamics.write_trajectory_csv(traj, os.path.join(outdir, "trajectory.csv"))
    summary = {
        "problem": cfg.problem,
        "system": traj.system,
        "integrator": cfg.integrator,
        "steps": len(traj.times) - 1,
        "t_final": float(traj.times[-1]),
        "final_field_norm": (float(traj.field_norms[-1])
                             if traj.field_norms is not None else None),
        "seed": cfg.seed,
        "experimental": bool(traj.meta.get("experimental", False)),
        "kernel_backend": _kernels.BACKEND,
    }
    _write_summary(os.path.join(outdir, "summary.json"), summary)
    return 0


def _load_config(path: str, args) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path!r}: {exc}"]) from exc
    cfg = parse_config(text)
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "unsafe_stepsize", False):
        cfg.unsafe_stepsize = True
    return cfg


def _parse_values(raw: str, param: str):
    items = [part.strip() for part in raw.split(",") if part.strip()]
    conv = int if param in ("dim", "seed") else float
    try:
        return [conv(item) for item in items]
    except ValueError as exc:
        raise ConfigError([f"bad sweep value list {raw!r}: {exc}"]) from exc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="splitflow",
        description="operator splitting experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, unsafe=True):
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        if unsafe:
            p.add_argument("--unsafe-stepsize", action="store_true",
                           dest="unsafe_stepsize",
                           help="allow step sizes outside the proven range")

    p_run = sub.add_parser("run", help="run one configured solve")
    add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run once per parameter value")
    add_common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help=f"one of {', '.join(_SWEEPABLE)}")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")

    p_int = sub.add_parser("integrate",
                           help="integrate the continuous-time flow")
    add_common(p_int, unsafe=False)

    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config, args)
        if args.command == "run":
            return run_experiment(cfg)
        if args.command == "sweep":
            values = _parse_values(args.values, args.param)
            return sweep(cfg, args.param, values)
        return integrate_experiment(cfg)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    except SplitflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
