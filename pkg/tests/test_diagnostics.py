import numpy as np
import pytest

from splitflow.diagnostics import (
    CSV_HEADER,
    TraceRecord,
    inclusion_residual,
    lemma3_slack,
    lyapunov_value,
    pd_lyapunov,
    write_trace_csv,
)
from splitflow.operators import identity_resolvent, skew_operator, zero_forward
from splitflow.problems import make_saddle, make_skew_vi
from splitflow.solvers import (
    SolverConfig,
    init_forward_state,
    init_pd_state,
    resolve_config,
    run,
    step_proximal_point,
    step_shadow_dr,
    step_shadow_pd,
)
from splitflow.vectors import vector

SKEW2 = skew_operator(2)
ID = identity_resolvent()
ORIGIN_PAIR = (vector([0.0, 0.0]), vector([0.0, 0.0]))


def test_lyapunov_worked_example():
    st = init_forward_state(vector([1, 0]), SKEW2)
    # z0 = x0 + lam*B(x_prev) = (1, -0.2); V0 = |z0|^2 + 0
    assert lyapunov_value(st, 0.2, ORIGIN_PAIR) == pytest.approx(1.04, abs=1e-15)


def test_lyapunov_zero_at_solution():
    st = init_forward_state(vector([0, 0]), SKEW2)
    assert lyapunov_value(st, 0.2, ORIGIN_PAIR) == 0.0


def test_lyapunov_decreases_after_one_step():
    st = init_forward_state(vector([1, 0]), SKEW2)
    v0 = lyapunov_value(st, 0.2, ORIGIN_PAIR)
    st = step_shadow_dr(st, ID, SKEW2, 0.2)
    v1 = lyapunov_value(st, 0.2, ORIGIN_PAIR)
    assert v1 <= v0


def test_lemma3_slack_identity_instance_zero():
    Z = zero_forward(2)
    st0 = init_forward_state(vector([0.7, -0.1]), Z)
    st1 = step_shadow_dr(st0, ID, Z, 0.5)
    pair = (vector([0.7, -0.1]), vector([0.0, 0.0]))
    # A = B = 0: the iterate never moves and every term vanishes
    assert lemma3_slack(st0, st1, 0.5, pair) == pytest.approx(0.0, abs=1e-15)


def test_lemma3_slack_nonnegative_on_skew_step():
    st0 = init_forward_state(vector([1, 0]), SKEW2)
    st1 = step_shadow_dr(st0, ID, SKEW2, 0.2)
    assert lemma3_slack(st0, st1, 0.2, ORIGIN_PAIR) >= -1e-12


def test_lemma3_reduces_to_fejer_for_prox_point():
    # B = 0 kills the monotonicity cross term; slack equals the
    # firm-nonexpansiveness surplus of the resolvent step
    Z = zero_forward(2)
    from splitflow.operators import monotone_linear_resolvent
    A = monotone_linear_resolvent(np.array([[1.0, 0.0], [0.0, 2.0]]))
    x_star = vector([0.0, 0.0])
    pair = (x_star, vector([0.0, 0.0]))
    st0 = init_forward_state(vector([2.0, 1.0]), Z)
    st1 = step_shadow_dr(st0, A, Z, 0.5)
    slack = lemma3_slack(st0, st1, 0.5, pair)
    lhs = np.linalg.norm(st1.x_curr) ** 2
    rhs_fejer = (np.linalg.norm(st0.x_curr) ** 2
                 - np.linalg.norm(st1.x_curr - st0.x_curr) ** 2)
    assert slack == pytest.approx(rhs_fejer - lhs, rel=1e-12)


def test_pd_lyapunov_nonincreasing():
    p = make_saddle(4, 5, seed=3)
    cfg = resolve_config(SolverConfig(), p, "shadow-pd")
    st = init_pd_state(p.u0, p.v0)
    prev = pd_lyapunov(st, cfg.tau, cfg.sigma, p.K, p.saddle)
    for _ in range(100):
        st = step_shadow_pd(st, p.g_prox, p.fstar_prox, p.K, cfg.tau, cfg.sigma)
        cur = pd_lyapunov(st, cfg.tau, cfg.sigma, p.K, p.saddle)
        assert cur <= prev + 1e-10
        prev = cur


def test_inclusion_residual_examples():
    p = make_skew_vi(dim=2)
    assert inclusion_residual(p.solution, p, 0.2) == 0.0
    assert inclusion_residual(vector([1, 0]), p, 0.2) == pytest.approx(0.2)


def test_trace_record_csv_schema(tmp_path):
    records = [
        TraceRecord(k=1, residual=0.5, lyapunov=1.0, lemma3_slack=0.0,
                    dist=2.0, step_x=0.1, step_z=0.2, wall_nanos=123),
        TraceRecord(k=2, residual=0.25, lyapunov=None, lemma3_slack=None,
                    dist=None, step_x=None, step_z=None, wall_nanos=None),
    ]
    path = tmp_path / "trace.csv"
    write_trace_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[0] == "k,residual,lyapunov,lemma3_slack,dist,step_x,step_z,wall_nanos"
    assert lines[1] == "1,0.5,1.0,0.0,2.0,0.1,0.2,"
    assert lines[2] == "2,0.25,,,,,,"


def test_trace_csv_wall_column_off_by_default(tmp_path):
    rec = TraceRecord(k=1, residual=1.0, lyapunov=None, lemma3_slack=None,
                      dist=None, step_x=None, step_z=None, wall_nanos=999)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_trace_csv([rec], a)
    write_trace_csv([rec], b, include_wall=True)
    assert a.read_text().splitlines()[1].endswith(",")
    assert b.read_text().splitlines()[1].endswith(",999")


def test_trace_csv_byte_deterministic(tmp_path):
    p = make_skew_vi(dim=4, seed=9)
    out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    for out in (out1, out2):
        st, tr, term = run("shadow-dr", p, SolverConfig(lam=0.3))
        write_trace_csv(tr, out)
    assert out1.read_bytes() == out2.read_bytes()


def test_run_trace_has_lyapunov_only_with_certificate():
    p = make_skew_vi(dim=2)
    st, tr, term = run("shadow-dr", p, SolverConfig(lam=0.3, max_iters=5, tol=0))
    assert all(r.lyapunov is not None for r in tr)
    from conftest import make_instance
    blind = make_instance(A_res=ID, B_fwd=SKEW2, x0=vector([1, 0]))
    st, tr, term = run("shadow-dr", blind, SolverConfig(lam=0.3, max_iters=5, tol=0))
    assert all(r.lyapunov is None for r in tr)
    assert all(r.lemma3_slack is None for r in tr)
