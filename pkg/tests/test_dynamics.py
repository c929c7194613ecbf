import numpy as np
import pytest

from splitflow.dynamics import (
    Trajectory,
    integrate_dr_flow,
    integrate_dyn4_flow,
    integrate_shadow_flow,
    trajectory_vs_iterates,
    write_trajectory_csv,
)
from splitflow.errors import InnerSolveError, SplitflowError
from splitflow.operators import (
    identity_resolvent,
    monotone_linear_resolvent,
    skew_operator,
    zero_forward,
)
from splitflow.problems import make_feasibility, make_skew_vi
from splitflow.solvers import init_forward_state, step_shadow_dr
from splitflow.vectors import vector

scipy_linalg = pytest.importorskip("scipy.linalg")

ID = identity_resolvent()
SKEW2 = skew_operator(2)


def test_dr_flow_constant_when_both_identities():
    traj = integrate_dr_flow(ID, ID, 1.0, vector([2.0, -1.0]), h=0.05, T=1.0)
    assert np.allclose(traj.points, traj.points[0], atol=1e-15)
    assert traj.system == "dr-flow"
    assert np.all(traj.field_norms == 0.0)


def test_dr_flow_h_guard():
    with pytest.raises(ValueError):
        integrate_dr_flow(ID, ID, 1.0, vector([1.0]), h=0.2, T=1.0)


def test_dr_flow_two_lines_contracts():
    p = make_feasibility(dim=2, seed=0)
    traj = integrate_dr_flow(p.A_res, p.B_res, 1.0, p.x0, h=1e-2, T=20.0)
    d = np.linalg.norm(traj.points - np.asarray(p.solution), axis=1)
    # z-distance to the planted intersection never increases
    assert np.all(np.diff(d) <= 1e-9)
    assert np.linalg.norm(traj.points[10] - traj.points[-1]) < d[0]


def test_dr_flow_kinetic_energy_bound():
    # integral of |dz/dt|^2 is at most |z0 - zbar|^2 / 2
    p = make_feasibility(dim=2, seed=1)
    traj = integrate_dr_flow(p.A_res, p.B_res, 1.0, p.x0, h=1e-3, T=60.0)
    energy = np.trapezoid(traj.field_norms ** 2, traj.times)
    bound = 0.5 * np.linalg.norm(np.asarray(p.x0) - np.asarray(p.solution)) ** 2
    assert energy <= bound * 1.05


def _exact_skew_flow_matrix(lam):
    S = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.linalg.inv(np.eye(2) + lam * S) - np.eye(2)


def test_euler_self_convergence_order():
    p = make_skew_vi(dim=2, seed=0)
    lam = 0.3
    G = _exact_skew_flow_matrix(lam)
    z0 = np.asarray(p.x0)
    errs = []
    for h in (lam / 100, lam / 200, lam / 400):
        t = integrate_dr_flow(p.A_res, p.B_res, lam, p.x0, h=h, T=3.0)
        exact = scipy_linalg.expm(float(t.times[-1]) * G) @ z0
        errs.append(np.linalg.norm(t.points[-1] - exact))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 0.9


def test_rk4_order_on_smooth_field():
    p = make_skew_vi(dim=2, seed=0)
    lam = 0.3
    G = _exact_skew_flow_matrix(lam)
    z0 = np.asarray(p.x0)
    errs = []
    for h in (lam / 10, lam / 20, lam / 40):
        t = integrate_dr_flow(p.A_res, p.B_res, lam, p.x0, h=h, T=3.0,
                              method="rk4")
        exact = scipy_linalg.expm(float(t.times[-1]) * G) @ z0
        errs.append(np.linalg.norm(t.points[-1] - exact))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.5


def test_shadow_flow_proximal_point_when_b_zero():
    # B = 0: dx/dt = J_A(x) - x; for linear A = I this is x' = (1/(1+lam)-1) x
    A = monotone_linear_resolvent(np.eye(2))
    Z = zero_forward(2)
    lam = 1.0
    traj = integrate_shadow_flow(A, Z, lam, vector([2.0, 0.0]), h=0.01, T=5.0)
    expect = 2.0 * np.exp(-0.5 * traj.times[-1])
    assert traj.points[-1][0] == pytest.approx(expect, rel=1e-2)
    assert traj.points[-1][1] == 0.0


def test_shadow_flow_norm_decreasing_on_skew():
    traj = integrate_shadow_flow(ID, SKEW2, 0.2, vector([1.0, 0.0]),
                                 h=1e-3, T=5.0)
    norms = np.linalg.norm(traj.points, axis=1)
    assert np.all(np.diff(norms) <= 1e-10)
    assert traj.companion is not None
    # companion is lam*B(x) along the trajectory (to inner-solve accuracy)
    k = 500
    y = 0.2 * np.asarray(SKEW2(traj.points[k]))
    assert np.allclose(traj.companion[k], y, atol=1e-9)


def test_shadow_flow_requires_contraction():
    with pytest.raises(InnerSolveError):
        integrate_shadow_flow(ID, SKEW2, 1.0, vector([1.0, 0.0]), h=0.05, T=1.0)


def test_shadow_flow_consistent_with_dr_flow():
    # same system through two routes: z-integration with resolvent of B
    # versus inner fixed point; x(t) agrees to O(h)
    lam = 0.2
    x0 = vector([1.0, 0.0])
    B_res = monotone_linear_resolvent(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    h = 1e-3
    T = 4.0
    z0 = np.asarray(x0) + lam * np.asarray(SKEW2(x0))
    zt = integrate_dr_flow(ID, B_res, lam, z0, h=h, T=T)
    xt = integrate_shadow_flow(ID, SKEW2, lam, x0, h=h, T=T)
    x_from_z = np.array([B_res(lam, z) for z in zt.points])
    worst = np.linalg.norm(x_from_z - xt.points, axis=1).max()
    assert worst <= 10 * h


def test_dyn4_flagged_experimental_and_close_to_shadow():
    lam = 0.2
    x0 = vector([1.0, 0.0])
    h = 1e-3
    T = 3.0
    t4 = integrate_dyn4_flow(ID, SKEW2, lam, x0, h=h, T=T)
    assert t4.meta["experimental"] is True
    assert t4.system == "dyn4-flow"
    norms = np.linalg.norm(t4.points, axis=1)
    assert norms[-1] < norms[0]  # reported, matching the shadow system
    t3 = integrate_shadow_flow(ID, SKEW2, lam, x0, h=h, T=T)
    gap = np.linalg.norm(t4.points - t3.points, axis=1).max()
    assert gap <= 100 * h  # first-order agreement when A = 0, B linear


def test_dyn4_proximal_point_when_b_zero():
    A = monotone_linear_resolvent(np.eye(2))
    Z = zero_forward(2)
    t4 = integrate_dyn4_flow(A, Z, 1.0, vector([2.0, 0.0]), h=0.05, T=2.0)
    t3 = integrate_shadow_flow(A, Z, 1.0, vector([2.0, 0.0]), h=0.05, T=2.0)
    assert np.allclose(t4.points, t3.points, atol=1e-9)


def test_trajectory_vs_iterates_trivial_cases():
    traj = Trajectory(times=np.array([0.0, 1.0]),
                      points=np.array([[1.0, 2.0], [1.0, 2.0]]),
                      system="dr-flow")
    assert trajectory_vs_iterates(traj, [vector([1, 2]), vector([1, 2])], 1.0) == 0.0
    assert trajectory_vs_iterates(traj, [vector([1, 2])], 1.0) == 0.0


def test_trajectory_vs_iterates_coverage_gap():
    traj = Trajectory(times=np.array([0.0, 0.5]),
                      points=np.zeros((2, 1)), system="dr-flow")
    with pytest.raises(SplitflowError):
        trajectory_vs_iterates(traj, [vector([0.0])] * 5, 1.0)


def test_trajectory_vs_iterates_deviation_shrinks_with_lam():
    p = make_skew_vi(dim=2, seed=0)
    devs = []
    for lam in (0.2, 0.1, 0.05):
        st = init_forward_state(p.x0, p.B_fwd)
        xs = [st.x_curr]
        for _ in range(20):
            st = step_shadow_dr(st, p.A_res, p.B_fwd, lam)
            xs.append(st.x_curr)
        traj = integrate_shadow_flow(p.A_res, p.B_fwd, lam, p.x0,
                                     h=lam / 100, T=20 * lam)
        devs.append(trajectory_vs_iterates(traj, xs, lam))
    assert devs[0] > devs[1] > devs[2]


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.5, 1.0]), points=np.zeros((2, 1)),
                   system="x")
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.0]), points=np.zeros((2, 1)),
                   system="x")
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 1.0]), points=np.zeros((3, 1)),
                   system="x")


def test_write_trajectory_csv(tmp_path):
    traj = integrate_dr_flow(ID, ID, 1.0, vector([1.0, 2.0]), h=0.1, T=0.3)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,dz_norm"
    assert len(lines) == 1 + len(traj.times)
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == 1.0
    assert float(first[3]) == 0.0
