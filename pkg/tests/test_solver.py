from __future__ import annotations

import math

import numpy as np
import pytest

from imvl.cases import builtin_case
from imvl.coefficients import get_scheme
from imvl.grid_ops import Grid
from imvl.isotherms import Linear
from imvl.solver import (
    NewtonError,
    Periodic,
    Problem,
    SingularJacobianError,
    SolverConfig,
    SolverError,
    StepFailure,
    compute_errors,
    discretize,
    flux_recover,
    initial_state,
    newton_solve,
    run,
    step_cn_periodic,
    step_euler_dirichlet,
    step_euler_periodic,
    time_points,
)


# -- Newton -------------------------------------------------------------------


def test_newton_scalar_cubic():
    # psi(c) = c + c^3 = 2 has the root c = 1
    res = newton_solve(lambda x: x + x**3 - 2, lambda x: np.array([[1 + 3 * x[0] ** 2]]), np.array([0.0]), tol=1e-14)
    assert res.x[0] == pytest.approx(1.0, abs=1e-15)
    assert res.iterations <= 8
    h = res.history
    # quadratic convergence near the root
    assert h[-2] < 1e-4 and h[-1] <= 1e-14


def test_newton_linear_is_one_iteration():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    b = rng.normal(size=6)
    res = newton_solve(lambda x: A @ x - b, lambda x: A, np.zeros(6), tol=1e-12)
    assert res.iterations == 1
    assert np.allclose(A @ res.x, b, atol=1e-13)


def test_newton_nonconvergence_reports_history():
    with pytest.raises(NewtonError) as info:
        newton_solve(lambda x: x**2 + 1, lambda x: np.array([[2 * x[0]]]), np.array([0.5]), max_iters=5)
    assert len(info.value.history) == 6


def test_newton_singular_jacobian_names_block():
    def jac(x):
        J = np.eye(4)
        J[2:, :] = 0.0
        return J

    with pytest.raises(SingularJacobianError, match="flux"):
        newton_solve(lambda x: x - 1, jac, np.zeros(4), blocks=(("node", slice(0, 2)), ("flux", slice(2, 4))))


# -- time grid ----------------------------------------------------------------


def test_time_points_land_on_T():
    pts = time_points(1.0, 0.3)
    assert np.allclose(pts, [0.3, 0.6, 0.9, 1.0])
    pts = time_points(1.0, 0.25)
    assert pts.size == 4 and pts[-1] == 1.0
    pts = time_points(1.0, 0.3, report_times=(0.45, 0.6))
    assert 0.45 in pts and pts.size == 5
    # reports near a multiple of dt snap onto it instead of making a sliver step
    pts = time_points(0.8, 0.2, report_times=(0.6000000000000001,))
    assert pts.size == 4


# -- flux recovery and initial state ------------------------------------------


@pytest.mark.parametrize("cid,scheme", [("ex1", "HOS1"), ("ex1", "HOS2"), ("ex3", "HOS1-D"), ("ex3", "HOS2-D")])
def test_flux_recover_fourth_order(cid, scheme):
    case = builtin_case(cid)
    errs = []
    for J in (20, 40):
        p = case.problem(J)
        xs = p.grid.node_points(p.periodic)
        Z = flux_recover(case.exact_c(xs, 0.3), p, scheme)
        errs.append(np.max(np.abs(Z - case.exact_z(p.grid.faces, 0.3))))
    assert math.log2(errs[0] / errs[1]) > 3.7


def test_initial_state_consistent():
    case = builtin_case("ex2")
    p = case.problem(15)
    st = initial_state(p, "HOS3")
    d = discretize(p, "HOS3")
    r = d.delta_nf.apply(st.C) + d.A_face.apply(st.Z / d.D_face)
    assert np.max(np.abs(r)) < 1e-12
    assert st.t == 0.0 and np.allclose(st.Phi, p.isotherm.phi(st.C))


# -- stepping -----------------------------------------------------------------


def test_linear_isotherm_one_newton_iteration():
    case = builtin_case("ex3")
    p = case.problem(20)
    res = run(p, SolverConfig("HOS1-D", "euler", p.grid.h**4), 0.02)
    assert set(res.newton_iters.tolist()) == {1}


def test_langmuir_iterations_bounded():
    case = builtin_case("ex1")
    p = case.problem(20)
    res = run(p, SolverConfig("HOS1", "euler", p.grid.h**4, newton_tol=1e-12), 0.05)
    assert res.newton_iters.max() <= 5


def test_step_functions_match_run():
    case = builtin_case("ex1")
    p = case.problem(16)
    cfg = SolverConfig("HOS2", "euler", 0.01)
    st = initial_state(p, "HOS2")
    s1 = step_euler_periodic(st, p, cfg)
    res = run(p, cfg, 0.01)
    assert np.allclose(s1.C, res.final.C, atol=1e-15)
    s_cn = step_cn_periodic(st, p, SolverConfig("HOS2", "cn", 0.01))
    assert s_cn.t == pytest.approx(0.01)
    with pytest.raises(SolverError):
        step_euler_dirichlet(st, p, cfg)
    q = builtin_case("ex3").problem(10)
    with pytest.raises(SolverError):
        step_euler_periodic(initial_state(q, "HOS1-D"), q, SolverConfig("HOS1-D"))


def test_cn_beats_euler_at_large_dt():
    case = builtin_case("ex1")
    p = case.problem(40)
    e_eu = run(p, SolverConfig("HOS4", "euler", 0.05), 1.0).errors.eps_c_2
    e_cn = run(p, SolverConfig("HOS4", "cn", 0.05), 1.0).errors.eps_c_2
    assert e_cn < e_eu / 20


def test_cn_time_order_two():
    case = builtin_case("ex2")
    p = case.problem(30)
    e = [run(p, SolverConfig("HOS4", "cn", dt), 1.0).errors.eps_c_2 for dt in (0.1, 0.05)]
    assert math.log2(e[0] / e[1]) == pytest.approx(2.0, abs=0.2)


def test_euler_time_order_one():
    case = builtin_case("ex2")
    p = case.problem(30)
    e = [run(p, SolverConfig("HOS4", "euler", dt), 1.0).errors.eps_c_2 for dt in (0.02, 0.01)]
    assert math.log2(e[0] / e[1]) == pytest.approx(1.0, abs=0.1)


def test_dirichlet_values_enforced():
    case = builtin_case("ex4")
    p = case.problem(30)
    res = run(p, SolverConfig("HOS2-D", "euler", 0.01), 0.1)
    C = res.final.C
    assert C[0] == case.exact_c(-3.0, 0.1)
    assert C[-1] == case.exact_c(3.0, 0.1)


def test_zero_flux_outlet_copies_neighbour():
    case = builtin_case("ex6", length=5.0, T=20.0)
    p = case.problem(10)
    res = run(p, SolverConfig("HOS1-D", "euler", 1.0), 20.0)
    C = res.final.C
    assert C[0] == 100.0
    assert C[-1] == pytest.approx(C[-2], abs=1e-12)
    assert np.all(C[1:] < 100.0)


def test_mass_ledger_round_off():
    case = builtin_case("ex1")
    res = run(case.problem(20), SolverConfig("HOS3", "euler", 0.01), 0.5, report_times=(0.2,))
    assert max(r.eps_mass for r in res.ledger) < 1e-13
    assert res.ledger_at(0.2).t == pytest.approx(0.2)
    with pytest.raises(KeyError):
        res.ledger_at(0.215)
    assert 0.2 in res.snapshots


def test_cn_rejected_for_dirichlet():
    p = builtin_case("ex3").problem(10)
    with pytest.raises(SolverError, match="Crank"):
        run(p, SolverConfig("HOS1-D", "cn", 0.01), 0.1)


def test_dirichlet_requires_closure_and_equal_masses():
    p = builtin_case("ex3").problem(10)
    with pytest.raises(SolverError, match="closure"):
        discretize(p, "HOS1")
    mixed = get_scheme({"m_stag": 0.7071, "a2_stag": 0.0, "m_node": 1.0, "a2_node": 0.0, "closure": "hos1d"})
    with pytest.raises(SolverError, match="identical"):
        discretize(p, mixed)
    with pytest.raises(SolverError):
        discretize(builtin_case("ex1").problem(10), "HOS1", variant="hos1d")


def test_step_failure_wraps_newton():
    p = builtin_case("ex1").problem(12)
    with pytest.raises(StepFailure) as info:
        run(p, SolverConfig("HOS1", "euler", 0.1, newton_max_iters=1), 0.3)
    assert info.value.step == 1
    assert isinstance(info.value.cause, NewtonError)


def test_problem_validation():
    g = Grid(0.0, 1.0, 10)
    zero = lambda x, *a: 0 * x
    with pytest.raises(ValueError, match="diffusion"):
        Problem(g, zero, lambda x: -1 + 0 * x, zero, Linear(K_d=1.0), Periodic(), lambda x: 1 + 0 * x)
    with pytest.raises(ValueError, match="initial"):
        Problem(g, zero, lambda x: 1 + 0 * x, zero, Linear(K_d=1.0), Periodic(), lambda x: -1 + 0 * x)
    with pytest.raises(ValueError):
        SolverConfig("HOS1", dt=0.0)
    with pytest.raises(ValueError):
        SolverConfig("HOS1", stepper="rk4")


def test_compute_errors_needs_exact():
    case = builtin_case("ex6", length=5.0, T=2.0)
    res = run(case.problem(10), SolverConfig("HOS1-D", "euler", 1.0), 2.0)
    assert res.errors is None
    with pytest.raises(SolverError):
        compute_errors(res.final, res.problem)
