import numpy as np
import pytest

from ecoplus.solvers import SolverOptions, Status, kkt_residuals, solve, verify_solution, write_mps

from oracles import lp_vertex_oracle, make_program, qp_active_set_oracle


def test_single_bound_lp():
    res = solve(make_program([1.0], lb=[1.0]))
    assert res.status is Status.OPTIMAL
    assert res.x[0] == pytest.approx(1.0, abs=1e-7)
    assert res.objective == pytest.approx(1.0, abs=1e-7)


def test_equality_constrained_qp():
    # x^2 + y^2 = 1/2 x'(2I)x
    res = solve(make_program([0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[2.0], Q=2 * np.eye(2)))
    assert res.optimal
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-7)
    assert res.objective == pytest.approx(2.0, abs=1e-7)
    assert res.y_eq[0] == pytest.approx(-2.0, abs=1e-6)


def test_fixed_variables_are_presolved():
    prog = make_program([1.0, 1.0], A_in=[[-1.0, -1.0]], b_in=[-3.0], lb=[1.0, 0.0], ub=[1.0, 10.0])
    res = solve(prog)
    assert res.optimal
    np.testing.assert_allclose(res.x, [1.0, 2.0], atol=1e-7)
    assert res.diagnostics["variables"] == 1
    assert kkt_residuals(prog, res.x, res.y_eq, res.z_in, res.z_lb, res.z_ub)["stationarity"] <= 1e-7


def test_crossed_bounds_certificate():
    res = solve(make_program([1.0, 0.0], lb=[0.0, 2.0], ub=[1.0, 1.0]))
    assert res.status is Status.INFEASIBLE
    assert res.certificate == {"kind": "bounds", "columns": [1]}


def test_fixed_variable_equality_certificate():
    res = solve(make_program([0.0], A_eq=[[1.0]], b_eq=[2.0], lb=[1.0], ub=[1.0]))
    assert res.status is Status.INFEASIBLE
    assert res.certificate["kind"] == "fixed-variable equality"


def test_phase_one_certificate_names_rows():
    prog = make_program([1.0, 1.0], A_in=[[1.0, 1.0], [-1.0, -1.0]], b_in=[1.0, -3.0],
                        lb=[0.0, 0.0], ub=[5.0, 5.0])
    res = solve(prog)
    assert res.status is Status.INFEASIBLE
    assert res.certificate["kind"] == "phase-one"
    assert res.certificate["violation"] == pytest.approx(2.0, abs=1e-5)
    assert res.certificate["rows"]
    assert all(r.startswith("in_") for r in res.certificate["rows"])


@pytest.mark.parametrize("linear_algebra", ["dense", "sparse"])
def test_contradictory_rows_end_in_a_status(linear_algebra):
    prog = make_program([1.0, 1.0], A_in=[[1.0, 1.0], [-1.0, -1.0]], b_in=[1.0, -3.0],
                        lb=[0.0, 0.0], ub=[5.0, 5.0])
    res = solve(prog, SolverOptions(linear_algebra=linear_algebra))
    assert res.status in (Status.INFEASIBLE, Status.NUMERICAL_FAILURE)
    assert res.x is None
    if res.status is Status.INFEASIBLE:
        assert res.certificate["violation"] == pytest.approx(2.0, abs=1e-5)


def _random_polytope(rng, n, m):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(-1.0, 1.0, n)
    b = A @ x0 + rng.uniform(0.1, 1.0, m)
    return A, b, np.full(n, -2.0), np.full(n, 2.0)


@pytest.mark.parametrize("seed", range(40))
def test_random_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    A, b, lb, ub = _random_polytope(rng, n, 4)
    c = rng.normal(size=n)
    best, _ = lp_vertex_oracle(c, A, b, lb, ub)
    prog = make_program(c, A_in=A, b_in=b, lb=lb, ub=ub)
    res = solve(prog)
    assert res.optimal
    assert res.objective == pytest.approx(best, abs=1e-7 * (1 + abs(best)))
    r = kkt_residuals(prog, res.x, res.y_eq, res.z_in, res.z_lb, res.z_ub)
    assert max(r.values()) <= 1e-6


@pytest.mark.parametrize("seed", range(25))
def test_random_qp_matches_active_set_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 4))
    A, b, lb, ub = _random_polytope(rng, n, 3)
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.5 * np.eye(n)
    c = rng.normal(size=n) * 3.0
    best, x_ref = qp_active_set_oracle(Q, c, A, b, lb, ub)
    res = solve(make_program(c, A_in=A, b_in=b, lb=lb, ub=ub, Q=Q))
    assert res.optimal
    assert res.objective == pytest.approx(best, abs=1e-7 * (1 + abs(best)))
    np.testing.assert_allclose(res.x, x_ref, atol=1e-4)


def test_dense_and_sparse_paths_agree():
    rng = np.random.default_rng(7)
    A, b, lb, ub = _random_polytope(rng, 4, 5)
    c = rng.normal(size=4)
    prog = make_program(c, A_in=A, b_in=b, lb=lb, ub=ub)
    dense = solve(prog, SolverOptions(linear_algebra="dense"))
    sparse = solve(prog, SolverOptions(linear_algebra="sparse"))
    assert dense.objective == pytest.approx(sparse.objective, abs=1e-7)


def test_objective_scaling_is_transparent():
    rng = np.random.default_rng(3)
    A, b, lb, ub = _random_polytope(rng, 3, 4)
    c = rng.normal(size=3)
    base = solve(make_program(c, A_in=A, b_in=b, lb=lb, ub=ub))
    big = solve(make_program(1e4 * c, A_in=A, b_in=b, lb=lb, ub=ub))
    assert big.objective == pytest.approx(1e4 * base.objective, rel=1e-6, abs=1e-6)


def test_repeated_solves_are_bitwise_identical(scenario):
    from ecoplus.models import StrategyKind
    from ecoplus.problem import build_problem

    prog = build_problem(scenario, StrategyKind.ECO_PLUS)
    first, second = solve(prog), solve(prog)
    assert first.objective == second.objective
    assert np.array_equal(first.x, second.x)


def test_iteration_limit_is_reported():
    rng = np.random.default_rng(11)
    A, b, lb, ub = _random_polytope(rng, 4, 6)
    res = solve(make_program(rng.normal(size=4), A_in=A, b_in=b, lb=lb, ub=ub), SolverOptions(max_iter=1))
    assert res.status in (Status.ITERATION_LIMIT, Status.OPTIMAL)
    if res.status is Status.ITERATION_LIMIT:
        assert res.x is None


def test_verify_solution_from_files(tmp_path):
    prog = make_program([0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[2.0], Q=2 * np.eye(2))
    res = solve(prog)
    primal = tmp_path / "x.txt"
    primal.write_text("1.0, 1.0\n")
    assert max(verify_solution(prog, primal).values()) <= 1e-12
    dual = tmp_path / "y.txt"
    parts = np.concatenate([res.y_eq, res.z_in, res.z_lb, res.z_ub])
    dual.write_text(" ".join(repr(float(v)) for v in parts))
    r = verify_solution(prog, primal, dual)
    assert r["stationarity"] <= 1e-6
    dual.write_text("1 2 3")
    with pytest.raises(ValueError, match="multipliers"):
        verify_solution(prog, primal, dual)


def test_verify_solution_flags_infeasible_point(tmp_path):
    prog = make_program([1.0], A_in=[[1.0]], b_in=[1.0], lb=[0.0])
    primal = tmp_path / "x.txt"
    primal.write_text("3.0")
    r = verify_solution(prog, primal)
    assert r["inequality"] == pytest.approx(1.0)


def test_mps_dump_sections(tmp_path):
    prog = make_program([1.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[2.0], A_in=[[1.0, -1.0]], b_in=[0.5],
                        lb=[0.0, -np.inf], ub=[np.inf, 3.0], Q=2 * np.eye(2))
    path = tmp_path / "p.mps"
    write_mps(prog, path, name="TINY")
    text = path.read_text().splitlines()
    assert text[0] == "NAME TINY"
    for section in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "QUADOBJ", "ENDATA"):
        assert section in text
    assert " E eq_0" in text and " L in_0" in text
    assert " MI bnd col_1" in text and " UP bnd col_1 3" in text
    assert " col_0 col_0 2" in text
