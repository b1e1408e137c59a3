import numpy as np
import pytest
from pydantic import ValidationError

import ecoplus.dc as dc_module
from ecoplus.dc import DcOptions, QuadraticSurrogate, dc_solve, fit_surrogate, split_hessian, write_surrogate_csv
from ecoplus.errors import ModelError
from ecoplus.models import KmmkParams, Limits, StrategyKind
from ecoplus.problem import build_problem, solve_strategy
from ecoplus.solvers import solve


def test_exact_fit_of_a_quadratic_rate():
    sur = fit_surrogate(lambda a, v: a ** 2 + v, Limits())
    np.testing.assert_allclose(sur.coef, [1, 0, 0, 0, 1, 0], atol=1e-9)
    assert sur.is_convex
    assert sur.rms <= 1e-9
    assert sur.points == 31 * 31


def test_indefinite_split():
    P, N = split_hessian(np.array([1.0, 1.0, 4.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(P - N, [[2.0, 4.0], [4.0, 2.0]], atol=1e-12)
    assert np.linalg.eigvalsh(P).min() >= -1e-12
    assert np.linalg.eigvalsh(N).min() >= -1e-12
    assert np.any(N)


def test_pure_cases_are_exact():
    P, N = split_hessian(np.array([2.0, 0.5, 0.0, 1.0, 1.0, 1.0]))
    assert not N.any()
    np.testing.assert_array_equal(P, [[4.0, 0.0], [0.0, 1.0]])
    P, N = split_hessian(np.array([-1.0, -2.0, 0.0, 0.0, 0.0, 0.0]))
    assert not P.any()
    np.testing.assert_array_equal(N, [[2.0, 0.0], [0.0, 4.0]])


def test_convex_model_is_a_tight_upper_bound():
    sur = QuadraticSurrogate.from_coefficients([0.3, -0.02, 0.2, 0.1, 0.05, 0.4])
    rng = np.random.default_rng(5)
    a, v = rng.uniform(-3, 2.5, 200), rng.uniform(0, 15, 200)
    a_bar, v_bar = rng.uniform(-3, 2.5, 200), rng.uniform(0, 15, 200)
    assert np.all(sur.convex_model(a, v, a_bar, v_bar) >= sur.value(a, v) - 1e-10)
    np.testing.assert_allclose(sur.convex_model(a_bar, v_bar, a_bar, v_bar), sur.value(a_bar, v_bar), atol=1e-10)


def test_wrong_coefficient_count():
    with pytest.raises(ModelError):
        QuadraticSurrogate.from_coefficients([1.0, 2.0])


def test_kmmk_fit_uses_the_burning_region():
    sur = fit_surrogate(KmmkParams(), Limits())
    assert 0 < sur.points < 31 * 31
    assert sur.sign_agreement >= 0.95


def test_empty_fit_region():
    with pytest.raises(ModelError, match="degenerate"):
        fit_surrogate(KmmkParams(u_max=1e-6), Limits())


def test_grid_must_be_dense_enough():
    with pytest.raises(ValidationError):
        DcOptions(grid_a=5)


def test_convex_surrogate_takes_one_step(scenario):
    sur = QuadraticSurrogate.from_coefficients([1.0, 0.01, 0.0, 0.0, 0.0, 0.0])
    bundle = dc_solve(scenario, sur)
    assert bundle.diagnostics["ccp_iterations"] == 1
    assert bundle.diagnostics["converged"]

    vm, _ = solve_strategy(scenario, StrategyKind.VM)
    anchor = (np.array(vm.trajectory.a), np.array(vm.trajectory.v))
    direct = solve(build_problem(scenario, StrategyKind.DC_SURROGATE, surrogate=sur, anchor=anchor))
    assert bundle.objective == pytest.approx(direct.objective, abs=1e-6)


def test_ccp_never_increases_the_surrogate(kmmk_scenario):
    sur = fit_surrogate(KmmkParams(), Limits())
    bundle = dc_solve(kmmk_scenario, sur)
    hist = bundle.diagnostics["history"]
    assert len(hist) == bundle.diagnostics["ccp_iterations"] + 1
    for before, after in zip(hist, hist[1:]):
        assert after <= before + 1e-7 * (1 + abs(before))
    assert bundle.diagnostics["model_objective"] >= bundle.objective - 1e-6
    rep = bundle.validate(kmmk_scenario)
    assert rep.ok, rep.failures()



def test_ccp_rejects_a_step_that_raises_the_surrogate(kmmk_scenario, monkeypatch):
    sur = fit_surrogate(KmmkParams(), Limits())
    vm, _ = solve_strategy(kmmk_scenario, StrategyKind.VM)
    am, _ = solve_strategy(kmmk_scenario, StrategyKind.AM)

    def total(b):
        return float(np.sum(sur.value(b.trajectory.a[:-1], b.trajectory.v[:-1])) * kmmk_scenario.dt)

    start, worse = sorted([vm, am], key=total)
    assert total(worse) > total(start) + 1e-6
    monkeypatch.setattr(dc_module, "extract_solution", lambda *args, **kwargs: worse)
    bundle = dc_solve(kmmk_scenario, sur, init=start)
    assert bundle.diagnostics["monotone"] is False
    assert not bundle.diagnostics["converged"]
    assert bundle.trajectory is start.trajectory
    assert bundle.objective == pytest.approx(total(start))
    assert bundle.diagnostics["history"] == [pytest.approx(total(start))]
    assert "monotone" not in start.diagnostics

def test_surrogate_csv(tmp_path):
    path = tmp_path / "sur.csv"
    write_surrogate_csv(path, QuadraticSurrogate.from_coefficients([1, 2, 3, 4, 5, 6], rms=0.5))
    assert path.read_text().splitlines() == ["c1,c2,c3,c4,c5,c6,rms", "1,2,3,4,5,6,0.5"]
