import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from podstab.errors import NotStabilizable, RankDeficientSubspace
from podstab.pod import generate_snapshots, pod_reduce
from podstab.riccati import (
    RiccatiSolution,
    are_residual,
    check_stabilizable,
    feedback_gain,
    hurwitz_margin,
    reduce_operators,
    solve_are,
    unstable_modes_controllable,
)

from .conftest import T_STEP


@pytest.mark.parametrize("a,eps,p,cl", [(1.0, 0.0, 2.0, -1.0), (-1.0, 0.0, 0.0, -1.0), (1.0, 3.0, 3.0, -2.0)])
def test_scalar_closed_forms(a, eps, p, cl):
    sol = solve_are([[a]], [[1.0]], eps)
    assert sol.p[0, 0] == pytest.approx(p, abs=1e-10)
    assert sol.k_gain[0, 0] == pytest.approx(-p, abs=1e-10)
    assert sol.closed_loop_abscissa == pytest.approx(cl, abs=1e-6)


def _pair(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 11))
    p = int(rng.integers(1, 3))
    return rng.standard_normal((m, m)), rng.standard_normal((m, p))


@given(st.integers(0, 2**31 - 1), st.sampled_from([1e-3, 1e-1, 1.0]))
def test_matches_scipy_oracle(seed, eps):
    a, b = _pair(seed)
    sol = solve_are(a, b, eps)
    ref = sla.solve_continuous_are(a, b, eps * np.eye(a.shape[0]), np.eye(b.shape[1]))
    assert np.linalg.norm(sol.p - ref) <= 1e-7 * max(1.0, np.linalg.norm(ref))
    assert sol.residual <= 1e-8 * max(1.0, np.linalg.norm(sol.p, 2) ** 2)
    assert sol.closed_loop_abscissa < 0
    np.testing.assert_array_equal(sol.p, sol.p.T)


def test_zero_eps_is_minimal_energy_stabilizer():
    a = np.diag([2.0, -3.0])
    b = np.array([[1.0], [1.0]])
    sol = solve_are(a, b, 0.0)
    assert are_residual(a, b, sol.p, 0.0) <= 1e-10
    assert sol.closed_loop_abscissa == pytest.approx(-2.0, abs=1e-6)


def test_not_stabilizable_raises_at_zero_eps():
    a = np.diag([1.0, 2.0])
    b = np.array([[1.0], [0.0]])
    assert not unstable_modes_controllable(a, b)
    with pytest.raises(NotStabilizable):
        solve_are(a, b, 0.0)
    with pytest.raises(RankDeficientSubspace):
        solve_are(a, b, 1.0)


def test_stable_uncontrollable_mode_is_fine():
    a = np.diag([1.0, -2.0])
    b = np.array([[1.0], [0.0]])
    assert check_stabilizable(a, b)
    sol = solve_are(a, b, 0.5)
    assert sol.stabilizable and sol.closed_loop_abscissa < 0


def test_hautus_symmetric():
    assert check_stabilizable(np.diag([-1.0, -2.0]), np.zeros((2, 1)))
    assert not check_stabilizable(np.diag([1.0, -2.0]), np.array([[0.0], [1.0]]))


def test_solution_json_round_trip():
    sol = solve_are([[1.0, 0.5], [0.0, -1.0]], [[1.0], [1.0]], 0.1)
    back = RiccatiSolution.from_json(sol.to_json())
    np.testing.assert_array_equal(back.p, sol.p)
    np.testing.assert_array_equal(back.k_gain, sol.k_gain)
    assert back.residual == sol.residual


def test_feedback_gain_and_margin():
    sol = solve_are([[1.0]], [[2.0]], 0.0)
    np.testing.assert_allclose(feedback_gain(sol, [[2.0]]), sol.k_gain)
    assert hurwitz_margin(np.diag([-1.0, -3.0])) == pytest.approx(1.0, abs=1e-6)
    assert hurwitz_margin(np.diag([0.5, -3.0])) == pytest.approx(-0.5, abs=1e-6)


def test_reduced_operators_of_fixture(heat_model, heat_split, ones):
    basis = pod_reduce(generate_snapshots(heat_model, ones, T_STEP, 20, heat_split), 5)
    red = reduce_operators(heat_model, basis)
    np.testing.assert_allclose(red.a_red, basis.v.T @ np.diag(heat_model.a_diag) @ basis.v, atol=1e-10)
    np.testing.assert_array_equal(red.a_red, red.a_red.T)
    assert check_stabilizable(red.a_red, red.b_red)
