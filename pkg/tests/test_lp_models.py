import numpy as np
import pytest

from momdp_core import DomainError, Space, lorenz_vector, policy_value
from lp_solver import LpSolution, LpStatus, MipModel, solve_lp, solve_mip
from lp_models import (
    add_deterministic_constraints,
    build_lorenz_test_lp,
    build_occupation_lp,
    build_restrict_lp,
    build_space_lp,
    extract_solution,
    lorenz_dual_value,
    with_deterministic_constraints,
)
from oracle import enumerate_deterministic_values


def _objective_on(model, columns, weights):
    c = np.zeros(model.num_variables)
    for j, w in zip(columns, weights):
        c[j] = w
    return c


# ------ Occupation polytope

def test_single_flow_constraint(self_loop_mdp):
    h = build_occupation_lp(self_loop_mdp)
    coefficients, sense, rhs = h.model.constraints[0]
    assert sense == "="
    assert rhs == 1.0
    assert coefficients[h.x_index[(0, 0)]] == pytest.approx(0.1)
    sol = solve_lp(h.model.with_objective(_objective_on(h.model, [h.x_index[(0, 0)]], [1.0])))
    assert sol.x[h.x_index[(0, 0)]] == pytest.approx(10.0)


def test_total_mass_is_one_over_one_minus_gamma(random_mdp):
    m = random_mdp(seed=3, states=4, actions=2)
    h = build_occupation_lp(m)
    c = _objective_on(h.model, list(h.x_index.values()), [1.0] * len(h.x_index))
    assert solve_lp(h.model.with_objective(c)).objective == pytest.approx(1.0 / (1.0 - m.discount))


def test_weighted_sum_matches_best_deterministic_policy(random_mdp):
    m = random_mdp(seed=11, states=4, actions=2)
    h = build_occupation_lp(m)
    weights = [1.0, 2.0]
    c = _objective_on(h.model, h.z_index, weights)
    exact = enumerate_deterministic_values(m)
    best = float((exact.values @ np.array(weights)).max())
    assert solve_lp(h.model.with_objective(c)).objective == pytest.approx(best, rel=1e-7)


# ------ Deterministic policies

def test_mip_puts_mass_on_one_action_per_state(random_mdp):
    m = random_mdp(seed=2, states=2, actions=2)
    h = build_occupation_lp(m)
    mip = add_deterministic_constraints(h, m)
    weights = [3.0, 1.0]
    mip = MipModel(mip.base.with_objective(_objective_on(mip.base, h.z_index, weights)), mip.binary)
    sol = solve_mip(mip)
    assert sol.is_optimal
    for s in range(m.num_states):
        masses = [sol.x[h.x_index[(s, a)]] for a in range(m.num_actions)]
        assert sum(1 for v in masses if v > 1e-6) <= 1
    exact = enumerate_deterministic_values(m)
    assert exact.policy_count == 4
    assert sol.objective == pytest.approx(float((exact.values @ np.array(weights)).max()), rel=1e-7)


def test_zero_binaries_force_infeasibility(random_mdp):
    m = random_mdp(seed=2, states=2, actions=2)
    mip = add_deterministic_constraints(build_occupation_lp(m), m)
    model = mip.base
    for j in mip.binary:
        model = model.with_bounds(j, 0.0, 0.0)
    assert solve_lp(model).status is LpStatus.INFEASIBLE


def test_with_deterministic_constraints_keeps_bookkeeping(self_loop_mdp):
    h = with_deterministic_constraints(build_occupation_lp(self_loop_mdp), self_loop_mdp)
    assert h.deterministic
    assert len(h.binary) == 1
    assert h.x_index == {(0, 0): 0}


# ------ Lorenz test and Restrict models

def test_lorenz_test_lp(self_loop_mdp):
    sol = build_lorenz_test_lp(self_loop_mdp, [10.0]).solve()
    assert sol.is_optimal
    assert sol.objective == pytest.approx(60.0)
    assert build_lorenz_test_lp(self_loop_mdp, [25.0]).solve().status is LpStatus.INFEASIBLE
    with pytest.raises(DomainError):
        build_lorenz_test_lp(self_loop_mdp, [1.0, 2.0])


def test_zero_thresholds_are_vacuous(random_mdp):
    m = random_mdp(seed=5, states=3, actions=2, objectives=3)
    h = build_lorenz_test_lp(m, [0.0, 0.0])
    assert h.thresholds == (0.0, 0.0)
    best = float(enumerate_deterministic_values(m).values.sum(axis=1).max())
    assert h.solve().objective == pytest.approx(best, rel=1e-7)


def test_restrict_on_single_policy(self_loop_mdp):
    h = build_restrict_lp(self_loop_mdp, 1, 15.0, Space.PARETO)
    value, _, _ = extract_solution(h, h.solve(), self_loop_mdp)
    assert value.tolist() == pytest.approx([20.0, 40.0])
    assert build_restrict_lp(self_loop_mdp, 1, 25.0, Space.PARETO).solve().status is LpStatus.INFEASIBLE


def test_restrict_arguments(random_mdp):
    m3 = random_mdp(objectives=3)
    with pytest.raises(DomainError):
        build_restrict_lp(m3, 1, 1.0, Space.LORENZ)
    with pytest.raises(DomainError):
        build_restrict_lp(m3, 3, 1.0, Space.PARETO)
    with pytest.raises(DomainError):
        build_space_lp(m3, Space.PARETO, 3, [])


def test_lorenz_restrict_two_balances_objectives(two_action_mdp):
    # max L1 s.t. L2 >= 10: the only optimum splits the mass evenly
    h = build_restrict_lp(two_action_mdp, 2, 10.0, Space.LORENZ)
    sol = h.solve()
    assert sol.objective == pytest.approx(5.0)
    value, occupation, policy = extract_solution(h, sol, two_action_mdp)
    assert not policy.deterministic
    assert policy.probabilities.tolist() == pytest.approx([[0.5, 0.5]])
    assert value.tolist() == pytest.approx([5.0, 5.0])
    assert occupation.satisfies_flow(two_action_mdp)


# ------ Solutions

def test_extract_single_state(self_loop_mdp):
    h = build_space_lp(self_loop_mdp, Space.PARETO, 0, [])
    value, occupation, policy = extract_solution(h, h.solve(), self_loop_mdp)
    assert occupation.x[0, 0] == pytest.approx(10.0)
    assert policy.deterministic
    assert value.tolist() == pytest.approx([20.0, 40.0])


def test_extract_rejects_non_optimal(self_loop_mdp):
    h = build_occupation_lp(self_loop_mdp)
    with pytest.raises(DomainError):
        extract_solution(h, LpSolution(LpStatus.INFEASIBLE), self_loop_mdp)


def test_deterministic_extraction_matches_policy_evaluation(random_mdp):
    m = random_mdp(seed=8, states=3, actions=3)
    h = build_space_lp(m, Space.LORENZ, 0, [], deterministic=True)
    value, _, policy = extract_solution(h, h.solve(), m)
    assert policy.deterministic
    assert np.allclose(value, policy_value(m, policy), atol=1e-6)
    best = float(enumerate_deterministic_values(m).values.min(axis=1).max())
    assert min(value) == pytest.approx(best, rel=1e-7)


@pytest.mark.parametrize("z", [[3.0, 7.0, 5.0], [4.0, 4.0], [0.0, 9.0, 2.0, 1.0]])
def test_lorenz_dual_value_equals_lorenz_component(z):
    expected = np.cumsum(np.sort(z))
    for k in range(1, len(z) + 1):
        assert lorenz_dual_value(z, k) == pytest.approx(expected[k - 1])


def test_lorenz_dual_value_index_range():
    with pytest.raises(DomainError):
        lorenz_dual_value([1.0, 2.0], 3)


def test_lorenz_dual_value_on_random_vectors():
    rng = np.random.default_rng(31)
    for _ in range(100):
        z = rng.uniform(0.0, 50.0, size=rng.integers(2, 6))
        expected = np.cumsum(np.sort(z))
        k = int(rng.integers(1, z.size + 1))
        assert lorenz_dual_value(z, k) == pytest.approx(expected[k - 1], rel=1e-9, abs=1e-9)


# ------ Lorenz test thresholds

@pytest.mark.parametrize("seed", [1, 2, 3])
def test_lorenz_test_point_meets_its_thresholds(random_mdp, seed):
    m = random_mdp(seed=seed, states=3, actions=2, objectives=3)
    exact = enumerate_deterministic_values(m).values
    target = exact[np.argmax(exact.min(axis=1))]
    eta = 0.9 * lorenz_vector(target)[:-1]
    h = build_lorenz_test_lp(m, eta)
    sol = h.solve()
    assert sol.is_optimal
    value, _, _ = extract_solution(h, sol, m)
    assert np.all(lorenz_vector(value)[:-1] >= eta - 1e-6 * max(1.0, float(value.max())))
    assert sol.objective >= float(target.sum()) - 1e-6


def test_raising_thresholds_never_raises_the_optimum(random_mdp):
    m = random_mdp(seed=4, states=3, actions=2, objectives=3)
    bound = m.value_bound()
    previous = np.inf
    infeasible = False
    for scale in np.linspace(0.0, 3.0, 13):
        eta = scale * bound * np.array([1.0, 2.0]) / 3.0
        sol = build_lorenz_test_lp(m, eta).solve()
        if sol.status is LpStatus.INFEASIBLE:
            infeasible = True
            continue
        assert not infeasible
        assert sol.objective <= previous + 1e-7
        previous = sol.objective
    assert infeasible
