import numpy as np
import pytest

from momdp_core import DomainError, Space, lnd_filter, pnd_filter, policy_value
from cover_grid import CoverSet, ExplicitBackend
from cover_greedy import greedy_min_cover
from oracle import (
    EnumerationLimitError,
    ExactFrontier,
    as_value_array,
    enumerate_deterministic_values,
    example1_values,
    example2_values,
    min_cover_bruteforce,
    verify_cover,
)


# ------ Enumeration

def test_two_action_state(two_action_mdp):
    exact = enumerate_deterministic_values(two_action_mdp)
    assert np.allclose(exact.values, [[0.0, 10.0], [10.0, 0.0]])
    assert exact.policy_count == 2


def test_policy_count_and_frontier_consistency(random_mdp):
    m = random_mdp(seed=12, states=4, actions=2)
    exact = enumerate_deterministic_values(m)
    assert exact.policy_count == 2 ** 4
    assert exact.pnd.tolist() == pnd_filter(exact.values).tolist()
    assert exact.lnd.tolist() == lnd_filter(exact.values).tolist()
    assert exact.nondominated(Space.LORENZ) is exact.lnd
    pnd_rows = {tuple(r) for r in exact.pnd.tolist()}
    assert {tuple(r) for r in exact.lnd.tolist()} <= pnd_rows


def test_recorded_actions_reproduce_values(random_mdp):
    m = random_mdp(seed=13, states=3, actions=3)
    exact = enumerate_deterministic_values(m)
    for row in range(exact.values.shape[0]):
        policy = exact.policy_for(row, m.num_actions)
        assert np.allclose(policy_value(m, policy), exact.values[row])


def test_parallel_enumeration_matches_serial(random_mdp):
    m = random_mdp(seed=14, states=7, actions=3)
    serial = enumerate_deterministic_values(m)
    parallel = enumerate_deterministic_values(m, jobs=3)
    assert np.array_equal(serial.values, parallel.values)


def test_enumeration_limit(random_mdp):
    m = random_mdp(seed=1, states=5, actions=3)
    with pytest.raises(EnumerationLimitError) as info:
        enumerate_deterministic_values(m, limit=100)
    assert info.value.reason == "enumeration_limit"


def test_frontier_without_actions():
    exact = ExactFrontier.from_values([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DomainError):
        exact.policy_for(0, 2)


# ------ Worked examples

def test_example_sets():
    assert as_value_array(example1_values(2)).tolist() == [[0, 3], [1, 2], [2, 1], [3, 0]]
    assert as_value_array(example2_values(3)).tolist() == [[0, 24], [1, 22], [2, 20], [3, 18]]
    assert lnd_filter(as_value_array(example1_values(2))).tolist() == [[1, 2], [2, 1]]
    assert len(example1_values(20)) == 2 ** 20
    assert len(example2_values(30)) == 2 ** 29


@pytest.mark.parametrize("N", [0, 53])
def test_example_size_limits(N):
    with pytest.raises(DomainError):
        example1_values(N)


# ------ Cover verification

def test_exact_set_covers_itself():
    values = as_value_array(example1_values(3))
    assert verify_cover(values, values, 0.0, Space.PARETO)
    assert verify_cover(pnd_filter(values), values, 0.0, Space.PARETO)
    assert verify_cover(lnd_filter(values), values, 0.0, Space.LORENZ)


def test_empty_cover_has_a_witness():
    values = as_value_array(example2_values(3))
    verdict = verify_cover(CoverSet((), 0.1, Space.PARETO), values, 0.1, Space.PARETO)
    assert not verdict
    assert verdict.witness is not None
    family_verdict = verify_cover(np.zeros((0, 2)), example2_values(3), 0.1, Space.PARETO)
    assert not family_verdict
    assert family_verdict.witness == (0.0, 24.0)


def test_verdict_reports_an_uncovered_point():
    values = np.array([[0.0, 10.0], [5.0, 5.0], [10.0, 0.0]])
    verdict = verify_cover(np.array([[5.0, 5.0]]), values, 0.1, Space.PARETO)
    assert not verdict
    assert verdict.checked == 3
    assert verdict.witness in {(0.0, 10.0), (10.0, 0.0)}
    # in Lorenz space (5, 5) is the only nondominated point
    assert verify_cover(np.array([[5.0, 5.0]]), values, 0.0, Space.LORENZ)


@pytest.mark.parametrize("space", [Space.PARETO, Space.LORENZ])
def test_closed_form_and_array_verification_agree(space):
    family = example2_values(6)
    cover, _ = greedy_min_cover(ExplicitBackend(family), 0.1, space)
    assert verify_cover(cover, family, 0.1, space)
    assert verify_cover(cover, family.values(), 0.1, space)
    partial = cover.values()[:1]
    if len(cover) > 1:
        assert not verify_cover(partial, family, 0.1, space)
        assert not verify_cover(partial, family.values(), 0.1, space)


def test_negative_epsilon():
    with pytest.raises(DomainError):
        verify_cover(np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]]), -0.5, Space.PARETO)


# ------ Brute-force minimal covers

def test_bruteforce_small_cases():
    assert min_cover_bruteforce(np.array([[3.0, 4.0]]), 0.1, Space.PARETO)[0] == 1
    size, cover = min_cover_bruteforce(np.array([[10.0, 10.0], [11.0, 9.0], [9.0, 11.0]]), 0.1, Space.PARETO)
    assert size == 1
    assert cover.tolist() == [[10.0, 10.0]]


def test_bruteforce_is_bounded_by_frontier_size():
    rng = np.random.default_rng(21)
    values = rng.integers(0, 50, size=(12, 2)).astype(float)
    for space in Space:
        size, cover = min_cover_bruteforce(values, 0.05, space)
        frontier = pnd_filter(values) if space is Space.PARETO else lnd_filter(values)
        assert 1 <= size <= frontier.shape[0]
        assert verify_cover(cover, values, 0.05, space)


def test_bruteforce_limit():
    with pytest.raises(EnumerationLimitError):
        min_cover_bruteforce(np.ones((21, 2)), 0.1, Space.PARETO)
