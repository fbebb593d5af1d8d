import math

import numpy as np
import pytest

from config import get_effective_settings
from momdp_core import DomainError, Space
from cover_grid import ExplicitBackend, FeasibilityBackend, LpBackend
from cover_greedy import GreedyIterationError, _covering_threshold, greedy_min_cover, restrict
from oracle import enumerate_deterministic_values, example2_values, min_cover_bruteforce, verify_cover


class EmptyBackend(FeasibilityBackend):
    num_objectives = 2

    def value_bound(self) -> float:
        return 1.0

    def _maximize(self, space, target, lower_bounds):
        return None


# ------ Restrict

@pytest.mark.parametrize("as_array", [False, True])
def test_restrict_examples(as_array):
    family = example2_values(3)
    backend = ExplicitBackend(family.values() if as_array else family)
    assert restrict(backend, 1, 2.0, Space.PARETO).value.tolist() == [2.0, 20.0]
    assert restrict(backend, 2, 25.0, Space.PARETO) is None
    assert restrict(backend, 1, 2.0, Space.LORENZ).value.tolist() == [2.0, 20.0]
    assert restrict(backend, 2, 0.0, Space.PARETO).value.tolist() == [3.0, 18.0]


def test_restrict_arguments(random_mdp):
    backend = ExplicitBackend(example2_values(3))
    with pytest.raises(DomainError):
        restrict(backend, 3, 1.0, Space.PARETO)
    with pytest.raises(DomainError):
        restrict(LpBackend(random_mdp(objectives=3)), 1, 1.0, Space.PARETO)


def test_covering_threshold_is_tight():
    for target, eps in [(11.0, 0.1), (3.0, 0.2), (1e9 + 7, 0.05), (0.0, 0.1)]:
        alpha = _covering_threshold(target, eps)
        assert (1.0 + eps) * alpha >= target
        if alpha > 0:
            assert (1.0 + eps) * math.nextafter(alpha, -math.inf) < target


# ------ Greedy covers of the worked example

@pytest.mark.parametrize("epsilon, expected", [(0.05, 4), (0.1, 2), (0.15, 2), (0.2, 1)])
def test_example2_minimal_lorenz_cover(epsilon, expected):
    family = example2_values(30)
    cover, trace = greedy_min_cover(ExplicitBackend(family), epsilon, Space.LORENZ)
    assert len(cover) == expected
    assert trace.status == "complete"
    assert trace.restrict_calls == 2 * len(cover) + 1
    assert verify_cover(cover, family, epsilon, Space.LORENZ)


@pytest.mark.parametrize("epsilon, expected", [(0.05, 7), (0.1, 4), (0.15, 3), (0.2, 2)])
def test_example2_minimal_pareto_cover(epsilon, expected):
    family = example2_values(30)
    cover, trace = greedy_min_cover(ExplicitBackend(family), epsilon, Space.PARETO)
    assert len(cover) == expected
    assert trace.restrict_calls == 2 * len(cover) + 1
    assert verify_cover(cover, family, epsilon, Space.PARETO)


def test_trace_alternates_v_and_u():
    cover, trace = greedy_min_cover(ExplicitBackend(example2_values(30)), 0.05, Space.LORENZ)
    tags = [tag for tag, _ in trace.steps]
    assert tags[0] == "v"
    assert tags[1::2] == ["u"] * len(cover)
    assert len(trace.points("u")) == len(cover)
    # each u covers the v before it
    for v, u in zip(trace.points("v"), trace.points("u")):
        lv = np.cumsum(np.sort(v.value))
        lu = np.cumsum(np.sort(u.value))
        assert np.all(1.05 * lu >= lv)


def test_cover_size_shrinks_with_epsilon():
    backend = ExplicitBackend(example2_values(20))
    sizes = [len(greedy_min_cover(backend, eps, Space.PARETO)[0]) for eps in (0.01, 0.05, 0.1, 0.5)]
    assert sizes == sorted(sizes, reverse=True)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("space", [Space.PARETO, Space.LORENZ])
def test_greedy_matches_brute_force(seed, space):
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 100, size=(6, 2)).astype(float)
    for epsilon in (0.25, 0.5):
        cover, _ = greedy_min_cover(ExplicitBackend(values), epsilon, space)
        size, witness = min_cover_bruteforce(values, epsilon, space)
        assert len(cover) == size
        assert verify_cover(cover, values, epsilon, space)
        assert verify_cover(witness, values, epsilon, space)


@pytest.mark.parametrize("space", [Space.PARETO, Space.LORENZ])
def test_greedy_is_minimal_on_random_sets(space):
    rng = np.random.default_rng(41)
    for _ in range(50):
        values = rng.integers(1, 100, size=(8, 2)).astype(float)
        epsilon = float(rng.choice([0.1, 0.25, 0.5]))
        cover, _ = greedy_min_cover(ExplicitBackend(values), epsilon, space)
        size, _ = min_cover_bruteforce(values, epsilon, space)
        assert len(cover) == size
        assert verify_cover(cover, values, epsilon, space)


# ------ Edge cases

def test_empty_backend_gives_empty_cover():
    cover, trace = greedy_min_cover(EmptyBackend(), 0.1, Space.PARETO)
    assert len(cover) == 0
    assert trace.status == "empty"
    assert trace.restrict_calls == 1


def test_iteration_cap():
    settings = dict(get_effective_settings("greedy"), iteration_cap=0)
    with pytest.raises(GreedyIterationError) as info:
        greedy_min_cover(ExplicitBackend(example2_values(5)), 0.1, Space.PARETO, settings)
    assert info.value.reason == "iteration_limit"


def test_epsilon_must_be_positive():
    with pytest.raises(DomainError):
        greedy_min_cover(ExplicitBackend(example2_values(3)), 0.0, Space.PARETO)


# ------ Over MDPs

@pytest.mark.parametrize("space", [Space.PARETO, Space.LORENZ])
def test_lp_greedy_covers_deterministic_frontier(random_mdp, space):
    m = random_mdp(seed=7, states=3, actions=2)
    exact = enumerate_deterministic_values(m)
    cover, trace = greedy_min_cover(LpBackend(m), 0.1, space)
    assert trace.restrict_calls == 2 * len(cover) + 1
    assert verify_cover(cover, exact, 0.1, space)


def test_deterministic_greedy_is_not_larger_than_brute_force_bound(random_mdp):
    m = random_mdp(seed=3, states=3, actions=2)
    exact = enumerate_deterministic_values(m)
    cover, _ = greedy_min_cover(LpBackend(m, deterministic=True), 0.1, Space.PARETO)
    assert verify_cover(cover, exact, 0.1, Space.PARETO)
    assert all(entry.policy.deterministic for entry in cover)
    if exact.pnd.shape[0] <= 20:
        size, _ = min_cover_bruteforce(exact.values, 0.1, Space.PARETO)
        assert len(cover) == size
