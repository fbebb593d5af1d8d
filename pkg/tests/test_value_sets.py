import numpy as np
import pytest

from momdp_core import DomainError, Space, lnd_filter, pnd_filter
from oracle import example1_values, example2_values
from value_sets import LinearFamilySet


def test_values_materialize_the_family():
    assert example2_values(3).values().tolist() == [[0, 24], [1, 22], [2, 20], [3, 18]]
    assert example1_values(2).values().tolist() == [[0, 3], [1, 2], [2, 1], [3, 0]]
    with pytest.raises(DomainError):
        example1_values(4).values(limit=8)


def test_negative_components_are_rejected():
    with pytest.raises(DomainError):
        LinearFamilySet(1.0, -1.0, 3)
    with pytest.raises(DomainError):
        LinearFamilySet(1.0, 0.0, 0)


def test_upper_bound():
    assert example2_values(3).upper_bound() == 24.0
    assert example1_values(3).upper_bound() == 7.0


def test_image_at_lorenz():
    family = example2_values(3)
    assert family.image_at(Space.LORENZ, 2).tolist() == [2.0, 22.0]
    assert family.image_at(Space.PARETO, 2).tolist() == [2.0, 20.0]


def test_restrict_style_queries():
    family = example2_values(3)
    # max z2 s.t. z1 >= 2
    assert family.maximize(Space.PARETO, 1, [2.0, None]) == 2
    # max z1 s.t. z2 >= 25
    assert family.maximize(Space.PARETO, 0, [None, 25.0]) is None
    # max L2 s.t. L1 >= 2
    assert family.maximize(Space.LORENZ, 1, [2.0, None]) == 2


def test_maximize_agrees_with_array_scan():
    family = LinearFamilySet(40.0, -3.0, 14)
    values = family.values()
    for space in Space:
        image = np.column_stack([family.image_at(space, x) for x in range(family.count)]).T
        for alpha in (0.0, 3.0, 7.5, 10.0, 11.0):
            x = family.maximize(space, 1, [alpha, None])
            feasible = image[:, 0] >= alpha
            if not feasible.any():
                assert x is None
                continue
            assert image[x, 1] == image[feasible, 1].max()
            assert image[x, 0] >= alpha
    assert values.shape == (14, 2)


def test_nondominated_interval_matches_filters():
    for family in (example1_values(2), example1_values(5), example2_values(4), LinearFamilySet(40.0, -3.0, 14)):
        values = family.values()
        for space, flt in ((Space.PARETO, pnd_filter), (Space.LORENZ, lnd_filter)):
            lo, hi = family.nondominated_interval(space)
            expected = flt(values)
            assert values[lo:hi + 1].tolist() == expected.tolist()


def test_covered_intervals():
    family = example2_values(3)
    # (1.1 * 2, 1.1 * 20) = (2.2, 22) covers x = 1 and x = 2
    assert family.covered_intervals(Space.PARETO, np.array([2.0, 20.0]), 0.1) == [(1, 2)]
    assert family.covered_intervals(Space.PARETO, np.array([0.0, 1.0]), 0.1) == []
