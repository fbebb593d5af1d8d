"""
value_sets.py

Closed-form biobjective value sets {(x, a + b*x) : x = 0, 1, ..., M-1}.

The worked examples have up to 2^29 value vectors, far too many to hold in an
array. Every coordinate the covering code looks at is, on such a set, a
minimum of affine functions of the integer parameter x:

    Pareto space:  z1 = x,               z2 = a + b x
    Lorenz space:  L1 = min(x, a + b x), L2 = a + (1 + b) x

so thresholds cut out integer intervals and maxima sit at interval endpoints
or next to a crossing point. That is enough to answer backend queries, find
the nondominated parameter interval and verify covers without enumerating.
"""

import math
from dataclasses import dataclass

import numpy as np

from momdp_core import DomainError, Space


def _affine_at_least(intercept: float, slope: float, alpha: float, lo: int, hi: int):
    """Integer interval of x in [lo, hi] with intercept + slope*x >= alpha (None if empty)."""
    if lo > hi:
        return None
    if slope == 0:
        return (lo, hi) if intercept >= alpha else None
    root = (alpha - intercept) / slope
    if slope > 0:
        start = min(max(lo, math.ceil(root)), hi + 1) if math.isfinite(root) else lo
        # exact float evaluation decides the boundary point
        while start <= hi and intercept + slope * start < alpha:
            start += 1
        while start - 1 >= lo and intercept + slope * (start - 1) >= alpha:
            start -= 1
        return (start, hi) if start <= hi else None
    end = max(min(hi, math.floor(root)), lo - 1) if math.isfinite(root) else hi
    while end >= lo and intercept + slope * end < alpha:
        end -= 1
    while end + 1 <= hi and intercept + slope * (end + 1) >= alpha:
        end += 1
    return (lo, end) if end >= lo else None


def _affine_at_most(intercept: float, slope: float, bound: float, lo: int, hi: int):
    """Integer interval of x in [lo, hi] with intercept + slope*x <= bound."""
    flipped = _affine_at_least(-intercept, -slope, -bound, lo, hi)
    return flipped


@dataclass(frozen=True)
class LinearFamilySet:
    """
    The value set {(x, intercept + slope*x) : x = 0..count-1}.

    All values must be nonnegative, which is checked at both ends.
    """
    intercept: float
    slope: float
    count: int
    label: str = ""

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("a value family needs at least one point.")
        last = self.intercept + self.slope * (self.count - 1)
        if self.intercept < 0 or last < 0:
            raise DomainError("value family components must be nonnegative.")

    num_objectives = 2

    def __len__(self) -> int:
        return self.count

    # -------------------------------------------------------
    # Coordinates as minima of affine pieces in x
    # -------------------------------------------------------
    def _pieces(self, space: Space, coordinate: int):
        a, b = float(self.intercept), float(self.slope)
        if Space(space) is Space.PARETO:
            return [(0.0, 1.0)] if coordinate == 0 else [(a, b)]
        if coordinate == 0:
            return [(0.0, 1.0), (a, b)]
        return [(a, 1.0 + b)]

    def _coordinate(self, space: Space, coordinate: int, x: int) -> float:
        return min(c + s * x for c, s in self._pieces(space, coordinate))

    def value_at(self, x: int) -> np.ndarray:
        return np.array([float(x), self.intercept + self.slope * x])

    def image_at(self, space: Space, x: int) -> np.ndarray:
        return np.array([self._coordinate(space, 0, x), self._coordinate(space, 1, x)])

    def values(self, limit: int = None) -> np.ndarray:
        """Materialize the set as a (count, 2) array."""
        if limit is not None and self.count > limit:
            raise DomainError(f"refusing to materialize {self.count} value vectors (limit {limit}).")
        x = np.arange(self.count, dtype=float)
        return np.column_stack([x, self.intercept + self.slope * x])

    def upper_bound(self) -> float:
        last = self.intercept + self.slope * (self.count - 1)
        return float(max(self.count - 1, self.intercept, last))

    # -------------------------------------------------------
    # Queries
    # -------------------------------------------------------
    def _feasible_interval(self, space: Space, lower_bounds):
        lo, hi = 0, self.count - 1
        for coordinate, alpha in enumerate(lower_bounds):
            if alpha is None:
                continue
            for c, s in self._pieces(space, coordinate):
                cut = _affine_at_least(c, s, float(alpha), lo, hi)
                if cut is None:
                    return None
                lo, hi = cut
        return lo, hi

    def _candidates(self, space: Space, lo: int, hi: int):
        points = {lo, hi}
        for coordinate in (0, 1):
            pieces = self._pieces(space, coordinate)
            for (c1, s1), (c2, s2) in zip(pieces, pieces[1:]):
                if s1 == s2:
                    continue
                cross = (c2 - c1) / (s1 - s2)
                if math.isfinite(cross):
                    for x in (math.floor(cross), math.ceil(cross)):
                        if lo <= x <= hi:
                            points.add(x)
        return sorted(points)

    def maximize(self, space: Space, target: int, lower_bounds):
        """
        Parameter x maximizing coordinate `target` subject to coordinate k >= lower_bounds[k].

        Ties prefer the larger other coordinate, then the larger value vector.
        Returns None when no point meets the thresholds.
        """
        interval = self._feasible_interval(space, lower_bounds)
        if interval is None:
            return None
        lo, hi = interval
        other = 1 - target

        def key(x):
            value = self.value_at(x)
            return (self._coordinate(space, target, x), self._coordinate(space, other, x),
                    tuple(value))

        return max(self._candidates(space, lo, hi), key=key)

    def nondominated_interval(self, space: Space):
        """
        Parameters of the strictly nondominated points in `space`, as (lo, hi).

        The second coordinate is affine in x and the first is concave, so the
        nondominated points run from the end that is best for the second
        coordinate up to the nearest maximizer of the first.
        """
        lo, hi = 0, self.count - 1
        (c2, s2), = self._pieces(space, 1)
        candidates = self._candidates(space, lo, hi)
        best_first = max(self._coordinate(space, 0, x) for x in candidates)
        maximizers = [x for x in candidates if self._coordinate(space, 0, x) == best_first]
        # A plateau of the first coordinate is an interval between candidates.
        plateau = (min(maximizers), max(maximizers))
        if s2 > 0:
            return plateau[1], hi
        if s2 < 0:
            return lo, plateau[0]
        return plateau

    def covered_intervals(self, space: Space, image: np.ndarray, epsilon: float, tolerance: float = 0.0):
        """Integer intervals of x whose image is epsilon-dominated by `image`."""
        scaled = (1.0 + epsilon) * np.asarray(image, dtype=float)
        scaled = scaled + tolerance * np.maximum(1.0, np.abs(scaled))
        lo, hi = 0, self.count - 1
        (c2, s2), = self._pieces(space, 1)
        second = _affine_at_most(c2, s2, scaled[1], lo, hi)
        if second is None:
            return []
        intervals = []
        # min of pieces <= bound holds when any piece is <= bound
        for c1, s1 in self._pieces(space, 0):
            cut = _affine_at_most(c1, s1, scaled[0], second[0], second[1])
            if cut is not None:
                intervals.append(cut)
        return intervals
