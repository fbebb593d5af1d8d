"""
oracle.py

Exact ground truth for small instances:

- enumerate_deterministic_values: value vectors of every deterministic policy
- example1_values / example2_values: the two closed-form worked examples
- verify_cover: does a cover epsilon-dominate every nondominated point?
- min_cover_bruteforce: smallest cover by exhaustive subset search
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from config import get_effective_settings
from momdp_core import (
    DomainError,
    Momdp,
    Policy,
    ResourceError,
    Space,
    lnd_filter,
    nondominated_filter,
    pnd_filter,
    space_image,
)
from value_sets import LinearFamilySet

logger = logging.getLogger(__name__)

_BATCH = 2048


class EnumerationLimitError(ResourceError):
    pass


@dataclass(frozen=True, eq=False)
class ExactFrontier:
    """
    values: distinct value vectors of all enumerated policies (sorted rows).
    pnd / lnd: their Pareto- and Lorenz-nondominated subsets.
    policy_count: number of policies enumerated (|A|^|S| for an MDP).
    actions: for each row of `values`, the actions of one policy reaching it.
    """
    values: np.ndarray
    pnd: np.ndarray
    lnd: np.ndarray
    policy_count: int
    actions: np.ndarray = None

    @classmethod
    def from_values(cls, values, policy_count: int = None, actions=None) -> "ExactFrontier":
        values = np.asarray(values, dtype=float)
        count = values.shape[0] if policy_count is None else policy_count
        return cls(values, pnd_filter(values), lnd_filter(values), count, actions)

    def nondominated(self, space: Space) -> np.ndarray:
        return self.lnd if Space(space) is Space.LORENZ else self.pnd

    def policy_for(self, row: int, num_actions: int) -> Policy:
        if self.actions is None:
            raise DomainError("this frontier was not built from an MDP.")
        return Policy.from_actions(self.actions[row], num_actions)


# -----------------------------------------------------------
# Enumeration
# -----------------------------------------------------------

def _policy_actions(indices: np.ndarray, num_states: int, num_actions: int) -> np.ndarray:
    """Mixed-radix digits of policy indices: row i holds the actions of policy indices[i]."""
    actions = np.zeros((indices.size, num_states), dtype=int)
    rest = indices.copy()
    for s in reversed(range(num_states)):
        actions[:, s] = rest % num_actions
        rest //= num_actions
    return actions


def _evaluate_batch(m: Momdp, actions: np.ndarray) -> np.ndarray:
    states = np.arange(m.num_states)
    p = m.transition[states[None, :], actions]           # (B, S, S)
    r = m.reward[states[None, :], actions]               # (B, S, n)
    system = np.eye(m.num_states)[None, :, :] - m.discount * p
    values = np.linalg.solve(system, r)                  # (B, S, n)
    return np.einsum("s,bsn->bn", m.initial_dist, values)


def _dedup(values: np.ndarray, tol: float):
    """Sorted distinct rows (within tol) and the index of each kept row."""
    if values.shape[0] == 0:
        return np.zeros(0, dtype=int)
    order = np.lexsort(values.T[::-1])
    ordered = values[order]
    gaps = np.max(np.abs(np.diff(ordered, axis=0)), axis=1) if ordered.shape[0] > 1 else np.zeros(0)
    return order[np.concatenate([[True], gaps > tol])]


def enumerate_deterministic_values(m: Momdp, limit: int = None, jobs: int = 1,
                                   settings: dict = None) -> ExactFrontier:
    """
    Evaluate every deterministic stationary policy of m.

    Policies are split into index batches (evaluated concurrently when jobs > 1);
    values closer than dedup_tol are merged and the result is sorted.
    """
    settings = settings or get_effective_settings("oracle")
    limit = settings["enumeration_limit"] if limit is None else limit
    count = m.num_actions ** m.num_states
    if count > limit:
        raise EnumerationLimitError(f"{m.num_actions}^{m.num_states} = {count} policies exceed the "
                                    f"enumeration limit of {limit}.", reason="enumeration_limit")

    starts = range(0, count, _BATCH)

    def run(start):
        indices = np.arange(start, min(start + _BATCH, count))
        actions = _policy_actions(indices, m.num_states, m.num_actions)
        return actions, _evaluate_batch(m, actions)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(run, starts))
    else:
        batches = [run(start) for start in starts]

    actions = np.vstack([a for a, _ in batches])
    values = np.vstack([v for _, v in batches])
    keep = _dedup(values, settings["dedup_tol"])
    logger.info(f"enumerated {count} deterministic policies: {keep.size} distinct value vectors")
    return ExactFrontier.from_values(values[keep], count, actions[keep])


# -----------------------------------------------------------
# Worked examples
# -----------------------------------------------------------

def _check_example_size(N: int):
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}.")
    if N > 52:
        raise DomainError(f"N = {N} is too large for exact float arithmetic (at most 52).")


def example1_values(N: int) -> LinearFamilySet:
    """{(x, 2^N - 1 - x) : x = 0 .. 2^N - 1}."""
    _check_example_size(N)
    return LinearFamilySet(float(2 ** N - 1), -1.0, 2 ** N, label=f"example1:{N}")


def example2_values(N: int) -> LinearFamilySet:
    """{(x, 3 * 2^N - 2x) : x = 0 .. 2^(N-1) - 1}."""
    _check_example_size(N)
    return LinearFamilySet(float(3 * 2 ** N), -2.0, 2 ** (N - 1), label=f"example2:{N}")


def as_value_array(values, settings: dict = None) -> np.ndarray:
    """Array form of a value set (frontiers, families and arrays alike)."""
    if isinstance(values, ExactFrontier):
        return values.values
    if isinstance(values, LinearFamilySet):
        settings = settings or get_effective_settings("oracle")
        return values.values(limit=settings["materialize_limit"])
    return np.asarray(values, dtype=float)


# -----------------------------------------------------------
# Cover verification
# -----------------------------------------------------------

@dataclass(frozen=True)
class CoverVerdict:
    """ok, the number of nondominated points checked, and one uncovered point if not ok."""
    ok: bool
    checked: int
    witness: tuple = None

    def __bool__(self) -> bool:
        return self.ok


def _cover_images(cover, space: Space) -> np.ndarray:
    if hasattr(cover, "entries"):
        if not cover.entries:
            return np.zeros((0, 0))
        values = np.vstack([e.value for e in cover.entries])
    else:
        values = np.asarray(cover, dtype=float)
        if values.size == 0:
            return np.zeros((0, 0))
        values = np.atleast_2d(values)
    return space_image(values, space)


def _covered(points: np.ndarray, images: np.ndarray, epsilon: float, tol: float) -> np.ndarray:
    """Mask of `points` (space images) epsilon-dominated by some row of `images`."""
    scaled = (1.0 + epsilon) * images
    scaled = scaled + tol * np.maximum(1.0, np.abs(scaled))
    mask = np.zeros(points.shape[0], dtype=bool)
    chunk = max(1, 4_000_000 // max(1, images.size))
    for start in range(0, points.shape[0], chunk):
        block = points[start:start + chunk]
        mask[start:start + chunk] = np.any(np.all(scaled[None, :, :] >= block[:, None, :], axis=2), axis=1)
    return mask


def _verify_family(images: np.ndarray, family: LinearFamilySet, epsilon: float, space: Space,
                   tol: float) -> CoverVerdict:
    lo, hi = family.nondominated_interval(space)
    checked = hi - lo + 1
    intervals = []
    for image in images:
        intervals.extend(family.covered_intervals(space, image, epsilon, tolerance=tol))
    intervals.sort()
    reach = lo
    for start, end in intervals:
        if start > reach:
            break
        reach = max(reach, end + 1)
        if reach > hi:
            return CoverVerdict(True, checked)
    if reach > hi:
        return CoverVerdict(True, checked)
    return CoverVerdict(False, checked, tuple(family.value_at(reach).tolist()))


def verify_cover(cover, exact, epsilon: float, space: Space, settings: dict = None) -> CoverVerdict:
    """
    True iff every nondominated point of `exact` (in `space`) is
    epsilon-dominated by some cover entry, up to a relative verify_tol.

    `cover` is a CoverSet or an array of value vectors; `exact` an array, an
    ExactFrontier or a LinearFamilySet (checked in closed form).
    """
    settings = settings or get_effective_settings("oracle")
    if epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon!r}.")
    space = Space(space)
    tol = settings["verify_tol"]
    images = _cover_images(cover, space)

    if isinstance(exact, LinearFamilySet):
        if images.size == 0:
            lo, _ = exact.nondominated_interval(space)
            return CoverVerdict(False, 0, tuple(exact.value_at(lo).tolist()))
        return _verify_family(images, exact, epsilon, space, tol)

    values = as_value_array(exact, settings)
    if values.size == 0:
        return CoverVerdict(True, 0)
    frontier = nondominated_filter(values, space)
    points = space_image(frontier, space)
    if images.size == 0:
        return CoverVerdict(False, points.shape[0], tuple(frontier[0].tolist()))
    if images.shape[1] != points.shape[1]:
        raise DomainError(f"cover vectors have {images.shape[1]} components, the exact set {points.shape[1]}.")
    mask = _covered(points, images, epsilon, tol)
    if mask.all():
        return CoverVerdict(True, points.shape[0])
    first = int(np.argmin(mask))
    return CoverVerdict(False, points.shape[0], tuple(frontier[first].tolist()))


# -----------------------------------------------------------
# Brute-force minimal cover
# -----------------------------------------------------------

def min_cover_bruteforce(values, epsilon: float, space: Space, limit: int = None,
                         settings: dict = None):
    """
    Smallest subset of `values` that epsilon-covers its nondominated set.

    Candidates are the distinct nondominated points; subsets are tried in
    increasing size and lexicographic order. Returns (size, cover array).
    """
    settings = settings or get_effective_settings("oracle")
    limit = settings["bruteforce_limit"] if limit is None else limit
    values = as_value_array(values, settings)
    if values.shape[0] > limit:
        raise EnumerationLimitError(f"{values.shape[0]} points exceed the brute-force limit of {limit}.",
                                    reason="enumeration_limit")
    if values.size == 0:
        return 0, values.reshape(0, 0)

    space = Space(space)
    frontier = nondominated_filter(values, space)
    frontier = frontier[_dedup(frontier, settings["dedup_tol"])]
    points = space_image(frontier, space)
    # covers[i, j]: candidate i covers frontier point j
    covers = np.vstack([_covered(points, points[i:i + 1], epsilon, settings["verify_tol"])
                        for i in range(points.shape[0])])

    for size in range(1, points.shape[0] + 1):
        for subset in itertools.combinations(range(points.shape[0]), size):
            if np.all(np.any(covers[list(subset)], axis=0)):
                logger.debug(f"brute-force minimal cover: size {size}, subset {subset}")
                return size, frontier[list(subset)]
    # the frontier always covers itself
    return points.shape[0], frontier
