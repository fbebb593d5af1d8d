"""
cover_grid.py

Epsilon-covers by logarithmic grid scans.

A grid cell groups value vectors whose coordinates (z itself in Pareto space,
its Lorenz vector in Lorenz space) have the same index
ceil(log(max(c, floor)) / log(1 + eps)). Every cell is turned into one
threshold query to a FeasibilityBackend: maximize the last coordinate subject
to the others reaching the lower edge of the cell. The maximizers of all cells
form an epsilon-cover; entries whose cover_key is dominated by another
entry's are then dropped.

Three covers are built here:

- lorenz_grid_cover: Lorenz-space scan over monotone cells (direct method)
- pareto_grid_cover: Pareto-space scan over the first n-1 coordinates
- two_phase_lorenz_cover: the Pareto cover, reduced to its Lorenz-nondominated part

Backends answer the threshold queries either with linear programs over an MDP
(LpBackend) or by scanning / evaluating an explicit value set (ExplicitBackend).
"""

import logging
import math
import threading
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from config import get_effective_settings
from momdp_core import (
    DomainError,
    Momdp,
    OccupationMeasure,
    Policy,
    Space,
    lorenz_matrix,
    lorenz_vector,
    nondominated_mask,
    space_image,
)
from lp_models import build_lorenz_test_lp, build_restrict_lp, build_space_lp, extract_solution
from lp_solver import LpStatus, SolverResourceError
from value_sets import LinearFamilySet

logger = logging.getLogger(__name__)

# an index within this distance of an integer is that integer
_INDEX_SNAP = 1e-9


class CellQueryError(RuntimeError):
    """A backend query failed while scanning the grid."""

    def __init__(self, cell, cause: Exception):
        super().__init__(f"query for grid cell {tuple(cell)} failed: {cause}")
        self.cell = tuple(cell)
        self.cause = cause


# -----------------------------------------------------------
# Grid
# -----------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    """
    epsilon: grid ratio is 1 + epsilon.
    bound: K, an upper bound on every value component.
    floor: delta, components below it share the lowest cell.
    """
    epsilon: float
    bound: float
    floor: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon!r}.")
        if not self.floor > 0:
            raise DomainError(f"grid floor must be positive, got {self.floor!r}.")
        if not self.bound >= self.floor:
            raise DomainError(f"value bound {self.bound!r} is below the grid floor {self.floor!r}.")

    @classmethod
    def for_bound(cls, epsilon: float, bound: float, floor: float = 1.0) -> "GridConfig":
        """Config whose bound is raised to the floor when the values are all tiny."""
        return cls(epsilon, max(float(bound), floor), floor)

    def index(self, value: float) -> int:
        ratio = math.log(max(float(value), self.floor)) / math.log1p(self.epsilon)
        nearest = round(ratio)
        if abs(ratio - nearest) <= _INDEX_SNAP:
            return int(nearest)
        return math.ceil(ratio)

    def lower_index(self, value: float, slack: float = 0.0) -> int:
        """Largest p whose query threshold threshold(p) * (1 - slack) is at most value."""
        value = float(value)
        scale = 1.0 - slack
        base = self.floor_index
        if value <= 0.0:
            return base
        p = max(base, math.floor(math.log(value / scale) / math.log1p(self.epsilon)) + 1)
        while self.threshold(p + 1) * scale <= value:
            p += 1
        while p > base and self.threshold(p) * scale > value:
            p -= 1
        return p

    @property
    def floor_index(self) -> int:
        return self.index(self.floor)

    def threshold(self, p: int) -> float:
        """Lower edge of cell p; the lowest cell starts at zero."""
        if p <= self.floor_index:
            return 0.0
        return (1.0 + self.epsilon) ** (p - 1)

    def pareto_high(self) -> int:
        return self.index(self.bound)

    def lorenz_highs(self, n: int):
        """Largest index of L_k, k = 1..n (L_k <= k*K)."""
        return [self.index(k * self.bound) for k in range(1, n + 1)]


def phi_index(v, cfg: GridConfig) -> tuple:
    """Grid cell of z itself."""
    return tuple(cfg.index(c) for c in np.asarray(v, dtype=float))


def psi_index(v, cfg: GridConfig) -> tuple:
    """Grid cell of the Lorenz vector of z (nondecreasing)."""
    return tuple(cfg.index(c) for c in lorenz_vector(v))


def grid_image(v, cfg: GridConfig, space: Space) -> tuple:
    return psi_index(v, cfg) if Space(space) is Space.LORENZ else phi_index(v, cfg)


def cover_key(v, cfg: GridConfig, space: Space, slack: float = 0.0) -> tuple:
    """
    Grid key of a scan maximizer: the first n-1 coordinates of its image by
    the highest cell whose query it satisfies, the last one by its own index.
    Every cell the point answered or caused to be skipped is componentwise
    below this key.
    """
    image = space_image(np.asarray(v, dtype=float)[None, :], space)[0]
    return tuple(cfg.lower_index(c, slack) for c in image[:-1]) + (cfg.index(image[-1]),)


# -----------------------------------------------------------
# Cell enumeration
# -----------------------------------------------------------

class CellEnumerator:
    """
    Lexicographic stream of integer cells with lows[k] <= p_k <= highs[k]
    (and p_1 <= ... <= p_d when monotone).

    Skip-ahead: `mark(lower, upper)` records that the query at thresholds
    `lower` returned a maximizer whose coordinates are `upper`; any later cell
    with lower <= thresholds <= upper has the same maximizer and is skipped.
    `mark_infeasible(lower)` skips every cell with thresholds >= lower.
    """

    def __init__(self, lows, highs, threshold, monotone: bool = False):
        self.lows = [int(v) for v in lows]
        self.highs = [int(v) for v in highs]
        if len(self.lows) != len(self.highs):
            raise DomainError("lows and highs must have the same length.")
        self.threshold = threshold
        self.monotone = monotone
        self._boxes = []
        self._infeasible = []
        self.yielded = 0
        self.skipped = 0

    def thresholds(self, cell) -> np.ndarray:
        return np.array([self.threshold(p) for p in cell], dtype=float)

    def mark(self, lower, upper):
        self._boxes.append((np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)))

    def mark_infeasible(self, lower):
        self._infeasible.append(np.asarray(lower, dtype=float))

    def is_skipped(self, thresholds: np.ndarray) -> bool:
        for lower in self._infeasible:
            if np.all(thresholds >= lower):
                return True
        for lower, upper in self._boxes:
            if np.all(lower <= thresholds) and np.all(thresholds <= upper):
                return True
        return False

    def cells(self):
        """All cells in lexicographic order, ignoring marks."""
        d = len(self.lows)
        if d == 0:
            yield ()
            return

        def extend(prefix):
            k = len(prefix)
            start = self.lows[k]
            if self.monotone and prefix:
                start = max(start, prefix[-1])
            for p in range(start, self.highs[k] + 1):
                cell = prefix + (p,)
                if k + 1 == d:
                    yield cell
                else:
                    yield from extend(cell)

        yield from extend(())

    def count(self) -> int:
        return sum(1 for _ in self.cells())

    def __iter__(self):
        for cell in self.cells():
            if self._boxes or self._infeasible:
                if self.is_skipped(self.thresholds(cell)):
                    self.skipped += 1
                    continue
            self.yielded += 1
            yield cell


def enumerate_cells(n: int, cfg: GridConfig, space: Space = Space.LORENZ) -> CellEnumerator:
    """Cells of the n-objective scan in `space` (n-1 coordinates)."""
    if n < 2:
        raise DomainError(f"a grid scan needs at least two objectives, got {n}.")
    lows = [cfg.floor_index] * (n - 1)
    if Space(space) is Space.LORENZ:
        return CellEnumerator(lows, cfg.lorenz_highs(n)[:n - 1], cfg.threshold, monotone=True)
    return CellEnumerator(lows, [cfg.pareto_high()] * (n - 1), cfg.threshold)


# -----------------------------------------------------------
# Cover types
# -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoverPoint:
    """A backend answer: an achievable value vector and, for MDPs, how to get it."""
    value: np.ndarray
    policy: Policy = None
    occupation: OccupationMeasure = None


@dataclass(frozen=True, eq=False)
class CoverEntry:
    value: np.ndarray
    lorenz: np.ndarray
    cell: tuple = ()
    policy: Policy = None
    occupation: OccupationMeasure = None

    @classmethod
    def from_point(cls, point: CoverPoint, cell=()) -> "CoverEntry":
        value = np.asarray(point.value, dtype=float)
        return cls(value, lorenz_vector(value), tuple(cell), point.policy, point.occupation)

    def image(self, space: Space) -> np.ndarray:
        return self.lorenz if Space(space) is Space.LORENZ else self.value


@dataclass(frozen=True, eq=False)
class CoverSet:
    """
    Cover entries with the epsilon and space they cover in.

    `queries` counts backend queries and `cells` the grid cells visited
    (both 0 for covers not built by a scan).
    """
    entries: tuple
    epsilon: float
    space: Space
    method: str = ""
    queries: int = 0
    cells: int = 0
    skipped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "space", Space(self.space))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def values(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.vstack([e.value for e in self.entries])

    def images(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.vstack([e.image(self.space) for e in self.entries])


# -----------------------------------------------------------
# Backends
# -----------------------------------------------------------

class FeasibilityBackend(ABC):
    """
    Answers threshold queries over an (implicit) set of value vectors:
    maximize coordinate `target` of the space image subject to coordinate k
    being at least lower_bounds[k] (None = unconstrained).
    """

    def __init__(self):
        self.query_count = 0
        self._lock = threading.Lock()

    @property
    @abstractmethod
    def num_objectives(self) -> int:
        ...

    @abstractmethod
    def value_bound(self) -> float:
        """K: an upper bound on every value component."""
        ...

    @abstractmethod
    def _maximize(self, space: Space, target: int, lower_bounds) -> CoverPoint:
        ...

    def maximize(self, space: Space, target: int, lower_bounds) -> CoverPoint:
        with self._lock:
            self.query_count += 1
        return self._maximize(Space(space), target, list(lower_bounds))


class LpBackend(FeasibilityBackend):
    """Threshold queries as occupation-measure LPs (MIPs when deterministic)."""

    def __init__(self, m: Momdp, deterministic: bool = False, settings: dict = None):
        super().__init__()
        self.m = m
        self.deterministic = deterministic
        self.settings = settings or get_effective_settings("solver")
        if deterministic:
            binaries = m.num_states * m.num_actions
            if binaries > self.settings["max_binaries"]:
                raise SolverResourceError(f"{binaries} binaries exceed the limit of "
                                          f"{self.settings['max_binaries']}.", reason="binary_limit")

    @property
    def num_objectives(self) -> int:
        return self.m.num_objectives

    def value_bound(self) -> float:
        return self.m.value_bound()

    def _handle(self, space: Space, target: int, lower_bounds):
        n = self.m.num_objectives
        bounds = lower_bounds + [None] * (n - len(lower_bounds))
        constrained = [k for k, b in enumerate(bounds) if b is not None]
        if n == 2 and len(constrained) == 1 and target == 1 - constrained[0]:
            i = constrained[0] + 1
            return build_restrict_lp(self.m, i, bounds[constrained[0]], space, self.deterministic)
        if space is Space.LORENZ and target == n - 1 and all(b is not None for b in bounds[:n - 1]):
            return build_lorenz_test_lp(self.m, bounds[:n - 1], self.deterministic)
        return build_space_lp(self.m, space, target, bounds, self.deterministic)

    def _maximize(self, space: Space, target: int, lower_bounds) -> CoverPoint:
        handle = self._handle(space, target, lower_bounds)
        solution = handle.solve(self.settings)
        if solution.status is LpStatus.INFEASIBLE:
            return None
        if solution.status is LpStatus.UNBOUNDED:
            raise RuntimeError("threshold LP reported unbounded on a bounded polytope.")
        value, occupation, policy = extract_solution(handle, solution, self.m)
        return CoverPoint(value, policy, occupation)


class ExplicitBackend(FeasibilityBackend):
    """
    Threshold queries over an explicit value set: a (m, n) array scanned
    directly, or a LinearFamilySet answered in closed form.

    Ties prefer the larger remaining coordinates, then the larger value vector.
    """

    def __init__(self, values):
        super().__init__()
        if isinstance(values, LinearFamilySet):
            self.family = values
            self.values = None
        else:
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise DomainError("an explicit backend needs a nonempty (m, n) array of value vectors.")
            if np.any(arr < 0):
                raise DomainError("explicit value vectors must be nonnegative.")
            self.family = None
            self.values = arr
            self._images = {}

    @property
    def num_objectives(self) -> int:
        return LinearFamilySet.num_objectives if self.family is not None else self.values.shape[1]

    def value_bound(self) -> float:
        if self.family is not None:
            return self.family.upper_bound()
        return float(self.values.max())

    def _image(self, space: Space) -> np.ndarray:
        if space not in self._images:
            self._images[space] = space_image(self.values, space)
        return self._images[space]

    def _maximize(self, space: Space, target: int, lower_bounds) -> CoverPoint:
        if self.family is not None:
            bounds = lower_bounds + [None] * (2 - len(lower_bounds))
            x = self.family.maximize(space, target, bounds)
            return None if x is None else CoverPoint(self.family.value_at(x))

        image = self._image(space)
        mask = np.ones(image.shape[0], dtype=bool)
        for k, bound in enumerate(lower_bounds):
            if bound is not None:
                mask &= image[:, k] >= bound
        rows = np.flatnonzero(mask)
        if rows.size == 0:
            return None
        others = [k for k in range(image.shape[1]) if k != target]
        # np.lexsort sorts by its last key first
        keys = [self.values[rows, k] for k in reversed(range(self.values.shape[1]))]
        keys += [image[rows, k] for k in reversed(others)]
        keys.append(image[rows, target])
        best = rows[np.lexsort(keys)[-1]]
        return CoverPoint(self.values[best].copy())


def backend_grid_config(backend: FeasibilityBackend, epsilon: float, settings: dict = None) -> GridConfig:
    settings = settings or get_effective_settings("grid")
    return GridConfig.for_bound(epsilon, backend.value_bound(), settings["floor"])


# -----------------------------------------------------------
# Scans
# -----------------------------------------------------------

def _run_scan(backend: FeasibilityBackend, enumerator: CellEnumerator, space: Space,
              settings: dict):
    """Query every unskipped cell; returns [(cell, CoverPoint)] in cell order."""
    n = backend.num_objectives
    slack = settings["acceptance_slack"]
    found = []

    def query(cell):
        thresholds = enumerator.thresholds(cell) * (1.0 - slack)
        try:
            point = backend.maximize(space, n - 1, thresholds.tolist())
        except Exception as e:
            raise CellQueryError(cell, e) from e
        return thresholds, point

    if not settings["skip_ahead"] and settings["jobs"] > 1:
        cells = list(enumerator)
        with ThreadPoolExecutor(max_workers=settings["jobs"]) as pool:
            results = list(pool.map(query, cells))
        for cell, (_, point) in zip(cells, results):
            if point is not None:
                found.append((cell, point))
        return found

    for cell in enumerator:
        thresholds, point = query(cell)
        if point is None:
            logger.debug(f"cell {cell}: infeasible")
            if settings["skip_ahead"]:
                enumerator.mark_infeasible(thresholds)
            continue
        image = space_image(np.asarray(point.value)[None, :], space)[0]
        logger.debug(f"cell {cell}: maximizer {np.round(point.value, 6).tolist()}")
        if settings["skip_ahead"]:
            enumerator.mark(thresholds, image[:n - 1])
        found.append((cell, point))
    return found


def _representatives(found, cfg: GridConfig, space: Space, slack: float):
    """
    One entry per distinct cover_key, keeping the larger L_n and then the
    lexicographically larger value vector; then drop entries whose key is
    strictly dominated by another's. A key at least as high as a dropped
    entry's still satisfies every query that entry answered.
    """
    best = {}
    for cell, point in found:
        entry = CoverEntry.from_point(point, cell)
        key = cover_key(entry.value, cfg, space, slack)
        rank = (float(entry.lorenz[-1]), tuple(entry.value.tolist()))
        if key not in best or rank > best[key][0]:
            best[key] = (rank, entry)
    if not best:
        return []
    keys = sorted(best)
    mask = nondominated_mask(np.array(keys, dtype=float))
    return [best[k][1] for k, keep in zip(keys, mask) if keep]


def _scan_cover(backend: FeasibilityBackend, epsilon: float, space: Space, method: str,
                settings: dict = None) -> CoverSet:
    settings = settings or get_effective_settings("grid")
    cfg = backend_grid_config(backend, epsilon, settings)
    start_queries = backend.query_count
    enumerator = enumerate_cells(backend.num_objectives, cfg, space)
    started = time.perf_counter()
    found = _run_scan(backend, enumerator, space, settings)
    entries = _representatives(found, cfg, space, settings["acceptance_slack"])
    queries = backend.query_count - start_queries
    logger.info(f"{method} cover: {len(entries)} entries from {queries} queries "
                f"({enumerator.skipped} cells skipped) in {time.perf_counter() - started:.3f}s")
    return CoverSet(entries, epsilon, space, method, queries, enumerator.yielded, enumerator.skipped)


def lorenz_grid_cover(backend: FeasibilityBackend, epsilon: float, settings: dict = None) -> CoverSet:
    """Epsilon-cover of the Lorenz-nondominated values by a scan over monotone psi cells."""
    return _scan_cover(backend, epsilon, Space.LORENZ, "grid", settings)


def pareto_grid_cover(backend: FeasibilityBackend, epsilon: float, settings: dict = None) -> CoverSet:
    """Epsilon-cover of the Pareto-nondominated values by a scan over phi cells."""
    return _scan_cover(backend, epsilon, Space.PARETO, "grid", settings)


def two_phase_lorenz_cover(backend: FeasibilityBackend, epsilon: float, settings: dict = None) -> CoverSet:
    """
    Pareto grid cover first, then keep the entries whose Lorenz vectors are
    not strictly Pareto-dominated by another entry's.
    """
    pareto = pareto_grid_cover(backend, epsilon, settings)
    if not pareto.entries:
        return CoverSet((), epsilon, Space.LORENZ, "two-phase", pareto.queries, pareto.cells, pareto.skipped)
    # equal Lorenz vectors are one tradeoff: keep the lexicographically larger value
    distinct = {}
    for entry in pareto.entries:
        key = tuple(entry.lorenz.tolist())
        if key not in distinct or tuple(entry.value.tolist()) > tuple(distinct[key].value.tolist()):
            distinct[key] = entry
    candidates = [distinct[k] for k in sorted(distinct)]
    mask = nondominated_mask(lorenz_matrix(np.vstack([e.value for e in candidates])))
    entries = [e for e, keep in zip(candidates, mask) if keep]
    logger.info(f"two-phase cover: {len(entries)} of {len(pareto)} Pareto entries are Lorenz-nondominated")
    return CoverSet(entries, epsilon, Space.LORENZ, "two-phase", pareto.queries, pareto.cells, pareto.skipped)
