"""
cover_greedy.py

Minimal-cardinality epsilon-covers for two objectives.

Restrict-i(alpha) maximizes the other coordinate subject to coordinate i
being at least alpha (coordinates of z in Pareto space, of L(z) in Lorenz
space). The greedy scheme alternates

    v_0     = Restrict-2(0)
    u_k     = Restrict-1(v_{k-1}[1] / (1 + eps))
    v_k     = Restrict-2((1 + eps) * u_k[2] + tau)

until Restrict-2 finds nothing; the u_k are the cover.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from config import get_effective_settings
from momdp_core import DomainError, ResourceError, Space, space_image
from cover_grid import CoverEntry, CoverPoint, CoverSet, FeasibilityBackend

logger = logging.getLogger(__name__)


class GreedyIterationError(ResourceError):
    pass


@dataclass(frozen=True, eq=False)
class GreedyTrace:
    """
    steps: ("v", point) / ("u", point) in the order they were computed.
    restrict_calls: total Restrict calls, 2 * |cover| + 1 on normal termination.
    status: "complete" or "empty" (no point met Restrict-2(0)).
    """
    steps: tuple
    restrict_calls: int
    status: str

    def points(self, label: str):
        return [p for tag, p in self.steps if tag == label]


def restrict(backend: FeasibilityBackend, i: int, alpha: float, space: Space) -> CoverPoint:
    """Maximizer of coordinate 3-i subject to coordinate i >= alpha, or None."""
    if i not in (1, 2):
        raise DomainError(f"Restrict index must be 1 or 2, got {i!r}.")
    if backend.num_objectives != 2:
        raise DomainError("Restrict is only defined for two objectives.")
    bounds = [None, None]
    bounds[i - 1] = float(alpha)
    return backend.maximize(space, 2 - i, bounds)


def _image(point: CoverPoint, space: Space) -> np.ndarray:
    return space_image(np.asarray(point.value, dtype=float)[None, :], space)[0]


def _covering_threshold(target: float, epsilon: float) -> float:
    """Smallest float alpha with (1 + eps) * alpha >= target."""
    factor = 1.0 + epsilon
    alpha = target / factor
    while factor * alpha < target:
        alpha = math.nextafter(alpha, math.inf)
    while alpha > 0.0 and factor * math.nextafter(alpha, -math.inf) >= target:
        alpha = math.nextafter(alpha, -math.inf)
    return alpha


def greedy_min_cover(backend: FeasibilityBackend, epsilon: float, space: Space,
                     settings: dict = None):
    """
    Greedy minimal epsilon-cover of the nondominated set of `backend` in `space`.

    Returns (CoverSet, GreedyTrace).
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon!r}.")
    space = Space(space)
    settings = settings or get_effective_settings("greedy")
    start_queries = backend.query_count

    steps = []
    calls = 1
    v = restrict(backend, 2, 0.0, space)
    if v is None:
        logger.info("greedy cover: Restrict-2(0) is infeasible, the value set is empty")
        trace = GreedyTrace((), calls, "empty")
        return CoverSet((), epsilon, space, "greedy", backend.query_count - start_queries), trace
    steps.append(("v", v))

    cover = []
    while True:
        if len(cover) >= settings["iteration_cap"]:
            raise GreedyIterationError(f"greedy cover exceeded {settings['iteration_cap']} iterations.",
                                       reason="iteration_limit")
        alpha = _covering_threshold(_image(v, space)[0], epsilon)
        u = restrict(backend, 1, alpha, space)
        calls += 1
        if u is None:
            # v itself meets the threshold; only numerical trouble lands here
            logger.warning(f"greedy cover: Restrict-1({alpha!r}) found nothing, keeping v")
            u = v
        steps.append(("u", u))
        cover.append(u)

        second = _image(u, space)[1]
        tau = settings["tie_slack"] * max(1.0, abs(second))
        v = restrict(backend, 2, (1.0 + epsilon) * second + tau, space)
        calls += 1
        if v is None:
            break
        steps.append(("v", v))
        logger.debug(f"greedy cover: u{len(cover)} = {np.round(u.value, 6).tolist()}, "
                     f"next v = {np.round(v.value, 6).tolist()}")

    entries = [CoverEntry.from_point(p) for p in cover]
    logger.info(f"greedy cover: {len(entries)} entries, {calls} Restrict calls")
    result = CoverSet(entries, epsilon, space, "greedy", backend.query_count - start_queries)
    return result, GreedyTrace(tuple(steps), calls, "complete")
