import logging
import math
import time

import numpy as np
import pandas as pd

from config import get_effective_settings
from momdp_core import Space, lorenz_matrix, nondominated_mask
from cover_grid import (
    ExplicitBackend,
    GridConfig,
    LpBackend,
    enumerate_cells,
    lorenz_grid_cover,
    pareto_grid_cover,
    two_phase_lorenz_cover,
)
from cover_greedy import greedy_min_cover

logger = logging.getLogger(__name__)

SIZE_ROWS = ("PND_eps", "L(PND_eps)", "min PND_eps", "L(min PND_eps)", "LND_eps", "min LND_eps")


def _monotone_count(lows, highs) -> int:
    """Number of nondecreasing integer vectors p with lows[k] <= p_k <= highs[k]."""
    if not highs:
        return 1
    top = max(highs)
    base = min(lows)
    # ways[v]: sequences so far ending at value v
    ways = np.zeros(top - base + 1, dtype=object)
    for v in range(lows[0], highs[0] + 1):
        ways[v - base] = 1
    for k in range(1, len(highs)):
        running = np.cumsum(ways)
        nxt = np.zeros_like(ways)
        for v in range(lows[k], highs[k] + 1):
            nxt[v - base] = running[v - base]
        ways = nxt
    return int(sum(ways))


def grid_bounds(n: int, epsilon: float, bound: float, floor: float = 1.0) -> dict:
    """
    Cell-count bounds for a scan with n objectives and components <= bound.

    'ceil' figures use ceil(log(.)/log(1+eps)) cells per axis; '+1' figures
    count the cells 0..ceil(.) inclusive, which is what the scans visit.
    """
    cfg = GridConfig.for_bound(epsilon, bound, floor)
    log_step = math.log1p(epsilon)
    pareto_axis = math.ceil(math.log(cfg.bound) / log_step)
    lorenz_axes = [math.ceil(math.log(i * cfg.bound) / log_step) for i in range(1, n + 1)]
    scan = enumerate_cells(n, cfg, Space.LORENZ)
    return {
        "objectives": n,
        "epsilon": epsilon,
        "K": cfg.bound,
        "pareto_grid": pareto_axis ** n,
        "pareto_grid_+1": (pareto_axis + 1) ** n,
        "lorenz_grid": math.prod(lorenz_axes) / math.factorial(n),
        "lorenz_grid_+1": math.prod(a + 1 for a in lorenz_axes) / math.factorial(n),
        "pareto_scan_cells": (cfg.pareto_high() - cfg.floor_index + 1) ** (n - 1),
        "lorenz_scan_cells": _monotone_count(scan.lows, scan.highs),
        "pareto_cover_bound": pareto_axis ** (n - 1),
    }


def _lorenz_reduced_size(cover) -> int:
    """Size of the Lorenz-nondominated part of a cover, equal Lorenz vectors counted once."""
    if not cover.entries:
        return 0
    lorenz = np.unique(lorenz_matrix(cover.values()), axis=0)
    return int(nondominated_mask(lorenz).sum())


def cover_size_table(values, epsilons, settings: dict = None) -> pd.DataFrame:
    """
    Cover sizes of an explicit value set for each epsilon, one row per method:
    Pareto grid, its Lorenz reduction (two-phase), greedy Pareto, its Lorenz
    reduction, Lorenz grid, greedy Lorenz.
    """
    columns = {}
    for eps in epsilons:
        backend = ExplicitBackend(values)
        pnd = pareto_grid_cover(backend, eps, settings)
        two_phase = two_phase_lorenz_cover(backend, eps, settings)
        min_pnd, _ = greedy_min_cover(backend, eps, Space.PARETO)
        lnd = lorenz_grid_cover(backend, eps, settings)
        min_lnd, _ = greedy_min_cover(backend, eps, Space.LORENZ)
        columns[eps] = [len(pnd), len(two_phase), len(min_pnd), _lorenz_reduced_size(min_pnd),
                        len(lnd), len(min_lnd)]
        logger.info(f"sizes eps={eps}: {dict(zip(SIZE_ROWS, columns[eps]))}")
    return pd.DataFrame(columns, index=list(SIZE_ROWS))


def compare_methods(instances, epsilon: float, deterministic: bool = False,
                    settings: dict = None) -> pd.DataFrame:
    """
    Direct Lorenz scan vs two-phase cover on each MDP: backend queries,
    cover sizes and wall-clock seconds.
    """
    settings = settings or get_effective_settings("grid")
    rows = []
    for m in instances:
        direct_backend = LpBackend(m, deterministic)
        started = time.perf_counter()
        direct = lorenz_grid_cover(direct_backend, epsilon, settings)
        direct_seconds = time.perf_counter() - started

        two_phase_backend = LpBackend(m, deterministic)
        started = time.perf_counter()
        two_phase = two_phase_lorenz_cover(two_phase_backend, epsilon, settings)
        two_phase_seconds = time.perf_counter() - started

        rows.append({
            "instance": m.name,
            "direct_queries": direct.queries,
            "direct_size": len(direct),
            "direct_seconds": round(direct_seconds, 3),
            "two_phase_queries": two_phase.queries,
            "two_phase_size": len(two_phase),
            "two_phase_seconds": round(two_phase_seconds, 3),
        })
        logger.info(f"bench {m.name}: direct {direct.queries} queries / {direct_seconds:.2f}s, "
                    f"two-phase {two_phase.queries} queries / {two_phase_seconds:.2f}s")
    df = pd.DataFrame(rows)
    if not df.empty:
        df["direct_fewer_queries"] = df["direct_queries"] <= df["two_phase_queries"]
    return df
