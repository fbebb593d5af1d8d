"""
lp_models.py

Builds the occupation-measure linear programs the covering code asks
questions of, and maps their solutions back to value vectors and policies.

Every model starts from the flow constraints

    sum_a x_sa - gamma * sum_{s',a} p(s',a,s) x_s'a = mu_s    for every s
    x_sa >= 0

plus one variable z_i = sum_{s,a} r_i(s,a) x_sa per objective. A Lorenz
component L_k(z) (sum of the k smallest z_i) is never sorted inside an LP;
it is the optimum of the small dual program

    max  k*t_k - sum_i b_ik   s.t.  t_k - b_ik <= z_i,  b_ik >= 0

so "L_k(z) >= eta" becomes "k*t_k - sum_i b_ik >= eta" over the joint
variables and "maximize L_k(z)" becomes "maximize k*t_k - sum_i b_ik".
L_n(z) is simply sum_i z_i.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from momdp_core import (
    DomainError,
    Momdp,
    OccupationMeasure,
    Policy,
    Space,
    occupation_to_policy,
    occupation_value,
    policy_occupation,
)
from lp_solver import LpBuilder, LpModel, MipModel, LpSolution, LpStatus, solve_lp, solve_mip

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OccupationLpHandle:
    """
    A built occupation-measure model with its variable bookkeeping.

    Attributes:
        model: the LpModel (binaries, if any, are listed in `binary`).
        x_index: (s, a) -> column of x_sa.
        z_index: objective i -> column of z_i.
        binary: columns of the d_sa variables in deterministic mode.
        aux: name -> column for the Lorenz dual variables t_k, b_ik.
    """
    model: LpModel
    x_index: dict
    z_index: tuple
    num_states: int
    num_actions: int
    binary: tuple = ()
    aux: dict = field(default_factory=dict)

    @property
    def deterministic(self) -> bool:
        return bool(self.binary)

    @property
    def problem(self):
        return MipModel(self.model, self.binary) if self.binary else self.model

    def solve(self, settings: dict = None) -> LpSolution:
        if self.binary:
            return solve_mip(self.problem, settings)
        return solve_lp(self.model, settings)


@dataclass(frozen=True, eq=False)
class LorenzTestHandle(OccupationLpHandle):
    """Occupation model with L_k(z) >= thresholds[k-1] for k < n, maximizing sum z."""
    thresholds: tuple = ()


# -----------------------------------------------------------
# Building blocks
# -----------------------------------------------------------

def _occupation_builder(m: Momdp):
    builder = LpBuilder()
    x_index = {}
    for s in range(m.num_states):
        for a in range(m.num_actions):
            x_index[(s, a)] = builder.add_variable(f"x_{s}_{a}", 0.0, np.inf)
    z_index = tuple(builder.add_variable(f"z_{i}", 0.0, np.inf) for i in range(m.num_objectives))

    gamma = m.discount
    for s in range(m.num_states):
        row = {}
        for a in range(m.num_actions):
            row[x_index[(s, a)]] = row.get(x_index[(s, a)], 0.0) + 1.0
        for s_prev in range(m.num_states):
            for a in range(m.num_actions):
                p = m.transition[s_prev, a, s]
                if p != 0.0:
                    j = x_index[(s_prev, a)]
                    row[j] = row.get(j, 0.0) - gamma * p
        builder.add_constraint(row, "=", float(m.initial_dist[s]))

    for i in range(m.num_objectives):
        row = {z_index[i]: 1.0}
        for (s, a), j in x_index.items():
            r = m.reward[s, a, i]
            if r != 0.0:
                row[j] = -float(r)
        builder.add_constraint(row, "=", 0.0)
    return builder, x_index, z_index


def _lorenz_component(builder: LpBuilder, z_index, k: int, aux: dict) -> dict:
    """
    Add the dual block of L_k (1 <= k <= n) and return its objective expression.

    L_n needs no block: it is the plain sum of the z_i.
    """
    n = len(z_index)
    if k == n:
        return {j: 1.0 for j in z_index}
    t = builder.add_variable(f"t_{k}", -np.inf, np.inf)
    aux[f"t_{k}"] = t
    expression = {t: float(k)}
    for i, z in enumerate(z_index):
        b = builder.add_variable(f"b_{i}_{k}", 0.0, np.inf)
        aux[f"b_{i}_{k}"] = b
        builder.add_constraint({t: 1.0, b: -1.0, z: -1.0}, "<=", 0.0)
        expression[b] = -1.0
    return expression


def _space_coordinate(builder: LpBuilder, z_index, space: Space, coordinate: int, aux: dict) -> dict:
    """Expression for coordinate `coordinate` (0-based) of z or of L(z)."""
    if Space(space) is Space.PARETO:
        return {z_index[coordinate]: 1.0}
    return _lorenz_component(builder, z_index, coordinate + 1, aux)


def _append_deterministic(builder: LpBuilder, x_index: dict, m: Momdp) -> tuple:
    d_index = {}
    for (s, a) in x_index:
        d_index[(s, a)] = builder.add_variable(f"d_{s}_{a}", 0.0, 1.0)
    for s in range(m.num_states):
        builder.add_constraint({d_index[(s, a)]: 1.0 for a in range(m.num_actions)}, "<=", 1.0)
    for key, j in x_index.items():
        builder.add_constraint({j: 1.0 - m.discount, d_index[key]: -1.0}, "<=", 0.0)
    return tuple(d_index[key] for key in sorted(d_index))


# -----------------------------------------------------------
# Public builders
# -----------------------------------------------------------

def build_occupation_lp(m: Momdp) -> OccupationLpHandle:
    """The flow polytope with z_i defined; no objective installed."""
    builder, x_index, z_index = _occupation_builder(m)
    builder.set_objective({}, maximize=True)
    return OccupationLpHandle(builder.build(), x_index, z_index, m.num_states, m.num_actions)


def add_deterministic_constraints(h: OccupationLpHandle, m: Momdp) -> MipModel:
    """
    Add binaries d_sa with sum_a d_sa <= 1 per state and (1-gamma) x_sa <= d_sa.

    Any integral solution puts mass on at most one action per state.
    """
    if (h.num_states, h.num_actions) != (m.num_states, m.num_actions):
        raise DomainError("handle was not built from this MDP.")
    builder = LpBuilder.from_model(h.model)
    binary = _append_deterministic(builder, h.x_index, m)
    return MipModel(builder.build(), binary)


def with_deterministic_constraints(h: OccupationLpHandle, m: Momdp) -> OccupationLpHandle:
    """The same handle, solved as a MIP over deterministic policies."""
    mip = add_deterministic_constraints(h, m)
    fields = dict(h.__dict__)
    fields.update(model=mip.base, binary=mip.binary)
    return type(h)(**fields)


def build_space_lp(m: Momdp, space: Space, target: int, lower_bounds,
                   deterministic: bool = False) -> OccupationLpHandle:
    """
    Maximize coordinate `target` of z (Pareto) or L(z) (Lorenz) subject to
    coordinate k >= lower_bounds[k] for every k whose bound is not None.

    Coordinates are 0-based. This is the one query shape every cover asks.
    """
    n = m.num_objectives
    if not 0 <= target < n:
        raise DomainError(f"target coordinate {target} out of range for {n} objectives.")
    lower_bounds = list(lower_bounds)
    if len(lower_bounds) > n:
        raise DomainError(f"{len(lower_bounds)} lower bounds for {n} objectives.")
    lower_bounds += [None] * (n - len(lower_bounds))

    builder, x_index, z_index = _occupation_builder(m)
    aux = {}
    expressions = {}

    def expression(k):
        if k not in expressions:
            expressions[k] = _space_coordinate(builder, z_index, space, k, aux)
        return expressions[k]

    for k, bound in enumerate(lower_bounds):
        if bound is None:
            continue
        if not np.isfinite(bound):
            raise DomainError(f"threshold for coordinate {k} must be finite, got {bound!r}.")
        builder.add_constraint(expression(k), ">=", float(bound))
    builder.set_objective(expression(target), maximize=True)

    binary = _append_deterministic(builder, x_index, m) if deterministic else ()
    return OccupationLpHandle(builder.build(), x_index, z_index, m.num_states, m.num_actions,
                              binary=binary, aux=aux)


def build_lorenz_test_lp(m: Momdp, eta, deterministic: bool = False) -> LorenzTestHandle:
    """
    max L_n(z) = sum_i z_i  s.t.  L_k(z) >= eta[k-1] for k = 1..n-1.

    An Infeasible solve means no achievable z meets the thresholds.
    """
    eta = [float(e) for e in np.asarray(eta, dtype=float).ravel()]
    if len(eta) != m.num_objectives - 1:
        raise DomainError(f"expected {m.num_objectives - 1} thresholds, got {len(eta)}.")
    h = build_space_lp(m, Space.LORENZ, m.num_objectives - 1, eta, deterministic)
    return LorenzTestHandle(h.model, h.x_index, h.z_index, h.num_states, h.num_actions,
                            binary=h.binary, aux=h.aux, thresholds=tuple(eta))


def build_restrict_lp(m: Momdp, i: int, alpha: float, space: Space,
                      deterministic: bool = False) -> OccupationLpHandle:
    """
    Restrict-i(alpha) for i in {1, 2}.

    Pareto: max z_{3-i} s.t. z_i >= alpha.
    Lorenz: Restrict-1 is max L_2 s.t. L_1 >= alpha; Restrict-2 is
    max L_1 s.t. L_2 = z_1 + z_2 >= alpha.
    """
    if i not in (1, 2):
        raise DomainError(f"Restrict index must be 1 or 2, got {i!r}.")
    if Space(space) is Space.LORENZ and m.num_objectives != 2:
        raise DomainError("Lorenz Restrict is only defined for two objectives.")
    bounds = [None, None]
    bounds[i - 1] = alpha
    return build_space_lp(m, space, 2 - i, bounds, deterministic)


# -----------------------------------------------------------
# Solutions
# -----------------------------------------------------------

def extract_solution(handle: OccupationLpHandle, sol: LpSolution, m: Momdp):
    """
    (value vector, occupation measure, policy) of an Optimal solution.

    The policy is read off x (argmax per state in deterministic mode); the
    occupation measure and value are then recomputed exactly from that policy
    rather than taken from the solver.
    """
    if sol.status is not LpStatus.OPTIMAL:
        raise DomainError(f"cannot extract a policy from a {sol.status.value} solution.")
    x = np.zeros((handle.num_states, handle.num_actions))
    for (s, a), j in handle.x_index.items():
        x[s, a] = max(float(sol.x[j]), 0.0)

    if handle.deterministic:
        policy = Policy.from_actions(np.argmax(x, axis=1), m.num_actions)
    else:
        policy = occupation_to_policy(OccupationMeasure(x, m.discount, m.initial_dist))

    occupation = policy_occupation(m, policy)
    value = occupation_value(m, occupation)
    solver_z = np.array([sol.x[j] for j in handle.z_index])
    drift = float(np.max(np.abs(solver_z - value)))
    if drift > 1e-6 * max(1.0, float(np.max(np.abs(value)))):
        logger.debug(f"extract_solution: recomputed value differs from solver z by {drift:.3e}")
    return value, occupation, policy


def lorenz_dual_value(z, k: int, settings: dict = None) -> float:
    """Optimum of max k*t - sum_i b_i s.t. t - b_i <= z_i, b >= 0 (equals L_k(z))."""
    z = np.asarray(z, dtype=float)
    if not 1 <= k <= z.size:
        raise DomainError(f"Lorenz component index must lie in [1, {z.size}], got {k}.")
    builder = LpBuilder()
    z_index = tuple(builder.add_variable(f"z_{i}", float(v), float(v)) for i, v in enumerate(z))
    expression = _lorenz_component(builder, z_index, k, {})
    builder.set_objective(expression, maximize=True)
    solution = solve_lp(builder.build(), settings)
    if not solution.is_optimal:
        raise DomainError(f"dual program for L_{k} ended {solution.status.value}.")
    return float(solution.objective)
