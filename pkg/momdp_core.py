"""
momdp_core.py

Domain types for discounted multiobjective MDPs and the dominance relations
used throughout the toolkit:

- Momdp, Policy, OccupationMeasure (immutable, numpy-backed)
- Lorenz transformation, Pareto / Lorenz / epsilon dominance
- Pareto and Lorenz nondominated filters
- Pigou-Dalton transfers
- exact policy evaluation and the occupation-measure <-> policy mapping

Value vectors are 1-D float arrays; sets of value vectors are 2-D arrays with
one vector per row. Lorenz dominance is only defined on nonnegative vectors,
negative components are rejected.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from config import (
    PROBABILITY_TOL,
    FLOW_TOL,
    ZERO_MASS_TOL,
    get_effective_settings,
)

logger = logging.getLogger(__name__)


# -----------------------------------------------------------
# Errors
# -----------------------------------------------------------

class DomainError(ValueError):
    """Raised for inputs outside the domain of an operation."""
    pass


class ResourceError(RuntimeError):
    """Raised when a configured budget (nodes, iterations, enumeration size...) runs out."""

    def __init__(self, message: str, reason: str = "limit"):
        super().__init__(message)
        self.reason = reason


class Space(str, Enum):
    """Objective space a cover lives in."""
    PARETO = "pareto"
    LORENZ = "lorenz"


def _readonly(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def as_value_vector(v) -> np.ndarray:
    """Coerce to a 1-D float array and reject negative components."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"Value vector must be one-dimensional, got shape {arr.shape}.")
    if np.any(arr < 0):
        raise DomainError(f"Value vector has negative components: {arr.tolist()}. "
                          f"Lorenz dominance is only defined on nonnegative vectors.")
    return arr


def _pair(v, w):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != w.shape:
        raise DomainError(f"Length mismatch: {v.shape} vs {w.shape}.")
    return v, w


# -----------------------------------------------------------
# Model
# -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Momdp:
    """
    A discounted multiobjective MDP.

    Attributes:
        transition: p(s,a,s'), shape (S, A, S).
        reward: r(s,a) in R^n_+, shape (S, A, n).
        discount: gamma in (0, 1).
        initial_dist: mu_s, shape (S,).
        name: optional label carried into instance files and reports.
        seed: optional generator seed carried into instance files.
    """
    transition: np.ndarray
    reward: np.ndarray
    discount: float
    initial_dist: np.ndarray
    name: str = ""
    seed: int = None

    def __post_init__(self):
        p = _readonly(self.transition)
        r = _readonly(self.reward)
        mu = _readonly(self.initial_dist)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "initial_dist", mu)
        object.__setattr__(self, "discount", float(self.discount))

        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise DomainError(f"transition must have shape (S, A, S), got {p.shape}.")
        num_states, num_actions = p.shape[0], p.shape[1]
        if num_states < 1 or num_actions < 1:
            raise DomainError("num_states and num_actions must be positive.")
        if r.ndim != 3 or r.shape[:2] != (num_states, num_actions):
            raise DomainError(f"reward must have shape ({num_states}, {num_actions}, n), got {r.shape}.")
        if r.shape[2] < 2:
            raise DomainError(f"num_objectives must be at least 2, got {r.shape[2]}.")
        if mu.shape != (num_states,):
            raise DomainError(f"initial_dist must have shape ({num_states},), got {mu.shape}.")

        if np.any(p < 0):
            raise DomainError("transition probabilities must be nonnegative.")
        row_sums = p.sum(axis=2)
        if np.any(np.abs(row_sums - 1.0) > PROBABILITY_TOL):
            s, a = np.argwhere(np.abs(row_sums - 1.0) > PROBABILITY_TOL)[0]
            raise DomainError(f"transition row (s={s}, a={a}) sums to {row_sums[s, a]!r}, not 1.")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > PROBABILITY_TOL:
            raise DomainError(f"initial_dist must be a probability vector (sum={mu.sum()!r}).")
        if np.any(r < 0):
            raise DomainError("reward components must be nonnegative.")
        if not np.all(np.isfinite(r)):
            raise DomainError("reward components must be finite.")
        if not 0.0 < self.discount < 1.0:
            raise DomainError(f"discount must lie in (0, 1), got {self.discount!r}.")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def num_objectives(self) -> int:
        return self.reward.shape[2]

    def value_bound(self) -> float:
        """Upper bound K on every achievable value component: max r / (1 - gamma)."""
        return float(self.reward.max()) / (1.0 - self.discount)


@dataclass(frozen=True, eq=False)
class Policy:
    """
    A stationary policy as a (S, A) matrix of action probabilities.

    Deterministic policies are the {0,1} special case and keep `actions`.
    """
    probabilities: np.ndarray
    deterministic: bool = False

    def __post_init__(self):
        probs = _readonly(self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if probs.ndim != 2:
            raise DomainError(f"policy must have shape (S, A), got {probs.shape}.")
        if np.any(probs < -PROBABILITY_TOL):
            raise DomainError("policy probabilities must be nonnegative.")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > PROBABILITY_TOL):
            raise DomainError("policy rows must sum to 1.")
        if self.deterministic and not np.all((probs == 0.0) | (probs == 1.0)):
            raise DomainError("a deterministic policy must be a 0/1 matrix.")

    @classmethod
    def from_actions(cls, actions, num_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        if np.any(actions < 0) or np.any(actions >= num_actions):
            raise DomainError(f"actions must lie in [0, {num_actions}).")
        probs = np.zeros((actions.size, num_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs, deterministic=True)

    @classmethod
    def randomized(cls, probabilities) -> "Policy":
        return cls(probabilities, deterministic=False)

    @property
    def actions(self) -> np.ndarray:
        """Most likely action per state (the action itself for deterministic policies)."""
        return np.argmax(self.probabilities, axis=1)

    def describe(self) -> str:
        """Compact text form used in report tables."""
        if self.deterministic:
            return "d:" + ",".join(str(a) for a in self.actions)
        rows = []
        for row in self.probabilities:
            rows.append("|".join(f"{p:.6g}" for p in row))
        return "r:" + ";".join(rows)


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    """LP variables x_sa with the discount and initial distribution they refer to."""
    x: np.ndarray
    discount: float
    initial_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "initial_dist", _readonly(self.initial_dist))
        if self.x.ndim != 2:
            raise DomainError(f"occupation measure must have shape (S, A), got {self.x.shape}.")
        if np.any(self.x < 0):
            raise DomainError("occupation measure must be nonnegative.")

    def flow_residual(self, m: Momdp) -> np.ndarray:
        """|sum_a x_sa - gamma sum_{s',a} x_s'a p(s',a,s) - mu_s| per state."""
        inflow = np.einsum("ja,jas->s", self.x, m.transition)
        return np.abs(self.x.sum(axis=1) - self.discount * inflow - self.initial_dist)

    def satisfies_flow(self, m: Momdp, tol: float = FLOW_TOL) -> bool:
        return bool(np.all(self.flow_residual(m) <= tol))

    def total_mass(self) -> float:
        return float(self.x.sum())


# -----------------------------------------------------------
# Lorenz transformation and dominance
# -----------------------------------------------------------

def lorenz_vector(v) -> np.ndarray:
    """
    Lorenz vector of v: k-th component is the sum of the k smallest components.

    >>> lorenz_vector([14, 6]).tolist()
    [6.0, 20.0]
    """
    v = as_value_vector(v)
    return np.cumsum(np.sort(v))


def lorenz_matrix(values) -> np.ndarray:
    """Row-wise Lorenz vectors of a (m, n) array."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DomainError(f"expected a (m, n) array of value vectors, got shape {values.shape}.")
    if np.any(values < 0):
        raise DomainError("value vectors must be nonnegative.")
    return np.cumsum(np.sort(values, axis=1), axis=1)


def pareto_dominates(v, w, strict: bool = True) -> bool:
    """Weak: v_i >= w_i for all i. Strict: weak and some v_i > w_i."""
    v, w = _pair(v, w)
    weak = bool(np.all(v >= w))
    if not strict:
        return weak
    return weak and bool(np.any(v > w))


def eps_pareto_dominates(v, w, epsilon: float) -> bool:
    """(1 + eps) v_i >= w_i for all i."""
    if epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon!r}.")
    v, w = _pair(v, w)
    return bool(np.all((1.0 + epsilon) * v >= w))


def lorenz_dominates(v, w, strict: bool = True) -> bool:
    v, w = _pair(v, w)
    return pareto_dominates(lorenz_vector(v), lorenz_vector(w), strict=strict)


def eps_lorenz_dominates(v, w, epsilon: float) -> bool:
    v, w = _pair(v, w)
    return eps_pareto_dominates(lorenz_vector(v), lorenz_vector(w), epsilon)


def space_image(values, space: Space) -> np.ndarray:
    """The coordinates a set of vectors is compared on: itself, or its Lorenz vectors."""
    values = np.asarray(values, dtype=float)
    if Space(space) is Space.LORENZ:
        return lorenz_matrix(values)
    return values


# -----------------------------------------------------------
# Nondominated filters
# -----------------------------------------------------------

def nondominated_mask(points) -> np.ndarray:
    """
    Boolean mask of the strictly Pareto-nondominated rows of `points`.

    Equal rows do not dominate each other, so duplicates are all kept.
    Two objectives use a sort-and-sweep; more objectives compare all pairs.
    """
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    if m == 0:
        return np.zeros(0, dtype=bool)
    if pts.shape[1] == 2:
        return _nondominated_mask_2d(pts)

    mask = np.ones(m, dtype=bool)
    for i in range(m):
        geq = np.all(pts >= pts[i], axis=1)
        gt = np.any(pts > pts[i], axis=1)
        if np.any(geq & gt):
            mask[i] = False
    return mask


def _nondominated_mask_2d(pts: np.ndarray) -> np.ndarray:
    # Sweep by decreasing first coordinate; among equal first coordinates the
    # largest second coordinate comes first.
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    mask = np.zeros(pts.shape[0], dtype=bool)
    best_second = -np.inf
    i = 0
    while i < order.size:
        j = i
        first = pts[order[i], 0]
        while j < order.size and pts[order[j], 0] == first:
            j += 1
        group = order[i:j]
        top = pts[group[0], 1]
        if top > best_second:
            # rows tied with the group's best survive, lower ones are dominated
            keep = group[pts[group, 1] == top]
            mask[keep] = True
            best_second = top
        i = j
    return mask


def pnd_filter(values) -> np.ndarray:
    """Pareto-nondominated subset (rows) of a finite set of value vectors."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.reshape(0, values.shape[1] if values.ndim == 2 else 0)
    return values[nondominated_mask(values)]


def lnd_filter(values) -> np.ndarray:
    """Lorenz-nondominated subset (rows) of a finite set of value vectors."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.reshape(0, values.shape[1] if values.ndim == 2 else 0)
    return values[nondominated_mask(lorenz_matrix(values))]


def nondominated_filter(values, space: Space) -> np.ndarray:
    return lnd_filter(values) if Space(space) is Space.LORENZ else pnd_filter(values)


def pigou_dalton_transfer(v, i: int, j: int, amount: float) -> np.ndarray:
    """
    Move `amount` from component i to component j (0-based indices).

    Requires v_i > v_j and 0 < amount <= v_i - v_j; the sum is preserved.
    """
    v = as_value_vector(v)
    if not (0 <= i < v.size and 0 <= j < v.size) or i == j:
        raise DomainError(f"invalid transfer indices ({i}, {j}) for a vector of length {v.size}.")
    if v[i] <= v[j]:
        raise DomainError(f"transfer requires v[{i}] > v[{j}], got {v[i]!r} <= {v[j]!r}.")
    if not 0.0 < amount <= v[i] - v[j]:
        raise DomainError(f"transfer amount must lie in (0, {v[i] - v[j]!r}], got {amount!r}.")
    out = v.copy()
    out[i] -= amount
    out[j] += amount
    return out


# -----------------------------------------------------------
# Policy evaluation
# -----------------------------------------------------------

def _policy_matrices(m: Momdp, policy: Policy):
    probs = policy.probabilities
    if probs.shape != (m.num_states, m.num_actions):
        raise DomainError(f"policy shape {probs.shape} does not match the MDP "
                          f"({m.num_states}, {m.num_actions}).")
    p_pi = np.einsum("sa,sat->st", probs, m.transition)
    r_pi = np.einsum("sa,san->sn", probs, m.reward)
    return p_pi, r_pi


def evaluate_policy(m: Momdp, policy: Policy, settings: dict = None) -> np.ndarray:
    """
    Per-state value table V (shape (S, n)) solving V = r_pi + gamma P_pi V.

    Dense linear solve up to `direct_solve_max_states` states, fixed-point
    iteration (stopping on a sup-norm change <= fixed_point_tol) above.
    """
    settings = settings or get_effective_settings("evaluation")
    p_pi, r_pi = _policy_matrices(m, policy)
    gamma = m.discount

    if m.num_states <= settings["direct_solve_max_states"]:
        return np.linalg.solve(np.eye(m.num_states) - gamma * p_pi, r_pi)

    values = np.zeros_like(r_pi)
    for sweep in range(settings["fixed_point_max_sweeps"]):
        updated = r_pi + gamma * p_pi @ values
        change = np.max(np.abs(updated - values))
        values = updated
        if change <= settings["fixed_point_tol"]:
            logger.debug(f"evaluate_policy: fixed point reached after {sweep + 1} sweeps")
            return values
    raise ResourceError("policy evaluation did not converge within the sweep budget.",
                        reason="iteration_limit")


def policy_value(m: Momdp, policy: Policy) -> np.ndarray:
    """Value vector sum_s mu_s V(s) of a policy."""
    return m.initial_dist @ evaluate_policy(m, policy)


def policy_occupation(m: Momdp, policy: Policy) -> OccupationMeasure:
    """Exact occupation measure of a policy: d = (I - gamma P_pi^T)^-1 mu, x_sa = d_s pi(s,a)."""
    p_pi, _ = _policy_matrices(m, policy)
    state_mass = np.linalg.solve(np.eye(m.num_states) - m.discount * p_pi.T, m.initial_dist)
    state_mass = np.clip(state_mass, 0.0, None)
    return OccupationMeasure(state_mass[:, None] * policy.probabilities, m.discount, m.initial_dist)


def occupation_to_policy(occupation: OccupationMeasure) -> Policy:
    """
    pi(s,a) = x_sa / sum_a x_sa.

    States whose mass is below ZERO_MASS_TOL get the lowest-indexed action;
    they are unreachable under mu so the choice does not change the value.
    The result is flagged deterministic when every row is one-hot.
    """
    x = np.asarray(occupation.x, dtype=float)
    mass = x.sum(axis=1)
    probs = np.zeros_like(x)
    reached = mass > ZERO_MASS_TOL
    probs[reached] = x[reached] / mass[reached, None]
    if np.any(~reached):
        logger.debug(f"occupation_to_policy: {int(np.sum(~reached))} zero-mass states default to action 0")
        probs[~reached, 0] = 1.0
    is_one_hot = bool(np.all((probs == 0.0) | (probs == 1.0)))
    return Policy(probs, deterministic=is_one_hot)


def occupation_value(m: Momdp, occupation: OccupationMeasure) -> np.ndarray:
    """z_i = sum_{s,a} r_i(s,a) x_sa."""
    x = np.asarray(occupation.x, dtype=float)
    if x.shape != (m.num_states, m.num_actions):
        raise DomainError(f"occupation shape {x.shape} does not match the MDP "
                          f"({m.num_states}, {m.num_actions}).")
    return np.einsum("sa,san->n", x, m.reward)
