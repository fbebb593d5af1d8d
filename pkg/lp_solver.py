"""
lp_solver.py

Generic linear and mixed 0/1 programs and the reference engine that solves
them:

- LpModel / MipModel: immutable problem descriptions (dense numpy data)
- LpBuilder: incremental construction used by the model builders
- solve_lp: two-phase dense revised simplex (Dantzig pricing, Bland's rule
  once pivots turn degenerate, periodic refactorization of B^-1)
- solve_mip: depth-first branch-and-bound on LP relaxations, branching on the
  most fractional binary
- a line-oriented text format for models and solutions, and ExternalSolver,
  which hands that text to another program named by $MOMDP_COVER_SOLVER

Text format (one record per line, numbers in Python repr form):

    lp 1
    sense max|min
    var <j> <name> <lower> <upper>
    obj <j>:<coef> ...
    con <i> <=|>=|= <rhs> <j>:<coef> ...
    bin <j> <j> ...
    end

Solutions:

    status optimal|infeasible|unbounded
    objective <value>
    value <j> <value>
    end
"""

import logging
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from config import get_effective_settings
from momdp_core import DomainError, ResourceError

logger = logging.getLogger(__name__)

SENSES = ("<=", ">=", "=")


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverResourceError(ResourceError):
    """A solve ran out of iterations, nodes, time or binaries.

    `reason` is one of "iteration_limit", "node_limit", "time_limit",
    "binary_limit" or "numerical" so callers can tell a budget problem from
    infeasibility.
    """
    pass


class MalformedModelError(DomainError):
    pass


# -----------------------------------------------------------
# Models
# -----------------------------------------------------------

def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LpModel:
    """
    max/min c.x  s.t.  A x (sense) rhs,  lower <= x <= upper.

    `names`, `lower`, `upper` describe the variables; `matrix`, `senses`,
    `rhs` the constraints (one row each).
    """
    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    matrix: np.ndarray
    senses: tuple
    rhs: np.ndarray
    objective: np.ndarray
    maximize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "senses", tuple(self.senses))
        lower = _frozen(self.lower)
        upper = _frozen(self.upper)
        rhs = _frozen(self.rhs)
        objective = _frozen(self.objective)
        n = len(self.names)
        matrix = _frozen(np.asarray(self.matrix, dtype=float).reshape(-1, n) if n else
                         np.zeros((len(self.senses), 0)))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "matrix", matrix)

        if lower.shape != (n,) or upper.shape != (n,) or objective.shape != (n,):
            raise MalformedModelError("bounds and objective must have one entry per variable.")
        if matrix.shape != (len(self.senses), n) or rhs.shape != (len(self.senses),):
            raise MalformedModelError(f"constraint matrix {matrix.shape} does not match "
                                      f"{len(self.senses)} constraints x {n} variables.")
        if any(s not in SENSES for s in self.senses):
            raise MalformedModelError(f"constraint senses must be one of {SENSES}.")
        if np.any(lower > upper):
            j = int(np.argmax(lower > upper))
            raise MalformedModelError(f"variable '{self.names[j]}' has lower bound above upper bound.")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower == np.inf) \
                or np.any(upper == -np.inf):
            raise MalformedModelError("variable bounds must be ordered reals or infinities.")
        if not np.all(np.isfinite(rhs)) or not np.all(np.isfinite(matrix)) \
                or not np.all(np.isfinite(objective)):
            raise MalformedModelError("coefficients and right-hand sides must be finite.")

    @property
    def num_variables(self) -> int:
        return len(self.names)

    @property
    def num_constraints(self) -> int:
        return len(self.senses)

    @property
    def variables(self):
        """(name, lower, upper) per variable."""
        return [(name, float(lo), float(hi)) for name, lo, hi in zip(self.names, self.lower, self.upper)]

    @property
    def constraints(self):
        """(coefficients, sense, rhs) per constraint."""
        return [(row.tolist(), sense, float(b)) for row, sense, b in zip(self.matrix, self.senses, self.rhs)]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def with_bounds(self, index: int, lower: float, upper: float) -> "LpModel":
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        lo[index], hi[index] = lower, upper
        return replace(self, lower=lo, upper=hi)

    def with_objective(self, coefficients, maximize: bool = True) -> "LpModel":
        return replace(self, objective=np.asarray(coefficients, dtype=float), maximize=maximize)

    def max_violation(self, x) -> float:
        """Largest constraint or bound violation of point x."""
        x = np.asarray(x, dtype=float)
        activity = self.matrix @ x if self.num_constraints else np.zeros(0)
        worst = 0.0
        for value, sense, b in zip(activity, self.senses, self.rhs):
            if sense == "<=":
                worst = max(worst, value - b)
            elif sense == ">=":
                worst = max(worst, b - value)
            else:
                worst = max(worst, abs(value - b))
        if x.size:
            worst = max(worst, float(np.max(self.lower - x)), float(np.max(x - self.upper)))
        return float(worst)


@dataclass(frozen=True, eq=False)
class MipModel:
    """An LpModel whose `binary` variables are restricted to {0, 1}."""
    base: LpModel
    binary: tuple

    def __post_init__(self):
        binary = tuple(sorted(set(int(j) for j in self.binary)))
        object.__setattr__(self, "binary", binary)
        for j in binary:
            if not 0 <= j < self.base.num_variables:
                raise MalformedModelError(f"binary index {j} out of range.")
            if self.base.lower[j] < 0 or self.base.upper[j] > 1:
                raise MalformedModelError(f"binary variable '{self.base.names[j]}' has bounds outside [0, 1].")


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray = None
    objective: float = None
    iterations: int = 0
    nodes: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpBuilder:
    """
    Mutable accumulator for LpModel data.

    Constraints are given as {variable index: coefficient} dictionaries so the
    builders never have to know the final variable count.
    """

    def __init__(self):
        self.names = []
        self.lower = []
        self.upper = []
        self.rows = []
        self.senses = []
        self.rhs = []
        self.objective = {}
        self.maximize = True

    @classmethod
    def from_model(cls, model: LpModel) -> "LpBuilder":
        """Reopen a built model for extension."""
        builder = cls()
        builder.names = list(model.names)
        builder.lower = model.lower.tolist()
        builder.upper = model.upper.tolist()
        for row, sense, b in zip(model.matrix, model.senses, model.rhs):
            builder.rows.append({int(j): float(row[j]) for j in np.flatnonzero(row)})
            builder.senses.append(sense)
            builder.rhs.append(float(b))
        builder.objective = {int(j): float(model.objective[j]) for j in np.flatnonzero(model.objective)}
        builder.maximize = model.maximize
        return builder

    def add_variable(self, name: str, lower: float = 0.0, upper: float = np.inf) -> int:
        self.names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        return len(self.names) - 1

    def add_constraint(self, coefficients: dict, sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise MalformedModelError(f"unknown constraint sense '{sense}'.")
        self.rows.append(dict(coefficients))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def set_objective(self, coefficients: dict, maximize: bool = True):
        self.objective = dict(coefficients)
        self.maximize = maximize

    def build(self) -> LpModel:
        n = len(self.names)
        matrix = np.zeros((len(self.rows), n))
        for i, row in enumerate(self.rows):
            for j, coef in row.items():
                matrix[i, j] += coef
        c = np.zeros(n)
        for j, coef in self.objective.items():
            c[j] += coef
        return LpModel(self.names, self.lower, self.upper, matrix, self.senses, self.rhs,
                       c, self.maximize)


# -----------------------------------------------------------
# Standard form
# -----------------------------------------------------------

@dataclass
class _StandardForm:
    """min cost.y s.t. A y = b, y >= 0, with x = offset + transform @ y."""
    A: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    offset: np.ndarray
    transform: np.ndarray
    slack_rows: dict          # column -> row where it is a +1 slack
    constant: float


def _to_standard_form(model: LpModel) -> _StandardForm:
    n = model.num_variables
    columns = []               # (original var, sign) for structural columns
    offset = np.zeros(n)
    bound_rows = []            # (structural column, width) for finite [l, u]

    for j in range(n):
        lo, hi = model.lower[j], model.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            columns.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))

    transform = np.zeros((n, len(columns)))
    for k, (j, sign) in enumerate(columns):
        transform[j, k] = sign

    structural = model.matrix @ transform if model.num_constraints else np.zeros((0, len(columns)))
    shifted_rhs = model.rhs - (model.matrix @ offset if model.num_constraints else 0.0)

    row_blocks = []
    rhs = []
    senses = []
    for i in range(model.num_constraints):
        row_blocks.append(structural[i])
        rhs.append(shifted_rhs[i])
        senses.append(model.senses[i])
    for k, width in bound_rows:
        row = np.zeros(len(columns))
        row[k] = 1.0
        row_blocks.append(row)
        rhs.append(width)
        senses.append("<=")

    m = len(row_blocks)
    num_slacks = sum(1 for s in senses if s != "=")
    A = np.zeros((m, len(columns) + num_slacks))
    b = np.array(rhs, dtype=float)
    slack_rows = {}
    slack = len(columns)
    for i in range(m):
        A[i, :len(columns)] = row_blocks[i]
        if senses[i] == "<=":
            A[i, slack] = 1.0
            slack_rows[slack] = i
            slack += 1
        elif senses[i] == ">=":
            A[i, slack] = -1.0
            slack_rows[slack] = i
            slack += 1

    # nonnegative right-hand sides
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0

    c_model = model.objective if not model.maximize else -model.objective
    cost = np.zeros(A.shape[1])
    cost[:len(columns)] = transform.T @ c_model
    constant = float(c_model @ offset)
    full_transform = np.zeros((n, A.shape[1]))
    full_transform[:, :len(columns)] = transform
    return _StandardForm(A, b, cost, offset, full_transform, slack_rows, constant)


# -----------------------------------------------------------
# Revised simplex
# -----------------------------------------------------------

class _RevisedSimplex:
    """Dense revised simplex on min c.y, A y = b, y >= 0 with an explicit B^-1."""

    def __init__(self, A, b, settings, deadline=None):
        self.A = A
        self.b = b
        self.settings = settings
        self.deadline = deadline
        self.iterations = 0
        self.basis = None
        self.B_inv = None

    def _refactor(self):
        self.B_inv = np.linalg.inv(self.A[:, self.basis])

    def run(self, cost, allowed) -> str:
        """Optimize from the current basis; returns 'optimal' or 'unbounded'."""
        tol = self.settings["feasibility_tol"]
        pivot_tol = self.settings["pivot_tol"]
        refactor_every = self.settings["refactor_every"]
        streak_limit = self.settings["degenerate_streak"]
        max_iterations = self.settings["max_iterations"]

        bland = False
        degenerate_streak = 0
        since_refactor = 0
        m = self.A.shape[0]

        for _ in range(max_iterations):
            if self.deadline is not None and time.monotonic() > self.deadline:
                raise SolverResourceError("LP solve exceeded the time limit.", reason="time_limit")
            x_basic = self.B_inv @ self.b
            duals = cost[self.basis] @ self.B_inv
            reduced = cost - duals @ self.A
            reduced[~allowed] = 0.0
            reduced[self.basis] = 0.0

            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return "optimal"
            entering = int(candidates[0]) if bland else int(candidates[np.argmin(reduced[candidates])])

            direction = self.B_inv @ self.A[:, entering]
            positive = np.flatnonzero(direction > pivot_tol)
            if positive.size == 0:
                return "unbounded"
            ratios = np.maximum(x_basic[positive], 0.0) / direction[positive]
            best = ratios.min()
            ties = positive[ratios <= best + 1e-12]
            # smallest basic variable index among ties (Bland); deterministic either way
            leaving_pos = int(ties[np.argmin(np.asarray(self.basis)[ties])])

            if best <= 1e-12:
                degenerate_streak += 1
                if degenerate_streak >= streak_limit and not bland:
                    logger.debug(f"simplex: {degenerate_streak} degenerate pivots, switching to Bland's rule")
                    bland = True
            else:
                degenerate_streak = 0

            # product-form update of B^-1
            pivot = direction[leaving_pos]
            self.B_inv[leaving_pos] /= pivot
            for i in range(m):
                if i != leaving_pos and direction[i] != 0.0:
                    self.B_inv[i] -= direction[i] * self.B_inv[leaving_pos]
            self.basis[leaving_pos] = entering
            self.iterations += 1
            since_refactor += 1
            if since_refactor >= refactor_every:
                self._refactor()
                since_refactor = 0

        raise SolverResourceError(f"simplex exceeded {max_iterations} pivots.", reason="iteration_limit")


def _solve_reference(model: LpModel, settings: dict, deadline=None) -> LpSolution:
    form = _to_standard_form(model)
    m, n_std = form.A.shape
    tol = settings["feasibility_tol"]

    if m == 0:
        # only bounds: every structural column can move freely on its own
        if np.any(form.cost < -tol):
            return LpSolution(LpStatus.UNBOUNDED)
        x = form.offset.copy()
        return _finish(model, _snap_to_bounds(model, x, settings), 0)

    # initial basis: +1 slacks where available, artificials elsewhere
    basis = [None] * m
    for column, row in form.slack_rows.items():
        if form.A[row, column] == 1.0 and basis[row] is None:
            basis[row] = column
    missing = [i for i in range(m) if basis[i] is None]
    A = form.A
    if missing:
        artificial = np.zeros((m, len(missing)))
        for k, i in enumerate(missing):
            artificial[i, k] = 1.0
            basis[i] = n_std + k
        A = np.hstack([form.A, artificial])
    num_total = A.shape[1]
    is_artificial = np.zeros(num_total, dtype=bool)
    is_artificial[n_std:] = True

    engine = _RevisedSimplex(A, form.b, settings, deadline)
    engine.basis = basis
    engine._refactor()

    if missing:
        phase_one_cost = is_artificial.astype(float)
        engine.run(phase_one_cost, np.ones(num_total, dtype=bool))
        y = np.zeros(num_total)
        y[engine.basis] = engine.B_inv @ form.b
        infeasibility = float(y[is_artificial].sum())
        if infeasibility > tol:
            logger.debug(f"simplex: phase 1 ended with infeasibility {infeasibility:.3e}")
            return LpSolution(LpStatus.INFEASIBLE, iterations=engine.iterations)
        _drive_out_artificials(engine, is_artificial, settings)

    cost = np.zeros(num_total)
    cost[:n_std] = form.cost
    if engine.run(cost, ~is_artificial) == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=engine.iterations)

    x = _basic_point(engine, form, model, settings)
    violation = model.max_violation(x)
    if violation > tol:
        # drift of the product-form updates: restart phase 2 from a fresh B^-1
        logger.warning(f"simplex: optimal point violates constraints by {violation:.3e}, re-solving")
        engine._refactor()
        if engine.run(cost, ~is_artificial) == "unbounded":
            return LpSolution(LpStatus.UNBOUNDED, iterations=engine.iterations)
        x = _basic_point(engine, form, model, settings)
        violation = model.max_violation(x)
        if violation > tol:
            raise SolverResourceError(f"simplex point violates constraints by {violation:.3e} "
                                      f"after refactoring (tolerance {tol:.1e}).", reason="numerical")
    return _finish(model, x, engine.iterations)


def _basic_point(engine: _RevisedSimplex, form: _StandardForm, model: LpModel, settings) -> np.ndarray:
    """Model-space point of the current basis, snapped onto nearby bounds."""
    engine._refactor()
    y = np.zeros(engine.A.shape[1])
    y[engine.basis] = engine.B_inv @ form.b
    y = np.clip(y[:form.A.shape[1]], 0.0, None)
    return _snap_to_bounds(model, form.offset + form.transform @ y, settings)


def _drive_out_artificials(engine: _RevisedSimplex, is_artificial, settings):
    """Pivot zero-level artificials out of the basis; rows where that fails are redundant."""
    pivot_tol = settings["pivot_tol"]
    for position in range(len(engine.basis)):
        if not is_artificial[engine.basis[position]]:
            continue
        row = engine.B_inv[position] @ engine.A
        row[is_artificial] = 0.0
        row[engine.basis] = 0.0
        usable = np.flatnonzero(np.abs(row) > pivot_tol)
        if usable.size == 0:
            logger.debug(f"simplex: constraint row {position} is redundant, artificial stays basic at zero")
            continue
        engine.basis[position] = int(usable[0])
        engine._refactor()


def _snap_to_bounds(model: LpModel, x, settings) -> np.ndarray:
    bound_tol = settings["bound_tol"]
    # snap values within bound_tol of a bound onto it
    x = np.where(np.abs(x - model.lower) <= bound_tol, model.lower, x)
    x = np.where(np.abs(x - model.upper) <= bound_tol, model.upper, x)
    return np.clip(x, model.lower, model.upper)


def _finish(model: LpModel, x, iterations) -> LpSolution:
    objective = float(model.objective @ x)
    return LpSolution(LpStatus.OPTIMAL, x=_frozen(x), objective=objective, iterations=iterations)


# -----------------------------------------------------------
# Public entry points
# -----------------------------------------------------------

def solve_lp(model: LpModel, settings: dict = None, deadline: float = None) -> LpSolution:
    """
    Solve an LpModel with the reference engine, or with the external solver
    when settings["external_command"] is set.
    """
    settings = settings or get_effective_settings("solver")
    if not isinstance(model, LpModel):
        raise MalformedModelError(f"solve_lp expects an LpModel, got {type(model).__name__}.")
    if settings.get("external_command"):
        return ExternalSolver(settings["external_command"]).solve(model)
    if deadline is None and settings.get("time_limit_seconds"):
        deadline = time.monotonic() + settings["time_limit_seconds"]
    return _solve_reference(model, settings, deadline)


def _is_integral(x, binary, tol) -> bool:
    values = x[list(binary)]
    return bool(np.all(np.minimum(np.abs(values), np.abs(values - 1.0)) <= tol))


def solve_mip(model: MipModel, settings: dict = None) -> LpSolution:
    """
    Depth-first branch-and-bound over the binaries of `model`.

    Branches on the most fractional binary (lowest index on ties), explores the
    child nearer to the relaxation value first, and prunes nodes whose bound is
    within objective_gap of the incumbent. Integral incumbents are re-solved
    with their binaries fixed so they are exactly integral and LP-feasible.
    """
    settings = settings or get_effective_settings("solver")
    if not isinstance(model, MipModel):
        raise MalformedModelError(f"solve_mip expects a MipModel, got {type(model).__name__}.")
    if len(model.binary) > settings["max_binaries"]:
        raise SolverResourceError(f"{len(model.binary)} binaries exceed the limit of "
                                  f"{settings['max_binaries']}.", reason="binary_limit")
    if not model.binary:
        return solve_lp(model.base, settings)

    deadline = None
    if settings.get("time_limit_seconds"):
        deadline = time.monotonic() + settings["time_limit_seconds"]
    sign = 1.0 if model.base.maximize else -1.0
    gap = settings["objective_gap"]
    int_tol = settings["integrality_tol"]

    incumbent = None
    nodes = 0
    iterations = 0
    stack = [model.base]
    while stack:
        node = stack.pop()
        nodes += 1
        if nodes > settings["max_nodes"]:
            raise SolverResourceError(f"branch-and-bound exceeded {settings['max_nodes']} nodes.",
                                      reason="node_limit")
        relaxation = solve_lp(node, settings, deadline)
        iterations += relaxation.iterations
        if relaxation.status is LpStatus.UNBOUNDED:
            if incumbent is None and nodes == 1:
                return LpSolution(LpStatus.UNBOUNDED, iterations=iterations, nodes=nodes)
            continue
        if relaxation.status is LpStatus.INFEASIBLE:
            continue
        bound = sign * relaxation.objective
        if incumbent is not None and bound <= sign * incumbent.objective + gap:
            continue

        x = relaxation.x
        if _is_integral(x, model.binary, int_tol):
            fixed = node
            for j in model.binary:
                v = float(round(x[j]))
                fixed = fixed.with_bounds(j, v, v)
            exact = solve_lp(fixed, settings, deadline)
            iterations += exact.iterations
            if exact.is_optimal and (incumbent is None or sign * exact.objective > sign * incumbent.objective):
                incumbent = exact
                logger.debug(f"branch-and-bound: incumbent {exact.objective:.9g} at node {nodes}")
            continue

        fractional = np.array([min(x[j], 1.0 - x[j]) for j in model.binary])
        pick = model.binary[int(np.argmax(fractional))]
        down = node.with_bounds(pick, 0.0, 0.0)
        up = node.with_bounds(pick, 1.0, 1.0)
        # the child nearer the relaxation value is popped first
        if x[pick] >= 0.5:
            stack.extend([down, up])
        else:
            stack.extend([up, down])

    if incumbent is None:
        return LpSolution(LpStatus.INFEASIBLE, iterations=iterations, nodes=nodes)
    logger.debug(f"branch-and-bound: {nodes} nodes, objective {incumbent.objective:.9g}")
    return replace(incumbent, iterations=iterations, nodes=nodes)


# -----------------------------------------------------------
# Text serialization and external adapter
# -----------------------------------------------------------

def write_model_text(model) -> str:
    """Serialize an LpModel or MipModel to the line format described above."""
    base = model.base if isinstance(model, MipModel) else model
    lines = ["lp 1", f"sense {'max' if base.maximize else 'min'}"]
    for j, (name, lo, hi) in enumerate(base.variables):
        if not name or any(ch.isspace() for ch in name):
            raise MalformedModelError(f"variable name {name!r} cannot be serialized.")
        lines.append(f"var {j} {name} {lo!r} {hi!r}")
    terms = " ".join(f"{j}:{float(c)!r}" for j, c in enumerate(base.objective) if c != 0.0)
    lines.append(f"obj {terms}".rstrip())
    for i, (row, sense, b) in enumerate(zip(base.matrix, base.senses, base.rhs)):
        terms = " ".join(f"{j}:{float(c)!r}" for j, c in enumerate(row) if c != 0.0)
        lines.append(f"con {i} {sense} {float(b)!r} {terms}".rstrip())
    if isinstance(model, MipModel) and model.binary:
        lines.append("bin " + " ".join(str(j) for j in model.binary))
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_terms(tokens, n, line_no):
    coefficients = np.zeros(n)
    for token in tokens:
        try:
            j, c = token.split(":")
            coefficients[int(j)] += float(c)
        except (ValueError, IndexError) as e:
            raise MalformedModelError(f"line {line_no}: bad term '{token}' ({e}).")
    return coefficients


def parse_model_text(text: str):
    """Inverse of write_model_text; returns an LpModel or a MipModel."""
    names, lower, upper, rows, senses, rhs = [], [], [], [], [], []
    objective_tokens, binary = [], []
    maximize = True
    ended = False
    raw_rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        key = tokens[0]
        try:
            if key == "lp":
                continue
            if key == "sense":
                maximize = tokens[1] == "max"
            elif key == "var":
                names.append(tokens[2])
                lower.append(float(tokens[3]))
                upper.append(float(tokens[4]))
            elif key == "obj":
                objective_tokens = tokens[1:]
            elif key == "con":
                senses.append(tokens[2])
                rhs.append(float(tokens[3]))
                raw_rows.append((tokens[4:], line_no))
            elif key == "bin":
                binary = [int(t) for t in tokens[1:]]
            elif key == "end":
                ended = True
                break
            else:
                raise MalformedModelError(f"line {line_no}: unknown record '{key}'.")
        except (IndexError, ValueError) as e:
            raise MalformedModelError(f"line {line_no}: malformed '{key}' record ({e}).")
    if not ended:
        raise MalformedModelError("model text is truncated (no 'end' record).")
    n = len(names)
    for tokens, line_no in raw_rows:
        rows.append(_parse_terms(tokens, n, line_no))
    model = LpModel(names, lower, upper, np.array(rows).reshape(len(rows), n), senses, rhs,
                    _parse_terms(objective_tokens, n, 0), maximize)
    return MipModel(model, binary) if binary else model


def write_solution_text(solution: LpSolution) -> str:
    lines = [f"status {solution.status.value}"]
    if solution.is_optimal:
        lines.append(f"objective {float(solution.objective)!r}")
        for j, v in enumerate(solution.x):
            lines.append(f"value {j} {float(v)!r}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_solution_text(text: str, model: LpModel) -> LpSolution:
    status = None
    objective = None
    x = np.zeros(model.num_variables)
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            if tokens[0] == "status":
                status = LpStatus(tokens[1])
            elif tokens[0] == "objective":
                objective = float(tokens[1])
            elif tokens[0] == "value":
                x[int(tokens[1])] = float(tokens[2])
            elif tokens[0] == "end":
                break
        except (IndexError, ValueError) as e:
            raise MalformedModelError(f"solution line {line_no}: {e}")
    if status is None:
        raise MalformedModelError("solution text has no status record.")
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status)
    if objective is None:
        objective = float(model.objective @ x)
    return LpSolution(status, x=_frozen(x), objective=objective)


class ExternalSolver:
    """
    Runs `<command> <model file> <solution file>` and parses the solution file.

    The command must understand the text formats of this module.
    """

    def __init__(self, command: str, timeout: float = None):
        self.command = command
        self.timeout = timeout

    def solve(self, model) -> LpSolution:
        base = model.base if isinstance(model, MipModel) else model
        with tempfile.TemporaryDirectory(prefix="momdp-lp-") as workdir:
            model_path = os.path.join(workdir, "model.lp.txt")
            solution_path = os.path.join(workdir, "solution.txt")
            with open(model_path, "w", encoding="utf-8") as fh:
                fh.write(write_model_text(model))
            try:
                subprocess.run([self.command, model_path, solution_path], check=True,
                               capture_output=True, timeout=self.timeout)
            except subprocess.TimeoutExpired:
                raise SolverResourceError(f"external solver '{self.command}' timed out.", reason="time_limit")
            except (OSError, subprocess.CalledProcessError) as e:
                raise RuntimeError(f"external solver '{self.command}' failed: {e}")
            with open(solution_path, encoding="utf-8") as fh:
                return parse_solution_text(fh.read(), base)
