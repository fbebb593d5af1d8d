"""
instance_io.py

MOMDP instance files, the seeded random generator and the builtin examples.

Instance file (one record per line, floats in Python repr form, '#' comments):

    momdp 1
    name <text>                      (optional)
    seed <int>                       (optional)
    states <S>
    actions <A>
    objectives <n>
    discount <gamma>
    initial <mu_0> ... <mu_{S-1}>
    reward <s> <a> <r_1> ... <r_n>               one per (s, a)
    transition <s> <a> <s'>:<p> <s'>:<p> ...     one per (s, a), nonzero entries
    end
"""

import logging
import os
from dataclasses import dataclass

import numpy as np

from config import get_effective_settings
from momdp_core import DomainError, Momdp
from oracle import example1_values, example2_values

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
BUILTIN_PREFIX = "builtin:"


class InstanceParser:
    """
    Parses instance files into Momdp objects.

    Syntax problems raise ParseError (with line number and field); files that
    parse but describe an invalid MDP raise ValidationError.
    """

    class ParseError(DomainError):
        def __init__(self, line: int, field: str, message: str):
            super().__init__(f"line {line}, field '{field}': {message}")
            self.line = line
            self.field = field

    class ValidationError(DomainError):
        """The file parsed but violates an MDP invariant."""
        pass

    _HEADER_FIELDS = ("states", "actions", "objectives", "discount", "initial")

    def __init__(self):
        self.header = {}
        self.rewards = {}
        self.transitions = {}

    def _number(self, token: str, line: int, field: str, kind=float):
        try:
            return kind(token)
        except ValueError:
            raise self.ParseError(line, field, f"'{token}' is not a valid {kind.__name__}.")

    def _state_action(self, tokens, line: int, field: str):
        if len(tokens) < 3:
            raise self.ParseError(line, field, "expected a state and an action index.")
        s = self._number(tokens[1], line, field, int)
        a = self._number(tokens[2], line, field, int)
        S, A = self.header.get("states"), self.header.get("actions")
        if S is None or A is None:
            raise self.ParseError(line, field, "'states' and 'actions' must come first.")
        if not (0 <= s < S and 0 <= a < A):
            raise self.ParseError(line, field, f"state/action ({s}, {a}) out of range.")
        if (s, a) in (self.rewards if field == "reward" else self.transitions):
            raise self.ParseError(line, field, f"duplicate record for ({s}, {a}).")
        return s, a

    def parse(self, text: str) -> Momdp:
        ended = False
        seen_magic = False
        last_line = 0
        for line_no, raw in enumerate(text.splitlines(), start=1):
            last_line = line_no
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            key = tokens[0]
            if not seen_magic:
                if key != "momdp" or len(tokens) != 2:
                    raise self.ParseError(line_no, "momdp", "file must start with 'momdp <version>'.")
                version = self._number(tokens[1], line_no, "momdp", int)
                if version != FORMAT_VERSION:
                    raise self.ParseError(line_no, "momdp", f"unsupported format version {version}.")
                seen_magic = True
                continue

            if key == "end":
                ended = True
                break
            elif key == "name":
                self.header["name"] = line[len("name"):].strip()
            elif key == "seed":
                self.header["seed"] = self._number(tokens[1] if len(tokens) > 1 else "", line_no, "seed", int)
            elif key in ("states", "actions", "objectives"):
                if len(tokens) != 2:
                    raise self.ParseError(line_no, key, "expected a single integer.")
                value = self._number(tokens[1], line_no, key, int)
                if value < 1:
                    raise self.ParseError(line_no, key, "must be positive.")
                self.header[key] = value
            elif key == "discount":
                if len(tokens) != 2:
                    raise self.ParseError(line_no, key, "expected a single number.")
                self.header[key] = self._number(tokens[1], line_no, key)
            elif key == "initial":
                self.header[key] = [self._number(t, line_no, key) for t in tokens[1:]]
            elif key == "reward":
                s, a = self._state_action(tokens, line_no, key)
                self.rewards[(s, a)] = [self._number(t, line_no, key) for t in tokens[3:]]
            elif key == "transition":
                s, a = self._state_action(tokens, line_no, key)
                row = {}
                for token in tokens[3:]:
                    if ":" not in token:
                        raise self.ParseError(line_no, key, f"'{token}' is not '<state>:<probability>'.")
                    target, prob = token.split(":", 1)
                    row[self._number(target, line_no, key, int)] = self._number(prob, line_no, key)
                self.transitions[(s, a)] = row
            else:
                raise self.ParseError(line_no, key, "unknown record.")

        if not seen_magic:
            raise self.ParseError(last_line, "momdp", "empty instance file.")
        if not ended:
            raise self.ParseError(last_line, "end", "file is truncated (no 'end' record).")
        missing = [f for f in self._HEADER_FIELDS if f not in self.header]
        if missing:
            raise self.ParseError(last_line, missing[0], "required field is missing.")
        return self._build()

    def _build(self) -> Momdp:
        S, A, n = self.header["states"], self.header["actions"], self.header["objectives"]
        if len(self.header["initial"]) != S:
            raise self.ValidationError(f"initial distribution has {len(self.header['initial'])} "
                                       f"entries for {S} states.")
        reward = np.zeros((S, A, n))
        transition = np.zeros((S, A, S))
        for s in range(S):
            for a in range(A):
                if (s, a) not in self.rewards:
                    raise self.ValidationError(f"missing reward for state {s}, action {a}.")
                if (s, a) not in self.transitions:
                    raise self.ValidationError(f"missing transition for state {s}, action {a}.")
                if len(self.rewards[(s, a)]) != n:
                    raise self.ValidationError(f"reward for ({s}, {a}) has {len(self.rewards[(s, a)])} "
                                               f"components, expected {n}.")
                reward[s, a] = self.rewards[(s, a)]
                for target, prob in self.transitions[(s, a)].items():
                    if not 0 <= target < S:
                        raise self.ValidationError(f"transition ({s}, {a}) leads to unknown state {target}.")
                    transition[s, a, target] = prob
        try:
            return Momdp(transition, reward, self.header["discount"], self.header["initial"],
                         name=self.header.get("name", ""), seed=self.header.get("seed"))
        except DomainError as e:
            raise self.ValidationError(str(e)) from e


def parse_instance(text: str) -> Momdp:
    return InstanceParser().parse(text)


def write_instance(m: Momdp) -> str:
    lines = [f"momdp {FORMAT_VERSION}"]
    if m.name:
        lines.append(f"name {m.name}")
    if m.seed is not None:
        lines.append(f"seed {int(m.seed)}")
    lines.append(f"states {m.num_states}")
    lines.append(f"actions {m.num_actions}")
    lines.append(f"objectives {m.num_objectives}")
    lines.append(f"discount {float(m.discount)!r}")
    lines.append("initial " + " ".join(repr(float(p)) for p in m.initial_dist))
    for s in range(m.num_states):
        for a in range(m.num_actions):
            lines.append(f"reward {s} {a} " + " ".join(repr(float(r)) for r in m.reward[s, a]))
    for s in range(m.num_states):
        for a in range(m.num_actions):
            row = m.transition[s, a]
            terms = " ".join(f"{t}:{float(row[t])!r}" for t in np.flatnonzero(row))
            lines.append(f"transition {s} {a} {terms}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def read_instance(path: str) -> Momdp:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def save_instance(m: Momdp, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_instance(m))


# -----------------------------------------------------------
# Generators
# -----------------------------------------------------------

def random_instance(seed: int, num_states: int, num_actions: int, num_objectives: int,
                    settings: dict = None) -> Momdp:
    """
    Seeded random MOMDP: integer rewards uniform on [reward_low, reward_high),
    each (s, a) moving to min(S, support_size) distinct states with normalized
    uniform weights, uniform initial distribution.
    """
    settings = settings or get_effective_settings("generator")
    if min(num_states, num_actions) < 1 or num_objectives < 2:
        raise DomainError("need at least one state, one action and two objectives.")
    rng = np.random.default_rng(seed)
    reward = rng.integers(settings["reward_low"], settings["reward_high"],
                          size=(num_states, num_actions, num_objectives)).astype(float)
    support = min(num_states, settings["support_size"])
    transition = np.zeros((num_states, num_actions, num_states))
    for s in range(num_states):
        for a in range(num_actions):
            targets = rng.choice(num_states, size=support, replace=False)
            weights = 1.0 - rng.random(support)          # in (0, 1]
            transition[s, a, targets] = weights / weights.sum()
    initial = np.full(num_states, 1.0 / num_states)
    name = f"random-{seed}-{num_states}x{num_actions}x{num_objectives}"
    return Momdp(transition, reward, settings["discount"], initial, name=name, seed=seed)


def _chain_mdp(N: int, first_rewards, step_rewards, discount: float, name: str) -> Momdp:
    """
    States 0..N in a line, N absorbing with zero reward. Both actions of
    state i move to i+1; their rewards come from first_rewards (state 0, when
    given) and step_rewards(i).
    """
    transition = np.zeros((N + 1, 2, N + 1))
    reward = np.zeros((N + 1, 2, 2))
    for s in range(N):
        transition[s, :, s + 1] = 1.0
        reward[s] = first_rewards if (s == 0 and first_rewards is not None) else step_rewards(s)
    transition[N, :, N] = 1.0
    initial = np.zeros(N + 1)
    initial[0] = 1.0
    return Momdp(transition, reward, discount, initial, name=name)


def example1_mdp(N: int, discount: float = None) -> Momdp:
    """Up in state i earns (2^(N-1-i), 0), Down earns (0, 2^(N-1-i))."""
    discount = discount or get_effective_settings("generator")["example_discount"]
    if N < 1:
        raise DomainError(f"N must be positive, got {N}.")

    def step(i):
        w = 2.0 ** (N - 1 - i)
        return [[w, 0.0], [0.0, w]]

    return _chain_mdp(N, None, step, discount, f"example1-mdp-{N}")


def example2_mdp(N: int, discount: float = None) -> Momdp:
    """
    State 0 earns (0, 2^(N+1) + 2) on both actions; state i >= 1 earns
    (2^(N-1-i), 0) Up and (0, 2^(N-i)) Down.
    """
    discount = discount or get_effective_settings("generator")["example_discount"]
    if N < 2:
        raise DomainError(f"N must be at least 2, got {N}.")

    def step(i):
        w = 2.0 ** (N - 1 - i)
        return [[w, 0.0], [0.0, 2.0 * w]]

    first = [[0.0, 2.0 ** (N + 1) + 2.0], [0.0, 2.0 ** (N + 1) + 2.0]]
    return _chain_mdp(N, first, step, discount, f"example2-mdp-{N}")


# -----------------------------------------------------------
# Input resolution
# -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ResolvedInput:
    """Either an MDP (LP backend) or an explicit value set."""
    label: str
    momdp: Momdp = None
    values: object = None

    @property
    def is_explicit(self) -> bool:
        return self.momdp is None


_BUILTINS = {
    "example1": example1_values,
    "example2": example2_values,
    "example1-mdp": example1_mdp,
    "example2-mdp": example2_mdp,
}


def resolve_input(source: str) -> ResolvedInput:
    """
    'builtin:example1:N', 'builtin:example2:N' (closed-form value sets),
    'builtin:example1-mdp:N[:gamma]', 'builtin:example2-mdp:N[:gamma]'
    (discounted MDP forms) or a path to an instance file.
    """
    if source.startswith(BUILTIN_PREFIX):
        parts = source[len(BUILTIN_PREFIX):].split(":")
        if len(parts) not in (2, 3) or parts[0] not in _BUILTINS:
            raise DomainError(f"unknown builtin '{source}'. Known: "
                              f"{', '.join(BUILTIN_PREFIX + k + ':N' for k in _BUILTINS)}")
        try:
            N = int(parts[1])
            discount = float(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise DomainError(f"builtin '{source}' needs an integer N (and optional discount).")
        if parts[0].endswith("-mdp"):
            return ResolvedInput(source, momdp=_BUILTINS[parts[0]](N, discount))
        if discount is not None:
            raise DomainError(f"builtin '{parts[0]}' is a closed-form value set and takes no discount.")
        values = _BUILTINS[parts[0]](N)
        return ResolvedInput(source, values=values)

    if not os.path.exists(source):
        raise DomainError(f"instance file '{source}' does not exist.")
    m = read_instance(source)
    logger.info(f"loaded instance '{m.name or source}': {m.num_states} states, "
                f"{m.num_actions} actions, {m.num_objectives} objectives")
    return ResolvedInput(source, momdp=m)
