import os

# --- NUMERIC TOLERANCES ---
# Shared by the solver, the model builders and the covering code.
# None of these are stated by the method itself; they are fixed here and
# surfaced through SOLVER_CONFIG so callers can tighten or loosen them.
FEASIBILITY_TOL = 1e-7      # constraint satisfaction of an Optimal LP point
BOUND_TOL = 1e-9            # variable bounds of an Optimal LP point
INTEGRALITY_TOL = 1e-6      # binary variables in a MIP incumbent
OBJECTIVE_GAP = 1e-6        # branch-and-bound pruning / optimality gap
PIVOT_TOL = 1e-9            # smallest usable pivot element
PROBABILITY_TOL = 1e-9      # rows of p(s,a,.), mu and randomized policies
FLOW_TOL = 1e-6             # occupation-measure flow residual
ZERO_MASS_TOL = 1e-9        # sum_a x_sa below this is a zero-mass state
DEDUP_TOL = 1e-9            # value vectors closer than this are one tradeoff

# --- SOLVER CONFIGURATION ---
# default_rules apply to every solve; a profile overrides some of them.
SOLVER_CONFIG = {
    "default_rules": {
        "feasibility_tol": FEASIBILITY_TOL,
        "bound_tol": BOUND_TOL,
        "integrality_tol": INTEGRALITY_TOL,
        "objective_gap": OBJECTIVE_GAP,
        "pivot_tol": PIVOT_TOL,
        "max_iterations": 50_000,       # simplex pivots per phase
        "refactor_every": 50,           # rebuild B^-1 from scratch every k pivots
        "degenerate_streak": 25,        # switch to Bland's rule after k degenerate pivots
        "max_binaries": 4096,
        "max_nodes": 200_000,           # branch-and-bound nodes
        "time_limit_seconds": None,     # None = no wall-clock limit
        "external_command": None,       # see MOMDP_COVER_SOLVER
    },
    "profiles": {
        "strict": {
            "feasibility_tol": 1e-9,
            "objective_gap": 1e-8,
            "refactor_every": 20,
        },
        "fast": {
            "refactor_every": 100,
            "max_nodes": 20_000,
        },
    },
}

# --- GRID COVER CONFIGURATION ---
GRID_CONFIG = {
    "default_rules": {
        "floor": 1.0,                   # delta: lower grid boundary
        "skip_ahead": True,
        "jobs": 1,                      # >1 only honoured when skip_ahead is off
        "acceptance_slack": 1e-9,       # optimum >= threshold * (1 - slack)
    },
    "profiles": {
        "exhaustive": {"skip_ahead": False},
    },
}

# --- GREEDY COVER CONFIGURATION ---
GREEDY_CONFIG = {
    "default_rules": {
        "iteration_cap": 1_000_000,
        "tie_slack": 1e-9,              # tau = tie_slack * max(1, |u|)
    },
    "profiles": {},
}

# --- ORACLE CONFIGURATION ---
ORACLE_CONFIG = {
    "default_rules": {
        "enumeration_limit": 1_000_000,  # |A|^|S|
        "bruteforce_limit": 20,          # points in min_cover_bruteforce
        "materialize_limit": 1 << 24,    # largest closed-form set turned into an array
        "dedup_tol": DEDUP_TOL,
        "verify_tol": 1e-9,             # relative slack on (1+eps) c >= x
    },
    "profiles": {},
}

# --- EVALUATION CONFIGURATION ---
EVALUATION_CONFIG = {
    "default_rules": {
        "direct_solve_max_states": 512,
        "fixed_point_tol": 1e-10,
        "fixed_point_max_sweeps": 1_000_000,
    },
    "profiles": {},
}

# --- RANDOM INSTANCE GENERATOR ---
GENERATOR_CONFIG = {
    "default_rules": {
        "discount": 0.9,
        "reward_low": 0,                # inclusive
        "reward_high": 100,             # exclusive: rewards in {0,...,99}
        "support_size": 4,              # min(|S|, support_size) next states per (s,a)
        "example_discount": 0.99,       # builtin example MDPs
    },
    "profiles": {},
}

# --- EXPORT CONFIGURATION ---
EXPORT_CONFIG = {
    "default_rules": {
        "delimiter": "\t",
        "excel_engine": "xlsxwriter",
        "sheet_names": {
            "cover": "Cover",
            "frontier": "Frontier",
            "summary": "Summary",
            "policies": "Policies",
        },
    },
    "profiles": {
        "csv": {"delimiter": ","},
    },
}

CONFIG_SECTIONS = {
    "solver": SOLVER_CONFIG,
    "grid": GRID_CONFIG,
    "greedy": GREEDY_CONFIG,
    "oracle": ORACLE_CONFIG,
    "evaluation": EVALUATION_CONFIG,
    "generator": GENERATOR_CONFIG,
    "export": EXPORT_CONFIG,
}

# --- ENVIRONMENT ---
SOLVER_COMMAND_ENV = "MOMDP_COVER_SOLVER"
SOLVER_PROFILE_ENV = "MOMDP_COVER_PROFILE"

# CLI exit codes
EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


# Function to safely merge dictionaries, with later dicts overriding earlier ones
def merge_configs(base, override):
    """
    Recursively merges two dictionaries. Values from 'override' overwrite 'base' values.
    If a key exists in both and its value is a dictionary, the dictionaries are merged.
    """
    merged = base.copy()
    if override:
        for k, v in override.items():
            if isinstance(merged.get(k), dict) and isinstance(v, dict):
                merged[k] = merge_configs(merged[k], v)
            else:
                merged[k] = v
    return merged


def get_effective_settings(section: str, profile: str = None, overrides: dict = None) -> dict:
    """
    Determines the effective settings of one configuration section,
    applying hierarchy: Default -> Profile -> Explicit overrides.

    For the solver section the profile falls back to $MOMDP_COVER_PROFILE and the
    external command to $MOMDP_COVER_SOLVER when they are not given explicitly.

    Args:
        section (str): One of the keys of CONFIG_SECTIONS ("solver", "grid", ...).
        profile (str): Optional profile name inside that section.
        overrides (dict): Optional per-call values with the highest precedence.

    Returns:
        dict: A fresh settings dictionary.
    """
    if section not in CONFIG_SECTIONS:
        raise KeyError(f"Unknown configuration section '{section}'. "
                       f"Known sections: {', '.join(sorted(CONFIG_SECTIONS))}")
    section_config = CONFIG_SECTIONS[section]

    if profile is None and section == "solver":
        profile = os.environ.get(SOLVER_PROFILE_ENV) or None

    # Start with default rules for the section
    effective = merge_configs(section_config.get("default_rules", {}), {})

    # Apply profile overrides
    if profile:
        profiles = section_config.get("profiles", {})
        if profile not in profiles:
            raise KeyError(f"Unknown {section} profile '{profile}'. "
                           f"Known profiles: {', '.join(sorted(profiles)) or 'none'}")
        effective = merge_configs(effective, profiles[profile])

    if section == "solver" and not effective.get("external_command"):
        effective["external_command"] = os.environ.get(SOLVER_COMMAND_ENV) or None

    # Apply per-call overrides (highest precedence); None means "keep"
    if overrides:
        effective = merge_configs(effective, {k: v for k, v in overrides.items() if v is not None})

    return effective
