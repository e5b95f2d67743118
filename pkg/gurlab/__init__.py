"""Numerical checks of generalized uncertainty relations for entangled identical particles."""

from gurlab.battery import BatteryConfig, run_battery
from gurlab.core import (
    CheckResult,
    Constants,
    Engine,
    GurError,
    InequalityReport,
    InvalidArgumentError,
    InvariantError,
    MomentTable,
    RelationName,
    collective_dispersions,
)
from gurlab.gaussian import (
    GaussianState,
    make_correlated_triple,
    make_product_vacuum,
    make_random_state,
    make_two_mode_squeezed,
)
from gurlab.grid import GridSpec, GridState, Symmetry, from_function, symmetrize
from gurlab.inequalities import PreconditionError, SuiteConfig, evaluate_suite
from gurlab.searcher import Objective, SearchProblem, SearchResult, StateFamily, minimize, sweep
from gurlab.storage import StorageError

__all__ = [
    "BatteryConfig",
    "CheckResult",
    "Constants",
    "Engine",
    "GaussianState",
    "GridSpec",
    "GridState",
    "GurError",
    "InequalityReport",
    "InvalidArgumentError",
    "InvariantError",
    "MomentTable",
    "Objective",
    "PreconditionError",
    "RelationName",
    "SearchProblem",
    "SearchResult",
    "StateFamily",
    "StorageError",
    "SuiteConfig",
    "Symmetry",
    "collective_dispersions",
    "evaluate_suite",
    "from_function",
    "make_correlated_triple",
    "make_product_vacuum",
    "make_random_state",
    "make_two_mode_squeezed",
    "minimize",
    "run_battery",
    "sweep",
    "symmetrize",
]
