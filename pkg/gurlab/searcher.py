"""Derivative-free minimization of uncertainty products over state families.

The searcher measures how closely the lowered bounds are approached in practice.
Each objective is paired with its lower bound and with the conventional
single-particle (HUR) value so results can be shown side by side.
"""

import logging
import math
from collections.abc import Iterable, Sequence
from enum import StrEnum
from typing import Literal, Self

import numpy as np
import scipy.optimize
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import qmc

from gurlab import gaussian, grid
from gurlab.core import (
    DEFAULT_HBAR,
    Engine,
    GurError,
    InequalityReport,
    InvalidArgumentError,
    InvariantError,
    MomentTable,
    RelationName,
    collective_dispersions,
)
from gurlab.inequalities import SuiteConfig, evaluate_suite

logger = logging.getLogger(__name__)

MIN_BUDGET = 10
DEFAULT_BUDGET = 200
DEFAULT_RESTARTS = 4
DEFAULT_SQUEEZE_MAX = 1.0
FLAT_RANGE = 1e-9
GRID_FAMILY_POINTS = 128
GRID_FAMILY_EXTENT = 12.0


class StateFamily(StrEnum):
    """Parameterized state families the searcher and sweep understand."""

    TWO_MODE_SQUEEZED = "two_mode_squeezed"
    CORRELATED_TRIPLE = "correlated_triple"
    RANDOM_GAUSSIAN = "random_gaussian"
    GRID_CORRELATED_GAUSSIAN = "grid_correlated_gaussian"


class Objective(StrEnum):
    """Left sides of the lowered bounds."""

    COLLECTIVE_PRODUCT = "collective_product"
    SUM_PRODUCT_TWO = "sum_product_two"
    SUM_PRODUCT_THREE = "sum_product_three"
    INDIVIDUAL_PRODUCT = "individual_product"


# Families whose states are invariant under particle exchange.
SYMMETRIC_FAMILIES = frozenset(
    {StateFamily.TWO_MODE_SQUEEZED, StateFamily.CORRELATED_TRIPLE, StateFamily.GRID_CORRELATED_GAUSSIAN}
)


def particle_count(family: StateFamily, n: int | None = None) -> int:
    """Particle count of a family; only random_gaussian takes n (2 or 3, default 2)."""
    match family:
        case StateFamily.TWO_MODE_SQUEEZED | StateFamily.GRID_CORRELATED_GAUSSIAN:
            fixed = 2
        case StateFamily.CORRELATED_TRIPLE:
            fixed = 3
        case StateFamily.RANDOM_GAUSSIAN:
            if n is None:
                return 2
            if n not in (2, 3):
                raise InvalidArgumentError(f"random_gaussian supports n=2 or n=3, got n={n}")
            return n
    if n is not None and n != fixed:
        raise InvalidArgumentError(f"{family} has n={fixed} particles, got n={n}")
    return fixed


def param_names(family: StateFamily, n: int | None = None) -> tuple[str, ...]:
    match family:
        case StateFamily.TWO_MODE_SQUEEZED | StateFamily.CORRELATED_TRIPLE:
            return ("r",)
        case StateFamily.GRID_CORRELATED_GAUSSIAN:
            return ("a", "b")
        case StateFamily.RANDOM_GAUSSIAN:
            if particle_count(family, n) == 2:
                return ("r1", "r2", "theta")
            return ("r1", "r2", "r3", "alpha", "beta", "gamma")


def default_box(family: StateFamily, n: int | None = None, squeeze_max: float = DEFAULT_SQUEEZE_MAX) -> list[tuple[float, float]]:
    """Default parameter box of a family."""
    match family:
        case StateFamily.TWO_MODE_SQUEEZED:
            return [(-2.0, 2.0)]
        case StateFamily.CORRELATED_TRIPLE:
            return [(-1.0, 1.0)]
        case StateFamily.GRID_CORRELATED_GAUSSIAN:
            return [(0.5, 2.0), (-0.9, 0.9)]
        case StateFamily.RANDOM_GAUSSIAN:
            count = particle_count(family, n)
            angles = 1 if count == 2 else 3
            return [(-squeeze_max, squeeze_max)] * count + [(0.0, 2.0 * math.pi)] * angles


def engine_of(family: StateFamily) -> Engine:
    return Engine.GRID if family is StateFamily.GRID_CORRELATED_GAUSSIAN else Engine.GAUSSIAN


def family_moments(
    family: StateFamily,
    params: Sequence[float],
    n: int | None = None,
    hbar: float = DEFAULT_HBAR,
) -> MomentTable:
    """MomentTable of the family member at ``params``.

    Raises:
        InvalidArgumentError: If params has the wrong length or lies outside the
            family's domain (e.g. a <= |b| for the grid family).
    """
    names = param_names(family, n)
    if len(params) != len(names):
        raise InvalidArgumentError(f"{family} takes parameters {names}, got {len(params)} values")
    values = [float(v) for v in params]
    match family:
        case StateFamily.TWO_MODE_SQUEEZED:
            return gaussian.moments(gaussian.make_two_mode_squeezed(values[0], hbar))
        case StateFamily.CORRELATED_TRIPLE:
            return gaussian.moments(gaussian.make_correlated_triple(values[0], hbar))
        case StateFamily.RANDOM_GAUSSIAN:
            count = particle_count(family, n)
            state = gaussian.make_parameterized_state(values[:count], values[count:], hbar)
            return gaussian.moments(state)
        case StateFamily.GRID_CORRELATED_GAUSSIAN:
            a, b = values
            if a <= abs(b):
                raise InvalidArgumentError(f"correlated Gaussian needs a > |b|, got a={a}, b={b}")
            half = GRID_FAMILY_EXTENT * math.sqrt(hbar)
            spec = grid.GridSpec(n_particles=2, points_per_axis=GRID_FAMILY_POINTS, x_min=-half, x_max=half)
            return grid.moments(grid.from_function(spec, grid.correlated_gaussian(a, b, hbar)), hbar)


def describe(family: StateFamily, params: Sequence[float], n: int | None = None) -> str:
    """State descriptor such as ``two_mode_squeezed(r=0.25)``."""
    names = param_names(family, n)
    body = ",".join(f"{name}={float(value)!r}" for name, value in zip(names, params, strict=True))
    return f"{family}({body})"


def objective_bound(objective: Objective, n: int, hbar: float = DEFAULT_HBAR) -> float:
    """Lower bound the objective must respect."""
    match objective:
        case Objective.COLLECTIVE_PRODUCT:
            return n**2 * hbar**2 / 4.0
        case Objective.SUM_PRODUCT_TWO:
            return hbar**2 / 4.0
        case Objective.SUM_PRODUCT_THREE:
            return 9.0 * hbar**2 / 64.0
        case Objective.INDIVIDUAL_PRODUCT:
            return hbar / 4.0 if n == 2 else hbar / 8.0


def hur_reference(objective: Objective, n: int, hbar: float = DEFAULT_HBAR) -> float:
    """Value the objective takes when every particle sits at ΔQΔP = ħ/2 with no correlations."""
    match objective:
        case Objective.COLLECTIVE_PRODUCT:
            return n**2 * hbar**2 / 4.0
        case Objective.SUM_PRODUCT_TWO:
            return hbar**2
        case Objective.SUM_PRODUCT_THREE:
            return 9.0 * hbar**2 / 4.0
        case Objective.INDIVIDUAL_PRODUCT:
            return hbar / 2.0


def objective_value(objective: Objective, m: MomentTable) -> float:
    match objective:
        case Objective.COLLECTIVE_PRODUCT:
            dq2, dp2 = collective_dispersions(m)
            return dq2 * dp2
        case Objective.SUM_PRODUCT_TWO | Objective.SUM_PRODUCT_THREE:
            return float(m.var_q.sum()) * float(m.var_p.sum())
        case Objective.INDIVIDUAL_PRODUCT:
            return math.sqrt(float(m.var_q[0]) * float(m.var_p[0]))


def _hbar_power(objective: Objective) -> int:
    return 1 if objective is Objective.INDIVIDUAL_PRODUCT else 2


class SearchProblem(BaseModel):
    """Family, objective and parameter box of one minimization.

    ``bounds`` defaults to the family's box. ``tol`` is in natural units and
    defaults to the family engine's tolerance.
    """

    model_config = ConfigDict(frozen=True)

    family: StateFamily
    objective: Objective
    n: int | None = None
    squeeze_max: float = Field(default=DEFAULT_SQUEEZE_MAX, ge=0, allow_inf_nan=False)
    bounds: tuple[tuple[float, float], ...] | None = None
    hbar: float = Field(default=DEFAULT_HBAR, gt=0, allow_inf_nan=False)
    tol: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_problem(self) -> Self:
        count = particle_count(self.family, self.n)
        required = {Objective.SUM_PRODUCT_TWO: 2, Objective.SUM_PRODUCT_THREE: 3}.get(self.objective)
        if required is not None and count != required:
            raise InvalidArgumentError(f"{self.objective} needs n={required}, {self.family} has n={count}")
        if self.objective is Objective.INDIVIDUAL_PRODUCT and self.family not in SYMMETRIC_FAMILIES:
            raise InvalidArgumentError(
                f"individual_product needs a permutation-symmetric family, {self.family} is not"
            )
        expected = len(param_names(self.family, count))
        if len(self.box) != expected:
            raise InvalidArgumentError(f"{self.family} needs {expected} parameter bounds, got {len(self.box)}")
        for lo, hi in self.box:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InvalidArgumentError(f"parameter box must be finite with lo <= hi, got ({lo}, {hi})")
        return self

    @property
    def particles(self) -> int:
        return particle_count(self.family, self.n)

    @property
    def engine(self) -> Engine:
        return engine_of(self.family)

    @property
    def box(self) -> list[tuple[float, float]]:
        if self.bounds is None:
            return default_box(self.family, self.n, self.squeeze_max)
        return list(self.bounds)

    @property
    def bound(self) -> float:
        return objective_bound(self.objective, self.particles, self.hbar)

    @property
    def hur_reference(self) -> float:
        return hur_reference(self.objective, self.particles, self.hbar)

    @property
    def tolerance(self) -> float:
        """Slack tolerance in the objective's units (ħ-scaled)."""
        base = self.tol if self.tol is not None else SuiteConfig.for_engine(self.engine).tol
        return base * self.hbar ** _hbar_power(self.objective)

    def evaluate(self, params: Sequence[float]) -> float:
        m = family_moments(self.family, params, self.particles, self.hbar)
        return objective_value(self.objective, m)


class TracePoint(BaseModel):
    """One objective evaluation; ``value`` is +inf when the engine rejected the point."""

    params: tuple[float, ...]
    value: float
    diagnostic: str = ""


class SearchResult(BaseModel):
    """Best point of a minimization with its bound, HUR reference and full trace."""

    kind: Literal["search"] = "search"
    problem: SearchProblem
    seed: int
    budget: int
    param_names: tuple[str, ...]
    best_params: tuple[float, ...]
    best_value: float
    bound: float
    hur_reference: float
    tol: float
    evaluations: int
    trace: list[TracePoint]
    value_range: float
    flat: bool

    def running_minimum(self) -> list[float]:
        """Best value seen after each evaluation (non-increasing)."""
        best = math.inf
        envelope: list[float] = []
        for point in self.trace:
            best = min(best, point.value)
            envelope.append(best)
        return envelope


class _BudgetExhaustedError(Exception):
    pass


class _CountingObjective:
    """Objective wrapper that records every call and enforces the evaluation budget."""

    def __init__(self, problem: SearchProblem, budget: int):
        self.problem = problem
        self.budget = budget
        self.trace: list[TracePoint] = []

    def __call__(self, x: np.ndarray) -> float:
        if len(self.trace) >= self.budget:
            raise _BudgetExhaustedError
        params = tuple(float(v) for v in x)
        try:
            value = self.problem.evaluate(params)
            diagnostic = ""
        except GurError as e:
            value = math.inf
            diagnostic = str(e)
            logger.debug(f"rejected {params}: {e}")
        self.trace.append(TracePoint(params=params, value=value, diagnostic=diagnostic))
        return value


def multistart_points(box: Sequence[tuple[float, float]], seed: int, restarts: int = DEFAULT_RESTARTS) -> list[np.ndarray]:
    """Box centre followed by a seeded Latin-hypercube lattice over the box."""
    lower = np.array([lo for lo, _ in box], dtype=np.float64)
    upper = np.array([hi for _, hi in box], dtype=np.float64)
    starts = [0.5 * (lower + upper)]
    if restarts > 0:
        sampler = qmc.LatinHypercube(d=len(box), seed=seed)
        unit = sampler.random(restarts)
        starts.extend(lower + unit[k] * (upper - lower) for k in range(restarts))
    return starts


def minimize(
    problem: SearchProblem,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> SearchResult:
    """Bounded Nelder-Mead from the centre and a seeded multistart lattice.

    Restarts share one evaluation budget and run in a fixed order, so the result
    is deterministic for a fixed (problem, budget, seed).

    Raises:
        InvalidArgumentError: If budget < 10.
        InvariantError: If no point was feasible or the optimum violates the bound.
    """
    if budget < MIN_BUDGET:
        raise InvalidArgumentError(f"budget must be >= {MIN_BUDGET}, got {budget}")
    if seed < 0:
        raise InvalidArgumentError(f"seed must be >= 0, got {seed}")

    box = problem.box
    counter = _CountingObjective(problem, budget)
    for start in multistart_points(box, seed, restarts):
        remaining = budget - len(counter.trace)
        if remaining <= 0:
            break
        try:
            scipy.optimize.minimize(
                counter,
                start,
                method="Nelder-Mead",
                bounds=box,
                options={"xatol": 1e-8, "fatol": 1e-12, "maxfev": remaining},
            )
        except _BudgetExhaustedError:
            break

    feasible = [p for p in counter.trace if math.isfinite(p.value)]
    if not feasible:
        raise InvariantError(f"no feasible point for {problem.family} in {len(counter.trace)} evaluations")
    best = min(feasible, key=lambda p: (p.value, p.params))
    values = [p.value for p in feasible]
    value_range = max(values) - min(values)
    tol = problem.tolerance

    result = SearchResult(
        problem=problem,
        seed=seed,
        budget=budget,
        param_names=param_names(problem.family, problem.particles),
        best_params=best.params,
        best_value=best.value,
        bound=problem.bound,
        hur_reference=problem.hur_reference,
        tol=tol,
        evaluations=len(counter.trace),
        trace=counter.trace,
        value_range=value_range,
        flat=value_range < FLAT_RANGE * problem.hbar ** _hbar_power(problem.objective),
    )
    logger.info(
        f"{problem.objective} over {problem.family}: best {result.best_value:.12g} at {result.best_params} "
        f"(bound {result.bound:.6g}, HUR {result.hur_reference:.6g}, {result.evaluations} evaluations)"
    )
    if result.best_value < result.bound - tol:
        raise InvariantError(
            f"{problem.objective} optimum {result.best_value:.12g} violates its bound {result.bound:.12g}"
        )
    return result


class SweepRow(BaseModel):
    """Reports of every applicable relation at one parameter point."""

    params: dict[str, float]
    descriptor: str
    moments: dict[str, float]
    reports: list[InequalityReport]
    skipped: dict[str, str] = Field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.reports)


class SweepTable(BaseModel):
    """Row-per-point table of a parameter sweep."""

    kind: Literal["sweep"] = "sweep"
    family: StateFamily
    n: int
    param_names: tuple[str, ...]
    rows: list[SweepRow]

    @property
    def holds(self) -> bool:
        return all(row.holds for row in self.rows)


def _as_points(param_grid: Iterable[float | Sequence[float]], width: int) -> list[tuple[float, ...]]:
    points: list[tuple[float, ...]] = []
    for point in param_grid:
        values = (float(point),) if isinstance(point, int | float) else tuple(float(v) for v in point)
        if len(values) != width:
            raise InvalidArgumentError(f"grid point {values} needs {width} values")
        points.append(values)
    return points


def sweep(
    family: StateFamily,
    param_grid: Iterable[float | Sequence[float]],
    *,
    n: int | None = None,
    hbar: float = DEFAULT_HBAR,
    tol: float | None = None,
    relations: Iterable[RelationName] | None = None,
) -> SweepTable:
    """Evaluate the inequality suite at every grid point of a family.

    One-parameter families accept plain numbers; others take parameter vectors.
    Relations that do not apply to the family's particle count are listed in each
    row's ``skipped`` map with a reason.

    Raises:
        InvalidArgumentError: If the grid is empty or a point lies outside the family's domain.
    """
    count = particle_count(family, n)
    names = param_names(family, count)
    points = _as_points(param_grid, len(names))
    if not points:
        raise InvalidArgumentError("sweep grid is empty")

    engine = engine_of(family)
    config = SuiteConfig.for_engine(engine, hbar=hbar, tol=tol)
    requested = None if relations is None else list(relations)
    rows: list[SweepRow] = []
    for point in points:
        m = family_moments(family, point, count, hbar)
        descriptor = describe(family, point, count)
        outcome = evaluate_suite(m, config, engine, descriptor, requested)
        rows.append(
            SweepRow(
                params=dict(zip(names, point, strict=True)),
                descriptor=descriptor,
                moments=m.flatten(),
                reports=outcome.reports,
                skipped=outcome.skipped,
            )
        )
    failing = sum(1 for row in rows if not row.holds)
    logger.info(f"swept {family} over {len(rows)} points, {failing} with failing relations")
    return SweepTable(family=family, n=count, param_names=names, rows=rows)
