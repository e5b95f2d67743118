"""Built-in state battery run by ``gurlab verify``.

Gaussian entries cover product vacua, the two-mode squeezed and correlated-triple
families and seeded random states. Grid entries sample wavefunctions, check
permutation commutation and, where a Gaussian counterpart exists, compare the
two engines' moments entrywise.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from gurlab import gaussian, grid
from gurlab.core import DEFAULT_HBAR, CheckResult, Engine, InequalityReport, max_moment_difference
from gurlab.inequalities import SuiteConfig, evaluate_suite, robertson
from gurlab.storage import Record

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = 1000
DEFAULT_SQUEEZE_MAX = 1.0
COMMUTATION_TOL = 1e-8
# Cross-engine tolerance for three-particle grids relative to the grid tolerance
THREE_PARTICLE_FACTOR = 100.0

TWO_MODE_R = tuple(k / 4 for k in range(9))
TRIPLE_R = tuple(k / 5 for k in range(6))
GRID_TWO_MODE_R = (0.0, 0.5, 1.0)

EngineChoice = Literal["gaussian", "grid", "both"]


@dataclass(frozen=True)
class GaussianEntry:
    descriptor: str
    state: gaussian.GaussianState


@dataclass(frozen=True)
class GridEntry:
    """Grid state with its optional Gaussian counterpart and Robertson operator pairs."""

    descriptor: str
    state: grid.GridState
    counterpart: gaussian.GaussianState | None = None
    operator_pairs: tuple[tuple[grid.GridOperator, grid.GridOperator], ...] = field(default=())


class BatteryConfig(BaseModel):
    """Knobs of one battery run; ``tol`` overrides both engines' default tolerances."""

    model_config = ConfigDict(frozen=True)

    engine: EngineChoice = "both"
    hbar: float = Field(default=DEFAULT_HBAR, gt=0, allow_inf_nan=False)
    tol: float | None = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0, description="First random-state seed")
    seeds: int = Field(default=DEFAULT_SEEDS, ge=0)
    squeeze_max: float = Field(default=DEFAULT_SQUEEZE_MAX, ge=0, allow_inf_nan=False)


class BatteryOutcome(BaseModel):
    """Sorted records of a battery run plus the relations each entry skipped."""

    records: list[Record]
    skipped: dict[str, dict[str, str]] = Field(default_factory=dict)

    @property
    def reports(self) -> list[InequalityReport]:
        return [r for r in self.records if isinstance(r, InequalityReport)]

    @property
    def checks(self) -> list[CheckResult]:
        return [r for r in self.records if isinstance(r, CheckResult)]

    @property
    def failures(self) -> list[Record]:
        return [r for r in self.records if not (r.holds if isinstance(r, InequalityReport) else r.passed)]

    @property
    def passed(self) -> bool:
        return not self.failures


def gaussian_battery(
    hbar: float = DEFAULT_HBAR,
    seeds: Iterable[int] = range(DEFAULT_SEEDS),
    squeeze_max: float = DEFAULT_SQUEEZE_MAX,
) -> list[GaussianEntry]:
    entries = [GaussianEntry(f"product_vacuum(n={n})", gaussian.make_product_vacuum(n, hbar)) for n in (1, 2, 3)]
    entries += [
        GaussianEntry(f"two_mode_squeezed(r={r!r})", gaussian.make_two_mode_squeezed(r, hbar)) for r in TWO_MODE_R
    ]
    entries += [
        GaussianEntry(f"correlated_triple(r={r!r})", gaussian.make_correlated_triple(r, hbar)) for r in TRIPLE_R
    ]
    seed_list = list(seeds)
    for n in (2, 3):
        entries += [
            GaussianEntry(f"random(n={n},seed={seed})", gaussian.make_random_state(n, seed, squeeze_max, hbar))
            for seed in seed_list
        ]
    return entries


def _pairs(n: int) -> tuple[tuple[grid.GridOperator, grid.GridOperator], ...]:
    pairs = [(grid.position_operator(1), grid.momentum_operator(1))]
    if n >= 2:
        pairs.append((grid.collective_position(n), grid.collective_momentum(n)))
    return tuple(pairs)


def _correlated_counterpart(a: float, b: float, hbar: float) -> gaussian.GaussianState:
    """Gaussian state of ``grid.correlated_gaussian(a, b, hbar)``: sigma_qq = ħA⁻¹/2, sigma_pp = ħA/2."""
    a_matrix = np.array([[a, b], [b, a]])
    sigma = np.zeros((4, 4))
    sigma[:2, :2] = 0.5 * hbar * np.linalg.inv(a_matrix)
    sigma[2:, 2:] = 0.5 * hbar * a_matrix
    return gaussian.GaussianState(n=2, mean=np.zeros(4), sigma=sigma, hbar=hbar)


def _slater_pair(spec: grid.GridSpec, hbar: float) -> grid.GridState:
    """Ground state times first excited oscillator state, unsymmetrized."""

    def psi(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return x2 * np.exp(-(x1**2 + x2**2) / (2.0 * hbar))

    return grid.from_function(spec, psi)


def grid_battery(hbar: float = DEFAULT_HBAR) -> list[GridEntry]:
    entries: list[GridEntry] = []
    for n in (1, 2):
        vacuum = gaussian.make_product_vacuum(n, hbar)
        spec = grid.GridSpec.default(n, hbar)
        entries.append(GridEntry(f"grid_vacuum(n={n})", grid.from_gaussian(spec, vacuum), vacuum, _pairs(n)))

    spec_two = grid.GridSpec.default(2, hbar)
    for r in GRID_TWO_MODE_R:
        state = gaussian.make_two_mode_squeezed(r, hbar)
        entries.append(
            GridEntry(f"grid_two_mode_squeezed(r={r!r})", grid.from_gaussian(spec_two, state), state, _pairs(2))
        )

    entries.append(
        GridEntry(
            "grid_correlated_gaussian(a=1.0,b=0.5)",
            grid.from_function(spec_two, grid.correlated_gaussian(1.0, 0.5, hbar)),
            _correlated_counterpart(1.0, 0.5, hbar),
            _pairs(2),
        )
    )

    product = _slater_pair(spec_two, hbar)
    entries.append(GridEntry("grid_fermionic_pair", grid.symmetrize(product, grid.Symmetry.FERMIONIC), None, _pairs(2)))
    entries.append(GridEntry("grid_bosonic_pair", grid.symmetrize(product, grid.Symmetry.BOSONIC), None, _pairs(2)))

    triple = gaussian.make_correlated_triple(0.4, hbar)
    entries.append(
        GridEntry(
            "grid_correlated_triple(r=0.4)",
            grid.from_gaussian(grid.GridSpec.default(3, hbar), triple),
            triple,
            _pairs(3),
        )
    )
    return entries


def cross_engine_tolerance(n: int, config: SuiteConfig) -> float:
    """Entrywise moment tolerance: the grid tolerance (×100 for three particles), scaled by ħ."""
    factor = THREE_PARTICLE_FACTOR if n == 3 else 1.0
    return factor * config.tol_for(1)


def check_gaussian_entry(entry: GaussianEntry, config: SuiteConfig) -> tuple[list[Record], dict[str, str]]:
    outcome = evaluate_suite(gaussian.moments(entry.state), config, Engine.GAUSSIAN, entry.descriptor)
    return list(outcome.reports), outcome.skipped


def check_grid_entry(entry: GridEntry, config: SuiteConfig) -> tuple[list[Record], dict[str, str]]:
    """Suite, Robertson pairs, permutation commutation and cross-engine agreement of one grid state."""
    hbar = config.hbar
    n = entry.state.n_particles
    m = grid.moments(entry.state, hbar)
    outcome = evaluate_suite(m, config, Engine.GRID, entry.descriptor)
    records: list[Record] = list(outcome.reports)
    for index, (a, b) in enumerate(entry.operator_pairs):
        try:
            records.append(robertson(entry.state, a, b, config).with_descriptor(entry.descriptor))
        except grid.BoundaryDecayError as e:
            records.append(
                CheckResult(
                    name="engine_refusal",
                    state_descriptor=entry.descriptor,
                    value=e.ratio,
                    tol=grid.BOUNDARY_DECAY,
                    passed=False,
                    details={"operator_pair": float(index)},
                )
            )

    if n >= 2:
        commutation = grid.permutation_commutation_check(entry.state, hbar)
        residual = commutation.max_physical
        records.append(
            CheckResult(
                name="permutation_commutation",
                state_descriptor=entry.descriptor,
                value=residual,
                tol=COMMUTATION_TOL,
                passed=residual <= COMMUTATION_TOL,
                details=dict(commutation.residuals),
            )
        )

    if entry.counterpart is not None:
        difference = max_moment_difference(m, gaussian.moments(entry.counterpart))
        tol = cross_engine_tolerance(n, config)
        records.append(
            CheckResult(
                name="cross_engine",
                state_descriptor=entry.descriptor,
                value=difference,
                tol=tol,
                passed=difference <= tol,
            )
        )
    return records, outcome.skipped


def run_battery(config: BatteryConfig | None = None) -> BatteryOutcome:
    """Run the battery for the configured engine(s).

    Entries run one after another; records are sorted by (relation name, state
    descriptor, variant) so the stream is identical on every run.
    """
    config = config or BatteryConfig()
    records: list[Record] = []
    skipped: dict[str, dict[str, str]] = {}

    if config.engine in ("gaussian", "both"):
        suite = SuiteConfig.for_engine(Engine.GAUSSIAN, hbar=config.hbar, tol=config.tol)
        entries = gaussian_battery(config.hbar, range(config.seed, config.seed + config.seeds), config.squeeze_max)
        logger.info(f"Running {len(entries)} Gaussian battery entries (tol {suite.tol:.1e})")
        for entry in entries:
            entry_records, entry_skipped = check_gaussian_entry(entry, suite)
            records += entry_records
            if entry_skipped:
                skipped[entry.descriptor] = entry_skipped

    if config.engine in ("grid", "both"):
        suite = SuiteConfig.for_engine(Engine.GRID, hbar=config.hbar, tol=config.tol)
        entries = grid_battery(config.hbar)
        logger.info(f"Running {len(entries)} grid battery entries (tol {suite.tol:.1e})")
        for entry in entries:
            entry_records, entry_skipped = check_grid_entry(entry, suite)
            records += entry_records
            if entry_skipped:
                skipped[entry.descriptor] = entry_skipped

    records.sort(key=lambda r: r.sort_key)
    outcome = BatteryOutcome(records=records, skipped=skipped)
    failures = outcome.failures
    if failures:
        first = failures[0]
        logger.error(f"{len(failures)} of {len(records)} records failed, first: {first.name} on {first.state_descriptor}")
    else:
        logger.info(f"All {len(records)} records hold")
    return outcome


def first_failure_message(record: Record) -> str:
    if isinstance(record, InequalityReport):
        variant = f" [{record.variant}]" if record.variant else ""
        return (
            f"{record.name}{variant} fails on {record.state_descriptor}: "
            f"lhs {record.lhs!r} < rhs {record.rhs!r} (slack {record.slack:.3e}, tol {record.tol:.1e})"
        )
    return f"{record.name} check fails on {record.state_descriptor}: {record.value:.3e} > tol {record.tol:.1e}"

