"""Uncertainty relations for N identical particles evaluated on a MomentTable.

Every function returns an :class:`~gurlab.core.InequalityReport` (or a list of
them). The relations are theorems over valid quantum states, so a report that
does not hold beyond tolerance points at a broken engine.

Tolerances are configured in natural units and scaled by ħ^k, k being the ħ
power of the relation's right side, so verdicts do not depend on the unit of
action.
"""

import itertools
import logging
import math
from collections.abc import Iterable
from typing import Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from gurlab.core import (
    DEFAULT_HBAR,
    Engine,
    GurError,
    InequalityReport,
    InvalidArgumentError,
    MomentTable,
    RelationName,
    collective_dispersions,
)
from gurlab.grid import (
    BoundaryDecayError,
    GridOperator,
    GridState,
    require_decay,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {Engine.GAUSSIAN: 1e-9, Engine.GRID: 1e-6}
SYMMETRIC_DISPERSION_RTOL = 1e-6

# Inequivalent sign vectors used in the three-particle derivation, in order.
DERIVATION_SIGN_VECTORS: tuple[tuple[int, int, int], ...] = ((1, -1, -1), (-1, 1, -1), (-1, -1, 1), (1, 1, 1))
ALL_SIGN_VECTORS: tuple[tuple[int, int, int], ...] = DERIVATION_SIGN_VECTORS + tuple(
    signs for signs in itertools.product((1, -1), repeat=3) if signs not in DERIVATION_SIGN_VECTORS
)

# Relations whose two sides carry the same power of λ under q -> λq, p -> p/λ.
SCALE_BALANCED = frozenset(
    {
        RelationName.COLLECTIVE_GUR,
        RelationName.GUR_TWO_BOUND,
        RelationName.SYMMETRIC_TWO,
        RelationName.GUR_THREE_BOUND,
        RelationName.SYMMETRIC_THREE,
    }
)


class PreconditionError(GurError):
    """Raised when a relation's preparation assumption does not hold for the state."""


class SuiteConfig(BaseModel):
    """ħ and slack tolerance (natural units) for one engine."""

    model_config = ConfigDict(frozen=True)

    hbar: float = Field(default=DEFAULT_HBAR, gt=0, allow_inf_nan=False)
    tol: float = Field(gt=0, allow_inf_nan=False)

    @classmethod
    def for_engine(cls, engine: Engine, hbar: float = DEFAULT_HBAR, tol: float | None = None) -> Self:
        """Config with the engine's default tolerance unless one is given."""
        return cls(hbar=hbar, tol=DEFAULT_TOLERANCES[engine] if tol is None else tol)

    def tol_for(self, hbar_power: int) -> float:
        return self.tol * self.hbar**hbar_power


class SuiteOutcome(BaseModel):
    """Reports of every evaluated relation plus the skipped ones with a reason."""

    reports: list[InequalityReport] = Field(default_factory=list)
    skipped: dict[str, str] = Field(default_factory=dict)


def _config(config: SuiteConfig | None, engine: Engine) -> SuiteConfig:
    return config if config is not None else SuiteConfig.for_engine(engine)


def _require_n(m: MomentTable, n: int, relation: RelationName) -> None:
    if m.n != n:
        raise InvalidArgumentError(f"{relation} applies to n={n} particles, got n={m.n}")


def _report(
    name: RelationName,
    lhs: float,
    rhs: float,
    m_n: int,
    config: SuiteConfig,
    engine: Engine,
    hbar_power: int,
    variant: str = "",
    sub_values: dict[str, float] | None = None,
) -> InequalityReport:
    report = InequalityReport.evaluate(
        name,
        lhs,
        rhs,
        n=m_n,
        engine=engine,
        tol=config.tol_for(hbar_power),
        variant=variant,
        sub_values=sub_values,
    )
    if not report.holds:
        logger.warning(f"{name}{f' [{variant}]' if variant else ''} fails: slack {report.slack:.3e}")
    return report


def robertson(
    s: GridState,
    A: GridOperator,
    B: GridOperator,
    config: SuiteConfig | None = None,
) -> InequalityReport:
    """(ΔA)²(ΔB)² >= |<[A, B]>|²/4 with the commutator evaluated as <ψ|AB - BA|ψ>.

    Raises:
        BoundaryDecayError: If an operator application leaves the decay envelope.
    """
    config = _config(config, Engine.GRID)
    spec, hbar = s.spec, config.hbar

    a_psi = A.apply(s.amps, spec, hbar)
    b_psi = B.apply(s.amps, spec, hbar)
    ab_psi = A.apply(b_psi, spec, hbar)
    ba_psi = B.apply(a_psi, spec, hbar)
    for label, amps in ((A.label, a_psi), (B.label, b_psi), (f"{A.label}·{B.label}", ab_psi), (f"{B.label}·{A.label}", ba_psi)):
        try:
            require_decay(amps, spec, label=f"{label} applied to the state")
        except BoundaryDecayError:
            logger.error(f"robertson refused: {label} leaves the decay envelope")
            raise

    volume = spec.cell_volume
    mean_a = float(np.vdot(s.amps, a_psi).real) * volume
    mean_b = float(np.vdot(s.amps, b_psi).real) * volume
    var_a = float(np.sum(np.abs(a_psi - mean_a * s.amps) ** 2)) * volume
    var_b = float(np.sum(np.abs(b_psi - mean_b * s.amps) ** 2)) * volume
    commutator = complex(np.vdot(s.amps, ab_psi) - np.vdot(s.amps, ba_psi)) * volume

    return _report(
        RelationName.ROBERTSON,
        var_a * var_b,
        abs(commutator) ** 2 / 4.0,
        s.n_particles,
        config,
        Engine.GRID,
        hbar_power=2,
        variant=f"A={A.label},B={B.label}",
        sub_values={
            "var_a": var_a,
            "var_b": var_b,
            "commutator_re": commutator.real,
            "commutator_im": commutator.imag,
        },
    )


def collective_gur(
    m: MomentTable, config: SuiteConfig | None = None, engine: Engine = Engine.GAUSSIAN
) -> InequalityReport:
    """(ΔQ)²(ΔP)² >= N²ħ²/4 with the collective variances as full QCF double sums."""
    config = _config(config, engine)
    dq2, dp2 = collective_dispersions(m)
    return _report(
        RelationName.COLLECTIVE_GUR,
        dq2 * dp2,
        m.n**2 * config.hbar**2 / 4.0,
        m.n,
        config,
        engine,
        hbar_power=2,
        sub_values={"dq2": dq2, "dp2": dp2},
    )


def _split_sums(cov: np.ndarray) -> tuple[float, float]:
    n = cov.shape[0]
    diagonal = math.fsum(float(cov[i, i]) for i in range(n))
    off = math.fsum(float(cov[i, j]) for i in range(n) for j in range(n) if i != j)
    return diagonal, off


def gur_split(
    m: MomentTable, config: SuiteConfig | None = None, engine: Engine = Engine.GAUSSIAN
) -> InequalityReport:
    """GUR with single-particle variances and cross-particle QCF summed separately.

    Algebraically identical to :func:`collective_gur`; with a product state the
    off-diagonal sums vanish and the single-particle form is recovered.
    """
    config = _config(config, engine)
    diag_q, off_q = _split_sums(m.cov_q)
    diag_p, off_p = _split_sums(m.cov_p)
    return _report(
        RelationName.GUR_N,
        (diag_q + off_q) * (diag_p + off_p),
        m.n**2 * config.hbar**2 / 4.0,
        m.n,
        config,
        engine,
        hbar_power=2,
        sub_values={"diag_q": diag_q, "offdiag_q": off_q, "diag_p": diag_p, "offdiag_p": off_p},
    )


def _half_factor(cov: np.ndarray) -> float:
    return cov[0, 0] / 2.0 + cov[1, 1] / 2.0 + cov[0, 1]


def gur_two(
    m: MomentTable, config: SuiteConfig | None = None, engine: Engine = Engine.GAUSSIAN
) -> InequalityReport:
    """Two-particle GUR with the bracketed factors [(ΔQ₁)²/2 + (ΔQ₂)²/2 + C_Q(1,2)]·[...P...] >= ħ²/4.

    The factors are recorded as sub-values and the product is evaluated directly,
    without assuming either factor is positive.
    """
    _require_n(m, 2, RelationName.GUR_TWO)
    config = _config(config, engine)
    factor_q = float(_half_factor(m.cov_q))
    factor_p = float(_half_factor(m.cov_p))
    return _report(
        RelationName.GUR_TWO,
        factor_q * factor_p,
        config.hbar**2 / 4.0,
        m.n,
        config,
        engine,
        hbar_power=2,
        sub_values={"factor_q": factor_q, "factor_p": factor_p},
    )


def schwarz_pair_bound(
    m: MomentTable,
    which: Literal["Q", "P"],
    config: SuiteConfig | None = None,
    engine: Engine = Engine.GAUSSIAN,
) -> InequalityReport:
    """|C(1,2)| <= (ΔX₁)²/2 + (ΔX₂)²/2, reported as lhs = mean variance - |C(1,2)| >= 0."""
    name = RelationName.SCHWARZ_Q_TWO if which == "Q" else RelationName.SCHWARZ_P_TWO
    if which not in ("Q", "P"):
        raise InvalidArgumentError(f"which must be 'Q' or 'P', got {which!r}")
    _require_n(m, 2, name)
    config = _config(config, engine)
    cov = m.cov_q if which == "Q" else m.cov_p
    mean_variance = float(cov[0, 0] / 2.0 + cov[1, 1] / 2.0)
    qcf = float(cov[0, 1])
    return _report(
        name,
        mean_variance - abs(qcf),
        0.0,
        m.n,
        config,
        engine,
        hbar_power=1,
        sub_values={"qcf": qcf, "mean_variance": mean_variance},
    )


def gur_two_bound(
    m: MomentTable, config: SuiteConfig | None = None, engine: Engine = Engine.GAUSSIAN
) -> InequalityReport:
    """[(ΔQ₁)² + (ΔQ₂)²]·[(ΔP₁)² + (ΔP₂)²] >= ħ²/4."""
    _require_n(m, 2, RelationName.GUR_TWO_BOUND)
    config = _config(config, engine)
    sum_q = float(m.var_q.sum())
    sum_p = float(m.var_p.sum())
    return _report(
        RelationName.GUR_TWO_BOUND,
        sum_q * sum_p,
        config.hbar**2 / 4.0,
        m.n,
        config,
        engine,
        hbar_power=2,
        sub_values={"sum_var_q": sum_q, "sum_var_p": sum_p},
    )


def _check_equal_dispersions(values: np.ndarray, label: str) -> None:
    dispersions = np.sqrt(values)
    reference = float(dispersions[0])
    for i in range(1, dispersions.shape[0]):
        if abs(float(dispersions[i]) - reference) > SYMMETRIC_DISPERSION_RTOL * max(reference, float(dispersions[i])):
            raise PreconditionError(
                f"unequal dispersions: Δ{label}_1 = {reference:.12g} but Δ{label}_{i + 1} = {dispersions[i]:.12g}"
            )


def symmetric_product_bound(
    m: MomentTable, config: SuiteConfig | None = None, engine: Engine = Engine.GAUSSIAN
) -> InequalityReport:
    """ΔQ_iΔP_i >= ħ/4 (n=2) or ħ/8 (n=3) for particles prepared with equal dispersions.

    Raises:
        PreconditionError: If dispersions differ between particles.
    """
    if m.n not in (2, 3):
        raise InvalidArgumentError(f"symmetric bound applies to n=2 or n=3, got n={m.n}")
    _check_equal_dispersions(m.var_q, "Q")
    _check_equal_dispersions(m.var_p, "P")
    config = _config(config, engine)
    delta_q = math.sqrt(float(m.var_q[0]))
    delta_p = math.sqrt(float(m.var_p[0]))
    name, denominator = (RelationName.SYMMETRIC_TWO, 4.0) if m.n == 2 else (RelationName.SYMMETRIC_THREE, 8.0)
    return _report(
        name,
        delta_q * delta_p,
        config.hbar / denominator,
        m.n,
        config,
        engine,
        hbar_power=1,
        sub_values={"delta_q": delta_q, "delta_p": delta_p, "hur_reference": config.hbar / 2.0},
    )


def _signs_label(signs: tuple[int, ...]) -> str:
    return "signs=" + "".join("+" if a > 0 else "-" for a in signs)


def schwarz_triple_bounds(
    m: MomentTable,
    which: Literal["Q", "P"],
    config: SuiteConfig | None = None,
    engine: Engine = Engine.GAUSSIAN,
) -> list[InequalityReport]:
    """Three-particle sign-combination bounds Σ(ΔX_i)² >= -Σ_{i≠j} a_i a_j C(i,j).

    Reports the four inequivalent sign vectors first, then the remaining four
    (each the negation of one already listed), then the two sides of the combined
    bound -Σ(ΔX_i)² <= Σ_{i≠j} C(i,j) <= 3Σ(ΔX_i)².
    """
    name = RelationName.SCHWARZ_THREE_Q if which == "Q" else RelationName.SCHWARZ_THREE_P
    if which not in ("Q", "P"):
        raise InvalidArgumentError(f"which must be 'Q' or 'P', got {which!r}")
    _require_n(m, 3, name)
    config = _config(config, engine)
    cov = m.cov_q if which == "Q" else m.cov_p
    sum_var = math.fsum(float(cov[i, i]) for i in range(3))
    off_sum = math.fsum(float(cov[i, j]) for i in range(3) for j in range(3) if i != j)

    reports: list[InequalityReport] = []
    for signs in ALL_SIGN_VECTORS:
        correlated = math.fsum(signs[i] * signs[j] * float(cov[i, j]) for i in range(3) for j in range(3) if i != j)
        reports.append(
            _report(
                name,
                sum_var,
                -correlated,
                m.n,
                config,
                engine,
                hbar_power=1,
                variant=_signs_label(signs),
                sub_values={"derivation_case": 1.0 if signs in DERIVATION_SIGN_VECTORS else 0.0},
            )
        )
    reports.append(
        _report(name, off_sum, -sum_var, m.n, config, engine, hbar_power=1, variant="combined_lower",
                sub_values={"sum_var": sum_var, "offdiag_sum": off_sum})
    )
    reports.append(
        _report(name, 3.0 * sum_var, off_sum, m.n, config, engine, hbar_power=1, variant="combined_upper",
                sub_values={"sum_var": sum_var, "offdiag_sum": off_sum})
    )
    return reports


def gur_three_bound(
    m: MomentTable, config: SuiteConfig | None = None, engine: Engine = Engine.GAUSSIAN
) -> InequalityReport:
    """(Σ(ΔQ_i)²)(Σ(ΔP_i)²) >= 9ħ²/64."""
    _require_n(m, 3, RelationName.GUR_THREE_BOUND)
    config = _config(config, engine)
    sum_q = float(m.var_q.sum())
    sum_p = float(m.var_p.sum())
    return _report(
        RelationName.GUR_THREE_BOUND,
        sum_q * sum_p,
        9.0 * config.hbar**2 / 64.0,
        m.n,
        config,
        engine,
        hbar_power=2,
        sub_values={"sum_var_q": sum_q, "sum_var_p": sum_p},
    )


def derivation_chain_holds(m: MomentTable, atol: float = 1e-12) -> bool:
    """Substituting the Schwarz upper bounds never lowers the two-particle product.

    [(ΔQ₁)²/2 + (ΔQ₂)²/2 + C_Q(1,2)]·[...P...] <= [(ΔQ₁)² + (ΔQ₂)²]·[(ΔP₁)² + (ΔP₂)²]
    whenever both bracketed factors are non-negative; vacuously true otherwise.
    """
    _require_n(m, 2, RelationName.GUR_TWO)
    factor_q = float(_half_factor(m.cov_q))
    factor_p = float(_half_factor(m.cov_p))
    if factor_q < 0 or factor_p < 0:
        return True
    bound = float(m.var_q.sum()) * float(m.var_p.sum())
    return factor_q * factor_p <= bound + atol * max(bound, 1.0)


_REQUIRED_N: dict[RelationName, tuple[int, ...]] = {
    RelationName.GUR_TWO: (2,),
    RelationName.SCHWARZ_Q_TWO: (2,),
    RelationName.SCHWARZ_P_TWO: (2,),
    RelationName.GUR_TWO_BOUND: (2,),
    RelationName.SYMMETRIC_TWO: (2,),
    RelationName.SCHWARZ_THREE_Q: (3,),
    RelationName.SCHWARZ_THREE_P: (3,),
    RelationName.GUR_THREE_BOUND: (3,),
    RelationName.SYMMETRIC_THREE: (3,),
}


def evaluate_suite(
    m: MomentTable,
    config: SuiteConfig | None = None,
    engine: Engine = Engine.GAUSSIAN,
    descriptor: str = "",
    relations: Iterable[RelationName] | None = None,
) -> SuiteOutcome:
    """Evaluate every requested moment-level relation; record inapplicable ones as skipped.

    Args:
        m: Moments of the state.
        config: Suite config, defaults to the engine's tolerance at ħ = 1.
        engine: Engine that produced m.
        descriptor: State descriptor attached to every report.
        relations: Relations to evaluate (default: all of them).

    Returns:
        SuiteOutcome with reports tagged by descriptor and a reason for each skipped relation.
    """
    config = _config(config, engine)
    requested = list(RelationName) if relations is None else list(relations)
    outcome = SuiteOutcome()

    for relation in requested:
        if relation is RelationName.ROBERTSON:
            outcome.skipped[relation.value] = "not applicable: needs operator application on a grid state"
            continue
        allowed = _REQUIRED_N.get(relation)
        if allowed is not None and m.n not in allowed:
            outcome.skipped[relation.value] = f"not applicable: requires n={allowed[0]}, state has n={m.n}"
            continue
        try:
            outcome.reports.extend(_evaluate_one(relation, m, config, engine))
        except PreconditionError as e:
            outcome.skipped[relation.value] = f"not applicable: {e}"

    outcome.reports = [r.with_descriptor(descriptor) for r in outcome.reports]
    return outcome


def _evaluate_one(
    relation: RelationName, m: MomentTable, config: SuiteConfig, engine: Engine
) -> list[InequalityReport]:
    match relation:
        case RelationName.COLLECTIVE_GUR:
            return [collective_gur(m, config, engine)]
        case RelationName.GUR_N:
            return [gur_split(m, config, engine)]
        case RelationName.GUR_TWO:
            return [gur_two(m, config, engine)]
        case RelationName.SCHWARZ_Q_TWO:
            return [schwarz_pair_bound(m, "Q", config, engine)]
        case RelationName.SCHWARZ_P_TWO:
            return [schwarz_pair_bound(m, "P", config, engine)]
        case RelationName.GUR_TWO_BOUND:
            return [gur_two_bound(m, config, engine)]
        case RelationName.SYMMETRIC_TWO | RelationName.SYMMETRIC_THREE:
            return [symmetric_product_bound(m, config, engine)]
        case RelationName.SCHWARZ_THREE_Q:
            return schwarz_triple_bounds(m, "Q", config, engine)
        case RelationName.SCHWARZ_THREE_P:
            return schwarz_triple_bounds(m, "P", config, engine)
        case RelationName.GUR_THREE_BOUND:
            return [gur_three_bound(m, config, engine)]
        case RelationName.ROBERTSON:
            raise InvalidArgumentError("robertson needs a grid state and two operators")
