"""Shared constants, moment bookkeeping and report types.

Every relation in :mod:`gurlab.inequalities` reads its inputs from a
:class:`MomentTable`; both engines produce one. Covariances follow the
quantum covariance function convention C(i, j) = <X_i X_j> - <X_i><X_j>.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Literal, Self

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

DEFAULT_HBAR = 1.0
HBAR_SI = 1.054571817e-34  # J*s

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10

FloatArray = NDArray[np.float64]


class GurError(Exception):
    """Base class for every gurlab error."""


class InvalidArgumentError(GurError, ValueError):
    """Raised when an operation receives an input outside its domain."""


class InvariantError(GurError):
    """Raised when a constructed value breaks a documented invariant (engine bug)."""


class Engine(StrEnum):
    """Which engine produced a set of moments."""

    GAUSSIAN = "gaussian"
    GRID = "grid"


class RelationName(StrEnum):
    """Identifiers of every evaluated uncertainty relation."""

    ROBERTSON = "robertson"
    COLLECTIVE_GUR = "collective_gur"
    GUR_N = "gur_n"
    GUR_TWO = "gur_two"
    SCHWARZ_Q_TWO = "schwarz_q_two"
    SCHWARZ_P_TWO = "schwarz_p_two"
    GUR_TWO_BOUND = "gur_two_bound"
    SYMMETRIC_TWO = "symmetric_two"
    SCHWARZ_THREE_Q = "schwarz_three_q"
    SCHWARZ_THREE_P = "schwarz_three_p"
    GUR_THREE_BOUND = "gur_three_bound"
    SYMMETRIC_THREE = "symmetric_three"


class Constants(BaseModel):
    """Physical constants of a run. Q and P are in oscillator units."""

    model_config = ConfigDict(frozen=True)

    hbar: float = Field(default=DEFAULT_HBAR, gt=0, allow_inf_nan=False, description="Action unit")

    @classmethod
    def si(cls) -> Self:
        """Constants with hbar in SI units (J*s)."""
        return cls(hbar=HBAR_SI)


def check_psd(matrix: FloatArray, label: str) -> None:
    """Raise InvariantError unless every eigenvalue is >= -1e-10 * trace."""
    eigenvalues = np.linalg.eigvalsh(matrix)
    scale = max(float(np.trace(matrix)), 0.0)
    floor = -PSD_RTOL * scale if scale > 0 else -PSD_RTOL
    if eigenvalues.size and float(eigenvalues.min()) < floor:
        raise InvariantError(
            f"{label} is not positive semi-definite: min eigenvalue {eigenvalues.min():.3e} "
            f"< {floor:.3e}"
        )


def _check_symmetric(matrix: FloatArray, label: str) -> None:
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asymmetry > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise InvariantError(f"{label} is not symmetric (max |C - C^T| = {asymmetry:.3e})")


@dataclass(frozen=True)
class MomentTable:
    """First moments and quantum covariance functions of N particles.

    Attributes:
        n: Particle count.
        mean_q: <Q_i>, shape (n,).
        mean_p: <P_i>, shape (n,).
        cov_q: C_Q(i, j), shape (n, n).
        cov_p: C_P(i, j), shape (n, n).
    """

    n: int
    mean_q: FloatArray
    mean_p: FloatArray
    cov_q: FloatArray
    cov_p: FloatArray

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidArgumentError(f"particle count must be >= 1, got {self.n}")
        for name, shape in (
            ("mean_q", (self.n,)),
            ("mean_p", (self.n,)),
            ("cov_q", (self.n, self.n)),
            ("cov_p", (self.n, self.n)),
        ):
            value = np.array(getattr(self, name), dtype=np.float64)
            if value.shape != shape:
                raise InvalidArgumentError(f"{name} must have shape {shape}, got {value.shape}")
            if not np.all(np.isfinite(value)):
                raise InvalidArgumentError(f"{name} contains non-finite entries")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

        for label, cov in (("cov_q", self.cov_q), ("cov_p", self.cov_p)):
            _check_symmetric(cov, label)
            check_psd(cov, label)

    @classmethod
    def from_arrays(
        cls,
        mean_q: ArrayLike,
        mean_p: ArrayLike,
        cov_q: ArrayLike,
        cov_p: ArrayLike,
    ) -> Self:
        """Build a table inferring n from the mean vector."""
        mq = np.atleast_1d(np.asarray(mean_q, dtype=np.float64))
        return cls(
            n=int(mq.shape[0]),
            mean_q=mq,
            mean_p=np.atleast_1d(np.asarray(mean_p, dtype=np.float64)),
            cov_q=np.atleast_2d(np.asarray(cov_q, dtype=np.float64)),
            cov_p=np.atleast_2d(np.asarray(cov_p, dtype=np.float64)),
        )

    @property
    def var_q(self) -> FloatArray:
        """(ΔQ_i)^2 for every particle."""
        return np.diag(self.cov_q).copy()

    @property
    def var_p(self) -> FloatArray:
        """(ΔP_i)^2 for every particle."""
        return np.diag(self.cov_p).copy()

    def off_diagonal_sum(self, which: Literal["Q", "P"]) -> float:
        """Sum of C(i, j) over i != j."""
        cov = self.cov_q if which == "Q" else self.cov_p
        return float(cov.sum() - np.trace(cov))

    def flatten(self) -> dict[str, float]:
        """Flat name -> value mapping (1-based particle labels) for tabular export."""
        flat: dict[str, float] = {}
        for i in range(self.n):
            flat[f"mean_q_{i + 1}"] = float(self.mean_q[i])
        for i in range(self.n):
            flat[f"mean_p_{i + 1}"] = float(self.mean_p[i])
        for label, cov in (("cov_q", self.cov_q), ("cov_p", self.cov_p)):
            for i in range(self.n):
                for j in range(i, self.n):
                    flat[f"{label}_{i + 1}_{j + 1}"] = float(cov[i, j])
        return flat


def collective_dispersions(m: MomentTable) -> tuple[float, float]:
    """Variances of the collective Q = ΣQ_i and P = ΣP_i.

    The collective variance is the full double sum of the QCF matrix.

    Returns:
        Tuple of (ΔQ)^2, (ΔP)^2.

    Raises:
        InvariantError: If a sum is negative beyond rounding (broken upstream engine).
    """
    dq2 = float(m.cov_q.sum())
    dp2 = float(m.cov_p.sum())
    for label, value, cov in (("(ΔQ)^2", dq2, m.cov_q), ("(ΔP)^2", dp2, m.cov_p)):
        if value < -PSD_RTOL * max(float(np.trace(cov)), np.finfo(float).tiny):
            raise InvariantError(f"collective dispersion {label} = {value:.3e} is negative")
    return max(dq2, 0.0), max(dp2, 0.0)


def qcf_vanishes(m: MomentTable, atol: float = 1e-12) -> bool:
    """True iff every off-diagonal C_Q(i, j) and C_P(i, j) is within atol of zero."""
    off = ~np.eye(m.n, dtype=bool)
    return bool(np.all(np.abs(m.cov_q[off]) <= atol) and np.all(np.abs(m.cov_p[off]) <= atol))


def max_moment_difference(a: MomentTable, b: MomentTable) -> float:
    """Largest entrywise absolute difference between two tables of equal n."""
    if a.n != b.n:
        raise InvalidArgumentError(f"cannot compare tables with n={a.n} and n={b.n}")
    return max(
        float(np.max(np.abs(a.mean_q - b.mean_q))),
        float(np.max(np.abs(a.mean_p - b.mean_p))),
        float(np.max(np.abs(a.cov_q - b.cov_q))),
        float(np.max(np.abs(a.cov_p - b.cov_p))),
    )


def rescale_moments(m: MomentTable, lam: float) -> MomentTable:
    """Apply the canonical rescaling q -> λq, p -> p/λ."""
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidArgumentError(f"scale factor must be finite and positive, got {lam}")
    return MomentTable(
        n=m.n,
        mean_q=m.mean_q * lam,
        mean_p=m.mean_p / lam,
        cov_q=m.cov_q * lam**2,
        cov_p=m.cov_p / lam**2,
    )


class InequalityReport(BaseModel):
    """One evaluated relation: lhs >= rhs holds iff slack >= -tol."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["relation"] = "relation"
    name: RelationName
    variant: str = ""
    n: int = Field(ge=1)
    engine: Engine
    lhs: float
    rhs: float
    slack: float
    holds: bool
    tol: float = Field(gt=0)
    sub_values: dict[str, float] = Field(default_factory=dict)
    state_descriptor: str = ""

    @model_validator(mode="after")
    def _verdict_matches_slack(self) -> Self:
        if self.holds != (self.slack >= -self.tol):
            raise InvariantError(
                f"{self.name} verdict {self.holds} disagrees with slack {self.slack:.3e} (tol {self.tol:.1e})"
            )
        return self

    @classmethod
    def evaluate(
        cls,
        name: RelationName,
        lhs: float,
        rhs: float,
        *,
        n: int,
        engine: Engine,
        tol: float,
        variant: str = "",
        sub_values: dict[str, float] | None = None,
        state_descriptor: str = "",
    ) -> Self:
        """Compute slack and verdict for lhs >= rhs."""
        slack = float(lhs) - float(rhs)
        return cls(
            name=name,
            variant=variant,
            n=n,
            engine=engine,
            lhs=float(lhs),
            rhs=float(rhs),
            slack=slack,
            holds=slack >= -tol,
            tol=tol,
            sub_values=dict(sub_values or {}),
            state_descriptor=state_descriptor,
        )

    def with_descriptor(self, descriptor: str) -> Self:
        """Copy of the report tagged with a state descriptor."""
        return self.model_copy(update={"state_descriptor": descriptor})

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.name.value, self.state_descriptor, self.variant)


class CheckResult(BaseModel):
    """Outcome of a non-inequality check (cross-engine agreement, commutation, engine refusal)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["check"] = "check"
    name: Literal["cross_engine", "permutation_commutation", "engine_refusal"]
    state_descriptor: str
    value: float
    tol: float
    passed: bool
    details: dict[str, float] = Field(default_factory=dict)

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.name, self.state_descriptor, "")
