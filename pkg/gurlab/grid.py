"""Discretized N-particle wavefunction engine (1D per particle, N <= 3).

Grid conventions, fixed for the whole package:

* Points are cell midpoints x_k = x_min + (k + 1/2)Δx, Δx = (x_max - x_min)/M.
* Array axis k holds particle k + 1.
* Momenta come from the DFT along an axis: p = ħ·2πm/(MΔx), m in [-M/2, M/2)
  (``scipy.fft.fftfreq`` order). The constant phase from x_min drops out of
  every |DFT|² density, so densities need no shift correction.
* Normalization is Σ|ψ|²·Δx^N = 1.

States whose amplitude on the outermost grid layer exceeds 1e-6 of the peak are
rejected: momentum moments from the DFT assume negligible boundary support.
"""

import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
from typing import Any, Literal, Self

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gurlab.core import (
    DEFAULT_HBAR,
    FloatArray,
    GurError,
    InvalidArgumentError,
    MomentTable,
    max_moment_difference,
)
from gurlab.gaussian import GaussianState

logger = logging.getLogger(__name__)

DEFAULT_MEMORY_CAP = 2**24
DEFAULT_EXTENT = 14.0
DEFAULT_POINTS = {1: 256, 2: 256, 3: 64}
NORMALIZATION_TOL = 1e-10
SYMMETRY_TOL = 1e-10
BOUNDARY_DECAY = 1e-6
DEGENERATE_NORM = 1e-12

ComplexArray = np.ndarray[Any, np.dtype[np.complex128]]
Wavefunction = Callable[..., Any]


class BoundaryDecayError(InvalidArgumentError):
    """Raised when a wavefunction has non-negligible support on the grid boundary.

    Attributes:
        ratio: Largest boundary amplitude relative to the peak.
    """

    def __init__(self, message: str, ratio: float) -> None:
        super().__init__(message)
        self.ratio = ratio


class DegenerateProjectionError(GurError):
    """Raised when an (anti)symmetrizer annihilates the state."""


class Symmetry(StrEnum):
    """Exchange symmetry tag of a grid state."""

    NONE = "none"
    BOSONIC = "bosonic"
    FERMIONIC = "fermionic"


class GridSpec(BaseModel):
    """Uniform grid shared by all particles."""

    model_config = ConfigDict(frozen=True)

    n_particles: int = Field(ge=1, le=3)
    points_per_axis: int = Field(ge=16, description="Power of two")
    x_min: float = Field(allow_inf_nan=False)
    x_max: float = Field(allow_inf_nan=False)
    max_amplitudes: int = Field(default=DEFAULT_MEMORY_CAP, ge=1, description="Memory cap (complex values)")

    @field_validator("points_per_axis")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"points_per_axis must be a power of two, got {value}")
        return value

    @model_validator(mode="after")
    def _extent_and_cap(self) -> Self:
        if self.x_max <= self.x_min:
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        total = self.points_per_axis**self.n_particles
        if total > self.max_amplitudes:
            raise ValueError(
                f"{self.points_per_axis}^{self.n_particles} = {total} amplitudes exceeds the "
                f"memory cap of {self.max_amplitudes}"
            )
        return self

    @classmethod
    def default(cls, n_particles: int, hbar: float = DEFAULT_HBAR, extent: float = DEFAULT_EXTENT) -> Self:
        """Default resolution for n particles; the extent scales with √ħ."""
        half = extent * math.sqrt(hbar)
        return cls(
            n_particles=n_particles,
            points_per_axis=DEFAULT_POINTS[n_particles],
            x_min=-half,
            x_max=half,
        )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n_particles

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n_particles

    def axis(self) -> FloatArray:
        """Cell-midpoint coordinates of one axis."""
        return self.x_min + (np.arange(self.points_per_axis) + 0.5) * self.dx

    def momenta(self, hbar: float = DEFAULT_HBAR) -> FloatArray:
        """Momentum of each DFT bin in FFT order: p = ħ·2πm/(MΔx)."""
        return hbar * 2.0 * np.pi * scipy.fft.fftfreq(self.points_per_axis, d=self.dx)

    def along(self, values: FloatArray, axis: int) -> FloatArray:
        """Reshape a per-axis vector so it broadcasts along array axis ``axis``."""
        shape = [1] * self.n_particles
        shape[axis] = self.points_per_axis
        return values.reshape(shape)


def _l2_norm(amps: ComplexArray, spec: GridSpec) -> float:
    return math.sqrt(float(np.sum(np.abs(amps) ** 2)) * spec.cell_volume)


def _inner(a: ComplexArray, b: ComplexArray, spec: GridSpec) -> complex:
    """<a|b> on the grid."""
    return complex(np.vdot(a, b)) * spec.cell_volume


def _transpositions(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n), 2))


def _parity(perm: tuple[int, ...]) -> int:
    inversions = sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])
    return -1 if inversions % 2 else 1


def _swap(amps: ComplexArray, i: int, j: int) -> ComplexArray:
    return np.swapaxes(amps, i, j)


def boundary_ratio(amps: ComplexArray) -> tuple[float, int, int]:
    """Largest boundary amplitude relative to the peak.

    Returns:
        Tuple of (ratio, axis, side) where side 0 is x_min and -1 is x_max.
    """
    magnitude = np.abs(amps)
    peak = float(magnitude.max())
    if peak == 0.0:
        return 0.0, 0, 0
    worst = (0.0, 0, 0)
    for axis in range(amps.ndim):
        for side in (0, -1):
            edge = float(np.take(magnitude, side, axis=axis).max()) / peak
            if edge > worst[0]:
                worst = (edge, axis, side)
    return worst


def require_decay(amps: ComplexArray, spec: GridSpec, label: str = "wavefunction") -> None:
    """Raise BoundaryDecayError when the boundary layer exceeds 1e-6 of the peak."""
    ratio, axis, side = boundary_ratio(amps)
    if ratio > BOUNDARY_DECAY:
        edge = spec.x_min if side == 0 else spec.x_max
        name = "x_min" if side == 0 else "x_max"
        raise BoundaryDecayError(
            f"{label} does not decay at the grid boundary: particle {axis + 1} at {name}={edge:g} "
            f"has amplitude {ratio:.2e} of the peak (limit {BOUNDARY_DECAY:.0e}); "
            f"widen the extent [{spec.x_min:g}, {spec.x_max:g}]",
            ratio,
        )


@dataclass(frozen=True)
class GridState:
    """Normalized complex amplitudes of an N-particle wavefunction on a uniform grid."""

    spec: GridSpec
    amps: ComplexArray
    symmetry: Symmetry = Symmetry.NONE

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.shape != self.spec.shape:
            raise InvalidArgumentError(f"amplitudes must have shape {self.spec.shape}, got {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("amplitudes contain non-finite values")

        norm = _l2_norm(amps, self.spec)
        if abs(norm**2 - 1.0) > NORMALIZATION_TOL:
            raise InvalidArgumentError(f"state is not normalized: Σ|ψ|²Δx^N = {norm**2:.12f}")

        if self.symmetry is not Symmetry.NONE:
            sign = 1.0 if self.symmetry is Symmetry.BOSONIC else -1.0
            for i, j in _transpositions(self.spec.n_particles):
                defect = _l2_norm(amps - sign * _swap(amps, i, j), self.spec)
                if defect > SYMMETRY_TOL:
                    raise InvalidArgumentError(
                        f"amplitudes are not {self.symmetry} under swapping particles "
                        f"{i + 1} and {j + 1} (L2 defect {defect:.2e})"
                    )

        require_decay(amps, self.spec)
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def n_particles(self) -> int:
        return self.spec.n_particles


def _coordinates(spec: GridSpec) -> list[FloatArray]:
    x = spec.axis()
    return [spec.along(x, k) for k in range(spec.n_particles)]


def _normalized(amps: ComplexArray, spec: GridSpec) -> ComplexArray:
    norm = _l2_norm(amps, spec)
    if norm == 0.0 or not math.isfinite(norm):
        raise InvalidArgumentError("wavefunction has zero norm on the grid (all samples vanish)")
    return amps / norm


def from_function(spec: GridSpec, psi: Wavefunction) -> GridState:
    """Sample psi(x_1, ..., x_N) on the grid and normalize.

    Raises:
        InvalidArgumentError: If psi is non-finite or vanishes everywhere on the grid.
        BoundaryDecayError: If psi does not decay at the grid boundary.
    """
    coords = np.meshgrid(*([spec.axis()] * spec.n_particles), indexing="ij", sparse=True)
    values = np.broadcast_to(np.asarray(psi(*coords), dtype=np.complex128), spec.shape)
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("wavefunction is not finite on the grid")
    amps = _normalized(np.array(values), spec)
    ratio, _, _ = boundary_ratio(amps)
    logger.debug(f"sampled wavefunction on {spec.shape} grid, boundary ratio {ratio:.2e}")
    return GridState(spec=spec, amps=amps)


def symmetrize(s: GridState, kind: Symmetry | Literal["bosonic", "fermionic"]) -> GridState:
    """Project onto the bosonic or fermionic subspace and renormalize.

    Raises:
        DegenerateProjectionError: If the projection annihilates the state.
    """
    kind = Symmetry(kind)
    if kind is Symmetry.NONE:
        raise InvalidArgumentError("symmetrize needs kind 'bosonic' or 'fermionic'")
    n = s.n_particles
    perms = list(itertools.permutations(range(n)))
    projected = np.zeros_like(s.amps)
    for perm in perms:
        sign = _parity(perm) if kind is Symmetry.FERMIONIC else 1
        projected += sign * np.transpose(s.amps, perm)
    projected /= len(perms)

    norm = _l2_norm(projected, s.spec)
    if norm**2 < DEGENERATE_NORM:
        raise DegenerateProjectionError(
            f"{kind} projection annihilates the state (remaining norm² {norm**2:.2e})"
        )
    return GridState(spec=s.spec, amps=projected / norm, symmetry=kind)


def with_phase(s: GridState, p0: float, particle: int = 1, hbar: float = DEFAULT_HBAR) -> GridState:
    """Multiply by exp(i·p0·x_particle/ħ): a momentum displacement of one particle."""
    _check_particle(particle, s.n_particles)
    x = s.spec.along(s.spec.axis(), particle - 1)
    amps = s.amps * np.exp(1j * p0 * x / hbar)
    symmetry = s.symmetry if s.n_particles == 1 else Symmetry.NONE
    return GridState(spec=s.spec, amps=_normalized(amps, s.spec), symmetry=symmetry)


def _check_particle(particle: int, n: int) -> None:
    if not 1 <= particle <= n:
        raise InvalidArgumentError(f"particle index must be in 1..{n}, got {particle}")


def apply_position(amps: ComplexArray, spec: GridSpec, axis: int) -> ComplexArray:
    """Q_{axis+1} ψ."""
    return amps * spec.along(spec.axis(), axis)


def apply_momentum(amps: ComplexArray, spec: GridSpec, axis: int, hbar: float = DEFAULT_HBAR) -> ComplexArray:
    """P_{axis+1} ψ by spectral differentiation."""
    p = spec.along(spec.momenta(hbar), axis)
    return scipy.fft.ifft(p * scipy.fft.fft(amps, axis=axis), axis=axis)


@dataclass(frozen=True)
class GridOperator:
    """Real linear combination of single-particle Q_i and P_i (1-based particles)."""

    terms: tuple[tuple[Literal["Q", "P"], int, float], ...]

    def __add__(self, other: "GridOperator") -> "GridOperator":
        return GridOperator(self.terms + other.terms)

    def __mul__(self, factor: float) -> "GridOperator":
        return GridOperator(tuple((kind, i, c * factor) for kind, i, c in self.terms))

    __rmul__ = __mul__

    @property
    def label(self) -> str:
        parts = []
        for kind, i, c in self.terms:
            prefix = "" if c == 1 else ("-" if c == -1 else f"{c:g}*")
            parts.append(f"{prefix}{kind}{i}")
        return "+".join(parts).replace("+-", "-")

    def apply(self, amps: ComplexArray, spec: GridSpec, hbar: float = DEFAULT_HBAR) -> ComplexArray:
        result = np.zeros_like(amps)
        for kind, particle, coef in self.terms:
            _check_particle(particle, spec.n_particles)
            if kind == "Q":
                result += coef * apply_position(amps, spec, particle - 1)
            else:
                result += coef * apply_momentum(amps, spec, particle - 1, hbar)
        return result


def position_operator(particle: int) -> GridOperator:
    return GridOperator((("Q", particle, 1.0),))


def momentum_operator(particle: int) -> GridOperator:
    return GridOperator((("P", particle, 1.0),))


def collective_position(n: int) -> GridOperator:
    """Q = Q_1 + ... + Q_N."""
    return GridOperator(tuple(("Q", i, 1.0) for i in range(1, n + 1)))


def collective_momentum(n: int) -> GridOperator:
    """P = P_1 + ... + P_N."""
    return GridOperator(tuple(("P", i, 1.0) for i in range(1, n + 1)))


def expectation(s: GridState, op: GridOperator, hbar: float = DEFAULT_HBAR) -> float:
    """<ψ|O|ψ> for a Hermitian grid operator."""
    return _inner(s.amps, op.apply(s.amps, s.spec, hbar), s.spec).real


class CommutationReport(BaseModel):
    """Residuals ‖(OT - TO)ψ‖/‖Oψ‖ for every transposition T.

    Keys look like ``"Q:(1,2)"``; ``Q1`` keys are the single-particle control.
    """

    model_config = ConfigDict(frozen=True)

    residuals: dict[str, float]

    @property
    def max_physical(self) -> float:
        """Largest residual among the collective observables Q and P."""
        return max(v for k, v in self.residuals.items() if not k.startswith("Q1:"))

    @property
    def control(self) -> float:
        """Largest residual of the non-physical control Q_1."""
        return max(v for k, v in self.residuals.items() if k.startswith("Q1:"))


def permutation_commutation_check(s: GridState, hbar: float = DEFAULT_HBAR) -> CommutationReport:
    """Check that collective Q and P commute with particle transpositions.

    The extended observable Q_1 is included as a positive control: it does not
    commute with transpositions involving particle 1.
    """
    n = s.n_particles
    if n < 2:
        raise InvalidArgumentError("permutation checks need at least two particles")
    observables = {
        "Q": collective_position(n),
        "P": collective_momentum(n),
        "Q1": position_operator(1),
    }
    residuals: dict[str, float] = {}
    for label, op in observables.items():
        o_psi = op.apply(s.amps, s.spec, hbar)
        scale = _l2_norm(o_psi, s.spec)
        for i, j in _transpositions(n):
            ot = op.apply(np.ascontiguousarray(_swap(s.amps, i, j)), s.spec, hbar)
            to = _swap(o_psi, i, j)
            defect = _l2_norm(ot - to, s.spec)
            residuals[f"{label}:({i + 1},{j + 1})"] = defect / scale if scale > 0 else defect
    logger.debug(f"permutation residuals: {residuals}")
    return CommutationReport(residuals=residuals)


def _marginal(density: FloatArray, keep: tuple[int, ...]) -> FloatArray:
    drop = tuple(k for k in range(density.ndim) if k not in keep)
    return density.sum(axis=drop) if drop else density


def _central_moments(
    density_for: Callable[[tuple[int, ...]], FloatArray],
    values: FloatArray,
    n: int,
) -> tuple[FloatArray, FloatArray]:
    """Means and covariance matrix from per-axis and per-pair densities."""
    mean = np.zeros(n)
    cov = np.zeros((n, n))
    for i in range(n):
        marginal = _marginal(density_for((i,)), (i,))
        mean[i] = float(np.sum(values * marginal))
        cov[i, i] = float(np.sum((values - mean[i]) ** 2 * marginal))
    for i, j in _transpositions(n):
        joint = _marginal(density_for((i, j)), (i, j))
        centred = np.outer(values - mean[i], values - mean[j])
        cov[i, j] = cov[j, i] = float(np.sum(centred * joint))
    return mean, cov


def _probability(amps: ComplexArray) -> FloatArray:
    density = np.abs(amps) ** 2
    return density / density.sum()


def moments(s: GridState, hbar: float = DEFAULT_HBAR) -> MomentTable:
    """MomentTable by midpoint quadrature (positions) and DFT densities (momenta).

    ⟨P_iP_j⟩ for i != j transforms both axes and integrates p_i·p_j against the
    joint momentum density.
    """
    spec = s.spec
    n = spec.n_particles
    position_density = _probability(s.amps)
    mean_q, cov_q = _central_moments(lambda _axes: position_density, spec.axis(), n)

    cache: dict[tuple[int, ...], FloatArray] = {}

    def momentum_density(axes: tuple[int, ...]) -> FloatArray:
        if axes not in cache:
            cache[axes] = _probability(scipy.fft.fftn(s.amps, axes=axes))
        return cache[axes]

    mean_p, cov_p = _central_moments(momentum_density, spec.momenta(hbar), n)
    return MomentTable(n=n, mean_q=mean_q, mean_p=mean_p, cov_q=cov_q, cov_p=cov_p)


def collective_operator_variance(
    s: GridState, which: Literal["Q", "P"], hbar: float = DEFAULT_HBAR
) -> float:
    """Variance of Q = ΣQ_i or P = ΣP_i applied directly to the amplitudes.

    Independent of the QCF decomposition, so it cross-checks
    :func:`gurlab.core.collective_dispersions`.
    """
    if which not in ("Q", "P"):
        raise InvalidArgumentError(f"which must be 'Q' or 'P', got {which!r}")
    n = s.n_particles
    if n == 1:
        table = moments(s, hbar)
        return float(table.cov_q[0, 0] if which == "Q" else table.cov_p[0, 0])
    op = collective_position(n) if which == "Q" else collective_momentum(n)
    o_psi = op.apply(s.amps, s.spec, hbar)
    mean = _inner(s.amps, o_psi, s.spec).real
    return _l2_norm(o_psi - mean * s.amps, s.spec) ** 2


def parseval_residual(s: GridState) -> float:
    """Largest relative mismatch of Σ|ψ|² against Σ|DFT ψ|²/M over single-axis transforms."""
    total = float(np.sum(np.abs(s.amps) ** 2))
    m = s.spec.points_per_axis
    worst = 0.0
    for axis in range(s.n_particles):
        transformed = float(np.sum(np.abs(scipy.fft.fft(s.amps, axis=axis)) ** 2)) / m
        worst = max(worst, abs(total - transformed) / total)
    return worst


def moment_error(s: GridState, reference: MomentTable, hbar: float = DEFAULT_HBAR) -> float:
    """Max entrywise difference between grid moments and a reference table."""
    return max_moment_difference(moments(s, hbar), reference)


def from_gaussian(spec: GridSpec, state: GaussianState) -> GridState:
    """Sample the closed-form wavefunction of a pure Gaussian state.

    ψ(x) ∝ exp(-(x-q̄)ᵀZ(x-q̄)/(2ħ) + i·p̄·(x-q̄)/ħ) with Z = U + iV,
    U = (ħ/2)σ_qq⁻¹ and V = -σ_qq⁻¹σ_qp.

    Raises:
        InvalidArgumentError: On particle-count mismatch or a mixed state.
    """
    if state.n != spec.n_particles:
        raise InvalidArgumentError(f"state has {state.n} modes but the grid has {spec.n_particles} particles")
    hbar = state.hbar
    inv_qq = np.linalg.inv(state.sigma_qq)
    u = 0.5 * hbar * inv_qq
    v = -inv_qq @ state.sigma_qp
    v = 0.5 * (v + v.T)
    expected_pp = 0.5 * hbar * (u + v @ np.linalg.inv(u) @ v)
    if not np.allclose(expected_pp, state.sigma_pp, rtol=1e-8, atol=1e-12 * hbar):
        raise InvalidArgumentError("only pure Gaussian states have a wavefunction")
    z = u + 1j * v
    n = state.n
    q_bar = state.mean[:n]
    p_bar = state.mean[n:]

    def psi(*xs: FloatArray) -> ComplexArray:
        shifted = [x - q_bar[k] for k, x in enumerate(xs)]
        exponent: Any = 0.0
        for a, b in itertools.product(range(n), repeat=2):
            exponent = exponent - z[a, b] * shifted[a] * shifted[b] / (2.0 * hbar)
        for a in range(n):
            exponent = exponent + 1j * p_bar[a] * shifted[a] / hbar
        return np.exp(exponent)

    return from_function(spec, psi)


def correlated_gaussian(a: float, b: float, hbar: float = DEFAULT_HBAR) -> Wavefunction:
    """ψ(x₁, x₂) = exp(-(a(x₁²+x₂²)/2 + b·x₁x₂)/ħ); normalizable iff a > |b|.

    With A = [[a, b], [b, a]] the moments are σ_qq = ħA⁻¹/2 and σ_pp = ħA/2.
    """

    def psi(x1: FloatArray, x2: FloatArray) -> FloatArray:
        return np.exp(-(a * (x1**2 + x2**2) / 2.0 + b * x1 * x2) / hbar)

    return psi
