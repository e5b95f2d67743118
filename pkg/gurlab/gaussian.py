"""Exact engine for N-mode Gaussian states.

Quadratures are ordered R = (q_1, ..., q_N, p_1, ..., p_N) everywhere in this
module, so the position and momentum QCF blocks are contiguous slices of the
covariance matrix. The symplectic form for this ordering is
Ω = [[0, I], [-I, 0]] and [R_a, R_b] = iħΩ_ab.

Every constructor returns a pure state and every state is checked for
symplectic validity, sigma + (iħ/2)Ω >= 0, on construction.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import block_diag

from gurlab.core import (
    DEFAULT_HBAR,
    FloatArray,
    InvalidArgumentError,
    InvariantError,
    MomentTable,
)

logger = logging.getLogger(__name__)

SIGMA_SYMMETRY_TOL = 1e-12
VALIDITY_TOL = 1e-10


def symplectic_form(n: int) -> FloatArray:
    """Ω for the (q..., p...) ordering of n modes."""
    identity = np.identity(n)
    zeros = np.zeros((n, n))
    return np.block([[zeros, identity], [-identity, zeros]])


def min_physical_eigenvalue(sigma: FloatArray, hbar: float) -> float:
    """Smallest eigenvalue of sigma + (iħ/2)Ω (Hermitian)."""
    n = sigma.shape[0] // 2
    return float(np.linalg.eigvalsh(sigma + 0.5j * hbar * symplectic_form(n)).min())


def is_physical(sigma: FloatArray, hbar: float = DEFAULT_HBAR) -> bool:
    """True iff sigma is the covariance matrix of a quantum state."""
    return min_physical_eigenvalue(sigma, hbar) >= -VALIDITY_TOL * hbar


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")


def _check_mode_count(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, int | np.integer) or n < 1:
        raise InvalidArgumentError(f"mode count must be an integer >= 1, got {n!r}")


@dataclass(frozen=True)
class GaussianState:
    """First and second moments of an n-mode Gaussian state.

    Attributes:
        n: Mode count (one mode per particle).
        mean: <R>, length 2n.
        sigma: sigma_ab = ½<{R_a, R_b}> - <R_a><R_b>, shape (2n, 2n).
        hbar: Action unit the moments are expressed in.
    """

    n: int
    mean: FloatArray
    sigma: FloatArray
    hbar: float = DEFAULT_HBAR

    def __post_init__(self) -> None:
        _check_mode_count(self.n)
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise InvalidArgumentError(f"hbar must be finite and positive, got {self.hbar}")
        mean = np.array(self.mean, dtype=np.float64)
        sigma = np.array(self.sigma, dtype=np.float64)
        if mean.shape != (2 * self.n,):
            raise InvalidArgumentError(f"mean must have shape ({2 * self.n},), got {mean.shape}")
        if sigma.shape != (2 * self.n, 2 * self.n):
            raise InvalidArgumentError(
                f"sigma must have shape ({2 * self.n}, {2 * self.n}), got {sigma.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(sigma))):
            raise InvalidArgumentError("mean and sigma must be finite")

        asymmetry = float(np.max(np.abs(sigma - sigma.T)))
        if asymmetry > SIGMA_SYMMETRY_TOL * max(float(np.max(np.abs(sigma))), self.hbar):
            raise InvariantError(f"sigma is not symmetric (max asymmetry {asymmetry:.3e})")

        min_eig = min_physical_eigenvalue(sigma, self.hbar)
        if min_eig < -VALIDITY_TOL * self.hbar:
            raise InvariantError(
                f"sigma violates the uncertainty principle: min eigenvalue of "
                f"sigma + (iħ/2)Ω is {min_eig:.3e}"
            )

        mean.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    @property
    def sigma_qq(self) -> FloatArray:
        return self.sigma[: self.n, : self.n]

    @property
    def sigma_pp(self) -> FloatArray:
        return self.sigma[self.n :, self.n :]

    @property
    def sigma_qp(self) -> FloatArray:
        return self.sigma[: self.n, self.n :]


def make_product_vacuum(n: int, hbar: float = DEFAULT_HBAR) -> GaussianState:
    """Product of n single-particle ground states: sigma = (ħ/2)·I."""
    _check_mode_count(n)
    return GaussianState(n=n, mean=np.zeros(2 * n), sigma=0.5 * hbar * np.identity(2 * n), hbar=hbar)


def make_single_mode_squeezed(r: float, hbar: float = DEFAULT_HBAR) -> GaussianState:
    """One mode squeezed in position: variances (ħ/2)e^{-2r}, (ħ/2)e^{2r}."""
    _check_finite("r", r)
    sigma = 0.5 * hbar * np.diag([math.exp(-2 * r), math.exp(2 * r)])
    return GaussianState(n=1, mean=np.zeros(2), sigma=sigma, hbar=hbar)


def tensor_product(*states: GaussianState) -> GaussianState:
    """Independent particles assembled into one state (vanishing QCF by construction)."""
    if not states:
        raise InvalidArgumentError("tensor_product needs at least one state")
    hbar = states[0].hbar
    if any(s.hbar != hbar for s in states):
        raise InvalidArgumentError("all factors must share the same hbar")

    n = sum(s.n for s in states)
    mean = np.zeros(2 * n)
    sigma = np.zeros((2 * n, 2 * n))
    offset = 0
    for s in states:
        # Scatter each factor's (q, p) blocks into the global (q..., p...) ordering
        idx = np.concatenate([np.arange(offset, offset + s.n), n + np.arange(offset, offset + s.n)])
        mean[idx] = s.mean
        sigma[np.ix_(idx, idx)] = s.sigma
        offset += s.n
    return GaussianState(n=n, mean=mean, sigma=sigma, hbar=hbar)


def make_two_mode_squeezed(r: float, hbar: float = DEFAULT_HBAR) -> GaussianState:
    """Two-mode squeezed vacuum, the standard entangled pair.

    <q_i²> = <p_i²> = (ħ/2)cosh 2r, <q_1 q_2> = (ħ/2)sinh 2r, <p_1 p_2> = -(ħ/2)sinh 2r.
    """
    _check_finite("r", r)
    c = 0.5 * hbar * math.cosh(2 * r)
    s = 0.5 * hbar * math.sinh(2 * r)
    sigma_qq = np.array([[c, s], [s, c]])
    sigma_pp = np.array([[c, -s], [-s, c]])
    return GaussianState(n=2, mean=np.zeros(4), sigma=block_diag(sigma_qq, sigma_pp), hbar=hbar)


def collective_mode_basis(n: int) -> FloatArray:
    """Orthogonal matrix whose first row is the symmetric collective mode (1, ..., 1)/√n.

    Remaining rows are the Helmert contrasts; rows map particle coordinates to modes.
    """
    _check_mode_count(n)
    basis = np.zeros((n, n))
    basis[0, :] = 1.0 / math.sqrt(n)
    for k in range(1, n):
        basis[k, :k] = 1.0
        basis[k, k] = -float(k)
        basis[k] /= math.sqrt(k * (k + 1))
    return basis


def make_correlated_triple(r: float, hbar: float = DEFAULT_HBAR) -> GaussianState:
    """Permutation-symmetric three-particle state.

    The collective mode (q_1+q_2+q_3)/√3 is squeezed in position by e^{-2r}, the
    orthogonal modes stay in vacuum; the mode-basis covariance is mapped back to
    particle coordinates by the congruence S·sigma_mode·Sᵀ, S = diag(Oᵀ, Oᵀ).
    """
    _check_finite("r", r)
    mode = np.ones(6)
    mode[0] = math.exp(-2 * r)
    mode[3] = math.exp(2 * r)
    sigma_mode = 0.5 * hbar * np.diag(mode)
    o = collective_mode_basis(3)
    s = block_diag(o.T, o.T)
    sigma = s @ sigma_mode @ s.T
    # Congruence rounding leaves ~1e-17 asymmetry; symmetrize explicitly
    sigma = 0.5 * (sigma + sigma.T)
    return GaussianState(n=3, mean=np.zeros(6), sigma=sigma, hbar=hbar)


def orthogonal_symplectic(unitary: np.ndarray) -> FloatArray:
    """Real orthogonal-symplectic matrix [[Re U, -Im U], [Im U, Re U]] of a unitary."""
    re = np.real(unitary)
    im = np.imag(unitary)
    return np.block([[re, -im], [im, re]])


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n×n unitary via QR of a complex Ginibre matrix with phase fixing."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def make_random_state(
    n: int, seed: int, squeeze_max: float, hbar: float = DEFAULT_HBAR
) -> GaussianState:
    """Random pure Gaussian state, deterministic for a fixed seed.

    Squeezings r_k ~ U(-squeeze_max, squeeze_max) are applied to the vacuum and then
    conjugated by the orthogonal-symplectic image of a Haar unitary. The generator is
    numpy's PCG64 seeded with ``seed``.
    """
    _check_mode_count(n)
    if isinstance(seed, bool) or not isinstance(seed, int | np.integer) or seed < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed!r}")
    _check_finite("squeeze_max", squeeze_max)
    if squeeze_max < 0:
        raise InvalidArgumentError(f"squeeze_max must be >= 0, got {squeeze_max}")

    rng = np.random.Generator(np.random.PCG64(seed))
    squeezings = rng.uniform(-squeeze_max, squeeze_max, size=n)
    unitary = haar_unitary(n, rng)
    if squeeze_max == 0:
        return make_product_vacuum(n, hbar)

    squeeze = np.diag(np.concatenate([np.exp(-squeezings), np.exp(squeezings)]))
    k = orthogonal_symplectic(unitary)
    s = k @ squeeze
    sigma = 0.5 * hbar * (s @ s.T)
    sigma = 0.5 * (sigma + sigma.T)
    logger.debug(f"random state n={n} seed={seed}: squeezings={squeezings.tolist()}")
    return GaussianState(n=n, mean=np.zeros(2 * n), sigma=sigma, hbar=hbar)


def rotation_matrix(angles: ArrayLike) -> FloatArray:
    """Real orthogonal particle rotation: 1 angle for n=2, 3 Euler angles (z-y-z) for n=3."""
    a = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if a.shape == (1,):
        c, s = math.cos(a[0]), math.sin(a[0])
        return np.array([[c, -s], [s, c]])
    if a.shape == (3,):

        def rz(t: float) -> FloatArray:
            return np.array([[math.cos(t), -math.sin(t), 0.0], [math.sin(t), math.cos(t), 0.0], [0.0, 0.0, 1.0]])

        def ry(t: float) -> FloatArray:
            return np.array([[math.cos(t), 0.0, math.sin(t)], [0.0, 1.0, 0.0], [-math.sin(t), 0.0, math.cos(t)]])

        return rz(float(a[0])) @ ry(float(a[1])) @ rz(float(a[2]))
    raise InvalidArgumentError(f"rotation needs 1 angle (n=2) or 3 angles (n=3), got {a.shape[0]}")


def make_parameterized_state(
    squeezings: ArrayLike, angles: ArrayLike, hbar: float = DEFAULT_HBAR
) -> GaussianState:
    """Pure state: per-particle position squeezing followed by a passive real rotation."""
    r = np.atleast_1d(np.asarray(squeezings, dtype=np.float64))
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError("squeezings must be finite")
    n = int(r.shape[0])
    o = rotation_matrix(angles)
    if o.shape != (n, n):
        raise InvalidArgumentError(f"{n} squeezings need an {n}x{n} rotation, got {o.shape}")
    s = block_diag(o, o)
    sigma_mode = 0.5 * hbar * np.diag(np.concatenate([np.exp(-2 * r), np.exp(2 * r)]))
    sigma = s @ sigma_mode @ s.T
    sigma = 0.5 * (sigma + sigma.T)
    return GaussianState(n=n, mean=np.zeros(2 * n), sigma=sigma, hbar=hbar)


def apply_symplectic(
    state: GaussianState, s: FloatArray, displacement: ArrayLike | None = None
) -> GaussianState:
    """Affine symplectic map: sigma -> S sigma Sᵀ, mean -> S mean + d."""
    s = np.asarray(s, dtype=np.float64)
    omega = symplectic_form(state.n)
    if s.shape != (2 * state.n, 2 * state.n):
        raise InvalidArgumentError(f"symplectic matrix must be {2 * state.n}x{2 * state.n}")
    if not np.allclose(s @ omega @ s.T, omega, atol=1e-10):
        raise InvalidArgumentError("matrix is not symplectic for the (q..., p...) ordering")
    d = np.zeros(2 * state.n) if displacement is None else np.asarray(displacement, dtype=np.float64)
    sigma = s @ state.sigma @ s.T
    return GaussianState(
        n=state.n, mean=s @ state.mean + d, sigma=0.5 * (sigma + sigma.T), hbar=state.hbar
    )


def displace(state: GaussianState, displacement: ArrayLike) -> GaussianState:
    """Shift the mean vector; second central moments are unchanged."""
    d = np.asarray(displacement, dtype=np.float64)
    if d.shape != (2 * state.n,):
        raise InvalidArgumentError(f"displacement must have shape ({2 * state.n},), got {d.shape}")
    return GaussianState(n=state.n, mean=state.mean + d, sigma=state.sigma, hbar=state.hbar)


def rescale(state: GaussianState, lam: float) -> GaussianState:
    """Canonical rescaling q -> λq, p -> p/λ."""
    _check_finite("lam", lam)
    if lam <= 0:
        raise InvalidArgumentError(f"scale factor must be positive, got {lam}")
    s = np.diag(np.concatenate([np.full(state.n, lam), np.full(state.n, 1.0 / lam)]))
    return apply_symplectic(state, s)


def is_product_state(state: GaussianState, atol: float = 1e-12) -> bool:
    """True iff no covariance (qq, pp or qp) links different particles.

    Within the Gaussian family a block-diagonal covariance is a product state.
    """
    for block in (state.sigma_qq, state.sigma_pp):
        off = block - np.diag(np.diag(block))
        if np.any(np.abs(off) > atol):
            return False
    qp = state.sigma_qp
    return not np.any(np.abs(qp - np.diag(np.diag(qp))) > atol)


def symplectic_eigenvalues(state: GaussianState) -> FloatArray:
    """Symplectic spectrum (moduli of the eigenvalues of iΩσ), ascending, length n."""
    values = np.abs(np.linalg.eigvals(1j * symplectic_form(state.n) @ state.sigma))
    return np.sort(values)[::2]


def is_pure(state: GaussianState, rtol: float = 1e-8) -> bool:
    """True iff every symplectic eigenvalue equals ħ/2."""
    return bool(np.allclose(symplectic_eigenvalues(state), 0.5 * state.hbar, rtol=rtol, atol=0.0))


def moments(s: GaussianState) -> MomentTable:
    """Exact MomentTable: C_Q(i, j) = sigma[q_i, q_j], C_P(i, j) = sigma[p_i, p_j].

    Distinct-particle operators commute, so the symmetrized second moment is the QCF.
    """
    n = s.n
    return MomentTable(
        n=n,
        mean_q=s.mean[:n].copy(),
        mean_p=s.mean[n:].copy(),
        cov_q=s.sigma[:n, :n].copy(),
        cov_p=s.sigma[n:, n:].copy(),
    )
