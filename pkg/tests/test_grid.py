"""Tests for the grid wavefunction engine."""

import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError

from gurlab import gaussian, grid
from gurlab.core import InvalidArgumentError, collective_dispersions, max_moment_difference


def vacuum(*xs):
    return np.exp(-sum(x**2 for x in xs) / 2.0)


@pytest.fixture
def spec_two() -> grid.GridSpec:
    """Two particles, 64 points per axis on [-8, 8]."""
    return grid.GridSpec(n_particles=2, points_per_axis=64, x_min=-8.0, x_max=8.0)


@pytest.fixture
def fermionic_pair(spec_two) -> grid.GridState:
    """Antisymmetrized ground and first excited orbitals."""
    product = grid.from_function(spec_two, lambda x1, x2: x2 * vacuum(x1, x2))
    return grid.symmetrize(product, "fermionic")


class TestGridSpec:
    """Tests for grid validation."""

    def test_rejects_non_power_of_two(self):
        """Verify the point count must be a power of two."""
        with pytest.raises(ValidationError, match="power of two"):
            grid.GridSpec(n_particles=1, points_per_axis=100, x_min=-1.0, x_max=1.0)

    def test_rejects_inverted_extent(self):
        """Verify x_max must exceed x_min."""
        with pytest.raises(ValidationError, match="must exceed"):
            grid.GridSpec(n_particles=1, points_per_axis=64, x_min=1.0, x_max=-1.0)

    def test_rejects_oversized_grid(self):
        """Verify the amplitude count is capped."""
        with pytest.raises(ValidationError, match="memory cap"):
            grid.GridSpec(n_particles=3, points_per_axis=512, x_min=-1.0, x_max=1.0)

    def test_default_extent_scales_with_hbar(self):
        """Verify the default extent is 14·√ħ."""
        spec = grid.GridSpec.default(2, hbar=4.0)
        assert (spec.x_min, spec.x_max) == (-28.0, 28.0)
        assert spec.points_per_axis == 256
        assert grid.GridSpec.default(3).points_per_axis == 64

    def test_axis_uses_cell_midpoints(self):
        """Verify x_k = x_min + (k + 1/2)Δx."""
        spec = grid.GridSpec(n_particles=1, points_per_axis=16, x_min=0.0, x_max=16.0)
        assert spec.axis()[:3].tolist() == [0.5, 1.5, 2.5]


class TestGridState:
    """Tests for sampling, normalization and validation of grid states."""

    def test_from_function_normalizes(self, spec_two):
        """Verify Σ|ψ|²Δx^N = 1 after sampling."""
        state = grid.from_function(spec_two, lambda x1, x2: 3.0 * vacuum(x1, x2))
        assert np.sum(np.abs(state.amps) ** 2) * spec_two.cell_volume == pytest.approx(1.0, abs=1e-12)

    def test_zero_wavefunction_is_rejected(self, spec_two):
        """Verify a wavefunction vanishing on the grid is refused."""
        with pytest.raises(InvalidArgumentError, match="zero norm"):
            grid.from_function(spec_two, lambda x1, x2: 0.0 * x1 * x2)

    def test_wide_wavefunction_fails_decay_check(self):
        """Verify support on the boundary layer raises BoundaryDecayError."""
        spec = grid.GridSpec(n_particles=1, points_per_axis=64, x_min=-3.0, x_max=3.0)
        with pytest.raises(grid.BoundaryDecayError, match="widen the extent"):
            grid.from_function(spec, vacuum)

    def test_symmetry_tag_is_verified(self, spec_two):
        """Verify a non-symmetric amplitude cannot carry the bosonic tag."""
        state = grid.from_function(spec_two, lambda x1, x2: np.exp(-((x1 - 1.0) ** 2) / 2.0 - x2**2 / 2.0))
        with pytest.raises(InvalidArgumentError, match="bosonic"):
            grid.GridState(spec=spec_two, amps=state.amps, symmetry=grid.Symmetry.BOSONIC)

    def test_fermionic_projection_of_symmetric_state_is_degenerate(self, spec_two):
        """Verify antisymmetrizing a symmetric product state annihilates it."""
        with pytest.raises(grid.DegenerateProjectionError):
            grid.symmetrize(grid.from_function(spec_two, vacuum), grid.Symmetry.FERMIONIC)

    def test_symmetrize_rejects_none(self, spec_two):
        """Verify 'none' is not a projection target."""
        with pytest.raises(InvalidArgumentError):
            grid.symmetrize(grid.from_function(spec_two, vacuum), grid.Symmetry.NONE)


class TestSymmetrize:
    """Tests for the bosonic and fermionic projections."""

    @pytest.mark.parametrize("kind", ["bosonic", "fermionic"])
    def test_projection_is_idempotent(self, spec_two, kind):
        """Verify projecting twice gives the same amplitudes as projecting once."""
        product = grid.from_function(spec_two, lambda x1, x2: x2 * vacuum(x1, x2))
        once = grid.symmetrize(product, kind)
        twice = grid.symmetrize(once, kind)
        assert twice.symmetry == once.symmetry
        assert np.max(np.abs(twice.amps - once.amps)) <= 1e-12

    def test_bosonic_projection_keeps_symmetric_input(self, spec_two):
        """Verify a symmetric wavefunction is returned unchanged."""
        state = grid.from_function(spec_two, grid.correlated_gaussian(1.0, 0.5))
        projected = grid.symmetrize(state, grid.Symmetry.BOSONIC)
        assert projected.symmetry is grid.Symmetry.BOSONIC
        assert np.max(np.abs(projected.amps - state.amps)) <= 1e-12

    def test_fermionic_pair_is_slater_determinant(self, spec_two, fermionic_pair):
        """Verify A[φ0(x1)φ1(x2)] ∝ φ0(x1)φ1(x2) - φ1(x1)φ0(x2) = (x2 - x1)·φ0(x1)φ0(x2)."""
        slater = grid.from_function(spec_two, lambda x1, x2: (x2 - x1) * vacuum(x1, x2))
        np.testing.assert_allclose(fermionic_pair.amps, slater.amps, atol=1e-12)
        assert np.max(np.abs(fermionic_pair.amps + fermionic_pair.amps.T)) <= 1e-12

    @pytest.mark.parametrize("kind", ["bosonic", "fermionic"])
    def test_three_particles_over_all_permutations(self, kind):
        """Verify the projection picks up the permutation sign for each of the six orderings."""
        spec = grid.GridSpec(n_particles=3, points_per_axis=32, x_min=-8.0, x_max=8.0)
        product = grid.from_function(spec, lambda x1, x2, x3: x2 * (x3**2 - 0.5) * vacuum(x1, x2, x3))
        state = grid.symmetrize(product, kind)
        perms = list(itertools.permutations(range(3)))
        assert len(perms) == 6
        for perm in perms:
            parity = round(np.linalg.det(np.identity(3)[list(perm)]))
            sign = parity if kind == "fermionic" else 1
            np.testing.assert_allclose(np.transpose(state.amps, perm), sign * state.amps, atol=1e-12)


def test_vacuum_moments_match_closed_form() -> None:
    """Test that the one-particle ground state gives variances ħ/2."""
    spec = grid.GridSpec.default(1)
    table = grid.moments(grid.from_function(spec, vacuum))
    assert table.cov_q[0, 0] == pytest.approx(0.5, abs=1e-10)
    assert table.cov_p[0, 0] == pytest.approx(0.5, abs=1e-10)
    assert abs(table.mean_q[0]) < 1e-12


def test_vacuum_moments_converge_with_resolution() -> None:
    """Test that doubling the resolution shrinks the moment error."""
    reference = gaussian.moments(gaussian.make_product_vacuum(1))
    errors = []
    for points in (16, 32):
        spec = grid.GridSpec(n_particles=1, points_per_axis=points, x_min=-8.0, x_max=8.0)
        errors.append(grid.moment_error(grid.from_function(spec, vacuum), reference))
    coarse, fine = errors
    assert fine < 1e-8
    assert coarse >= 4 * fine
    assert coarse < 1e-2


def test_fermionic_pair_moments(fermionic_pair) -> None:
    """Test that the antisymmetrized pair has C_Q(1,2) = -1/2 and unit variances."""
    table = grid.moments(fermionic_pair)
    np.testing.assert_allclose(table.cov_q, [[1.0, -0.5], [-0.5, 1.0]], atol=1e-8)
    np.testing.assert_allclose(table.cov_p, [[1.0, -0.5], [-0.5, 1.0]], atol=1e-8)
    dq2, dp2 = collective_dispersions(table)
    assert dq2 * dp2 == pytest.approx(1.0, abs=1e-8)


def test_bosonic_pair_has_positive_correlation(spec_two) -> None:
    """Test that the symmetrized pair has C_Q(1,2) = +1/2."""
    product = grid.from_function(spec_two, lambda x1, x2: x2 * vacuum(x1, x2))
    table = grid.moments(grid.symmetrize(product, "bosonic"))
    assert table.cov_q[0, 1] == pytest.approx(0.5, abs=1e-8)


def test_correlated_gaussian_moments(spec_two) -> None:
    """Test ψ = exp(-a(x1²+x2²)/2 - b·x1x2) with a=1, b=0.5."""
    state = grid.from_function(spec_two, grid.correlated_gaussian(1.0, 0.5))
    table = grid.moments(state)
    np.testing.assert_allclose(table.cov_q, [[2 / 3, -1 / 3], [-1 / 3, 2 / 3]], atol=1e-8)
    np.testing.assert_allclose(table.cov_p, [[0.5, 0.25], [0.25, 0.5]], atol=1e-8)


def test_correlated_gaussian_scales_with_hbar() -> None:
    """Test sigma_qq = ħA⁻¹/2 and sigma_pp = ħA/2 at ħ = 2."""
    hbar = 2.0
    state = grid.from_function(grid.GridSpec.default(2, hbar), grid.correlated_gaussian(1.0, 0.5, hbar))
    table = grid.moments(state, hbar)
    np.testing.assert_allclose(table.cov_q, [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]], atol=1e-8)
    np.testing.assert_allclose(table.cov_p, [[1.0, 0.5], [0.5, 1.0]], atol=1e-8)


def test_from_gaussian_matches_exact_engine() -> None:
    """Test that sampling a two-mode squeezed state reproduces its exact moments."""
    state = gaussian.make_two_mode_squeezed(0.5)
    sampled = grid.from_gaussian(grid.GridSpec.default(2), state)
    assert max_moment_difference(grid.moments(sampled), gaussian.moments(state)) < 1e-6


def test_from_gaussian_rejects_mixed_state() -> None:
    """Test that a thermal state has no wavefunction."""
    thermal = gaussian.GaussianState(n=1, mean=np.zeros(2), sigma=np.identity(2))
    with pytest.raises(InvalidArgumentError, match="pure"):
        grid.from_gaussian(grid.GridSpec.default(1), thermal)


def test_collective_commutator_is_n_hbar(spec_two) -> None:
    """Test Im<[Q, P]> = Nħ for the collective observables."""
    state = grid.from_function(spec_two, grid.correlated_gaussian(1.0, 0.5))
    q = grid.collective_position(2)
    p = grid.collective_momentum(2)
    qp = grid._inner(state.amps, q.apply(p.apply(state.amps, spec_two), spec_two), spec_two)
    pq = grid._inner(state.amps, p.apply(q.apply(state.amps, spec_two), spec_two), spec_two)
    assert (qp - pq).imag == pytest.approx(2.0, abs=1e-8)
    assert abs((qp - pq).real) < 1e-8


def test_collective_operator_variance_matches_qcf_sum(fermionic_pair) -> None:
    """Test that applying Q directly agrees with the QCF double sum."""
    dq2, dp2 = collective_dispersions(grid.moments(fermionic_pair))
    assert grid.collective_operator_variance(fermionic_pair, "Q") == pytest.approx(dq2, abs=1e-8)
    assert grid.collective_operator_variance(fermionic_pair, "P") == pytest.approx(dp2, abs=1e-8)


def test_with_phase_shifts_mean_momentum() -> None:
    """Test that exp(i·p0·x/ħ) moves <P> by p0."""
    state = grid.from_function(grid.GridSpec.default(1), vacuum)
    shifted = grid.moments(grid.with_phase(state, 1.5))
    assert shifted.mean_p[0] == pytest.approx(1.5, abs=1e-8)
    assert shifted.cov_p[0, 0] == pytest.approx(0.5, abs=1e-8)


def test_parseval_residual_is_roundoff(fermionic_pair) -> None:
    """Test that the DFT preserves the norm."""
    assert grid.parseval_residual(fermionic_pair) < 1e-12


class TestPermutationCommutation:
    """Tests for the transposition check on collective observables."""

    def test_collective_observables_commute(self, spec_two):
        """Verify Q and P commute with the swap; Q1 is the control at √3."""
        state = grid.from_function(spec_two, grid.correlated_gaussian(1.0, 0.5))
        report = grid.permutation_commutation_check(state)
        assert set(report.residuals) == {"Q:(1,2)", "P:(1,2)", "Q1:(1,2)"}
        assert report.max_physical < 1e-10
        assert report.control == pytest.approx(math.sqrt(3.0), rel=1e-6)

    def test_three_particles_cover_every_transposition(self):
        """Verify three particles yield three transpositions per observable."""
        spec = grid.GridSpec(n_particles=3, points_per_axis=32, x_min=-8.0, x_max=8.0)
        report = grid.permutation_commutation_check(grid.from_function(spec, vacuum))
        assert len(report.residuals) == 9
        assert report.max_physical < 1e-10

    def test_single_particle_is_rejected(self):
        """Verify the check needs at least two particles."""
        state = grid.from_function(grid.GridSpec.default(1), vacuum)
        with pytest.raises(InvalidArgumentError):
            grid.permutation_commutation_check(state)


def test_operator_labels() -> None:
    """Test the printable form of operator combinations."""
    assert grid.collective_position(3).label == "Q1+Q2+Q3"
    assert (grid.position_operator(1) + grid.momentum_operator(2) * -1).label == "Q1-P2"
    assert (2 * grid.momentum_operator(1)).label == "2*P1"
