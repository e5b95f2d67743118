"""Tests for the core module."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from gurlab.core import (
    HBAR_SI,
    CheckResult,
    Constants,
    Engine,
    InequalityReport,
    InvalidArgumentError,
    InvariantError,
    MomentTable,
    RelationName,
    check_psd,
    collective_dispersions,
    max_moment_difference,
    qcf_vanishes,
    rescale_moments,
)


@pytest.fixture
def correlated_table() -> MomentTable:
    """Two-particle table with position and momentum correlations."""
    return MomentTable.from_arrays(
        mean_q=[0.1, -0.2],
        mean_p=[0.0, 0.3],
        cov_q=[[1.0, 0.4], [0.4, 2.0]],
        cov_p=[[0.5, -0.1], [-0.1, 0.25]],
    )


def test_constants_default_is_natural_units() -> None:
    """Test that ħ defaults to 1."""
    assert Constants().hbar == 1.0
    assert Constants.si().hbar == HBAR_SI


def test_constants_reject_non_positive_hbar() -> None:
    """Test that ħ must be positive and finite."""
    with pytest.raises(ValidationError):
        Constants(hbar=0.0)
    with pytest.raises(ValidationError):
        Constants(hbar=math.inf)


class TestMomentTable:
    """Tests for MomentTable validation and accessors."""

    def test_from_arrays_infers_particle_count(self, correlated_table):
        """Verify n comes from the mean vector."""
        assert correlated_table.n == 2
        assert correlated_table.var_q.tolist() == [1.0, 2.0]
        assert correlated_table.var_p.tolist() == [0.5, 0.25]

    def test_arrays_are_read_only(self, correlated_table):
        """Verify stored arrays cannot be modified in place."""
        with pytest.raises(ValueError, match="read-only"):
            correlated_table.cov_q[0, 1] = 5.0

    def test_rejects_wrong_shape(self):
        """Verify mismatched covariance shapes are rejected."""
        with pytest.raises(InvalidArgumentError, match="cov_q"):
            MomentTable(n=2, mean_q=np.zeros(2), mean_p=np.zeros(2), cov_q=np.eye(3), cov_p=np.eye(2))

    def test_rejects_zero_particles(self):
        """Verify n >= 1."""
        with pytest.raises(InvalidArgumentError):
            MomentTable(n=0, mean_q=np.zeros(0), mean_p=np.zeros(0), cov_q=np.zeros((0, 0)), cov_p=np.zeros((0, 0)))

    def test_rejects_non_finite(self):
        """Verify NaN entries are rejected."""
        with pytest.raises(InvalidArgumentError, match="non-finite"):
            MomentTable.from_arrays([0.0], [0.0], [[math.nan]], [[1.0]])

    def test_rejects_asymmetric_covariance(self):
        """Verify C(i, j) must equal C(j, i)."""
        with pytest.raises(InvariantError, match="symmetric"):
            MomentTable.from_arrays([0, 0], [0, 0], [[1.0, 0.2], [0.3, 1.0]], np.eye(2))

    def test_rejects_non_psd_covariance(self):
        """Verify a covariance with a negative eigenvalue is rejected."""
        with pytest.raises(InvariantError, match="positive semi-definite"):
            MomentTable.from_arrays([0, 0], [0, 0], [[1.0, 2.0], [2.0, 1.0]], np.eye(2))

    def test_off_diagonal_sum(self, correlated_table):
        """Verify the i != j sum counts each pair twice."""
        assert correlated_table.off_diagonal_sum("Q") == pytest.approx(0.8)
        assert correlated_table.off_diagonal_sum("P") == pytest.approx(-0.2)

    def test_flatten_uses_one_based_labels(self, correlated_table):
        """Verify flattened keys for tabular export."""
        flat = correlated_table.flatten()
        assert list(flat) == [
            "mean_q_1",
            "mean_q_2",
            "mean_p_1",
            "mean_p_2",
            "cov_q_1_1",
            "cov_q_1_2",
            "cov_q_2_2",
            "cov_p_1_1",
            "cov_p_1_2",
            "cov_p_2_2",
        ]
        assert flat["cov_q_1_2"] == 0.4
        assert flat["cov_p_2_2"] == 0.25


def test_check_psd_accepts_rounding_noise() -> None:
    """Test that eigenvalues slightly below zero (relative to the trace) pass."""
    check_psd(np.array([[1.0, 1.0], [1.0, 1.0 - 1e-14]]), "almost singular")


def test_collective_dispersions_is_full_double_sum(correlated_table) -> None:
    """Test (ΔQ)² = Σ_ij C_Q(i, j)."""
    dq2, dp2 = collective_dispersions(correlated_table)
    assert dq2 == pytest.approx(1.0 + 2.0 + 2 * 0.4)
    assert dp2 == pytest.approx(0.5 + 0.25 - 2 * 0.1)


def test_collective_dispersions_three_vacua() -> None:
    """Test three uncorrelated vacua give (3/2)·(3/2)."""
    table = MomentTable.from_arrays(np.zeros(3), np.zeros(3), 0.5 * np.eye(3), 0.5 * np.eye(3))
    assert collective_dispersions(table) == (1.5, 1.5)


def test_qcf_vanishes(correlated_table) -> None:
    """Test the product-state criterion on off-diagonal entries."""
    assert not qcf_vanishes(correlated_table)
    product = MomentTable.from_arrays([0, 0], [0, 0], np.diag([1.0, 2.0]), np.diag([0.5, 0.3]))
    assert qcf_vanishes(product)


def test_max_moment_difference(correlated_table) -> None:
    """Test the entrywise comparison and its particle-count check."""
    shifted = MomentTable.from_arrays(
        correlated_table.mean_q + 1e-3,
        correlated_table.mean_p,
        correlated_table.cov_q,
        correlated_table.cov_p,
    )
    assert max_moment_difference(correlated_table, shifted) == pytest.approx(1e-3)
    single = MomentTable.from_arrays([0.0], [0.0], [[1.0]], [[1.0]])
    with pytest.raises(InvalidArgumentError):
        max_moment_difference(correlated_table, single)


def test_rescale_moments(correlated_table) -> None:
    """Test q -> λq, p -> p/λ on means and covariances."""
    scaled = rescale_moments(correlated_table, 2.0)
    np.testing.assert_allclose(scaled.mean_q, 2.0 * correlated_table.mean_q)
    np.testing.assert_allclose(scaled.mean_p, correlated_table.mean_p / 2.0)
    np.testing.assert_allclose(scaled.cov_q, 4.0 * correlated_table.cov_q)
    np.testing.assert_allclose(scaled.cov_p, correlated_table.cov_p / 4.0)
    with pytest.raises(InvalidArgumentError):
        rescale_moments(correlated_table, 0.0)


class TestInequalityReport:
    """Tests for report construction and verdicts."""

    def test_evaluate_computes_slack(self):
        """Verify slack = lhs - rhs and the verdict."""
        report = InequalityReport.evaluate(
            RelationName.COLLECTIVE_GUR, 1.5, 1.0, n=2, engine=Engine.GAUSSIAN, tol=1e-9
        )
        assert report.slack == 0.5
        assert report.holds is True
        assert report.kind == "relation"

    def test_negative_slack_within_tolerance_holds(self):
        """Verify slack >= -tol passes."""
        report = InequalityReport.evaluate(
            RelationName.GUR_N, 1.0 - 5e-10, 1.0, n=2, engine=Engine.GAUSSIAN, tol=1e-9
        )
        assert report.holds is True

    def test_negative_slack_beyond_tolerance_fails(self):
        """Verify slack < -tol fails."""
        report = InequalityReport.evaluate(
            RelationName.GUR_N, 0.9, 1.0, n=2, engine=Engine.GRID, tol=1e-6
        )
        assert report.holds is False

    def test_inconsistent_verdict_is_rejected(self):
        """Verify holds must agree with slack."""
        with pytest.raises(InvariantError, match="disagrees"):
            InequalityReport(
                name=RelationName.GUR_N,
                n=2,
                engine=Engine.GAUSSIAN,
                lhs=0.0,
                rhs=1.0,
                slack=-1.0,
                holds=True,
                tol=1e-9,
            )

    def test_with_descriptor_and_sort_key(self):
        """Verify descriptors are attached by copy and feed the sort key."""
        report = InequalityReport.evaluate(
            RelationName.SCHWARZ_THREE_Q, 1.0, 0.0, n=3, engine=Engine.GAUSSIAN, tol=1e-9, variant="signs=+++"
        )
        tagged = report.with_descriptor("correlated_triple(r=0.2)")
        assert report.state_descriptor == ""
        assert tagged.sort_key == ("schwarz_three_q", "correlated_triple(r=0.2)", "signs=+++")


def test_check_result_defaults() -> None:
    """Test that check records carry kind='check' and empty details."""
    check = CheckResult(name="cross_engine", state_descriptor="grid_vacuum(n=1)", value=1e-12, tol=1e-6, passed=True)
    assert check.kind == "check"
    assert check.details == {}
    assert check.sort_key == ("cross_engine", "grid_vacuum(n=1)", "")
