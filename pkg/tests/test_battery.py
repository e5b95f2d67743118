"""Tests for the built-in verification battery."""

import numpy as np
import pytest

from gurlab import battery, gaussian, grid
from gurlab.core import CheckResult, Engine, InequalityReport, MomentTable, RelationName
from gurlab.inequalities import SuiteConfig

# Reports per entry without random states: vacua 2 + 7 + 24, two-mode 9 x 7, triple 6 x 24
FIXED_GAUSSIAN_REPORTS = 240


@pytest.fixture(scope="module")
def grid_outcome() -> battery.BatteryOutcome:
    """Default grid battery, shared across tests."""
    return battery.run_battery(battery.BatteryConfig(engine="grid"))


@pytest.fixture
def flipped_qcf(monkeypatch):
    """Make the Gaussian engine report C_Q(1,2) with the wrong sign."""
    original = gaussian.moments

    def flipped(state):
        m = original(state)
        cov_q = m.cov_q.copy()
        if m.n >= 2:
            cov_q[0, 1] = -cov_q[0, 1]
            cov_q[1, 0] = -cov_q[1, 0]
        return MomentTable(n=m.n, mean_q=m.mean_q, mean_p=m.mean_p, cov_q=cov_q, cov_p=m.cov_p)

    monkeypatch.setattr(gaussian, "moments", flipped)


def test_gaussian_battery_entries() -> None:
    """Test the fixed families followed by seeded random states."""
    entries = battery.gaussian_battery(seeds=range(3))
    descriptors = [e.descriptor for e in entries]
    assert len(entries) == 3 + 9 + 6 + 2 * 3
    assert descriptors[:3] == ["product_vacuum(n=1)", "product_vacuum(n=2)", "product_vacuum(n=3)"]
    assert "two_mode_squeezed(r=0.25)" in descriptors
    assert "correlated_triple(r=0.4)" in descriptors
    assert descriptors[-1] == "random(n=3,seed=2)"


def test_grid_battery_entries() -> None:
    """Test grid descriptors and which entries carry a Gaussian counterpart."""
    entries = {e.descriptor: e for e in battery.grid_battery()}
    assert set(entries) == {
        "grid_vacuum(n=1)",
        "grid_vacuum(n=2)",
        "grid_two_mode_squeezed(r=0.0)",
        "grid_two_mode_squeezed(r=0.5)",
        "grid_two_mode_squeezed(r=1.0)",
        "grid_correlated_gaussian(a=1.0,b=0.5)",
        "grid_fermionic_pair",
        "grid_bosonic_pair",
        "grid_correlated_triple(r=0.4)",
    }
    assert entries["grid_fermionic_pair"].counterpart is None
    assert entries["grid_correlated_triple(r=0.4)"].state.spec.points_per_axis == 64
    assert len(entries["grid_vacuum(n=1)"].operator_pairs) == 1
    assert len(entries["grid_bosonic_pair"].operator_pairs) == 2


class TestGaussianRun:
    """Tests for the exact-engine part of the battery."""

    def test_fixed_entries_only(self):
        """Verify report count and ordering without random states."""
        outcome = battery.run_battery(battery.BatteryConfig(engine="gaussian", seeds=0))
        assert len(outcome.reports) == FIXED_GAUSSIAN_REPORTS
        assert outcome.checks == []
        assert outcome.passed
        keys = [r.sort_key for r in outcome.records]
        assert keys == sorted(keys)

    def test_random_entries(self):
        """Verify seeded random states pass and skip symmetric bounds they cannot satisfy."""
        outcome = battery.run_battery(battery.BatteryConfig(engine="gaussian", seeds=25, seed=100))
        assert outcome.passed
        assert outcome.skipped["random(n=2,seed=100)"]["symmetric_two"].startswith("not applicable: unequal")
        assert "random(n=3,seed=124)" in {r.state_descriptor for r in outcome.reports}

    def test_hbar_two(self):
        """Verify verdicts are unit independent."""
        outcome = battery.run_battery(battery.BatteryConfig(engine="gaussian", hbar=2.0, seeds=10))
        assert outcome.passed

    def test_same_run_same_stream(self):
        """Verify the record stream is deterministic."""
        config = battery.BatteryConfig(engine="gaussian", seeds=5)
        assert battery.run_battery(config).records == battery.run_battery(config).records

    def test_wrong_sign_qcf_is_caught(self, flipped_qcf):
        """Verify a sign error in C_Q(1,2) makes gur_two fail for squeezed pairs."""
        outcome = battery.run_battery(battery.BatteryConfig(engine="gaussian", seeds=0))
        failed = {(r.name, r.state_descriptor) for r in outcome.failures}
        assert not outcome.passed
        assert (RelationName.GUR_TWO, "two_mode_squeezed(r=0.5)") in failed
        assert (RelationName.GUR_TWO, "two_mode_squeezed(r=0.0)") not in failed


class TestGridRun:
    """Tests for the wavefunction part of the battery."""

    def test_passes(self, grid_outcome):
        """Verify every grid relation and check passes."""
        assert grid_outcome.passed, battery.first_failure_message(grid_outcome.failures[0])

    def test_checks(self, grid_outcome):
        """Verify one commutation check per multi-particle entry and one cross check per counterpart."""
        names = [c.name for c in grid_outcome.checks]
        assert names.count("permutation_commutation") == 8
        assert names.count("cross_engine") == 7

    def test_robertson_reports(self, grid_outcome):
        """Verify Robertson runs for each operator pair and saturates on the vacuum."""
        robertson = [r for r in grid_outcome.reports if r.name is RelationName.ROBERTSON]
        assert len(robertson) == 17
        vacuum = next(r for r in robertson if r.state_descriptor == "grid_vacuum(n=1)")
        assert abs(vacuum.slack) < 1e-8

    def test_tiny_tolerance_fails(self):
        """Verify a tolerance below the grid's accuracy produces failures."""
        outcome = battery.run_battery(battery.BatteryConfig(engine="grid", tol=1e-15))
        assert not outcome.passed

    def test_wrong_sign_qcf_breaks_cross_engine(self, flipped_qcf):
        """Verify the cross-engine comparison exposes a sign error in the exact engine."""
        outcome = battery.run_battery(battery.BatteryConfig(engine="grid"))
        failed = {r.state_descriptor for r in outcome.failures if isinstance(r, CheckResult)}
        assert "grid_two_mode_squeezed(r=0.5)" in failed
        assert "grid_vacuum(n=2)" not in failed


def test_hbar_two_both_engines() -> None:
    """Test the whole battery at ħ = 2 with a few random seeds."""
    outcome = battery.run_battery(battery.BatteryConfig(engine="both", hbar=2.0, seeds=3))
    assert outcome.passed


def test_cross_engine_tolerance() -> None:
    """Test the three-particle allowance and ħ scaling."""
    config = SuiteConfig(hbar=2.0, tol=1e-6)
    assert battery.cross_engine_tolerance(2, config) == pytest.approx(2e-6)
    assert battery.cross_engine_tolerance(3, config) == pytest.approx(2e-4)


def test_first_failure_message() -> None:
    """Test the one-line description of failing records."""
    report = InequalityReport.evaluate(
        RelationName.GUR_TWO, 0.1, 0.25, n=2, engine=Engine.GAUSSIAN, tol=1e-9, state_descriptor="x"
    )
    assert battery.first_failure_message(report).startswith("gur_two fails on x: lhs 0.1 < rhs 0.25")
    check = CheckResult(name="cross_engine", state_descriptor="y", value=1e-3, tol=1e-6, passed=False)
    assert battery.first_failure_message(check) == "cross_engine check fails on y: 1.000e-03 > tol 1.0e-06"


@pytest.fixture
def narrow_vacuum() -> battery.GridEntry:
    """One-particle vacuum on [-5.5, 5.5]: decays at the boundary, but Q1ψ does not."""
    spec = grid.GridSpec(n_particles=1, points_per_axis=64, x_min=-5.5, x_max=5.5)
    state = grid.from_function(spec, lambda x: np.exp(-(x**2) / 2.0))
    return battery.GridEntry("narrow_vacuum", state, None, ((grid.position_operator(1), grid.momentum_operator(1)),))


class TestEngineRefusal:
    """Tests for Robertson pairs the grid engine refuses to evaluate."""

    def test_refusal_is_a_failed_check(self, narrow_vacuum):
        """Verify the refusal is recorded with the boundary ratio instead of raising."""
        records, _ = battery.check_grid_entry(narrow_vacuum, SuiteConfig.for_engine(Engine.GRID))
        refusals = [r for r in records if isinstance(r, CheckResult) and r.name == "engine_refusal"]
        assert len(refusals) == 1
        assert refusals[0].value > grid.BOUNDARY_DECAY
        assert refusals[0].tol == grid.BOUNDARY_DECAY
        assert not refusals[0].passed
        assert refusals[0].details == {"operator_pair": 0.0}
        assert not any(isinstance(r, InequalityReport) and r.name is RelationName.ROBERTSON for r in records)

    def test_run_completes_and_fails(self, narrow_vacuum, monkeypatch):
        """Verify the battery finishes the run and reports the refusal as its failure."""
        monkeypatch.setattr(battery, "grid_battery", lambda hbar: [narrow_vacuum])
        outcome = battery.run_battery(battery.BatteryConfig(engine="grid"))
        assert not outcome.passed
        refusal = next(r for r in outcome.failures if isinstance(r, CheckResult))
        assert refusal.name == "engine_refusal"
        assert battery.first_failure_message(refusal).startswith("engine_refusal check fails on narrow_vacuum: ")
