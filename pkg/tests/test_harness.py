import logging

import numpy as np
import pytest

from nsklimit.config import FarField, FluidParams, Formulation, SchemeConfig
from nsklimit.core import Grid1D, State, mollified_riemann_data, reference_state
from nsklimit.errors import ContaminationError, DomainError
from nsklimit.harness import (
    ConvergenceRow,
    ConvergenceTable,
    SweepRunner,
    check_wave_span,
    convergence_study,
    energy_monitor,
    initial_data_condition_H,
    initial_invariant_spread,
    invariant_region_monitor,
    lower_density_bound,
    run_study_row,
    study_grid,
    uniform_bounds,
)
from nsklimit.solver import Trajectory

from conftest import make_constant_trajectory


def _with_series(traj, **series):
    return Trajectory(
        grid=traj.grid,
        far=traj.far,
        params=traj.params,
        formulation=traj.formulation,
        snapshots=traj.snapshots,
        series={k: np.asarray(v, dtype=float) for k, v in series.items()},
    )


class TestUniformBounds:
    def test_constant_state_integrals(self, constant_trajectory):
        report = uniform_bounds(constant_trajectory, window=(-1.0, 1.0))
        assert report.i_high == pytest.approx(2.0)
        assert report.i_cube == pytest.approx(2.0)
        assert report.energy_violation == 0.0
        assert report.invariant_violation == 0.0
        assert report.invariant_spread == pytest.approx(2.0)
        assert report.min_density == 1.0
        assert set(report.entropy_residuals) == {"mechanical", "half_square", "compact_bump[-1,1]"}
        assert max(report.entropy_residuals.values()) < 1e-12
        assert report.to_dict()["window"] == [-1.0, 1.0]

    def test_default_window_is_middle_half(self, constant_trajectory):
        report = uniform_bounds(constant_trajectory, entropy_checks=False)
        assert report.window == (-0.5, 0.5)
        assert report.i_high == pytest.approx(1.0)
        assert report.entropy_residuals == {}

    def test_rejects_window_outside_domain(self, constant_trajectory):
        with pytest.raises(DomainError):
            uniform_bounds(constant_trajectory, window=(-2.0, 0.0))

    def test_refuses_contaminated_runs(self, constant_trajectory):
        constant_trajectory.contaminated = True
        with pytest.raises(ContaminationError):
            uniform_bounds(constant_trajectory)


class TestMonitors:
    def test_energy_increase_is_reported(self, constant_trajectory):
        times = [0.0, 1.0, 2.0]
        rising = _with_series(
            constant_trajectory, time=times, energy=[1.0, 1.1, 1.05], dissipation=[0.0] * 3, reference_work=[0.0] * 3
        )
        assert energy_monitor(rising) == pytest.approx(0.099)

    def test_dissipation_is_credited(self, constant_trajectory):
        times = [0.0, 1.0, 2.0]
        falling = _with_series(
            constant_trajectory, time=times, energy=[1.0, 0.9, 0.8], dissipation=[0.1] * 3, reference_work=[0.0] * 3
        )
        assert energy_monitor(falling) == 0.0
        worked = _with_series(
            constant_trajectory, time=times, energy=[1.0, 1.1, 1.2], dissipation=[0.0] * 3, reference_work=[0.1] * 3
        )
        assert energy_monitor(worked) == 0.0

    def test_invariant_region_excursion(self, kinetic2, uniform_far):
        grid = Grid1D(-1.0, 1.0, 16)
        snaps = [
            State(np.ones(16), np.zeros(16), time=0.0),
            State(np.ones(16), np.full(16, 0.1), time=0.5),
        ]
        traj = Trajectory(grid, uniform_far, kinetic2, Formulation.EFFECTIVE_V, snaps)
        assert initial_invariant_spread(traj) == pytest.approx(2.0)
        assert invariant_region_monitor(traj) == pytest.approx(0.1)

    def test_lower_density_bound(self, constant_trajectory):
        assert lower_density_bound(constant_trajectory) == 1.0
        dipped = _with_series(constant_trajectory, min_rho=[1.0, 0.7, 0.9])
        assert lower_density_bound(dipped) == 0.7


class TestConditionH:
    def test_reference_state_passes(self, kinetic2, rarefaction_far):
        grid = Grid1D(-3.0, 3.0, 60)
        p = kinetic2.with_epsilon(0.1)
        report = initial_data_condition_H(reference_state(rarefaction_far, grid, p), rarefaction_far, p, grid)
        assert report.passed
        assert report.mass_deviation == pytest.approx(0.0, abs=1e-12)
        assert report.energy == pytest.approx(0.0, abs=1e-12)

    def test_caps_are_enforced(self, kinetic2, rarefaction_far):
        grid = Grid1D(-3.0, 3.0, 60)
        p = kinetic2.with_epsilon(0.1)
        state = mollified_riemann_data(rarefaction_far, grid, p)
        report = initial_data_condition_H(state, rarefaction_far, p, grid, caps=(1e-6, 1e8, 1e8))
        assert not report.passed
        assert "mass deviation" in report.message
        assert report.to_dict()["caps"] == [1e-6, 1e8, 1e8]

    def test_vacuum_fails(self, kinetic2, uniform_far):
        grid = Grid1D(-1.0, 1.0, 8)
        state = State(np.array([1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]), np.zeros(8), Formulation.EULER)
        report = initial_data_condition_H(state, uniform_far, kinetic2, grid)
        assert not report.passed
        assert "not positive" in report.message


class TestConvergenceTable:
    def test_rows_sorted_and_decrease_detected(self):
        rows = [ConvergenceRow(0.05, 480, l1_rho=0.01), ConvergenceRow(0.2, 120, l1_rho=0.04), ConvergenceRow(0.1, 240, l1_rho=0.02)]
        table = ConvergenceTable(rows=rows, window=(-1.0, 1.0), t_end=0.4)
        assert [r.epsilon for r in table.rows] == [0.2, 0.1, 0.05]
        assert table.is_decreasing()
        assert table.to_dict()["decreasing"] is True

    def test_failed_row_breaks_decrease(self):
        rows = [ConvergenceRow(0.2, 120, l1_rho=0.04), ConvergenceRow(0.1, 240, status="VacuumError")]
        table = ConvergenceTable(rows=rows)
        assert len(table.ok_rows) == 1
        assert not table.is_decreasing()

    def test_duplicate_epsilons(self):
        with pytest.raises(DomainError):
            ConvergenceTable(rows=[ConvergenceRow(0.1, 10), ConvergenceRow(0.1, 20)])


class TestStudy:
    def test_study_grid_resolves_epsilon(self, study_config):
        assert study_grid(study_config, 0.125).n == 192
        assert study_grid(study_config, 1.0).n == 60

    def test_wave_span(self, study_config):
        check_wave_span(study_config, (-1.0, 1.0))
        short = study_config.model_copy(update={"scheme": SchemeConfig(t_end=0.1)})
        with pytest.raises(DomainError):
            check_wave_span(short, (-1.0, 1.0))

    @pytest.mark.parametrize("epsilons", [[], [0.1, 0.2], [0.1, 0.1], [0.1, -0.1]])
    def test_rejects_bad_epsilons(self, study_config, epsilons):
        with pytest.raises(DomainError):
            convergence_study(study_config, epsilons)

    def test_warns_below_gamma_threshold(self, study_config, caplog):
        soft = study_config.model_copy(
            update={"fluid": FluidParams.kinetic(1.4), "scheme": SchemeConfig(t_end=0.01)}
        )
        with caplog.at_level(logging.WARNING, logger="nsklimit.harness"):
            with pytest.raises(DomainError):
                convergence_study(soft, [0.2, 0.1])
        assert "5/3" in caplog.text

    def test_failed_row_keeps_status(self, study_config):
        limited = study_config.model_copy(update={"scheme": SchemeConfig(t_end=0.4, max_steps=5)})
        row = run_study_row(limited, 0.2, (-1.0, 1.0))
        assert row.status == "NumericalError"
        assert np.isnan(row.l1_rho)
        assert "Step limit" in row.error

    def test_short_sweep(self, study_config):
        table = convergence_study(study_config, [0.125, 0.0625])
        assert [r.n for r in table.rows] == [192, 384]
        assert len(table.ok_rows) == 2
        assert table.is_decreasing()
        for row in table.rows:
            assert row.bounds is not None
            assert row.bounds.invariant_violation <= 1e-3 * row.bounds.invariant_spread
            assert row.bounds.mass_balance_error < 1e-10

    @pytest.mark.slow
    def test_sweep_converges_to_euler_rarefaction(self, study_config):
        table = convergence_study(study_config, [0.125, 0.0625, 0.03125])
        assert table.is_decreasing()

    @pytest.mark.slow
    def test_process_pool_matches_serial(self, study_config):
        serial = convergence_study(study_config, [0.125, 0.0625])
        pooled = convergence_study(study_config, [0.125, 0.0625], runner=SweepRunner(max_workers=2))
        for a, b in zip(serial.rows, pooled.rows):
            assert a.l1_rho == pytest.approx(b.l1_rho, rel=1e-12)

    @pytest.mark.slow
    def test_uniform_bounds_stay_level_across_epsilon(self, study_config):
        table = convergence_study(study_config, [0.1, 0.05, 0.025])
        assert len(table.ok_rows) == 3
        for key in ("i_high", "i_cube"):
            values = [getattr(row.bounds, key) for row in table.rows]
            assert max(values) < 1.5 * min(values)

    @pytest.mark.slow
    def test_sweep_with_a_shock(self, study_config):
        shocked = study_config.model_copy(
            update={"far": FarField(rho_minus=2.0, rho_plus=1.0), "scheme": SchemeConfig(t_end=0.5)}
        )
        table = convergence_study(shocked, [0.125, 0.0625, 0.03125, 0.015625])
        assert len(table.ok_rows) == 4
        assert table.is_decreasing()
        assert table.rows[-1].l1_rho < 0.5 * table.rows[0].l1_rho


def test_constant_trajectory_helper_uses_requested_state(kinetic2):
    far = FarField(rho_minus=2.0, u_minus=0.5, rho_plus=2.0, u_plus=0.5)
    traj = make_constant_trajectory(Grid1D(0.0, 1.0, 8), kinetic2, far, [0.0, 0.5, 1.0], rho=2.0, v=0.5)
    report = uniform_bounds(traj, window=(0.0, 1.0), entropy_checks=False)
    assert report.i_high == pytest.approx(2.0 ** 3)
    assert report.i_cube == pytest.approx(2.0 ** 2.5 + 2.0 * 0.125)
