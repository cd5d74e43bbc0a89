"""
Test Diagnostics
================

Unit tests for energies, dissipation reports, error measures and CSV output.
"""

import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from core.diagnostics import (ConvergenceTable, ErrorRow, discrete_free_energy, dissipation_report,
                              fit_exponential_decay, fit_order, l1_errors, make_record,
                              relative_quantities, stationary_energy, time_series_frame,
                              weak_interface_bound, write_error_table, write_snapshot,
                              write_time_series)
from core.errors import GridError
from core.mesh import MovingMesh, discretize_initial
from core.model import ModelParams, free_energy_density
from core.solver import SimState, Simulation, StepperConfig, advance
from core.stationary import solve_stationary

KAPPA = [[0.0, 0.2, 1.0], [0.2, 0.0, 0.1], [1.0, 0.1, 0.0]]
BETA = [1.0 / 6.0, 4.0, 4.0]
M0 = np.array([0.25, 0.25, 0.5])


def cosine_profile(x):
    cos = np.cos(np.pi * np.asarray(x, dtype=float))
    return np.stack([(1.0 + cos) / 4.0, (1.0 + cos) / 4.0, (1.0 - cos) / 2.0], axis=-1)


def cosine_state(N, X0=0.51):
    mesh = MovingMesh.from_interface(X0, N)
    return SimState(c=discretize_initial(cosine_profile, mesh), mesh=mesh, t=0.0)


class TestEnergy(unittest.TestCase):
    """Test cases for discrete and stationary energies."""

    def setUp(self):
        """Set up parameters with distinct phases."""
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=BETA)

    def test_energy_of_constant_state(self):
        """Width-weighted phase energies of a constant composition."""
        mesh = MovingMesh.from_interface(0.51, 10)
        c = np.tile(M0, (10, 1))
        h_s = float(free_energy_density(M0, "s", self.params))
        h_g = float(free_energy_density(M0, "g", self.params))
        self.assertAlmostEqual(discrete_free_energy(c, mesh, self.params), 0.51 * h_s + 0.49 * h_g, places=14)

    def test_stationary_energy_is_lower(self):
        """The two-phase state has less energy than the initial profile."""
        bar = solve_stationary(M0, self.params.beta_star).two_phase
        state = cosine_state(50)
        H0 = discrete_free_energy(state.c, state.mesh, self.params)
        self.assertLess(stationary_energy(bar, self.params), H0)
        H_rel, dX_rel = relative_quantities(H0, state.X, bar, self.params)
        self.assertGreater(H_rel, 0.0)
        self.assertAlmostEqual(dX_rel, abs(0.51 - bar.X_bar))

    def test_relative_quantities_without_reference(self):
        """Missing references give NaN."""
        H_rel, dX_rel = relative_quantities(1.0, 0.5, None, self.params)
        self.assertTrue(np.isnan(H_rel) and np.isnan(dX_rel))

    def test_family_energy(self):
        """The indistinguishable family has no interface position."""
        trivial = ModelParams.build(KAPPA, KAPPA, beta_star=[1.0, 1.0, 1.0])
        family = solve_stationary(M0, [1.0, 1.0, 1.0]).states[0]
        self.assertAlmostEqual(stationary_energy(family, trivial), float(free_energy_density(M0, "s", trivial)))
        _, dX_rel = relative_quantities(2.0, 0.5, family, trivial)
        self.assertTrue(np.isnan(dX_rel))


class TestDissipationReport(unittest.TestCase):
    """Test cases for the per-step energy balance."""

    def setUp(self):
        """Take one step with distinct phases."""
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=BETA)
        self.old = cosine_state(20)
        self.new = advance(self.old, StepperConfig(dt_init=1e-3), self.params)
        self.report = dissipation_report(self.old, self.new, self.new.trace.dt, self.params)

    def test_dissipation_inequality(self):
        """Energy drop pays for bulk and interface dissipation."""
        self.assertTrue(self.report.holds)
        self.assertLess(self.report.H_new, self.report.H_old)
        self.assertGreater(self.report.bulk, 0.0)
        self.assertGreaterEqual(self.report.interface_linear, 0.0)
        self.assertFalse(self.report.pinned)
        self.assertEqual(self.report.pin_jump, 0.0)

    def test_interface_forms(self):
        """Strong and linear interface forms agree and dominate the weak bound."""
        self.assertLess(self.report.fenchel_young_gap, 1e-10)
        self.assertTrue(self.report.weak_bound_ok)
        self.assertLessEqual(self.report.weak_bound, self.report.strong_phi + 1e-15)

    def test_weak_interface_bound(self):
        """The comparison allows a relative rounding slack."""
        self.assertTrue(weak_interface_bound(1.0, 1.0 + 1e-14))
        self.assertFalse(weak_interface_bound(1.0, 1.1))

    def test_record(self):
        """Records carry the step data and the masses."""
        bar = solve_stationary(M0, self.params.beta_star).two_phase
        record = make_record(self.new, self.params, bar, self.report)
        self.assertEqual(record.t, self.new.t)
        self.assertEqual(record.newton_iters, self.new.trace.newton_iters)
        self.assertEqual(record.dissipation_bulk, self.report.bulk)
        np.testing.assert_allclose(record.masses, M0, atol=1e-10)


class TestErrorMeasures(unittest.TestCase):
    """Test cases for L1 errors and fitted rates."""

    def setUp(self):
        """Record two short runs with indistinguishable phases."""
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=[1.0, 1.0, 1.0])
        config = StepperConfig(dt_init=1e-3)
        self.runs = {}
        for N in (8, 16):
            sim = Simulation(cosine_state(N), self.params, config, keep_history=True)
            sim.run(0.005)
            self.runs[N] = sim.history

    def test_self_comparison_is_exact(self):
        """A run compared with itself has zero error."""
        error_c, error_X = l1_errors(self.runs[8], self.runs[8])
        self.assertAlmostEqual(error_c, 0.0, places=14)
        self.assertAlmostEqual(error_X, 0.0, places=14)

    def test_refined_reference(self):
        """Errors against a refined run are finite and positive."""
        error_c, error_X = l1_errors(self.runs[8], self.runs[16])
        self.assertTrue(np.isfinite(error_c) and error_c > 0.0)
        self.assertTrue(np.isfinite(error_X))

    def test_incompatible_grids(self):
        """A coarser reference is not a refinement."""
        with self.assertRaises(GridError):
            l1_errors(self.runs[16], self.runs[8])
        with self.assertRaises(GridError):
            l1_errors(self.runs[8][:1], self.runs[16])

    def test_fit_order(self):
        """Slope of log error against log dx."""
        dx = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
        self.assertAlmostEqual(fit_order(dx, 3.0 * dx), 1.0, places=12)
        self.assertAlmostEqual(fit_order(dx, 0.5 * dx**2), 2.0, places=12)
        self.assertTrue(np.isnan(fit_order(dx[:1], dx[:1])))

    def test_fit_exponential_decay(self):
        """Exact exponentials give their rate with R^2 = 1."""
        t = np.linspace(0.0, 5.0, 40)
        slope, r2 = fit_exponential_decay(t, 0.3 * np.exp(-2.0 * t))
        self.assertAlmostEqual(slope, -2.0, places=10)
        self.assertAlmostEqual(r2, 1.0, places=12)

    def test_convergence_table_orders(self):
        """Orders are fitted over the table rows."""
        table = ConvergenceTable(reference_N=64)
        for N in (8, 16, 32):
            table.rows.append(ErrorRow(N=N, dx=1.0 / N, error_c=1.0 / N**2, error_X=1.0 / N))
        self.assertAlmostEqual(table.order_c, 2.0, places=12)
        self.assertAlmostEqual(table.order_X, 1.0, places=12)


class TestCsvOutput(unittest.TestCase):
    """Test cases for the CSV writers."""

    def setUp(self):
        """Set up a temporary output directory and a short run."""
        self.test_dir = tempfile.mkdtemp()
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=BETA)
        self.state = cosine_state(10)

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_time_series(self):
        """One row per record with masses per species."""
        records = [make_record(self.state, self.params, None)]
        frame = time_series_frame(records)
        self.assertIn("m_3", frame.columns)
        path = write_time_series(records, Path(self.test_dir) / "out" / "series.csv")
        self.assertTrue(path.is_file())
        self.assertEqual(len(pd.read_csv(path)), 1)

    def test_snapshot(self):
        """Snapshots list cell edges and concentrations."""
        path = write_snapshot(self.state, Path(self.test_dir) / "snap.csv")
        frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ["x_left", "x_right", "c_1", "c_2", "c_3"])
        self.assertAlmostEqual(frame["x_right"].iloc[4], 0.51)

    def test_error_table(self):
        """The fitted orders follow the grid rows."""
        table = ConvergenceTable(reference_N=32)
        table.rows = [ErrorRow(8, 0.125, 0.1, 0.2), ErrorRow(16, 0.0625, 0.05, 0.1)]
        frame = pd.read_csv(write_error_table(table, Path(self.test_dir) / "errors.csv"))
        self.assertEqual(len(frame), 3)
        self.assertEqual(str(frame["N"].iloc[-1]), "order")
        self.assertAlmostEqual(float(frame["error_c"].iloc[-1]), 1.0, places=10)


if __name__ == '__main__':
    unittest.main()
