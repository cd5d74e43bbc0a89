"""
Test Implicit Solver
====================

Unit tests for the residual, the Jacobian, Newton's method and step-size control.
"""

import unittest

import numpy as np

from core.diagnostics import discrete_free_energy
from core.errors import GeometryError
from core.mesh import MovingMesh, discretize_initial
from core.model import ModelParams
from core.solver import (SimState, Simulation, StepperConfig, TimeStepper, advance, cfl_constant,
                         finite_difference_jacobian, jacobian, newton_solve, raw_scheme_residual_check,
                         residual, stable_dt)
from core.stationary import solve_stationary, stationary_profile

KAPPA = [[0.0, 0.2, 1.0], [0.2, 0.0, 0.1], [1.0, 0.1, 0.0]]
BETA = [1.0 / 6.0, 4.0, 4.0]


def cosine_profile(x):
    cos = np.cos(np.pi * np.asarray(x, dtype=float))
    return np.stack([(1.0 + cos) / 4.0, (1.0 + cos) / 4.0, (1.0 - cos) / 2.0], axis=-1)


def cosine_state(N, X0=0.51):
    mesh = MovingMesh.from_interface(X0, N)
    return SimState(c=discretize_initial(cosine_profile, mesh), mesh=mesh, t=0.0)


class TestStepperConfig(unittest.TestCase):
    """Test cases for step-size configuration and the CFL bound."""

    def test_invalid_config(self):
        """Nonpositive steps and safety factors outside (0, 1) are rejected."""
        with self.assertRaises(ValueError):
            StepperConfig(dt_init=0.0)
        with self.assertRaises(ValueError):
            StepperConfig(dt_init=1e-3, cfl_safety=1.0)

    def test_cfl_bound(self):
        """The step is clamped below dx / (2 max_i 2 cosh(log(beta_i) / 2))."""
        params = ModelParams.build(KAPPA, KAPPA, beta_star=BETA)
        constant = np.sqrt(6.0) + 1.0 / np.sqrt(6.0)
        self.assertAlmostEqual(cfl_constant(params), constant, places=13)
        self.assertAlmostEqual(stable_dt(StepperConfig(dt_init=1.0), params, 100),
                               0.99 * 0.01 / (2.0 * constant), places=15)
        self.assertEqual(stable_dt(StepperConfig(dt_init=6e-4), params, 100), 6e-4)


class TestResidualAndJacobian(unittest.TestCase):
    """Test cases for the discrete residual and its derivative."""

    def setUp(self):
        """Set up a coarse two-phase state."""
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=BETA)
        self.state = cosine_state(8)
        self.dt = 1e-3

    def test_analytic_jacobian_matches_finite_differences(self):
        """The sparse Jacobian equals a central-difference Jacobian on N=8, n=3."""
        rng = np.random.default_rng(3)
        c_trial = 0.98 * self.state.c * (1.0 + 0.02 * rng.uniform(-1.0, 1.0, self.state.c.shape))
        analytic = jacobian(c_trial, self.state, self.dt, self.params).toarray()
        numeric = finite_difference_jacobian(c_trial, self.state, self.dt, self.params)
        self.assertEqual(analytic.shape, (24, 24))
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-5)

    def test_residual_vanishes_at_stationary_profile(self):
        """The discrete stationary profile is a root of the scheme."""
        bar = solve_stationary(np.array([0.25, 0.25, 0.5]), self.params.beta_star).two_phase
        c, mesh = stationary_profile(bar, 20)
        given = SimState(c=c, mesh=mesh, t=0.0)
        self.assertLessEqual(np.max(np.abs(residual(c, given, self.dt, self.params))), 1e-12)
        result = newton_solve(given, self.dt, self.params, StepperConfig(dt_init=self.dt))
        self.assertLessEqual(result.iterations, 1)
        self.assertAlmostEqual(result.X_new, bar.X_bar, places=13)

    def test_residual_rejects_boundary_interface(self):
        """Two-phase steps need the interface away from the first and last edge."""
        mesh = MovingMesh.cut(0.12, 1, 10)
        given = SimState(c=np.full((10, 3), 1.0 / 3.0), mesh=mesh, t=0.0)
        with self.assertRaises(GeometryError):
            residual(given.c, given, self.dt, self.params)


class TestNewton(unittest.TestCase):
    """Test cases for the Newton solve of one step."""

    def setUp(self):
        """Set up parameters and a state on twenty cells."""
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=BETA)
        self.state = cosine_state(20)
        self.config = StepperConfig(dt_init=1e-3)

    def test_newton_root(self):
        """The root is positive, volume filling and solves the unmodified scheme."""
        result = newton_solve(self.state, 1e-3, self.params, self.config)
        self.assertGreater(result.iterations, 0)
        self.assertLessEqual(result.increment, self.config.newton_tol)
        self.assertGreater(np.min(result.c_star), 0.0)
        np.testing.assert_allclose(result.c_star.sum(axis=1), 1.0, atol=1e-10)
        self.assertLess(raw_scheme_residual_check(result.c_star, self.state, 1e-3, self.params), 1e-8)
        self.assertNotEqual(result.X_new, self.state.X)


class TestTimeStepping(unittest.TestCase):
    """Test cases for accepted steps and the sequential driver."""

    def setUp(self):
        """Set up indistinguishable phases on twenty cells."""
        self.params = ModelParams.build(KAPPA, KAPPA, beta_star=[1.0, 1.0, 1.0])
        self.state = cosine_state(20)
        self.config = StepperConfig(dt_init=8e-4)

    def test_single_step_invariants(self):
        """One step conserves mass, keeps volume filling and lowers the energy."""
        new = advance(self.state, self.config, self.params)
        self.assertAlmostEqual(new.t, 8e-4)
        np.testing.assert_allclose(new.mesh.masses(new.c), self.state.mesh.masses(self.state.c),
                                   rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(new.c.sum(axis=1), 1.0, atol=1e-10)
        self.assertGreater(np.min(new.c), 0.0)
        self.assertLessEqual(abs(new.X - self.state.X), 0.5 * self.state.mesh.dx)
        self.assertLess(discrete_free_energy(new.c, new.mesh, self.params),
                        discrete_free_energy(self.state.c, self.state.mesh, self.params))
        self.assertEqual(new.trace.halvings, 0)

    def test_simulation_lands_on_stops(self):
        """Requested stop times and the final time are hit exactly."""
        sim = Simulation(self.state, self.params, self.config, keep_history=True)
        final = sim.run(0.01, stops=[0.005])
        self.assertEqual(final.t, 0.01)
        self.assertIn(0.005, [s.t for s in sim.history])
        self.assertEqual(len(sim.history), sim.steps + 1)
        self.assertEqual(sim.halved_steps, 0)
        times = np.array([s.t for s in sim.history])
        self.assertTrue(np.all(np.diff(times) > 0.0))

    def test_history_drops_step_trace(self):
        """Stored states keep c, mesh and t but not the intermediate arrays of their step."""
        seen = []
        sim = Simulation(self.state, self.params, self.config, keep_history=True)
        final = sim.run(0.004, observer=lambda old, new: seen.append(new))
        self.assertIsNotNone(final.trace)
        self.assertTrue(all(s.trace is None for s in sim.history))
        for stored, new in zip(sim.history[1:], seen):
            self.assertEqual(stored.t, new.t)
            self.assertIs(stored.c, new.c)
            self.assertIs(stored.mesh, new.mesh)

    def test_observer_sees_every_step(self):
        """The observer receives each accepted pair in order."""
        seen = []
        sim = Simulation(self.state, self.params, self.config)
        sim.run(0.004, observer=lambda old, new: seen.append((old.t, new.t)))
        self.assertEqual(len(seen), sim.steps)
        for (t_old, t_new), (t_next, _) in zip(seen, seen[1:]):
            self.assertEqual(t_new, t_next)

    def test_step_growth_is_capped(self):
        """Doubling never exceeds the configured step."""
        stepper = TimeStepper(self.params, StepperConfig(dt_init=8e-4, growth_streak=2), 20)
        state = self.state
        for _ in range(5):
            state = stepper.step(state)
        self.assertEqual(stepper.dt, 8e-4)


if __name__ == '__main__':
    unittest.main()
