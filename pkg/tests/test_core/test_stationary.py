"""
Test Stationary States
======================

Unit tests for the classification and computation of stationary states.
"""

import unittest

import numpy as np

from core.errors import DomainError
from core.mesh import MovingMesh, discretize_initial
from core.stationary import (StationaryKind, initial_mass, is_stationary, phi_of_X, phi_prime_of_X,
                             phi_second_derivative, solve_stationary, stationary_profile,
                             two_phase_condition)

M0 = np.array([0.25, 0.25, 0.5])
BETA = np.array([1.0 / 6.0, 4.0, 4.0])


class TestTwoPhaseCondition(unittest.TestCase):
    """Test cases for the existence condition of two-phase states."""

    def test_condition(self):
        """Both weighted mass sums must exceed one."""
        self.assertTrue(two_phase_condition(M0, BETA))
        self.assertFalse(two_phase_condition(M0, [2.0, 2.0, 2.0]))
        self.assertFalse(two_phase_condition(M0, [0.5, 0.5, 0.5]))

    def test_nonpositive_masses(self):
        """Masses must be strictly positive."""
        with self.assertRaises(DomainError):
            two_phase_condition([0.5, 0.5, 0.0], BETA)

    def test_phi_derivatives(self):
        """Closed-form derivatives of phi match central differences."""
        h = 1e-6
        for X in (0.2, 0.5, 0.8):
            fd1 = (phi_of_X(X + h, M0, BETA) - phi_of_X(X - h, M0, BETA)) / (2 * h)
            fd2 = (phi_prime_of_X(X + h, M0, BETA) - phi_prime_of_X(X - h, M0, BETA)) / (2 * h)
            self.assertAlmostEqual(phi_prime_of_X(X, M0, BETA), fd1, places=6)
            self.assertAlmostEqual(phi_second_derivative(X, M0, BETA), fd2, places=5)

    def test_phi_at_zero(self):
        """phi(0) = sum(m0) - 1 vanishes for volume-filling masses."""
        self.assertAlmostEqual(phi_of_X(0.0, M0, BETA), 0.0, places=15)
        with self.assertRaises(DomainError):
            phi_of_X(1.5, M0, BETA)


class TestSolveStationary(unittest.TestCase):
    """Test cases for solve_stationary."""

    def test_two_phase_state(self):
        """The two-phase state is in mass-action equilibrium and conserves mass."""
        result = solve_stationary(M0, BETA)
        self.assertEqual(result.kind, "two_phase")
        self.assertTrue(result.condition)
        state = result.two_phase
        self.assertTrue(0.0 < state.X_bar < 1.0)
        self.assertLessEqual(abs(phi_of_X(state.X_bar, M0, BETA)), 1e-14)
        np.testing.assert_allclose(state.c_bar_s, BETA * state.c_bar_g)
        self.assertAlmostEqual(state.c_bar_g.sum(), 1.0, places=13)
        self.assertAlmostEqual(state.c_bar_s.sum(), 1.0, places=13)
        self.assertTrue(is_stationary(state.c_bar_s, state.c_bar_g, state.X_bar, M0, BETA))
        self.assertEqual(len(result.states), 3)

    def test_indistinguishable_family(self):
        """beta = 1 gives a family with equal compositions and no interface position."""
        result = solve_stationary(M0, [1.0, 1.0, 1.0])
        self.assertEqual(result.kind, "indistinguishable_family")
        family = result.states[0]
        self.assertTrue(family.is_family)
        self.assertIsNone(family.X_bar)
        np.testing.assert_array_equal(family.c_bar_s, M0)
        self.assertIsNone(result.two_phase)

    def test_pure_states_only(self):
        """Without the two-phase condition only the pure states remain."""
        result = solve_stationary(M0, [2.0, 2.0, 2.0])
        self.assertEqual(result.kind, "pure_only")
        kinds = {state.kind for state in result.states}
        self.assertEqual(kinds, {StationaryKind.PURE_SOLID, StationaryKind.PURE_GAS})
        for state in result.states:
            self.assertTrue(is_stationary(state.c_bar_s, state.c_bar_g, state.X_bar, M0, [2.0, 2.0, 2.0]))

    def test_is_stationary_rejects_flux(self):
        """A mass-consistent triple with interface flux is not stationary."""
        c = np.array([0.25, 0.25, 0.5])
        self.assertFalse(is_stationary(c, c, 0.5, M0, BETA))
        self.assertTrue(is_stationary(c, c, 0.5, M0, [1.0, 1.0, 1.0]))


class TestStationaryProfile(unittest.TestCase):
    """Test cases for the discrete stationary profile."""

    def setUp(self):
        """Set up the two-phase state of the reference masses."""
        self.state = solve_stationary(M0, BETA).two_phase

    def test_profile_carries_initial_masses(self):
        """Projected onto the moving mesh, the state keeps the masses."""
        c, mesh = stationary_profile(self.state, 50)
        self.assertAlmostEqual(mesh.X, self.state.X_bar)
        np.testing.assert_allclose(mesh.masses(c), M0, atol=1e-14)
        np.testing.assert_array_equal(c[mesh.solid_cell], self.state.c_bar_s)
        np.testing.assert_array_equal(c[mesh.gas_cell], self.state.c_bar_g)

    def test_profile_needs_two_phases(self):
        """Families and pure states have no profile."""
        family = solve_stationary(M0, [1.0, 1.0, 1.0]).states[0]
        with self.assertRaises(DomainError):
            stationary_profile(family, 50)

    def test_initial_mass(self):
        """initial_mass integrates cell values with the mesh widths."""
        mesh = MovingMesh.from_interface(0.51, 20)
        c0 = discretize_initial(lambda x: np.broadcast_to(M0, np.shape(x) + (3,)), mesh)
        np.testing.assert_allclose(initial_mass(c0, mesh), M0, atol=1e-14)


if __name__ == '__main__':
    unittest.main()
