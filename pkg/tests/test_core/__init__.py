"""
BIPHASE Core Tests
==================

Unit tests for the numerical modules: model functions, fluxes, the moving
mesh, stationary states, the space-homogeneous ODE, the implicit solver,
diagnostics, invariant checks and the scenario drivers.
"""
