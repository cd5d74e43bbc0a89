"""
BIPHASE Core
============

Numerical modules: model functions, stationary states, the space-homogeneous
ODE, the moving mesh, edge fluxes, the implicit solver, diagnostics,
invariant checks and the scenario drivers.
"""
