"""
BIPHASE UI Package
==================

Rich terminal presentation of runs.
"""

from .display import SimulationDisplay, UIConfig

__all__ = ['SimulationDisplay', 'UIConfig']
