"""
BIPHASE Configuration Module
============================

Process settings from the environment and scenario files.
"""

from .config import Config
from .scenario_loader import parse_config

__all__ = ['Config', 'parse_config']
