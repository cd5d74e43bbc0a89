"""
BIPHASE Configuration Management
================================

Centralized process settings for the solver, the output layer and run control.
Values come from BIPHASE_* environment variables, optionally through a .env file.
"""

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict

# Load environment variables
from dotenv import load_dotenv
load_dotenv()

logger = logging.getLogger(__name__)


@dataclass
class SolverSettings:
    """Newton and step-size control settings."""
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    max_halvings: int = 20
    cfl_safety: float = 0.99
    growth_streak: int = 10

    def __post_init__(self):
        """Load solver settings from environment variables."""
        self.newton_tol = float(os.getenv('BIPHASE_NEWTON_TOL', '1e-12'))
        self.newton_max_iter = int(os.getenv('BIPHASE_NEWTON_MAX_ITER', '50'))
        self.max_halvings = int(os.getenv('BIPHASE_MAX_HALVINGS', '20'))
        self.cfl_safety = float(os.getenv('BIPHASE_CFL_SAFETY', '0.99'))
        self.growth_streak = int(os.getenv('BIPHASE_GROWTH_STREAK', '10'))


@dataclass
class OutputSettings:
    """Output location, invariant policy and log level."""
    output_dir: str = "results"
    strict_invariants: bool = False
    log_level: str = "INFO"

    def __post_init__(self):
        """Load output settings from environment variables."""
        self.output_dir = os.getenv('BIPHASE_OUTPUT_DIR', 'results')
        self.strict_invariants = os.getenv('BIPHASE_STRICT_INVARIANTS', 'false').lower() == 'true'
        self.log_level = os.getenv('BIPHASE_LOG_LEVEL', 'INFO').upper()


@dataclass
class RunSettings:
    """Parallelism and presentation of runs."""
    workers: int = 4
    progress: bool = True

    def __post_init__(self):
        """Load run settings from environment variables."""
        self.workers = int(os.getenv('BIPHASE_WORKERS', '4'))
        self.progress = os.getenv('BIPHASE_PROGRESS', 'true').lower() == 'true'


class Config:
    """
    Main configuration class for BIPHASE.

    Centralizes all process settings and provides validation.
    """

    def __init__(self):
        """Initialize configuration with all groups."""
        self.solver = SolverSettings()
        self.output = OutputSettings()
        self.run = RunSettings()

        # Validate configuration
        self._validate_config()

    def _validate_config(self) -> None:
        """Validate settings, fall back to defaults and log warnings for bad values."""
        warnings = []

        if not 0.0 < self.solver.cfl_safety < 1.0:
            warnings.append(f"BIPHASE_CFL_SAFETY={self.solver.cfl_safety} outside (0, 1) - using 0.99")
            self.solver.cfl_safety = 0.99

        if self.solver.newton_tol > 1e-8:
            warnings.append(f"BIPHASE_NEWTON_TOL={self.solver.newton_tol:g} is loose - "
                            f"invariants checked at 1e-10 may fail")

        if self.solver.newton_max_iter < 1:
            warnings.append("BIPHASE_NEWTON_MAX_ITER must be positive - using 50")
            self.solver.newton_max_iter = 50

        if self.solver.max_halvings < 0:
            warnings.append("BIPHASE_MAX_HALVINGS must be nonnegative - using 20")
            self.solver.max_halvings = 20

        if self.solver.growth_streak < 1:
            warnings.append("BIPHASE_GROWTH_STREAK must be positive - using 10")
            self.solver.growth_streak = 10

        if self.run.workers < 1:
            warnings.append("BIPHASE_WORKERS must be positive - using 1")
            self.run.workers = 1

        if self.output.log_level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR'):
            warnings.append(f"unknown BIPHASE_LOG_LEVEL {self.output.log_level} - using INFO")
            self.output.log_level = 'INFO'

        for warning in warnings:
            logger.warning(warning)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary for serialization."""
        return {
            'solver': {
                'newton_tol': self.solver.newton_tol,
                'newton_max_iter': self.solver.newton_max_iter,
                'max_halvings': self.solver.max_halvings,
                'cfl_safety': self.solver.cfl_safety,
                'growth_streak': self.solver.growth_streak,
            },
            'output': {
                'output_dir': self.output.output_dir,
                'strict_invariants': self.output.strict_invariants,
                'log_level': self.output.log_level,
            },
            'run': {
                'workers': self.run.workers,
                'progress': self.run.progress,
            },
        }
