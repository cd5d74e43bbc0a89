"""
BIPHASE CLI Package
===================

Command line interface for BIPHASE.
"""

from .main import main

__all__ = ['main']
