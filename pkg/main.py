#!/usr/bin/env python3
"""
BIPHASE - Two-Phase Cross-Diffusion Simulator
=============================================

Launcher for running BIPHASE from a source checkout without installing it.
"""

import os
import sys

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli.main import main

if __name__ == "__main__":
    sys.exit(main())
