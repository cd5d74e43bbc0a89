"""
BIPHASE test suite.
"""
