"""
BIPHASE CLI Tests
=================

Unit tests for the command line surface and its exit codes.
"""
