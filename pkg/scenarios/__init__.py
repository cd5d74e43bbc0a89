"""
BIPHASE builtin scenario presets (YAML files in this directory).
"""
