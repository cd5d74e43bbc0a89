"""
BIPHASE Scenario Loader
=======================

Reads scenario files (YAML) into validated Scenario objects.

A scenario is either a path to a YAML file or the name of a builtin preset
shipped in the scenarios/ directory. Every key is checked against the schema;
errors carry the line number of the offending key.

Features:
- Sections model, mesh, time, initial, output and converge
- Preset inheritance through a top-level "extends" key
- Matrices as nested lists or whitespace-separated rows
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import yaml

from core.errors import ScenarioError
from core.scenarios import Scenario

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent.parent / "scenarios"

TOP_LEVEL_KEYS = {"name", "mode", "description", "derived", "extends",
                  "model", "mesh", "time", "initial", "output", "converge"}

SECTION_KEYS = {
    "model": {"kappa_s", "kappa_g", "mu_star_s", "mu_star_g", "beta_star"},
    "mesh": {"N", "X0"},
    "time": {"dt", "t_end"},
    "initial": {"profile", "values", "well_balanced"},
    "output": {"dir", "snapshot_times"},
    "converge": {"grids", "reference_N"},
}

# (section, key) -> (scenario field, converter name)
FIELD_MAP = {
    ("model", "kappa_s"): ("kappa_s", "matrix"),
    ("model", "kappa_g"): ("kappa_g", "matrix"),
    ("model", "mu_star_s"): ("mu_star_s", "vector"),
    ("model", "mu_star_g"): ("mu_star_g", "vector"),
    ("model", "beta_star"): ("beta_star", "beta"),
    ("mesh", "N"): ("N", "int"),
    ("mesh", "X0"): ("X0", "float"),
    ("time", "dt"): ("dt_init", "float"),
    ("time", "t_end"): ("t_end", "float"),
    ("initial", "profile"): ("profile", "str"),
    ("initial", "values"): ("profile_values", "array"),
    ("initial", "well_balanced"): ("well_balanced", "bool"),
    ("output", "dir"): ("output_dir", "str"),
    ("output", "snapshot_times"): ("snapshot_times", "times"),
    ("converge", "grids"): ("grids", "grids"),
    ("converge", "reference_N"): ("reference_N", "int"),
}

# Entry = (value node, line)
Entry = Tuple[yaml.Node, int]


def list_presets() -> List[str]:
    """Names of the builtin presets."""
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))


def resolve_source(path_or_preset: str) -> Path:
    path = Path(path_or_preset)
    if path.is_file():
        return path
    preset = PRESET_DIR / f"{path_or_preset}.yaml"
    if preset.is_file():
        return preset
    raise ScenarioError(f"no scenario file or preset named {path_or_preset!r} "
                        f"(presets: {', '.join(list_presets())})")


def _compose(text: str, source: str) -> yaml.MappingNode:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        raise ScenarioError(f"malformed YAML: {problem}",
                            line=mark.line + 1 if mark is not None else None, source=source) from e
    if root is None:
        raise ScenarioError("empty scenario file", source=source)
    if not isinstance(root, yaml.MappingNode):
        raise ScenarioError("scenario must be a mapping", line=root.start_mark.line + 1, source=source)
    return root


def _construct(node: yaml.Node) -> Any:
    return yaml.SafeLoader("").construct_object(node, deep=True)


def _mapping_entries(node: yaml.MappingNode, allowed, where: str, source: str) -> Dict[str, Entry]:
    entries: Dict[str, Entry] = {}
    for key_node, value_node in node.value:
        line = key_node.start_mark.line + 1
        key = key_node.value
        if key not in allowed:
            raise ScenarioError(f"unknown key {key!r} in {where} (allowed: {', '.join(sorted(allowed))})",
                                line=line, source=source)
        if key in entries:
            raise ScenarioError(f"duplicate key {key!r} in {where}", line=line, source=source)
        entries[key] = (value_node, line)
    return entries


def _read(path: Path, seen: Tuple[str, ...] = ()) -> Dict[str, Any]:
    """
    Flatten one file (and the presets it extends) into
    {"top": {key: Entry}, "<section>": {key: Entry}} plus the source name per entry.
    """
    source = str(path)
    root = _compose(path.read_text(encoding="utf-8"), source)
    top = _mapping_entries(root, TOP_LEVEL_KEYS, "scenario", source)

    merged: Dict[str, Dict[str, Tuple[yaml.Node, int, str]]] = {}
    if "extends" in top:
        node, line = top["extends"]
        parent = _construct(node)
        if not isinstance(parent, str):
            raise ScenarioError("extends must name a preset", line=line, source=source)
        if parent in seen:
            raise ScenarioError(f"circular extends through {parent!r}", line=line, source=source)
        merged = _read(resolve_source(parent), seen + (parent,))
        merged.get("top", {}).pop("name", None)
        merged.get("top", {}).pop("description", None)

    merged.setdefault("top", {})
    for key, (node, line) in top.items():
        if key in SECTION_KEYS:
            if not isinstance(node, yaml.MappingNode):
                raise ScenarioError(f"section {key!r} must be a mapping", line=line, source=source)
            section = _mapping_entries(node, SECTION_KEYS[key], f"section {key!r}", source)
            target = merged.setdefault(key, {})
            for sub_key, (sub_node, sub_line) in section.items():
                target[sub_key] = (sub_node, sub_line, source)
        elif key != "extends":
            merged["top"][key] = (node, line, source)
    return merged


def _convert(kind: str, value: Any, line: int, source: str, label: str) -> Any:
    def fail(expected: str):
        raise ScenarioError(f"{label} must be {expected}, got {value!r}", line=line, source=source)

    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if kind == "float":
        # YAML 1.1 reads exponent literals without a dot, such as 8e-4, as strings
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                fail("a number")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            fail("true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            fail("a string")
        return value
    if kind == "vector":
        try:
            return np.array(value, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            fail("a list of numbers")
    if kind == "beta":
        if value == "search":
            return "search"
        try:
            return np.array(value, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            fail("a list of numbers or 'search'")
    if kind == "matrix":
        return _matrix(value, fail)
    if kind == "array":
        try:
            rows = [r.split() if isinstance(r, str) else r for r in value]
            return np.array(rows, dtype=float)
        except (TypeError, ValueError):
            fail("a list of numbers or of rows")
    if kind == "times":
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split()]
        try:
            return tuple(sorted(float(v) for v in value))
        except (TypeError, ValueError):
            fail("a list of times")
    if kind == "grids":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            fail("a list of integers")
        return tuple(value)
    raise ValueError(f"unknown converter {kind}")


def _matrix(value: Any, fail) -> np.ndarray:
    if isinstance(value, str):
        value = [row for row in value.strip().splitlines() if row.strip()]
    if not isinstance(value, list):
        fail("a matrix")
    rows = [row.split() if isinstance(row, str) else row for row in value]
    try:
        mat = np.array(rows, dtype=float)
    except (TypeError, ValueError):
        fail("a square matrix of numbers")
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        fail("a square matrix")
    return mat


def parse_config(path_or_preset: str) -> Scenario:
    """
    Load and validate a scenario.

    Raises ScenarioError with a file and line reference for unknown keys,
    wrong types and out-of-range values.
    """
    path = resolve_source(path_or_preset)
    merged = _read(path)

    fields: Dict[str, Any] = {}
    lines: Dict[str, Tuple[int, str]] = {}
    top = merged.pop("top")
    for key, (node, line, source) in top.items():
        value = _construct(node)
        kind = {"name": "str", "mode": "str", "description": "str", "derived": "bool"}[key]
        fields[key] = _convert(kind, value, line, source, key)
        lines[key] = (line, source)

    for section, entries in merged.items():
        for key, (node, line, source) in entries.items():
            field_name, kind = FIELD_MAP[(section, key)]
            fields[field_name] = _convert(kind, _construct(node), line, source, f"{section}.{key}")
            lines[field_name] = (line, source)

    for required in ("kappa_s", "kappa_g"):
        if required not in fields:
            raise ScenarioError(f"model.{required} is required", source=str(path))
    has_mu = "mu_star_s" in fields or "mu_star_g" in fields
    if "beta_star" not in fields and not has_mu:
        raise ScenarioError("model needs beta_star or both mu_star_s and mu_star_g", source=str(path))

    if isinstance(fields.get("beta_star"), str):
        fields.pop("beta_star")
        fields["beta_search"] = True
    fields.setdefault("name", path.stem)

    def check(field_name: str, ok: bool, message: str) -> None:
        if field_name in fields and not ok:
            line, source = lines.get(field_name, (None, str(path)))
            raise ScenarioError(message, line=line, source=source)

    check("X0", 0.0 < fields.get("X0", 0.5) < 1.0, f"mesh.X0 must lie in (0, 1), got {fields.get('X0')}")
    check("N", fields.get("N", 4) >= 4, f"mesh.N must be at least 4, got {fields.get('N')}")
    check("dt_init", fields.get("dt_init", 1.0) > 0.0, f"time.dt must be positive, got {fields.get('dt_init')}")
    check("t_end", fields.get("t_end", 1.0) > 0.0, f"time.t_end must be positive, got {fields.get('t_end')}")

    scenario = Scenario(**fields)
    try:
        scenario.validate()
    except ScenarioError as e:
        if e.source is not None:
            raise
        raise ScenarioError(str(e), source=str(path)) from e
    logger.info(f"loaded scenario {scenario.name} ({scenario.mode}) from {path}")
    return scenario
