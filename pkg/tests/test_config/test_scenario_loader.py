"""
Test Scenario Loader
====================

Unit tests for reading scenario files and builtin presets.
"""

import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np

from config.scenario_loader import PRESET_DIR, list_presets, parse_config, resolve_source
from core.errors import ScenarioError

SAMPLE = """\
name: sample
mode: pde
model:
  kappa_s: [[0.0, 0.2, 1.0], [0.2, 0.0, 0.1], [1.0, 0.1, 0.0]]
  kappa_g: [[0.0, 0.2, 1.0], [0.2, 0.0, 0.1], [1.0, 0.1, 0.0]]
  beta_star: [1.0, 1.0, 1.0]
mesh:
  N: 20
  X0: {X0}
time:
  dt: 8e-4
  t_end: 0.1
"""


class TestPresets(unittest.TestCase):
    """Test cases for the builtin presets."""

    def test_every_preset_loads(self):
        """All shipped presets parse and validate."""
        names = list_presets()
        self.assertIn("equilibrium", names)
        self.assertIn("converge_full", names)
        for name in names:
            scenario = parse_config(name)
            self.assertEqual(scenario.name, name)

    def test_extends_inherits_sections(self):
        """A preset inherits the model and mesh of its parent."""
        parent = parse_config("equilibrium")
        child = parse_config("converge")
        np.testing.assert_array_equal(child.kappa_s, parent.kappa_s)
        np.testing.assert_array_equal(child.beta_star, parent.beta_star)
        self.assertEqual(child.mode, "converge")
        self.assertEqual(child.grids, (8, 16, 32, 64, 128))
        self.assertEqual(child.reference_N, 512)
        self.assertEqual(child.snapshot_times, ())

    def test_search_flag(self):
        """beta_star: search defers the exchange constants."""
        scenario = parse_config("equilibrium_nonmonotone")
        self.assertTrue(scenario.beta_search)
        self.assertTrue(scenario.derived)
        with self.assertRaises(ScenarioError):
            scenario.params()

    def test_missing_preset(self):
        """Unknown names list the available presets."""
        with self.assertRaises(ScenarioError) as ctx:
            resolve_source("no_such_preset")
        self.assertIn("equilibrium", str(ctx.exception))
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_preset_directory(self):
        """Presets live next to the package sources."""
        self.assertTrue((PRESET_DIR / "trivial.yaml").is_file())


class TestScenarioFiles(unittest.TestCase):
    """Test cases for user scenario files."""

    def setUp(self):
        """Set up a temporary directory for scenario files."""
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def write(self, text: str, name: str = "sample.yaml") -> str:
        path = Path(self.test_dir) / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_valid_file(self):
        """Exponent literals without a dot are read as numbers."""
        scenario = parse_config(self.write(SAMPLE.format(X0=0.4)))
        self.assertEqual(scenario.name, "sample")
        self.assertEqual(scenario.N, 20)
        self.assertEqual(scenario.dt_init, 0.0008)
        self.assertEqual(scenario.X0, 0.4)

    def test_out_of_range_value_has_line(self):
        """Range errors point at the offending key."""
        path = self.write(SAMPLE.format(X0=1.5))
        with self.assertRaises(ScenarioError) as ctx:
            parse_config(path)
        self.assertEqual(ctx.exception.line, 9)
        self.assertEqual(ctx.exception.source, path)
        self.assertIn(f"{path}:9:", str(ctx.exception))

    def test_unknown_key_has_line(self):
        """Unknown keys are rejected with their line."""
        text = SAMPLE.format(X0=0.4).replace("  N: 20\n", "  N: 20\n  cells: 4\n")
        with self.assertRaises(ScenarioError) as ctx:
            parse_config(self.write(text))
        self.assertEqual(ctx.exception.line, 9)
        self.assertIn("cells", str(ctx.exception))

    def test_wrong_type(self):
        """Type errors name the section and key."""
        text = SAMPLE.format(X0=0.4).replace("N: 20", "N: twenty")
        with self.assertRaises(ScenarioError) as ctx:
            parse_config(self.write(text))
        self.assertIn("mesh.N", str(ctx.exception))
        self.assertEqual(ctx.exception.line, 8)

    def test_malformed_yaml(self):
        """Syntax errors become scenario errors."""
        with self.assertRaises(ScenarioError):
            parse_config(self.write("model: [unclosed\n"))
        with self.assertRaises(ScenarioError):
            parse_config(self.write(""))

    def test_missing_model(self):
        """The friction matrices are required."""
        with self.assertRaises(ScenarioError) as ctx:
            parse_config(self.write("name: bare\nmode: pde\n"))
        self.assertIn("kappa_s", str(ctx.exception))

    def test_extends_from_file(self):
        """User files may extend a builtin preset."""
        path = self.write("extends: equilibrium\nmesh:\n  N: 40\n", name="refined.yaml")
        scenario = parse_config(path)
        self.assertEqual(scenario.name, "refined")
        self.assertEqual(scenario.N, 40)
        self.assertEqual(scenario.X0, 0.51)

    def test_paper_cosine_profile(self):
        """paper_cosine names the same cosine profile as cosine."""
        text = SAMPLE.format(X0=0.4) + "initial:\n  profile: paper_cosine\n"
        scenario = parse_config(self.write(text))
        self.assertEqual(scenario.profile, "paper_cosine")
        x = np.linspace(0.0, 1.0, 11)
        reference = parse_config(self.write(SAMPLE.format(X0=0.4) + "initial:\n  profile: cosine\n",
                                            name="cosine.yaml"))
        np.testing.assert_array_equal(scenario.initial_profile()(x), reference.initial_profile()(x))
        np.testing.assert_allclose(scenario.initial_profile()(np.array([0.0]))[0], [0.5, 0.5, 0.0])

    def test_invalid_mode(self):
        """Validation errors from the scenario carry the file name."""
        text = SAMPLE.format(X0=0.4).replace("mode: pde", "mode: spectral")
        path = self.write(text)
        with self.assertRaises(ScenarioError) as ctx:
            parse_config(path)
        self.assertEqual(ctx.exception.source, path)


if __name__ == '__main__':
    unittest.main()
