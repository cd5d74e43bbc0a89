"""
Test Command Line Interface
===========================

Unit tests for argument parsing, ladder setup and exit codes.
"""

import argparse
import os
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from cli.main import (FULL_LADDER, FULL_LADDER_DT, SCALED_LADDER, convergence_scenario, create_parser, main,
                      output_dir, parse_times, setup_logging)
from config.config import Config
from config.scenario_loader import parse_config


class TestParser(unittest.TestCase):
    """Test cases for the argument parser."""

    def setUp(self):
        """Set up the parser."""
        self.parser = create_parser()

    def test_run_arguments(self):
        """run takes a scenario, an output directory and run flags."""
        args = self.parser.parse_args(["--debug", "run", "equilibrium", "--out", "res",
                                       "--strict-invariants", "--snapshot-times", "1,0,0.5"])
        self.assertEqual(args.command, "run")
        self.assertEqual(args.config, "equilibrium")
        self.assertEqual(args.out, "res")
        self.assertTrue(args.debug)
        self.assertTrue(args.strict_invariants)
        self.assertEqual(args.snapshot_times, [0.0, 0.5, 1.0])

    def test_converge_arguments(self):
        """converge accepts the long ladder and a worker count."""
        args = self.parser.parse_args(["converge", "converge", "--full", "--workers", "2"])
        self.assertTrue(args.full)
        self.assertEqual(args.workers, 2)
        args = self.parser.parse_args(["converge", "converge"])
        self.assertFalse(args.full)
        self.assertIsNone(args.workers)

    def test_parse_times(self):
        """Snapshot times are sorted and nonnegative."""
        self.assertEqual(parse_times("0.5, 0.1"), [0.1, 0.5])
        with self.assertRaises(argparse.ArgumentTypeError):
            parse_times("a,b")
        with self.assertRaises(argparse.ArgumentTypeError):
            parse_times("-1")


class TestHelpers(unittest.TestCase):
    """Test cases for output directories and ladders."""

    def test_convergence_scenario(self):
        """Scenarios without a ladder get the scaled one; --full swaps in the long one."""
        scenario = parse_config("equilibrium")
        scaled = convergence_scenario(scenario, full=False)
        self.assertEqual(scaled.mode, "converge")
        self.assertEqual((scaled.grids, scaled.reference_N), SCALED_LADDER)
        full = convergence_scenario(scenario, full=True)
        self.assertEqual((full.grids, full.reference_N), FULL_LADDER)
        self.assertEqual(full.dt_init, FULL_LADDER_DT)
        ladder = parse_config("converge")
        self.assertIs(convergence_scenario(ladder, full=False), ladder)

    @patch.dict(os.environ, {"BIPHASE_OUTPUT_DIR": "env_out"}, clear=True)
    def test_output_dir_precedence(self):
        """--out wins over the scenario, which wins over the environment."""
        config = Config()
        scenario = parse_config("trivial")
        parser = create_parser()
        args = parser.parse_args(["run", "trivial", "--out", "cli_out"])
        self.assertEqual(output_dir(args, scenario, config), Path("cli_out"))
        args = parser.parse_args(["run", "trivial"])
        expected = Path(scenario.output_dir) if scenario.output_dir else Path("env_out")
        self.assertEqual(output_dir(args, scenario, config), expected)


class TestMain(unittest.TestCase):
    """Test cases for exit codes of the entry point."""

    def setUp(self):
        """Set up a temporary output directory."""
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up test environment."""
        setup_logging()
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_no_command_prints_help(self):
        """Without a subcommand the help is shown."""
        self.assertEqual(main([]), 0)

    def test_presets(self):
        """Listing presets succeeds."""
        self.assertEqual(main(["--no-progress", "presets"]), 0)

    def test_bad_scenario_exit_code(self):
        """Configuration errors exit with code 2."""
        path = Path(self.test_dir) / "bad.yaml"
        path.write_text("name: bad\nmesh:\n  cells: 3\n", encoding="utf-8")
        self.assertEqual(main(["run", str(path), "--out", self.test_dir]), 2)
        self.assertEqual(main(["stationary", "no_such_preset"]), 2)

    def test_stationary_run(self):
        """The stationary command writes its table and a log file."""
        out = Path(self.test_dir) / "stationary"
        self.assertEqual(main(["--no-progress", "stationary", "stationary_equilibrium", "--out", str(out)]), 0)
        self.assertTrue((out / "biphase.log").is_file())
        self.assertTrue(any(p.suffix == ".csv" for p in out.iterdir()))

    def test_snapshot_after_end_exit_code(self):
        """Snapshot times past t_end are a configuration error, not silently dropped."""
        self.assertEqual(main(["--no-progress", "run", "trivial", "--snapshot-times", "0,99",
                               "--out", self.test_dir]), 2)
        self.assertFalse(any(p.suffix == ".csv" for p in Path(self.test_dir).iterdir()))

    def test_invalid_workers(self):
        """A nonpositive worker count is a configuration error."""
        self.assertEqual(main(["converge", "converge", "--workers", "0", "--out", self.test_dir]), 2)


if __name__ == '__main__':
    unittest.main()
