import json
import math
import os
import sys
import tempfile
import unittest

# Add parent directory to path to import revzeta modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from revzeta.cli.models import SweepRow
from revzeta.core.errors import OutputError
from revzeta.utils.file_utils import (
    CSV_HEADER,
    emit_csv,
    ensure_directory,
    format_float,
    read_csv,
    summary_path,
    write_gnuplot_script,
    write_summary,
)


class TestFileUtils(unittest.TestCase):
    """Test cases for sweep CSVs and run summaries."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "nested", "sweep.csv")

    def tearDown(self):
        self.tmp.cleanup()

    def test_empty_sweep_writes_header_only(self):
        emit_csv([], self.path)
        with open(self.path) as handle:
            self.assertEqual(handle.read(), ",".join(CSV_HEADER) + "\n")
        self.assertEqual(read_csv(self.path), [])

    def test_rows_in_order(self):
        rows = [
            SweepRow(c=0.3, delta_E=-0.1, err_estimate=1e-8, K_used=12),
            SweepRow(c=0.7, delta_E=-0.1, err_estimate=2e-8, K_used=13),
        ]
        emit_csv(rows, self.path)
        with open(self.path) as handle:
            lines = handle.read().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertEqual(lines[1], "0.29999999999999999,-0.10000000000000001,1e-08,12")

    def test_values_are_recovered_exactly(self):
        rows = [SweepRow(c=1.0 / 3.0, delta_E=math.pi * 1e-7, err_estimate=math.e * 1e-12, K_used=57)]
        emit_csv(rows, self.path)
        self.assertEqual(read_csv(self.path), rows)
        self.assertEqual(float(format_float(0.1 + 0.2)), 0.1 + 0.2)

    def test_foreign_file_is_refused(self):
        ensure_directory(os.path.dirname(self.path))
        with open(self.path, "w") as handle:
            handle.write("x,y\n1,2\n")
        with self.assertRaises(OutputError):
            read_csv(self.path)
        with self.assertRaises(OutputError):
            read_csv(os.path.join(self.tmp.name, "missing.csv"))

    def test_unwritable_destination(self):
        blocker = os.path.join(self.tmp.name, "file")
        with open(blocker, "w") as handle:
            handle.write("")
        with self.assertRaises(OutputError) as caught:
            emit_csv([], os.path.join(blocker, "sweep.csv"))
        self.assertEqual(caught.exception.exit_code, 4)

    def test_summary(self):
        path = write_summary(self.path, {"rows": 2, "value": 0.5, "nested": {"b": 1, "a": 2}})
        self.assertEqual(path, summary_path(self.path))
        with open(path) as handle:
            payload = json.load(handle)
        self.assertEqual(payload["nested"], {"a": 2, "b": 1})

    def test_gnuplot_script(self):
        emit_csv([], self.path)
        script = write_gnuplot_script(self.path, "gaussian bump, delta=0.3")
        self.assertTrue(script.endswith("sweep.gp"))
        with open(script) as handle:
            text = handle.read()
        self.assertIn("'sweep.csv' using 1:2", text)
        self.assertIn("set output 'sweep.png'", text)


if __name__ == "__main__":
    unittest.main()
