import csv
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Sequence

from revzeta.cli.models import SweepRow
from revzeta.core.errors import OutputError

logger = logging.getLogger(__name__)

CSV_HEADER = ("c", "delta_E", "err_estimate", "K_used")


def ensure_directory(directory_path: str) -> str:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        directory_path: Path to the directory

    Returns:
        Absolute path to the directory
    """
    abs_path = os.path.abspath(directory_path)
    try:
        os.makedirs(abs_path, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create directory {abs_path}: {exc}", diagnostics={"path": abs_path}) from exc
    return abs_path


def format_float(value: float) -> str:
    """Decimal text with 17 significant digits, enough to recover the double exactly."""
    return f"{value:.17g}"


def emit_csv(rows: Sequence[SweepRow], path: str) -> None:
    """
    Write sweep rows as CSV.

    Args:
        rows: Rows in grid order
        path: Destination file
    """
    ensure_directory(os.path.dirname(path) or ".")
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([
                    format_float(row.c),
                    format_float(row.delta_E),
                    format_float(row.err_estimate),
                    str(row.K_used),
                ])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}", diagnostics={"path": path}) from exc
    logger.info("wrote %d rows to %s", len(rows), path)


def read_csv(path: str) -> List[SweepRow]:
    """
    Read a CSV written by emit_csv.

    Args:
        path: CSV file

    Returns:
        List of SweepRow in file order
    """
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = tuple(next(reader, ()))
            if header != CSV_HEADER:
                raise OutputError(f"{path} is not a sweep file (header {header})", diagnostics={"path": path})
            return [
                SweepRow(c=float(c), delta_E=float(delta_E), err_estimate=float(err), K_used=int(K_used))
                for c, delta_E, err, K_used in reader
            ]
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}", diagnostics={"path": path}) from exc


def write_gnuplot_script(csv_path: str, title: str) -> str:
    """
    Write a gnuplot script next to a sweep CSV that plots ΔE against c.

    Args:
        csv_path: Sweep CSV
        title: Plot title

    Returns:
        Path of the script
    """
    script_path = str(Path(csv_path).with_suffix(".gp"))
    image = Path(csv_path).with_suffix(".png").name
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 800,500",
        f"set output '{image}'",
        f"set title '{title}'",
        "set xlabel 'c'",
        "set ylabel 'dE'",
        "set grid",
        f"plot '{Path(csv_path).name}' using 1:2 skip 1 with linespoints title 'dE(c)'",
    ]
    try:
        Path(script_path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {script_path}: {exc}", diagnostics={"path": script_path}) from exc
    return script_path


def summary_path(output_path: str) -> str:
    return f"{output_path}.summary.json"


def write_summary(output_path: str, payload: Dict[str, Any]) -> str:
    """
    Write the run summary beside the main output.

    Args:
        output_path: Main output path of the run
        payload: JSON-serialisable summary

    Returns:
        Path of the summary file
    """
    path = summary_path(output_path)
    ensure_directory(os.path.dirname(path) or ".")
    try:
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True, default=str)
            handle.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}", diagnostics={"path": path}) from exc
    return path
