"""CSV tables for the oracle, the simulator and the ratio checks."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from oracle.ladder import RenewalTable
from oracle.survival import SurvivalTable
from verify.ratios import RatioCheck
from walks.simulate import PathBundle


def _cell(value: object) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """Write rows under ``header``; floats use their shortest round-trip form."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def survival_csv(table: SurvivalTable, path: Path) -> Path:
    rows = zip(range(table.horizon + 1), table.survive, table.first_passage)
    return write_csv(path, ("n", "survive", "first_passage"), rows)


def renewal_csv(table: RenewalTable, path: Path) -> Path:
    rows = zip(range(table.x_max + 1), table.h_values, table.error_bounds)
    return write_csv(path, ("x", "h", "err"), rows)


def ratio_csv(check: RatioCheck, path: Path) -> Path:
    """One line per (row, n) pair, with the row's limit and verdict repeated."""
    rows = (
        (row.label, n, ratio, row.extrapolated_limit, row.tolerance, row.verdict.value)
        for row in check.rows
        for n, ratio in zip(row.n_grid, row.raw_ratios)
    )
    return write_csv(path, ("row", "n", "ratio", "extrapolated_limit", "tolerance", "verdict"), rows)


def path_csv(path_bundle: PathBundle, path: Path) -> Path:
    return write_csv(path, ("step", "value"), enumerate(path_bundle.values))


def density_csv(coordinates: np.ndarray, density: np.ndarray, path: Path) -> Path:
    return write_csv(path, ("coordinate", "density"), zip(coordinates, density))
