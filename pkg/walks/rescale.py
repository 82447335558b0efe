"""Diffusive rescaling of paths and zero-set statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from models.errors import GridOutOfRange
from walks.simulate import PathBundle


@dataclass(frozen=True, slots=True, eq=False)
class RescaledPath:
    """Piecewise-linear path X_n(t) sampled on a grid of t in [0, 1]."""

    grid_times: np.ndarray
    values: np.ndarray
    n: int
    sigma: float
    sigma_prime: float


def scale_values(raw: np.ndarray, n: int, sigma: float, sigma_prime: float) -> np.ndarray:
    """Divide by sigma sqrt(n) on the non-negative side and by sigma' sqrt(n) below zero."""
    raw = np.asarray(raw, dtype=np.float64)
    root = math.sqrt(n)
    return np.where(raw >= 0, raw / (sigma * root), raw / (sigma_prime * root))


def interpolate_at(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Linear interpolation of an integer-time path at real times."""
    return np.interp(times, np.arange(values.shape[-1], dtype=np.float64), values)


def rescale_path(path: PathBundle, n: int, sigma: float, sigma_prime: float, grid: np.ndarray) -> RescaledPath:
    """Interpolate the path at times n t, then apply the sign-dependent scaling.

    Raises;
        GridOutOfRange: If the grid leaves [0, 1] or needs more steps than the path has.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or grid.min() < 0.0 or grid.max() > 1.0:
        raise GridOutOfRange("Grid times must lie in [0, 1]")
    if n < 1 or n * grid.max() > path.length:
        raise GridOutOfRange(f"Grid needs {n * grid.max():g} steps, path has {path.length}")
    raw = interpolate_at(path.values.astype(np.float64), n * grid)
    return RescaledPath(grid, scale_values(raw, n, sigma, sigma_prime), n, sigma, sigma_prime)


@dataclass(frozen=True, slots=True)
class ZeroVisitStats:
    n_visits: int  # N_n
    max_restart_abs: int
    max_increment_window: float
    delta: float


def max_increment(values: np.ndarray, window: int) -> float:
    """Largest |values[i] - values[j]| over |i - j| <= window."""
    if window <= 0 or values.size < 2:
        return 0.0
    if window >= values.size - 1:
        return float(values.max() - values.min())
    return float(modulus_rows(values[np.newaxis, :], window)[0])


def modulus_rows(paths: np.ndarray, window: int) -> np.ndarray:
    """Per row, the largest spread of values over any ``window + 1`` consecutive times.

    Edge windows are padded with the nearest value, so they never exceed a full window.
    """
    paths = np.asarray(paths, dtype=np.float64)
    if window <= 0 or paths.shape[1] < 2:
        return np.zeros(paths.shape[0])
    size = min(window + 1, paths.shape[1])
    high = maximum_filter1d(paths, size=size, axis=1, mode="nearest")
    low = minimum_filter1d(paths, size=size, axis=1, mode="nearest")
    return (high - low).max(axis=1)


def zero_visit_stats(path: PathBundle, n: int, delta: float) -> ZeroVisitStats:
    """Count zero visits in [1, n], the largest restart drawn by n and the delta-window increment."""
    if path.length < n:
        raise GridOutOfRange(f"Path has {path.length} steps, {n} requested")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    visits = sum(1 for tau in path.return_times if tau <= n)
    restarts = [abs(value) for time, value in path.restart_draws if time <= n]
    window = math.floor(n * delta)
    return ZeroVisitStats(
        n_visits=visits,
        max_restart_abs=max(restarts, default=0),
        max_increment_window=max_increment(path.values[: n + 1].astype(np.float64), window),
        delta=delta,
    )
