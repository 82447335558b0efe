"""Skew Brownian motion sampled exactly at finite sets of times."""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from models.errors import NonpositiveTime
from models.streams import RandomStream
from sbm.densities import TRUNCATE_SD, skew_cdf

CDF_NODES: int = 2048


def inverse_cdf(alpha: float, x: float, dt: float) -> PchipInterpolator:
    """Monotone spline of the inverse transition CDF from ``x`` over ``dt``.

    Nodes span x +- 12 sqrt(dt), with zero added when it falls inside so the kink of the
    CDF sits on a node.
    """
    half = TRUNCATE_SD * math.sqrt(dt)
    nodes = np.linspace(x - half, x + half, CDF_NODES)
    if x - half < 0.0 < x + half:
        nodes = np.union1d(nodes, [0.0])
    cdf = np.asarray(skew_cdf(alpha, dt, x, nodes))
    keep = np.concatenate([[True], np.diff(cdf) > 0.0])
    return PchipInterpolator(cdf[keep], nodes[keep], extrapolate=False)


def _draw(alpha: float, x: float, dt: float, uniforms: np.ndarray) -> np.ndarray:
    spline = inverse_cdf(alpha, x, dt)
    lo, hi = spline.x[0], spline.x[-1]
    return spline(np.clip(uniforms, lo, hi))


def sample_skew_path(alpha: float, times: np.ndarray, stream: RandomStream) -> np.ndarray:
    """Sample B^alpha at increasing ``times`` from B^alpha_0 = 0.

    Each step inverts the closed-form transition CDF, so every marginal is exact up to
    spline error.

    Raises;
        NonpositiveTime: If the first time is not positive or the times do not increase.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0:
        return np.zeros(0)
    if times[0] <= 0.0 or np.any(np.diff(times) <= 0.0):
        raise NonpositiveTime("Times must be positive and strictly increasing")
    uniforms = np.asarray(stream.uniform(times.size))
    values = np.empty(times.size)
    state = 0.0
    previous = 0.0
    for k, t in enumerate(times):
        state = float(_draw(alpha, state, t - previous, uniforms[k : k + 1])[0])
        values[k] = state
        previous = t
    return values


def sample_skew_marginal(alpha: float, t: float, size: int, stream: RandomStream) -> np.ndarray:
    """Draw ``size`` independent copies of B^alpha_t from 0 in one vectorised inversion."""
    if t <= 0.0:
        raise NonpositiveTime(f"Time must be positive, got {t}")
    return _draw(alpha, 0.0, t, np.asarray(stream.uniform(size)))
