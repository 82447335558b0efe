"""Closed-form laws of skew, reflected and conditioned Brownian motion."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.special import ndtr

from models.errors import DegenerateInterval, NonpositiveTime

ArrayLike = float | np.ndarray

QUAD_EPSABS: float = 1e-10
TRUNCATE_SD: float = 12.0


def _check_time(t: ArrayLike) -> None:
    if np.any(np.asarray(t) <= 0):
        raise NonpositiveTime(f"Time must be positive, got {t}")


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def _out(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True, slots=True)
class SkewParams:
    """Arguments of the skew transition density p^alpha_t(x, y)."""

    alpha: float
    t: float
    x: float
    y: float
    s: float | None = None

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        _check_time(self.t)
        if self.s is not None:
            _check_time(self.s)


# ---- Gaussian ----
def gauss_density(t: ArrayLike, x: ArrayLike) -> ArrayLike:
    """p_t(x) = exp(-x^2 / 2t) / sqrt(2 pi t)."""
    _check_time(t)
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return _out(np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t))


def _mass(lo: ArrayLike, hi: ArrayLike, t: float) -> np.ndarray:
    """Gaussian mass of [lo, hi] at variance t."""
    root = math.sqrt(t)
    return ndtr(np.asarray(hi) / root) - ndtr(np.asarray(lo) / root)


# ---- skew Brownian motion ----
def skew_density(alpha: float, t: float, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Transition density p^alpha_t(x, y) of skew Brownian motion.

    The value at y = 0 is the limit from y > 0.

    Args;
        alpha: Probability that an excursion is positive.
        t: Elapsed time.
        x: Start point(s).
        y: End point(s).

    Returns;
        The density, broadcast over x and y.
    """
    _check_alpha(alpha)
    _check_time(t)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    direct = gauss_density(t, y - x)
    mirror = gauss_density(t, x + y)
    above = y >= 0
    from_zero = np.where(above, 2.0 * alpha, 2.0 * (1.0 - alpha)) * direct
    from_above = np.where(above, direct + (2.0 * alpha - 1.0) * mirror, 2.0 * (1.0 - alpha) * direct)
    from_below = np.where(above, 2.0 * alpha * direct, direct + (1.0 - 2.0 * alpha) * mirror)
    return _out(np.where(x > 0, from_above, np.where(x < 0, from_below, from_zero)))


def skew_transition_density(p: SkewParams) -> float:
    return float(skew_density(p.alpha, p.t, p.x, p.y))


def _skew_cdf_from_right(alpha: float, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """P[B_t <= y | B_0 = x] for x >= 0."""
    root = math.sqrt(t)
    left = 2.0 * (1.0 - alpha) * ndtr((np.minimum(y, 0.0) - x) / root)
    yp = np.maximum(y, 0.0)
    right = (ndtr((yp - x) / root) - ndtr(-x / root)) + (2.0 * alpha - 1.0) * (ndtr((yp + x) / root) - ndtr(x / root))
    return left + np.where(y > 0, right, 0.0)


def skew_cdf(alpha: float, t: float, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Closed-form transition CDF P[B^alpha_t <= y | B^alpha_0 = x]."""
    _check_alpha(alpha)
    _check_time(t)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    right = _skew_cdf_from_right(alpha, t, np.abs(x), y)
    # mirror image for x < 0: swap alpha and reflect both points
    left = 1.0 - _skew_cdf_from_right(1.0 - alpha, t, np.abs(x), -y)
    return _out(np.clip(np.where(x >= 0, right, left), 0.0, 1.0))


def marginal_half_normal(t: float, u: ArrayLike) -> ArrayLike:
    """Density 2 exp(-u^2 / 2t) / sqrt(2 pi t) on u >= 0."""
    _check_time(t)
    u = np.asarray(u, dtype=np.float64)
    return _out(np.where(u >= 0, 2.0 * np.asarray(gauss_density(t, u)), 0.0))


def half_normal_cdf(t: float, u: ArrayLike) -> ArrayLike:
    _check_time(t)
    u = np.asarray(u, dtype=np.float64)
    return _out(np.where(u >= 0, 2.0 * ndtr(u / math.sqrt(t)) - 1.0, 0.0))


# ---- meander and excursion ----
def meander_marginal(t_frac: float, z: ArrayLike) -> ArrayLike:
    """Density of sqrt(1 - t) R with R Rayleigh; at t = 0 it is z exp(-z^2 / 2)."""
    if not 0.0 <= t_frac < 1.0:
        raise ValueError(f"t_frac must lie in [0, 1), got {t_frac}")
    scale = 1.0 - t_frac
    z = np.asarray(z, dtype=np.float64)
    return _out(np.where(z >= 0, z / scale * np.exp(-z * z / (2.0 * scale)), 0.0))


def meander_functional(phi: Callable[[float], float], t: float) -> float:
    """Integral of phi(z sqrt(1 - t)) z exp(-z^2 / 2) over z > 0."""
    if not 0.0 <= t < 1.0:
        raise ValueError(f"t must lie in [0, 1), got {t}")
    root = math.sqrt(1.0 - t)
    value, _ = quad(lambda z: phi(z * root) * z * math.exp(-0.5 * z * z), 0.0, math.inf, epsabs=QUAD_EPSABS)
    return value


def excursion_marginal(s1: float, s: float, s2: float, v: ArrayLike) -> ArrayLike:
    """Marginal at time s of a Brownian excursion straddling [s1, s2].

    Raises;
        DegenerateInterval: Unless s1 < s < s2.
    """
    if not s1 < s < s2:
        raise DegenerateInterval(f"Need s1 < s < s2, got {s1}, {s}, {s2}")
    spread = (s - s1) * (s2 - s) / (s2 - s1)
    v = np.asarray(v, dtype=np.float64)
    density = 2.0 / math.sqrt(2.0 * math.pi) * v * v * np.exp(-v * v / (2.0 * spread)) / spread**1.5
    return _out(np.where(v >= 0, density, 0.0))


# ---- two-time laws ----
def _check_pair(s: float, t: float) -> None:
    if not 0.0 < s < t:
        raise DegenerateInterval(f"Need 0 < s < t, got s={s}, t={t}")


def joint_density_from_zero(alpha: float, s: float, t: float, v: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Density of (B^alpha_s, B^alpha_t) from 0: p^alpha_s(0, v) p^alpha_{t-s}(v, u)."""
    _check_pair(s, t)
    first = np.asarray(skew_density(alpha, s, 0.0, v))
    return _out(first * np.asarray(skew_density(alpha, t - s, v, u)))


def a1_kernel(s: float, t: float, v: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Reflected two-time kernel of paths that hit zero between s and t."""
    _check_pair(s, t)
    v = np.asarray(v, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    body = 2.0 / (math.pi * math.sqrt(s * (t - s))) * np.exp(-v * v / (2 * s) - (u + v) ** 2 / (2 * (t - s)))
    return _out(np.where((v >= 0) & (u >= 0), body, 0.0))


def a2_kernel(s: float, t: float, v: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Reflected two-time kernel of paths that stay off zero between s and t."""
    _check_pair(s, t)
    v = np.asarray(v, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    gap = 2 * (t - s)
    body = (
        1.0 / (math.pi * math.sqrt(s * (t - s))) * np.exp(-v * v / (2 * s))
        * (np.exp(-(u - v) ** 2 / gap) - np.exp(-(u + v) ** 2 / gap))
    )
    return _out(np.where((v >= 0) & (u >= 0), body, 0.0))


def _side_weight(alpha: float, z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, alpha, 1.0 - alpha)


def skew_a1_kernel(alpha: float, s: float, t: float, v: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Skew analogue of :func:`a1_kernel`: 4 w(v) w(u) p_s(|v|) p_{t-s}(|u| + |v|)."""
    _check_pair(s, t)
    v = np.asarray(v, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    body = 4.0 * np.asarray(gauss_density(s, v)) * np.asarray(gauss_density(t - s, np.abs(u) + np.abs(v)))
    return _out(_side_weight(alpha, v) * _side_weight(alpha, u) * body)


def skew_a2_kernel(alpha: float, s: float, t: float, v: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Skew analogue of :func:`a2_kernel`; zero when v and u sit on opposite sides."""
    _check_pair(s, t)
    v = np.asarray(v, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    av, au = np.abs(v), np.abs(u)
    body = 2.0 * np.asarray(gauss_density(s, v)) * (
        np.asarray(gauss_density(t - s, au - av)) - np.asarray(gauss_density(t - s, au + av))
    )
    same = np.where((v >= 0) & (u >= 0), alpha, np.where((v < 0) & (u < 0), 1.0 - alpha, 0.0))
    return _out(same * body)


class Joint_Part(StrEnum):
    """Which part of the two-time law to integrate."""

    FULL = "full"
    HITS_ZERO = "hits_zero"  # A1
    AVOIDS_ZERO = "avoids_zero"  # A2


def _positive_part(lo: np.ndarray, hi: np.ndarray, shift: float, t: float) -> np.ndarray:
    """Mass of u in [lo, hi] with u >= 0 under p_t(u + shift)."""
    a = np.maximum(lo, 0.0)
    return np.where(hi > a, _mass(a + shift, hi + shift, t), 0.0)


def _negative_part(lo: np.ndarray, hi: np.ndarray, shift: float, t: float) -> np.ndarray:
    """Mass of u in [lo, hi] with u < 0 under p_t(-u + shift)."""
    b = np.minimum(hi, 0.0)
    return np.where(b > lo, _mass(-b + shift, -lo + shift, t), 0.0)


def _inner_masses(alpha: float, s: float, t: float, v: float, lo: np.ndarray, hi: np.ndarray, part: Joint_Part):
    gap = t - s
    if part is Joint_Part.FULL:
        cdf_hi = np.asarray(skew_cdf(alpha, gap, v, hi))
        cdf_lo = np.asarray(skew_cdf(alpha, gap, v, lo))
        return float(skew_density(alpha, s, 0.0, v)) * (cdf_hi - cdf_lo)
    av = abs(v)
    start = float(gauss_density(s, av))
    w_v = alpha if v >= 0 else 1.0 - alpha
    if part is Joint_Part.HITS_ZERO:
        split = alpha * _positive_part(lo, hi, av, gap) + (1.0 - alpha) * _negative_part(lo, hi, av, gap)
        return 4.0 * w_v * start * split
    if v >= 0:
        return 2.0 * alpha * start * (_positive_part(lo, hi, -av, gap) - _positive_part(lo, hi, av, gap))
    return 2.0 * (1.0 - alpha) * start * (_negative_part(lo, hi, -av, gap) - _negative_part(lo, hi, av, gap))


def joint_cell_probabilities(
    alpha: float,
    s: float,
    t: float,
    v_edges: np.ndarray,
    u_edges: np.ndarray,
    part: Joint_Part | str = Joint_Part.FULL,
) -> np.ndarray:
    """Probabilities of the cells [v_i, v_i+1) x [u_j, u_j+1) under the two-time law from zero.

    The inner integral over u is closed form; the outer one is adaptive, split at zero.

    Args;
        alpha: Skewness.
        s: Earlier time.
        t: Later time.
        v_edges: Increasing bin edges for the value at s (may include +-inf).
        u_edges: Increasing bin edges for the value at t.
        part: Full law, or the part that hits / avoids zero between s and t.

    Returns;
        Matrix of shape (len(v_edges) - 1, len(u_edges) - 1).
    """
    _check_pair(s, t)
    part = Joint_Part(part)
    v_edges = np.asarray(v_edges, dtype=np.float64)
    u_edges = np.asarray(u_edges, dtype=np.float64)
    lo, hi = u_edges[:-1], u_edges[1:]
    rows = []
    for a, b in zip(v_edges[:-1], v_edges[1:]):
        pieces = [(a, min(b, 0.0)), (max(a, 0.0), b)] if a < 0.0 < b else [(a, b)]
        row = np.zeros(lo.size)
        for left, right in pieces:
            if right <= left:
                continue
            value, _ = quad_vec(
                lambda v: _inner_masses(alpha, s, t, v, lo, hi, part), left, right, epsabs=QUAD_EPSABS
            )
            row += value
        rows.append(row)
    return np.clip(np.array(rows), 0.0, None)


# ---- quadrature ----
def integrate_line(func: Callable[[float], float], t: float, center: float = 0.0) -> float:
    """Adaptive quadrature over center +- 12 sqrt(t), split at zero."""
    _check_time(t)
    half = TRUNCATE_SD * math.sqrt(t)
    lo, hi = center - half, center + half
    points = [0.0] if lo < 0.0 < hi else None
    value, _ = quad(func, lo, hi, points=points, epsabs=QUAD_EPSABS, limit=200)
    return value


@dataclass(frozen=True, slots=True, eq=False)
class DensityGrid:
    """Gauss-Legendre nodes and weights on [lo, hi], with optional tabulated values."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    @classmethod
    def gauss_legendre(
        cls, lo: float, hi: float, count: int, func: Callable[[np.ndarray], np.ndarray] | None = None
    ) -> DensityGrid:
        if not hi > lo:
            raise ValueError(f"Need lo < hi, got [{lo}, {hi}]")
        if count < 1:
            raise ValueError(f"Need at least one node, got {count}")
        base, base_weights = np.polynomial.legendre.leggauss(count)
        half = 0.5 * (hi - lo)
        nodes = lo + half * (base + 1.0)
        weights = half * base_weights
        values = np.asarray(func(nodes), dtype=np.float64) if func is not None else np.ones(count)
        return cls(nodes, weights, values)

    @property
    def span(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray | None = None) -> float:
        return float(np.dot(self.weights, self.values if values is None else values))
