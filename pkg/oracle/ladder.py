"""Descending ladder heights and the renewal function h."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from models.errors import TableTooShort, TruncationTooCoarse
from models.lattice import LatticePMF, StepSpec, WalkModel
from oracle.convention import BoundaryConvention, Kill_Rule
from oracle.survival import DEFAULT_STATE_CAP, KilledWalk

logger = logging.getLogger(__name__)

DEFAULT_LADDER_HORIZON: int = 20_000
DEFAULT_MAX_REMAINDER: float = 0.1


class Ladder_Law(NamedTuple):
    """Law of the first strict descending ladder height, located up to a horizon."""

    pmf: LatticePMF  # sub-probability law on {min_step, ..., -1}
    remainder_mass: float  # P[first ladder epoch > horizon]
    horizon: int


def ladder_height_distribution(
    xi: StepSpec, horizon: int = DEFAULT_LADDER_HORIZON, *, state_cap: int = DEFAULT_STATE_CAP
) -> Ladder_Law:
    """Accumulate P[S(l1) = -j] over first-passage-below-zero times up to ``horizon``.

    Mass still alive at the horizon is reported as ``remainder_mass`` and never renormalised.
    Positions too high to reach below zero in the remaining steps are retired early; they
    count towards the remainder.

    Args;
        xi: Centred, aperiodic step law.
        horizon: Number of steps to follow.
        state_cap: Maximum number of live positions.

    Returns;
        The located ladder-height law and the remainder.
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    depth = -xi.min_step
    walk = KilledWalk(xi, np.array([1.0]), floor=0, state_cap=state_cap)
    located = np.zeros(depth + 1)  # located[j] = P[S(l1) = -j]
    retired = 0.0
    for n in range(1, horizon + 1):
        killed = walk.step()
        located[depth - np.arange(killed.size)] += killed
        reach = (horizon - n) * depth
        if walk.mass.size > reach:
            retired += float(walk.mass[reach:].sum())
            walk.mass = walk.mass[:reach]
    remainder = walk.alive + retired + walk.leaked
    values = -np.arange(depth, 0, -1)
    pmf = LatticePMF(values, located[depth:0:-1], complete=False)
    logger.debug("Ladder law located with remainder %.3e at horizon %d", remainder, horizon)
    return Ladder_Law(pmf, remainder, horizon)


@dataclass(frozen=True, slots=True, eq=False)
class RenewalTable:
    """Renewal function h(0..x_max) of a ladder-height law with a truncation bracket.

    The unlocated mass is placed at the deepest and at the shallowest ladder height; the
    two resulting renewal functions bracket h. ``h_values`` is their midpoint and
    ``error_bounds`` their half-width.
    """

    ladder_law: LatticePMF
    remainder_mass: float
    h_values: np.ndarray
    error_bounds: np.ndarray

    @property
    def x_max(self) -> int:
        return self.h_values.size - 1

    def h(self, x: int | np.ndarray) -> np.ndarray | float:
        """Evaluate h, returning 0 at negative arguments.

        Raises;
            TableTooShort: If any argument exceeds ``x_max``.
        """
        arr = np.asarray(x)
        if np.any(arr > self.x_max):
            raise TableTooShort(f"h requested at {int(np.max(arr))}, table stops at {self.x_max}")
        out = np.where(arr >= 0, self.h_values[np.clip(arr, 0, self.x_max)], 0.0)
        return float(out) if out.ndim == 0 else out

    def error(self, x: int | np.ndarray) -> np.ndarray | float:
        arr = np.asarray(x)
        if np.any(arr > self.x_max):
            raise TableTooShort(f"error requested at {int(np.max(arr))}, table stops at {self.x_max}")
        out = np.where(arr >= 0, self.error_bounds[np.clip(arr, 0, self.x_max)], 0.0)
        return float(out) if out.ndim == 0 else out

    def h_conv(self, x: int | np.ndarray, conv: BoundaryConvention, kill_rule: Kill_Rule | None = None):
        """Evaluate h under a convention, harmonic for ``kill_rule`` (default: the convention's own)."""
        offset = conv.offset_for(kill_rule) if kill_rule is not None else conv.h_shift
        return self.h(np.asarray(x) + offset)

    def scaled(self, factor: float) -> RenewalTable:
        return RenewalTable(self.ladder_law, self.remainder_mass, self.h_values * factor, self.error_bounds * factor)


def _renewal_from(weights: np.ndarray, x_max: int) -> np.ndarray:
    """Cumulative renewal function for ladder-height weights ``weights[j-1] = f(j)``."""
    depth = weights.size
    u = np.zeros(x_max + 1)
    u[0] = 1.0
    for k in range(1, x_max + 1):
        span = min(k, depth)
        u[k] = np.dot(weights[:span], u[k - 1 :: -1][:span])
    return np.cumsum(u)


def renewal_function(
    ladder: Ladder_Law,
    x_max: int,
    *,
    tolerance: float | None = None,
    max_remainder: float = DEFAULT_MAX_REMAINDER,
) -> RenewalTable:
    """Tabulate h(x) = sum_{k<=x} u(k) for the ladder-height renewal process.

    Args;
        ladder: Output of :func:`ladder_height_distribution`.
        x_max: Largest argument to tabulate.
        tolerance: Optional cap on the absolute error bound at any entry.
        max_remainder: Largest acceptable unlocated mass.

    Returns;
        The renewal table.

    Raises;
        TruncationTooCoarse: If the remainder or the resulting error bound is too large.
    """
    if x_max < 0:
        raise ValueError(f"x_max must be non-negative, got {x_max}")
    if ladder.remainder_mass >= max_remainder:
        raise TruncationTooCoarse(
            f"Ladder remainder {ladder.remainder_mass:.3e} at horizon {ladder.horizon} exceeds {max_remainder}"
        )
    law = ladder.pmf
    depth = -law.min_value
    weights = np.zeros(depth)
    weights[-law.values - 1] = law.probs
    deep = weights.copy()
    deep[-1] += ladder.remainder_mass
    shallow = weights.copy()
    shallow[0] += ladder.remainder_mass
    h_low = _renewal_from(deep, x_max)
    h_high = _renewal_from(shallow, x_max)
    h_values = 0.5 * (h_low + h_high)
    error_bounds = 0.5 * (h_high - h_low)
    worst = float(error_bounds.max())
    if tolerance is not None and worst > tolerance:
        raise TruncationTooCoarse(f"Renewal error bound {worst:.3e} exceeds tolerance {tolerance:.3e}")
    return RenewalTable(law, ladder.remainder_mass, h_values, error_bounds)


def renewal_table(
    xi: StepSpec,
    x_max: int,
    *,
    horizon: int = DEFAULT_LADDER_HORIZON,
    max_remainder: float = DEFAULT_MAX_REMAINDER,
    state_cap: int = DEFAULT_STATE_CAP,
) -> RenewalTable:
    """Descending renewal function h of ``xi`` in one call."""
    ladder = ladder_height_distribution(xi, horizon, state_cap=state_cap)
    return renewal_function(ladder, x_max, max_remainder=max_remainder)


def ascending_variants(
    model: WalkModel,
    x_max: int,
    *,
    horizon: int = DEFAULT_LADDER_HORIZON,
    max_remainder: float = DEFAULT_MAX_REMAINDER,
) -> tuple[RenewalTable, RenewalTable | None]:
    """Return the ascending renewal functions of S and of S'.

    Both come from the descending machinery applied to the sign-flipped step laws. The
    second entry is None for the reflected model.
    """
    h_tilde = renewal_table(model.xi.negated(), x_max, horizon=horizon, max_remainder=max_remainder)
    if model.xi_prime is None:
        return h_tilde, None
    h_prime = renewal_table(model.xi_prime.negated(), x_max, horizon=horizon, max_remainder=max_remainder)
    return h_tilde, h_prime
