"""Forward dynamic programme for a lattice walk killed at the boundary."""

from __future__ import annotations

import logging
from collections.abc import Collection
from dataclasses import dataclass, field

import numpy as np

from models.errors import ResourceLimit
from models.lattice import PRUNE_BELOW, LatticePMF, StepSpec
from oracle.convention import BoundaryConvention

logger = logging.getLogger(__name__)

DEFAULT_STATE_CAP: int = 4_000_000


class KilledWalk:
    """Mass vector of a walk killed on landing below ``floor``.

    ``mass[i]`` is the probability of being alive at position ``i``. The start may sit
    below the floor since the kill rule applies from the first step on.
    """

    __slots__ = ("kernel", "min_step", "floor", "mass", "leaked", "state_cap")

    def __init__(self, xi: StepSpec, initial: np.ndarray, floor: int, state_cap: int = DEFAULT_STATE_CAP) -> None:
        self.kernel = xi.pmf.dense()[1]
        self.min_step = xi.min_step
        self.floor = floor
        self.state_cap = state_cap
        self.leaked = 0.0
        mass = np.array(initial, dtype=np.float64)
        self.mass = np.trim_zeros(mass, "b")

    @property
    def alive(self) -> float:
        return float(self.mass.sum())

    def step(self) -> np.ndarray:
        """Advance one step and return the killed mass.

        Returns;
            Array ``k`` with ``k[i]`` the mass landing at position ``min_step + i`` below the floor.
        """
        depth = self.floor - self.min_step
        if self.mass.size == 0:
            return np.zeros(max(depth, 0))
        moved = np.convolve(self.mass, self.kernel)  # index j is position j + min_step
        if depth <= 0:
            killed = np.zeros(0)
            survivors = np.concatenate([np.zeros(-depth), moved])
        else:
            killed = moved[:depth].copy()
            survivors = moved[depth:]
        mass = np.concatenate([np.zeros(self.floor), survivors])
        tiny = (mass > 0) & (mass < PRUNE_BELOW)
        if tiny.any():
            self.leaked += float(mass[tiny].sum())
            mass[tiny] = 0.0
        mass = np.trim_zeros(mass, "b")
        if mass.size > self.state_cap:
            raise ResourceLimit(f"Killed-walk state count {mass.size} exceeds cap {self.state_cap}")
        self.mass = mass
        return killed


@dataclass(frozen=True, slots=True, eq=False)
class SurvivalTable:
    """Survival, first-passage and local probabilities of a killed walk.

    ``local[n][y]`` is P[tau > n, x0 + S(n) = y], kept only for the requested times.
    """

    x0: int | None
    horizon: int
    survive: np.ndarray
    first_passage: np.ndarray
    convention: BoundaryConvention
    local: dict[int, np.ndarray] = field(default_factory=dict)
    leaked_mass: float = 0.0

    def local_row(self, n: int) -> np.ndarray:
        try:
            return self.local[n]
        except KeyError:
            raise ValueError(f"Local probabilities at n={n} were not kept") from None

    def local_at(self, n: int, y: int) -> float:
        row = self.local_row(n)
        return float(row[y]) if 0 <= y < row.size else 0.0


def _initial_vector(start: int | LatticePMF) -> np.ndarray:
    if isinstance(start, LatticePMF):
        if start.min_value < 0:
            raise ValueError("Initial law must sit on non-negative positions")
        out = np.zeros(start.max_value + 1)
        out[start.values] = start.probs
        return out
    if start < 0:
        raise ValueError(f"Start position must be non-negative, got {start}")
    out = np.zeros(start + 1)
    out[start] = 1.0
    return out


def survival_dp(
    xi: StepSpec,
    x0: int | LatticePMF,
    horizon: int,
    conv: BoundaryConvention,
    *,
    keep_local: Collection[int] | None = None,
    state_cap: int = DEFAULT_STATE_CAP,
) -> SurvivalTable:
    """Run the killed walk from ``x0`` for ``horizon`` steps.

    Args;
        xi: The step law.
        x0: Start position, or a (sub-)probability law of start positions.
        horizon: Number of steps, at least 1.
        conv: Boundary convention supplying the kill rule.
        keep_local: Times whose local rows are stored; None keeps every time.
        state_cap: Maximum number of live positions.

    Returns;
        The filled survival table.

    Raises;
        ValueError: If ``horizon`` < 1 or the start is negative.
        ResourceLimit: If the live state count exceeds ``state_cap``.
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    walk = KilledWalk(xi, _initial_vector(x0), conv.floor, state_cap)
    wanted = None if keep_local is None else {int(n) for n in keep_local}
    survive = np.empty(horizon + 1)
    first_passage = np.zeros(horizon + 1)
    local: dict[int, np.ndarray] = {}
    survive[0] = walk.alive
    if wanted is None or 0 in wanted:
        local[0] = walk.mass.copy()
    for n in range(1, horizon + 1):
        first_passage[n] = walk.step().sum()
        survive[n] = walk.alive
        if wanted is None or n in wanted:
            local[n] = walk.mass.copy()
    if walk.leaked:
        logger.debug("survival_dp leaked %.3e of mass below the pruning floor", walk.leaked)
    return SurvivalTable(
        x0=None if isinstance(x0, LatticePMF) else int(x0),
        horizon=horizon,
        survive=survive,
        first_passage=first_passage,
        convention=conv,
        local=local,
        leaked_mass=walk.leaked,
    )


def first_passage_pmf(table: SurvivalTable) -> np.ndarray:
    """Return P[tau = n] for n = 0..horizon (entry 0 is zero).

    Equals the successive differences of ``survive``; computed from the killed mass directly.
    """
    return table.first_passage.copy()
