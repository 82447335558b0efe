"""Exact simulation of the reflected chain Y and the perturbed two-sided chain X."""

from __future__ import annotations

from collections.abc import Collection
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from models.lattice import Walk_Kind, WalkModel, sample_many
from models.streams import RandomStream

# child indices of a path stream
XI_STREAM: int = 0
XI_PRIME_STREAM: int = 1
RESTART_STREAM: int = 2


class Branch(StrEnum):
    """Which case of the transition rule fired."""

    UP_SIDE = "up_side"  # x > 0 and x + xi > 0
    HIT_FROM_ABOVE = "hit_from_above"  # x > 0 and x + xi <= 0
    RESTART = "restart"  # x == 0
    DOWN_SIDE = "down_side"  # x < 0 and x + xi' < 0
    HIT_FROM_BELOW = "hit_from_below"  # x < 0 and x + xi' >= 0


def next_state(state: int, xi: int, xi_prime: int, restart: int) -> tuple[int, Branch]:
    """Apply one transition of X; the reflected chain never enters the negative branches.

    Args;
        state: Current position.
        xi: Positive-side step draw.
        xi_prime: Negative-side step draw.
        restart: Restart draw, used only from zero.

    Returns;
        The next position and the branch taken.
    """
    if state > 0:
        if state + xi > 0:
            return state + xi, Branch.UP_SIDE
        return 0, Branch.HIT_FROM_ABOVE
    if state < 0:
        if state + xi_prime < 0:
            return state + xi_prime, Branch.DOWN_SIDE
        return 0, Branch.HIT_FROM_BELOW
    return restart, Branch.RESTART


def advance(states: np.ndarray, xi: np.ndarray, xi_prime: np.ndarray | None, restart: np.ndarray) -> np.ndarray:
    """Vectorised :func:`next_state` over many paths."""
    out = np.where(states == 0, restart, 0)
    up = states + xi
    out = np.where((states > 0) & (up > 0), up, out)
    if xi_prime is not None:
        down = states + xi_prime
        out = np.where((states < 0) & (down < 0), down, out)
    return out


@dataclass(frozen=True, slots=True, eq=False)
class PathBundle:
    """One simulated path with its zero-set instrumentation."""

    kind: Walk_Kind
    values: np.ndarray  # X(0..N)
    return_times: list[int]
    restart_draws: list[tuple[int, int]]  # (time the restart lands, value)
    seed: str

    @property
    def length(self) -> int:
        return self.values.size - 1


def _simulate(model: WalkModel, n: int, stream: RandomStream) -> PathBundle:
    if n < 0:
        raise ValueError(f"Path length must be non-negative, got {n}")
    xi = sample_many(model.xi, stream.child(XI_STREAM), n)
    if model.xi_prime is not None:
        xi_prime = sample_many(model.xi_prime, stream.child(XI_PRIME_STREAM), n)
    else:
        xi_prime = np.zeros(n, dtype=np.int64)
    restart = sample_many(model.restart, stream.child(RESTART_STREAM), n)
    values = np.zeros(n + 1, dtype=np.int64)
    return_times: list[int] = []
    restart_draws: list[tuple[int, int]] = []
    state = 0
    for k in range(1, n + 1):
        state, branch = next_state(state, int(xi[k - 1]), int(xi_prime[k - 1]), int(restart[k - 1]))
        values[k] = state
        if branch is Branch.RESTART:
            restart_draws.append((k, state))
        if state == 0:
            return_times.append(k)
    return PathBundle(model.kind, values, return_times, restart_draws, stream.identifier)


def simulate_Y(model: WalkModel, n: int, stream: RandomStream) -> PathBundle:
    """Simulate n steps of the reflected chain started at 0."""
    model.require(Walk_Kind.Y)
    return _simulate(model, n, stream)


def simulate_X(model: WalkModel, n: int, stream: RandomStream) -> PathBundle:
    """Simulate n steps of the two-sided perturbed chain started at 0."""
    model.require(Walk_Kind.X)
    return _simulate(model, n, stream)


def simulate_path(model: WalkModel, n: int, stream: RandomStream) -> PathBundle:
    return _simulate(model, n, stream)


# ---- batches ----
@dataclass(slots=True, eq=False)
class BatchPaths:
    """Many paths advanced together; only the recorded instrumentation is kept.

    ``last_zero_at[k]`` holds, per path, the last time <= k at which the path was at zero.
    """

    kind: Walk_Kind
    n: int
    paths: int
    values_at: dict[int, np.ndarray] = field(default_factory=dict)
    last_zero_at: dict[int, np.ndarray] = field(default_factory=dict)
    first_return: np.ndarray | None = None  # n + 1 when no return by n
    zero_visits: np.ndarray | None = None
    max_restart_abs: np.ndarray | None = None
    full: np.ndarray | None = None


def simulate_batch(
    model: WalkModel,
    n: int,
    paths: int,
    stream: RandomStream,
    *,
    record: Collection[int] = (),
    keep_paths: bool = False,
) -> BatchPaths:
    """Advance ``paths`` independent copies of the chain for ``n`` steps.

    Path ``i`` of a batch with a single path reproduces :func:`simulate_path` on the same stream.

    Args;
        model: The walk model.
        n: Number of steps.
        paths: Number of paths.
        stream: Stream owning the batch's draws.
        record: Times whose values and last zero times are kept.
        keep_paths: Keep every position of every path.

    Returns;
        The batch instrumentation.
    """
    wanted = {int(k) for k in record}
    if any(k < 0 or k > n for k in wanted):
        raise ValueError(f"Record times must lie in [0, {n}]")
    xi_stream = stream.child(XI_STREAM)
    xi_prime_stream = stream.child(XI_PRIME_STREAM)
    restart_stream = stream.child(RESTART_STREAM)
    states = np.zeros(paths, dtype=np.int64)
    last_zero = np.zeros(paths, dtype=np.int64)
    first_return = np.full(paths, n + 1, dtype=np.int64)
    visits = np.zeros(paths, dtype=np.int64)
    max_restart = np.zeros(paths, dtype=np.int64)
    out = BatchPaths(model.kind, n, paths)
    full = np.zeros((paths, n + 1), dtype=np.int32) if keep_paths else None
    if 0 in wanted:
        out.values_at[0] = states.copy()
        out.last_zero_at[0] = last_zero.copy()
    for k in range(1, n + 1):
        xi = sample_many(model.xi, xi_stream, paths)
        xi_prime = sample_many(model.xi_prime, xi_prime_stream, paths) if model.xi_prime is not None else None
        restart = sample_many(model.restart, restart_stream, paths)
        was_zero = states == 0
        states = advance(states, xi, xi_prime, restart)
        max_restart = np.where(was_zero, np.maximum(max_restart, np.abs(restart)), max_restart)
        at_zero = states == 0
        visits += at_zero
        last_zero = np.where(at_zero, k, last_zero)
        first_return = np.where(at_zero & (first_return > n), k, first_return)
        if full is not None:
            full[:, k] = states
        if k in wanted:
            out.values_at[k] = states.copy()
            out.last_zero_at[k] = last_zero.copy()
    out.first_return = first_return
    out.zero_visits = visits
    out.max_restart_abs = max_restart
    out.full = full
    return out
