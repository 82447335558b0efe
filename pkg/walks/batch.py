"""Chunked, order-stable Monte Carlo over many paths."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from multiprocessing import Pool
from typing import TypeVar

import numpy as np

from models.base import Model
from models.lattice import WalkModel
from models.streams import RandomStream
from walks.rescale import scale_values
from walks.simulate import BatchPaths, simulate_batch

logger = logging.getLogger(__name__)

MIN_PATHS: int = 1000
Z_95: float = 1.959963984540054

T = TypeVar("T")
R = TypeVar("R")


class Statistic(StrEnum):
    """Quantities ``batch_estimate`` can average."""

    TAIL = "tail"  # P[tau_1 > n]
    LOCAL = "local"  # P[tau_1 = n]
    MARGINAL = "marginal"  # E[X_n(t)]
    JOINT = "joint"  # E[X_n(s) X_n(t)]
    SIGN = "sign"  # P[X_n(t) > 0]


@dataclass(frozen=True, slots=True)
class ChunkJob:
    """One chunk of paths; its draws come from ``stream`` alone."""

    model: WalkModel
    n: int
    count: int
    stream: RandomStream
    record: tuple[int, ...] = ()
    keep_paths: bool = False


def chunk_jobs(
    model: WalkModel,
    n: int,
    paths: int,
    stream: RandomStream,
    chunk_size: int,
    *,
    record: Iterable[int] = (),
    keep_paths: bool = False,
) -> list[ChunkJob]:
    """Split ``paths`` into chunks; chunk ``i`` owns ``stream.child(i)``."""
    if chunk_size < 1:
        raise ValueError(f"Chunk size must be positive, got {chunk_size}")
    frozen = tuple(sorted({int(k) for k in record}))
    jobs: list[ChunkJob] = []
    for index, start in enumerate(range(0, paths, chunk_size)):
        count = min(chunk_size, paths - start)
        jobs.append(ChunkJob(model, n, count, stream.child(index), frozen, keep_paths))
    return jobs


def run_chunk(job: ChunkJob) -> BatchPaths:
    return simulate_batch(job.model, job.n, job.count, job.stream, record=job.record, keep_paths=job.keep_paths)


def map_ordered(func: Callable[[T], R], jobs: Sequence[T], workers: int = 1) -> list[R]:
    """Map ``func`` over ``jobs`` on a process pool, keeping job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with Pool(processes=min(workers, len(jobs))) as pool:
        return pool.map(func, jobs)


def simulate_chunks(
    model: WalkModel,
    n: int,
    paths: int,
    stream: RandomStream,
    *,
    record: Iterable[int] = (),
    chunk_size: int = 10_000,
    workers: int = 1,
    keep_paths: bool = False,
) -> list[BatchPaths]:
    """Simulate every chunk and return the batches in chunk order."""
    jobs = chunk_jobs(model, n, paths, stream, chunk_size, record=record, keep_paths=keep_paths)
    logger.debug("Simulating %d paths of length %d in %d chunks on %d workers", paths, n, len(jobs), workers)
    return map_ordered(run_chunk, jobs, workers)


# ---- rescaled values ----
def record_times(n: int, t: float) -> tuple[int, int]:
    """Integer times bracketing n t."""
    low = math.floor(n * t)
    return low, min(low + 1, n)


def raw_at(batch: BatchPaths, t: float) -> np.ndarray:
    """X(n t) by linear interpolation between the bracketing recorded times."""
    low, high = record_times(batch.n, t)
    frac = batch.n * t - low
    below = batch.values_at[low].astype(np.float64)
    if frac == 0.0:
        return below
    return (1.0 - frac) * below + frac * batch.values_at[high].astype(np.float64)


def rescaled_at(batches: Sequence[BatchPaths], t: float, sigma: float, sigma_prime: float) -> np.ndarray:
    """X_n(t) across all batches, in chunk order."""
    return np.concatenate([scale_values(raw_at(batch, t), batch.n, sigma, sigma_prime) for batch in batches])


# ---- estimates ----
class Estimate(Model):
    """A Monte Carlo mean with a normal-approximation 95% interval."""

    statistic: Statistic
    value: float
    stderr: float
    ci_low: float
    ci_high: float
    paths: int
    n: int
    t: float = 1.0
    chunk_size: int

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low

    def covers(self, target: float) -> bool:
        return self.ci_low <= target <= self.ci_high


def _samples(batch: BatchPaths, statistic: Statistic, n: int, t: float, s: float, sigma: float, sigma_prime: float):
    if statistic is Statistic.TAIL:
        return (batch.first_return > n).astype(np.float64)
    if statistic is Statistic.LOCAL:
        return (batch.first_return == n).astype(np.float64)
    at_t = scale_values(raw_at(batch, t), n, sigma, sigma_prime)
    if statistic is Statistic.MARGINAL:
        return at_t
    if statistic is Statistic.SIGN:
        return (at_t > 0).astype(np.float64)
    return scale_values(raw_at(batch, s), n, sigma, sigma_prime) * at_t


def batch_estimate(
    model: WalkModel,
    statistic: Statistic | str,
    paths: int,
    n: int,
    stream: RandomStream,
    *,
    t: float = 1.0,
    s: float = 0.5,
    chunk_size: int = 10_000,
    workers: int = 1,
) -> Estimate:
    """Estimate a path statistic by chunked Monte Carlo.

    The per-chunk sums are reduced in chunk order, so the result depends only on the seed and
    the chunk size, never on the worker count.

    Args;
        model: The walk model.
        statistic: What to average.
        paths: Number of paths, at least 1000.
        n: Path length.
        stream: Root stream.
        t: Time for the marginal, sign and joint statistics.
        s: Earlier time for the joint statistic.
        chunk_size: Paths per chunk.
        workers: Process count.

    Returns;
        The estimate with its interval.
    """
    statistic = Statistic(statistic)
    if paths < MIN_PATHS:
        raise ValueError(f"Need at least {MIN_PATHS} paths, got {paths}")
    if not 0.0 <= t <= 1.0 or not 0.0 <= s <= t:
        raise ValueError(f"Need 0 <= s <= t <= 1, got s={s}, t={t}")
    record = {*record_times(n, t), *record_times(n, s)}
    batches = simulate_chunks(model, n, paths, stream, record=record, chunk_size=chunk_size, workers=workers)
    return estimate_from_batches(batches, statistic, model, t=t, s=s, chunk_size=chunk_size)


def estimate_from_batches(
    batches: Sequence[BatchPaths],
    statistic: Statistic | str,
    model: WalkModel,
    *,
    t: float = 1.0,
    s: float = 0.5,
    chunk_size: int = 10_000,
) -> Estimate:
    """Reduce already simulated batches to an estimate, chunk by chunk in order."""
    statistic = Statistic(statistic)
    n = batches[0].n
    paths = sum(batch.paths for batch in batches)
    sums: list[float] = []
    squares: list[float] = []
    for batch in batches:
        values = _samples(batch, statistic, n, t, s, model.sigma, model.sigma_prime)
        sums.append(math.fsum(values))
        squares.append(math.fsum(values * values))
    mean = math.fsum(sums) / paths
    variance = max(math.fsum(squares) / paths - mean * mean, 0.0) * paths / (paths - 1)
    stderr = math.sqrt(variance / paths)
    return Estimate(
        statistic=statistic,
        value=mean,
        stderr=stderr,
        ci_low=mean - Z_95 * stderr,
        ci_high=mean + Z_95 * stderr,
        paths=paths,
        n=n,
        t=t,
        chunk_size=chunk_size,
    )
