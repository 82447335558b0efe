"""Goodness-of-fit tests of rescaled Monte Carlo paths against the skew Brownian laws."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import chisquare, kstest

from models.base import Verdict
from models.errors import InsufficientCounts, NonpositiveTime
from models.lattice import Walk_Kind, WalkModel
from models.streams import RandomStream
from sbm.densities import (
    Joint_Part,
    half_normal_cdf,
    joint_cell_probabilities,
    marginal_half_normal,
    skew_cdf,
    skew_density,
)
from walks.batch import raw_at, record_times, simulate_chunks
from walks.rescale import scale_values
from walks.simulate import BatchPaths
from verify.ratios import FitTest

logger = logging.getLogger(__name__)

MIN_FIT_PATHS: int = 10_000
MIN_FIT_N: int = 512
KS_THRESHOLD: float = 0.02
SIGN_TOLERANCE: float = 0.02
P_THRESHOLD: float = 1e-3
MIN_EXPECTED: float = 5.0
SPLIT_SIGMAS: float = 3.0
HISTOGRAM_BINS: int = 64

# children of a fit stream
PATH_STREAM: int = 0
DITHER_STREAM: int = 1


def _check_sizes(n: int, paths: int) -> None:
    if n < MIN_FIT_N:
        raise ValueError(f"Fits need n >= {MIN_FIT_N}, got {n}")
    if paths < MIN_FIT_PATHS:
        raise ValueError(f"Fits need at least {MIN_FIT_PATHS} paths, got {paths}")


def fit_batches(
    model: WalkModel,
    n: int,
    paths: int,
    stream: RandomStream,
    times: Sequence[float],
    *,
    chunk_size: int = 10_000,
    workers: int = 1,
) -> list[BatchPaths]:
    """Simulate once for every fit at the given rescaled times."""
    record = {k for t in times for k in record_times(n, t)}
    return simulate_chunks(
        model, n, paths, stream.child(PATH_STREAM), record=record, chunk_size=chunk_size, workers=workers
    )


def dither(
    raw: np.ndarray, n: int, sigma: float, sigma_prime: float, alpha: float, stream: RandomStream
) -> np.ndarray:
    """Spread lattice values uniformly over their cells, then rescale per side.

    A value k != 0 covers [k - 1/2, k + 1/2); zero covers [0, 1/2) with probability alpha and
    (-1/2, 0] otherwise.
    """
    raw = np.asarray(raw, dtype=np.float64)
    draws = np.asarray(stream.uniform(2 * raw.size)).reshape(2, raw.size)
    spread = raw + draws[0] - 0.5
    zero = np.where(draws[1] < alpha, 0.5 * draws[0], -0.5 * draws[0])
    return scale_values(np.where(raw == 0, zero, spread), n, sigma, sigma_prime)


def sample_at(
    model: WalkModel, batches: Sequence[BatchPaths], t: float, alpha: float, stream: RandomStream
) -> np.ndarray:
    """X_n(t) across every batch, dithered when n t falls on a lattice time."""
    raw = np.concatenate([raw_at(batch, t) for batch in batches])
    n = batches[0].n
    if float(n * t).is_integer():
        return dither(raw, n, model.sigma, model.sigma_prime, alpha, stream)
    return scale_values(raw, n, model.sigma, model.sigma_prime)


def marginal_quantile(alpha: float, t: float, q: np.ndarray) -> np.ndarray:
    """Quantiles of p^alpha_t(0, .): 2(1 - alpha) p_t below zero, 2 alpha p_t above."""
    q = np.asarray(q, dtype=np.float64)
    root = math.sqrt(t)
    below_mass = 1.0 - alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        low = root * ndtri(q / (2.0 * below_mass)) if below_mass > 0.0 else np.full(q.shape, -np.inf)
        high = root * ndtri(0.5 + (q - below_mass) / (2.0 * alpha)) if alpha > 0.0 else np.full(q.shape, np.inf)
    out = np.where(q < below_mass, low, high)
    out[q <= 0.0] = -np.inf if alpha < 1.0 else 0.0
    out[q >= 1.0] = np.inf
    return out


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(edges[1:-1], values, side="right"), 0, edges.size - 2)


def _counts(v: np.ndarray, u: np.ndarray, v_edges: np.ndarray, u_edges: np.ndarray) -> np.ndarray:
    grid = np.zeros((v_edges.size - 1, u_edges.size - 1))
    np.add.at(grid, (_bin_index(v, v_edges), _bin_index(u, u_edges)), 1.0)
    return grid


# ---- one time ----
def check_marginal(
    model: WalkModel,
    t: float,
    n: int,
    paths: int,
    stream: RandomStream,
    *,
    alpha: float = 1.0,
    batches: Sequence[BatchPaths] | None = None,
    chunk_size: int = 10_000,
    workers: int = 1,
) -> FitTest:
    """KS distance of X_n(t) from p^alpha_t(0, .), plus the sign frequency against alpha for X.

    The reflected chain is tested against the half-normal law and ``alpha`` is ignored.

    Args;
        model: The walk model.
        t: Rescaled time in [0, 1].
        n: Path length, at least 512.
        paths: Number of paths, at least 10^4.
        stream: Root stream of the fit.
        alpha: Skewness of the reference law.
        batches: Pre-simulated batches recording n t; simulated here when None.
        chunk_size: Paths per chunk.
        workers: Process count.

    Returns;
        The fit; NA at t = 0, where the law is a point mass.
    """
    _check_sizes(n, paths)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    reflected = model.kind is Walk_Kind.Y
    alpha = 1.0 if reflected else alpha
    name = "marginal_Y" if reflected else "marginal_X"
    claim = "Y_n(t) tends to the half-normal law" if reflected else "X_n(t) tends to the skew marginal from 0"
    inputs = {"t": t, "n": n, "paths": paths, "alpha": alpha}
    if t == 0.0:
        return FitTest(
            name=name,
            claim=claim,
            statistic_name="ks",
            statistic=0.0,
            sample_size=paths,
            threshold=KS_THRESHOLD,
            inputs=inputs,
            notes=["degenerate at zero"],
            verdict=Verdict.NA,
        )
    if batches is None:
        batches = fit_batches(model, n, paths, stream, [t], chunk_size=chunk_size, workers=workers)
    samples = sample_at(model, batches, t, alpha, stream.child(DITHER_STREAM))
    reference = (lambda u: half_normal_cdf(t, u)) if reflected else (lambda u: skew_cdf(alpha, t, 0.0, u))
    result = kstest(samples, reference)
    statistic = float(result.statistic)
    verdicts = [Verdict.PASS if statistic <= KS_THRESHOLD else Verdict.FAIL]
    numbers = {"ks": statistic}
    if not reflected:
        raw = np.concatenate([raw_at(batch, t) for batch in batches])
        frequency = float(np.mean(raw > 0))
        numbers["sign_frequency"] = frequency
        numbers["sign_tolerance"] = SIGN_TOLERANCE
        verdicts.append(Verdict.within(frequency, alpha, SIGN_TOLERANCE))

    lo, hi = np.quantile(samples, [0.001, 0.999])
    edges = np.linspace(lo, hi, HISTOGRAM_BINS + 1)
    counts, _ = np.histogram(samples, bins=edges)
    centres = 0.5 * (edges[1:] + edges[:-1])
    empirical = counts / (samples.size * np.diff(edges))
    density = marginal_half_normal(t, centres) if reflected else skew_density(alpha, t, 0.0, centres)
    logger.info("%s at t=%g: D=%.4f over %d paths", name, t, statistic, samples.size)
    return FitTest(
        name=name,
        claim=claim,
        statistic_name="ks",
        statistic=statistic,
        sample_size=int(samples.size),
        threshold=KS_THRESHOLD,
        p_value=float(result.pvalue),
        inputs=inputs,
        numbers=numbers,
        curves={
            "u": centres.tolist(),
            "empirical_density": empirical.tolist(),
            "reference_density": np.asarray(density).tolist(),
        },
        verdict=Verdict.combine(verdicts),
    )


# ---- two times ----
def _chisquare(observed: np.ndarray, expected: np.ndarray) -> tuple[float, float]:
    expected = expected * observed.sum() / expected.sum()
    result = chisquare(observed, expected)
    return float(result.statistic), float(result.pvalue)


def check_joint(
    model: WalkModel,
    s: float,
    t: float,
    n: int,
    paths: int,
    bins: int,
    stream: RandomStream,
    *,
    alpha: float = 1.0,
    batches: Sequence[BatchPaths] | None = None,
    chunk_size: int = 10_000,
    workers: int = 1,
) -> FitTest:
    """Chi-square of the binned pair (X_n(s), X_n(t)) against the two-time law from zero.

    Bins are equiprobable under the marginals at s and at t. Paths are also split by whether
    they return to zero in (ns, nt]: the share that avoids zero is compared with the mass of
    the avoiding kernel, and the avoiding paths alone are compared with its shape on coarser
    bins. The share test allows 3 standard errors plus n^(-1/2) for the lattice.

    Raises;
        NonpositiveTime: Unless 0 < s < t <= 1.
        InsufficientCounts: If any expected count of the main test is below 5.
    """
    _check_sizes(n, paths)
    if not 0.0 < s < t <= 1.0:
        raise NonpositiveTime(f"Need 0 < s < t <= 1, got s={s}, t={t}")
    if bins < 4:
        raise ValueError(f"Need at least 4 bins per axis, got {bins}")
    reflected = model.kind is Walk_Kind.Y
    alpha = 1.0 if reflected else alpha
    if batches is None:
        batches = fit_batches(model, n, paths, stream, [s, t], chunk_size=chunk_size, workers=workers)
    dither_stream = stream.child(DITHER_STREAM)
    v = sample_at(model, batches, s, alpha, dither_stream.child(0))
    u = sample_at(model, batches, t, alpha, dither_stream.child(1))
    k_s, k_t = math.floor(n * s), math.floor(n * t)
    returned = np.concatenate([batch.last_zero_at[k_t] > k_s for batch in batches])
    total = v.size

    levels = np.linspace(0.0, 1.0, bins + 1)
    v_edges = marginal_quantile(alpha, s, levels)
    u_edges = marginal_quantile(alpha, t, levels)
    observed = _counts(v, u, v_edges, u_edges)
    expected = total * joint_cell_probabilities(alpha, s, t, v_edges, u_edges, Joint_Part.FULL)
    if expected.min() < MIN_EXPECTED:
        raise InsufficientCounts(f"Smallest expected count {expected.min():.2f} is below {MIN_EXPECTED}")
    chi2, p_value = _chisquare(observed.ravel(), expected.ravel())
    verdicts = [Verdict.PASS if p_value > P_THRESHOLD else Verdict.FAIL]

    whole = np.array([-np.inf, np.inf])
    avoid_mass = float(joint_cell_probabilities(alpha, s, t, whole, whole, Joint_Part.AVOIDS_ZERO).sum())
    avoid_share = float(np.mean(~returned))
    stderr = math.sqrt(avoid_mass * (1.0 - avoid_mass) / total)
    allowance = SPLIT_SIGMAS * stderr + 1.0 / math.sqrt(n)
    verdicts.append(Verdict.within(avoid_share, avoid_mass, allowance))

    coarse = np.linspace(0.0, 1.0, bins // 2 + 1)
    cv_edges = marginal_quantile(alpha, s, coarse)
    cu_edges = marginal_quantile(alpha, t, coarse)
    kept = ~returned
    avoid_observed = _counts(v[kept], u[kept], cv_edges, cu_edges).ravel()
    avoid_cells = joint_cell_probabilities(alpha, s, t, cv_edges, cu_edges, Joint_Part.AVOIDS_ZERO).ravel()
    avoid_expected = avoid_cells / avoid_cells.sum() * kept.sum()
    usable = avoid_expected >= MIN_EXPECTED
    notes: list[str] = []
    numbers = {
        "chi2": chi2,
        "dof": float(observed.size - 1),
        "avoid_share": avoid_share,
        "avoid_mass": avoid_mass,
        "arcsine_avoid_mass": 2.0 / math.pi * math.asin(math.sqrt(s / t)),
        "split_stderr": stderr,
        "split_allowance": allowance,
    }
    if usable.sum() >= 2:
        shape_chi2, shape_p = _chisquare(avoid_observed[usable], avoid_expected[usable])
        numbers["avoid_shape_chi2"] = shape_chi2
        numbers["avoid_shape_p"] = shape_p
        verdicts.append(Verdict.PASS if shape_p > P_THRESHOLD else Verdict.FAIL)
        if not usable.all():
            notes.append(f"avoiding-shape test dropped {int((~usable).sum())} cells with expected count below 5")
    else:
        notes.append("too few avoiding paths for the shape test")

    logger.info("Joint fit at (%g, %g): chi2=%.2f p=%.4f avoid=%.4f/%.4f", s, t, chi2, p_value, avoid_share, avoid_mass)
    rows, cols = np.indices(observed.shape)
    return FitTest(
        name="joint_Y" if reflected else "joint_X",
        claim="(X_n(s), X_n(t)) tends to the two-time skew law, split by a zero in between",
        statistic_name="chi2",
        statistic=chi2,
        sample_size=total,
        threshold=P_THRESHOLD,
        p_value=p_value,
        inputs={"s": s, "t": t, "n": n, "paths": paths, "bins": bins, "alpha": alpha},
        numbers=numbers,
        curves={
            "v_bin": rows.ravel().astype(float).tolist(),
            "u_bin": cols.ravel().astype(float).tolist(),
            "observed": observed.ravel().tolist(),
            "expected": expected.ravel().tolist(),
        },
        notes=notes,
        verdict=Verdict.combine(verdicts),
    )
