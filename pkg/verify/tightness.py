"""Scaling diagnostics for the zero set and the modulus of continuity."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from models.base import Verdict
from models.lattice import WalkModel
from models.streams import RandomStream
from verify.ratios import TightnessReport
from walks.batch import MIN_PATHS, simulate_chunks
from walks.rescale import modulus_rows, scale_values

logger = logging.getLogger(__name__)

QUANTILES: tuple[float, ...] = (0.5, 0.9)
VISIT_SPREAD: float = 2.0


def tightness_diagnostics(
    model: WalkModel,
    n_grid: Sequence[int],
    delta_grid: Sequence[float],
    paths: int,
    stream: RandomStream,
    *,
    chunk_size: int = 10_000,
    workers: int = 1,
) -> TightnessReport:
    """Curves of E[N_n]/sqrt(n), E[max restart]/sqrt(n) and modulus quantiles against delta.

    Each n runs on its own child of ``stream``. The verdict only asserts trends: the restart
    curve ends below where it starts, the visit curve stays within a factor 2, and the
    modulus grows with delta.

    Raises;
        ValueError: If fewer than 1000 paths are requested or a delta leaves [0, 1].
    """
    if paths < MIN_PATHS:
        raise ValueError(f"Tightness needs at least {MIN_PATHS} paths, got {paths}")
    deltas = sorted(float(d) for d in delta_grid)
    if deltas[0] < 0.0 or deltas[-1] > 1.0:
        raise ValueError("delta must lie in [0, 1]")
    ns = sorted(int(n) for n in n_grid)
    visits: list[float] = []
    restarts: list[float] = []
    modulus: dict[str, list[list[float]]] = {f"q{q:g}": [] for q in QUANTILES}
    for index, n in enumerate(ns):
        batches = simulate_chunks(
            model, n, paths, stream.child(index), chunk_size=chunk_size, workers=workers, keep_paths=True
        )
        root = math.sqrt(n)
        visits.append(math.fsum(float(b.zero_visits.sum()) for b in batches) / paths / root)
        restarts.append(math.fsum(float(b.max_restart_abs.sum()) for b in batches) / paths / root)
        scaled = np.concatenate([scale_values(b.full, n, model.sigma, model.sigma_prime) for b in batches])
        per_delta = [modulus_rows(scaled, math.floor(n * delta)) for delta in deltas]
        for q in QUANTILES:
            modulus[f"q{q:g}"].append([float(np.quantile(values, q)) for values in per_delta])
        logger.debug("Tightness at n=%d: visits %.3f, restart %.4f", n, visits[-1], restarts[-1])

    verdicts = []
    if len(ns) > 1:
        verdicts.append(Verdict.PASS if restarts[-1] < restarts[0] else Verdict.FAIL)
        low = min(visits)
        spread = max(visits) / low if low > 0.0 else math.inf
        verdicts.append(Verdict.PASS if spread < VISIT_SPREAD else Verdict.FAIL)
    else:
        spread = 1.0
    growing = all(np.all(np.diff(row) >= 0.0) for rows in modulus.values() for row in rows)
    verdicts.append(Verdict.PASS if growing else Verdict.FAIL)
    return TightnessReport(
        inputs={"paths": paths, "kind": model.kind.value},
        n_grid=ns,
        delta_grid=deltas,
        mean_visits_scaled=visits,
        max_restart_scaled=restarts,
        modulus=modulus,
        numbers={"visit_spread": spread, "restart_first": restarts[0], "restart_last": restarts[-1]},
        verdict=Verdict.combine(verdicts),
    )
