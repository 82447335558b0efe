"""Exact laws of the first return to zero and the Green potential of the zero set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from models.lattice import LatticePMF, WalkModel
from oracle.convention import BoundaryConvention
from oracle.survival import DEFAULT_STATE_CAP, survival_dp


@dataclass(frozen=True, slots=True, eq=False)
class ReturnTimeLaw:
    """Law of tau_1, the first return of the chain to zero, split by the sign of the restart.

    All arrays are indexed by n = 0..horizon.
    """

    pmf: np.ndarray  # P[tau_1 = n]
    tail: np.ndarray  # P[tau_1 > n]
    tail_positive: np.ndarray  # P[tau_1 > n, restart > 0]
    tail_negative: np.ndarray  # P[tau_1 > n, restart < 0]
    horizon: int

    def alpha_limit_ratio(self, n: int | np.ndarray) -> np.ndarray | float:
        """P[tau_1 > n, restart > 0] / P[tau_1 > n]."""
        idx = np.asarray(n)
        out = self.tail_positive[idx] / self.tail[idx]
        return float(out) if out.ndim == 0 else out


def _side_law(pmf: LatticePMF, negative: bool) -> LatticePMF | None:
    mask = pmf.values < 0 if negative else pmf.values > 0
    if not mask.any():
        return None
    values = np.abs(pmf.values[mask])
    order = np.argsort(values)
    return LatticePMF(values[order], pmf.probs[mask][order], complete=False)


def return_time_law(model: WalkModel, horizon: int, *, state_cap: int = DEFAULT_STATE_CAP) -> ReturnTimeLaw:
    """Mix the restart law with the killed walks of the matching side.

    From zero the chain jumps to the restart value; tau_1 = 1 if that value is 0. From x > 0
    it follows xi until x + S <= 0, and from x < 0 it follows xi' until the walk of -xi'
    started at |x| does the same.

    Args;
        model: A validated model of either kind.
        horizon: Largest n to resolve, at least 1.
        state_cap: Live-state cap for the killed walks.

    Returns;
        The return-time law.
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    conv = BoundaryConvention.literal()
    restart = model.restart.pmf
    pmf = np.zeros(horizon + 1)
    pmf[1] = restart.prob(0)
    tails: list[np.ndarray] = []
    sides = [(model.xi, _side_law(restart, negative=False))]
    if model.xi_prime is not None:
        sides.append((model.xi_prime.negated(), _side_law(restart, negative=True)))
    for step, start in sides:
        tail = np.zeros(horizon + 1)
        if start is not None:
            tail[0] = start.mass
            tail[1] = start.mass
            if horizon >= 2:
                table = survival_dp(step, start, horizon - 1, conv, keep_local=(), state_cap=state_cap)
                pmf[2:] += table.first_passage[1:]
                tail[1:] = table.survive
        tails.append(tail)
    tail_negative = tails[1] if len(tails) > 1 else np.zeros(horizon + 1)
    total_tail = tails[0] + tail_negative
    total_tail[0] = 1.0
    return ReturnTimeLaw(pmf, total_tail, tails[0], tail_negative, horizon)


def return_time_pmf(model: WalkModel, horizon: int) -> np.ndarray:
    """Return P[tau_1 = n] for n = 0..horizon."""
    return return_time_law(model, horizon).pmf


@dataclass(frozen=True, slots=True, eq=False)
class GreenTable:
    """Expected number of zero visits at each time: Sigma_n = sum_l P[tau_l = n]."""

    tau1_pmf: np.ndarray
    sigma: np.ndarray
    horizon: int

    def identity_residual(self) -> float:
        """Largest violation of Sigma_n = sum_{m<=n} P[tau_1 = m] Sigma_{n-m}."""
        worst = abs(self.sigma[0] - 1.0)
        for n in range(1, self.horizon + 1):
            rebuilt = np.dot(self.tau1_pmf[1 : n + 1], self.sigma[n - 1 :: -1])
            worst = max(worst, abs(self.sigma[n] - rebuilt))
        return float(worst)


def green_potential(tau1: np.ndarray, horizon: int) -> GreenTable:
    """Solve the renewal recursion u(0) = 1, u(n) = sum_{m=1..n} tau1(m) u(n-m)."""
    tau1 = np.asarray(tau1, dtype=np.float64)
    if tau1.size < horizon + 1:
        raise ValueError(f"Need P[tau_1 = n] up to n={horizon}, got {tau1.size - 1}")
    tau1 = tau1[: horizon + 1].copy()
    tau1[0] = 0.0
    sigma = np.zeros(horizon + 1)
    sigma[0] = 1.0
    for n in range(1, horizon + 1):
        sigma[n] = np.dot(tau1[1 : n + 1], sigma[n - 1 :: -1])
    return GreenTable(tau1, sigma, horizon)
