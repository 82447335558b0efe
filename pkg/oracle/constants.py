"""Spitzer constants, the skewness parameter and boundary-convention calibration."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from pydantic import Field
from scipy.special import zeta

from models.base import Model
from models.errors import DivisionDegenerate, NoConventionFits, TailFitUnstable
from models.lattice import StepSpec, Walk_Kind, WalkModel
from models.params import OracleSettings
from oracle.convention import BoundaryConvention, Kill_Rule
from oracle.extrapolation import richardson_limit
from oracle.ladder import RenewalTable, ascending_variants, renewal_table
from oracle.survival import survival_dp

logger = logging.getLogger(__name__)

EXPECTED_EXPONENT: float = -1.5
EXPONENT_SLACK: float = 0.3
CALIBRATION_TOLERANCE: float = 0.05
TAIL_MODEL: str = "a_k ~ beta * k^(-3/2) fitted on the last decade, summed with the Hurwitz zeta function"


class Spitzer_Side(StrEnum):
    """Which half-line the Spitzer series counts."""

    GEQ_ZERO = "geq_zero"  # P[S(k) >= 0], gives c1
    LEQ_ZERO = "leq_zero"  # P[S'(k) <= 0], gives c1'


class Spitzer_Value(NamedTuple):
    value: float
    error: float
    terms: np.ndarray  # a_1 .. a_K
    fitted_exponent: float
    tail: float


# ---- Spitzer series ----
def spitzer_terms(xi: StepSpec, count: int, which: Spitzer_Side = Spitzer_Side.GEQ_ZERO) -> np.ndarray:
    """Return a_k = (P[S(k) >= 0] - 1/2) / k for k = 1..count (or the ``<= 0`` variant).

    The law of S(k) is carried forward by one convolution per term.
    """
    spec = xi if which is Spitzer_Side.GEQ_ZERO else xi.negated()
    offset, kernel = spec.pmf.dense()
    law = kernel.copy()
    origin = offset
    terms = np.empty(count)
    for k in range(1, count + 1):
        zero = -origin  # index of value 0
        upper = law[max(zero, 0) :].sum() if zero < law.size else 0.0
        lower = law[: max(zero, 0)].sum()
        terms[k - 1] = 0.5 * (upper - lower) / k
        if k < count:
            law = np.convolve(law, kernel)
            origin += offset
    return terms


def _fit_tail(terms: np.ndarray) -> tuple[float, float, float]:
    """Fit the last decade of ``terms``; return (exponent, fixed-rate tail, free-rate tail)."""
    count = terms.size
    ks = np.arange(1, count + 1, dtype=np.float64)
    window = slice(max(count // 10, 1) - 1, count)
    tail_k = ks[window]
    tail_a = terms[window]
    live = tail_a != 0.0
    if live.sum() < 3:
        return EXPECTED_EXPONENT, 0.0, 0.0
    signs = np.sign(tail_a[live])
    if not np.all(signs == signs[0]):
        raise TailFitUnstable("Spitzer terms change sign over the last decade")
    log_k = np.log(tail_k[live])
    log_a = np.log(np.abs(tail_a[live]))
    slope, intercept = np.polyfit(log_k, log_a, 1)
    if abs(slope - EXPECTED_EXPONENT) > EXPONENT_SLACK:
        raise TailFitUnstable(f"Spitzer terms decay like k^{slope:.3f}, expected k^{EXPECTED_EXPONENT}")
    beta = signs[0] * math.exp(float(np.mean(log_a - EXPECTED_EXPONENT * log_k)))
    fixed = beta * float(zeta(-EXPECTED_EXPONENT, count + 1))
    free = signs[0] * math.exp(intercept) * float(zeta(-slope, count + 1))
    return float(slope), fixed, free


def spitzer_constant(
    xi: StepSpec, which: Spitzer_Side | str = Spitzer_Side.GEQ_ZERO, K: int = 2048
) -> Spitzer_Value:
    """Return (1/sqrt(pi)) exp(sum_k a_k) with a fitted tail and an error estimate.

    Args;
        xi: Centred, aperiodic step law.
        which: ``geq_zero`` for c1, ``leq_zero`` for c1'.
        K: Number of terms computed exactly, at least 16.

    Returns;
        The constant, its error estimate, the terms and the fitted decay exponent.

    Raises;
        TailFitUnstable: If the terms do not decay like k^(-3/2).
    """
    if K < 16:
        raise ValueError(f"K must be at least 16, got {K}")
    which = Spitzer_Side(which)
    terms = spitzer_terms(xi, K, which)
    exponent, fixed, free = _fit_tail(terms)
    series = math.fsum(terms) + fixed
    value = math.exp(series) / math.sqrt(math.pi)
    error = value * (abs(free - fixed) + K * np.finfo(float).eps)
    return Spitzer_Value(value, error, terms, exponent, fixed)


# ---- identities ----
def _descent_weight(h_tilde: RenewalTable, xi: StepSpec, offset: int) -> tuple[float, float]:
    """sum_{y>=1} h_tilde(y + offset) P[xi <= -y] with its bracket half-width."""
    ys = np.arange(1, -xi.min_step + 1)
    below = np.array([xi.pmf.cdf(-y) for y in ys])
    total = float(np.dot(h_tilde.h(ys + offset), below))
    error = float(np.dot(h_tilde.error(ys + offset), below))
    return total, error


def c2_from_identity(
    c1: float, h_tilde: RenewalTable, xi: StepSpec, conv: BoundaryConvention | None = None
) -> float:
    """Return c2 = c1 / (2 sum_{y>=1} h_tilde(y) P[xi <= -y]).

    The ascending function is read under ``conv`` relative to the kill-on-nonpositive rule;
    the default convention reads it unshifted.

    Raises;
        DivisionDegenerate: If the step law has no negative atoms.
    """
    conv = conv or BoundaryConvention.literal()
    if xi.min_step >= 0:
        raise DivisionDegenerate("Step law has no negative atoms")
    total, _ = _descent_weight(h_tilde, xi, conv.offset_for(Kill_Rule.ON_NONPOSITIVE))
    if total <= 0.0:
        raise DivisionDegenerate("Descent weight vanished")
    return c1 / (2.0 * total)


def harrison_shepp_alpha(model: WalkModel) -> float:
    """Return E[eta+] / E|eta|, the skewness for nearest-neighbour-like models."""
    values = model.restart.pmf.values.astype(np.float64)
    probs = model.restart.pmf.probs
    positive = math.fsum(np.clip(values, 0, None) * probs)
    absolute = math.fsum(np.abs(values) * probs)
    if absolute == 0.0:
        raise DivisionDegenerate("Restart law has no mass off zero")
    return positive / absolute


class ConstantsReport(Model):
    """Constants of the limit theorem for one model under one boundary convention."""

    kind: Walk_Kind
    convention: BoundaryConvention
    c1: float
    c1_error: float
    c1_prime: float | None = None
    c1_prime_error: float | None = None
    c2: float
    c2_error: float
    eh_eta_pos: float
    eh_eta_pos_error: float
    ehp_eta_neg: float = 0.0
    ehp_eta_neg_error: float = 0.0
    alpha: float = Field(ge=0.0, le=1.0)
    alpha_error: float
    harrison_shepp_alpha: float | None = None
    tail_constant: float
    green_constant: float
    series_terms_used: int
    fitted_exponent: float
    tail_model: str = TAIL_MODEL
    renewal_remainder: float
    sigma: float
    sigma_prime: float

    def recompute_alpha(self) -> float:
        """Rebuild alpha from the stored expectations."""
        if self.kind is Walk_Kind.Y:
            return 1.0
        positive = self.c1 * self.eh_eta_pos
        negative = (self.c1_prime or 0.0) * self.ehp_eta_neg
        return positive / (positive + negative)

    @property
    def local_constant(self) -> float:
        """Limit of n^(3/2) P[tau_1 = n]."""
        return 0.5 * self.tail_constant


def _restart_expectation(table: RenewalTable, atoms: np.ndarray, probs: np.ndarray, offset: int) -> tuple[float, float]:
    if atoms.size == 0:
        return 0.0, 0.0
    return float(np.dot(table.h(atoms + offset), probs)), float(np.dot(table.error(atoms + offset), probs))


def constants_report(
    model: WalkModel, conv: BoundaryConvention, settings: OracleSettings | None = None
) -> ConstantsReport:
    """Compute every constant of the limit theorem for ``model``.

    The chains kill on landing at or across zero, so the renewal functions are read under
    ``conv`` relative to the kill-on-nonpositive rule.

    Args;
        model: A validated walk model of either kind.
        conv: Boundary convention pairing the kill rule with the h shift.
        settings: Truncation settings; defaults apply when None.

    Returns;
        The constants report.
    """
    settings = settings or OracleSettings()
    offset = conv.offset_for(Kill_Rule.ON_NONPOSITIVE)
    restart = model.restart.pmf
    reach = max(settings.x_max, abs(restart.min_value) + 2, abs(restart.max_value) + 2, -model.xi.min_step + 2)
    kwargs = {"horizon": settings.ladder_horizon, "max_remainder": settings.max_remainder}
    h = renewal_table(model.xi, reach, state_cap=settings.state_cap, **kwargs)
    h_tilde, h_prime = ascending_variants(model, reach, **kwargs)
    c1 = spitzer_constant(model.xi, Spitzer_Side.GEQ_ZERO, settings.spitzer_terms)
    c2 = c2_from_identity(c1.value, h_tilde, model.xi, conv)
    weight, weight_error = _descent_weight(h_tilde, model.xi, offset)
    c2_error = c2 * (c1.error / c1.value + weight_error / weight)

    positive = restart.values > 0
    eh, eh_error = _restart_expectation(h, restart.values[positive], restart.probs[positive], offset)
    remainder = max(h.remainder_mass, h_tilde.remainder_mass)
    fields: dict[str, object] = {}
    if model.kind is Walk_Kind.Y:
        tail = c1.value * eh
        alpha, alpha_error = 1.0, 0.0
    else:
        assert model.xi_prime is not None and h_prime is not None
        c1p = spitzer_constant(model.xi_prime, Spitzer_Side.LEQ_ZERO, settings.spitzer_terms)
        negative = restart.values < 0
        ehp, ehp_error = _restart_expectation(h_prime, -restart.values[negative], restart.probs[negative], offset)
        upper = c1.value * eh
        lower = c1p.value * ehp
        tail = upper + lower
        if tail <= 0.0:
            raise DivisionDegenerate("Both sides of the restart law carry zero renewal weight")
        alpha = upper / tail
        rel_upper = c1.error / c1.value + (eh_error / eh if eh else 0.0)
        rel_lower = c1p.error / c1p.value + (ehp_error / ehp if ehp else 0.0)
        alpha_error = alpha * (1.0 - alpha) * (rel_upper + rel_lower)
        remainder = max(remainder, h_prime.remainder_mass)
        fields = {
            "c1_prime": c1p.value,
            "c1_prime_error": c1p.error,
            "ehp_eta_neg": ehp,
            "ehp_eta_neg_error": ehp_error,
            "harrison_shepp_alpha": harrison_shepp_alpha(model),
        }
    if tail <= 0.0:
        raise DivisionDegenerate("Restart law carries zero renewal weight")
    report = ConstantsReport(
        kind=model.kind,
        convention=conv,
        c1=c1.value,
        c1_error=c1.error,
        c2=c2,
        c2_error=c2_error,
        eh_eta_pos=eh,
        eh_eta_pos_error=eh_error,
        alpha=alpha,
        alpha_error=alpha_error,
        tail_constant=tail,
        green_constant=1.0 / (math.pi * tail),
        series_terms_used=settings.spitzer_terms,
        fitted_exponent=c1.fitted_exponent,
        renewal_remainder=remainder,
        sigma=model.sigma,
        sigma_prime=model.sigma_prime,
        **fields,
    )
    logger.info("Constants for %s under %s: c1=%.6f alpha=%.6f", model.kind, conv.label, report.c1, report.alpha)
    return report


def alpha_parameter(
    model: WalkModel, conv: BoundaryConvention, settings: OracleSettings | None = None
) -> ConstantsReport:
    """Return the constants report of a two-sided model, whose ``alpha`` is the skewness."""
    model.require(Walk_Kind.X)
    return constants_report(model, conv, settings)


# ---- calibration ----
class Calibration(Model):
    """Outcome of fitting the boundary convention to the survival asymptotics."""

    convention: BoundaryConvention
    residuals: dict[str, float]
    limits: dict[str, list[float]]
    x_grid: list[int]
    n_grid: list[int]


def calibrate(
    xi: StepSpec, x_grid: Sequence[int], n_grid: Sequence[int], settings: OracleSettings | None = None
) -> Calibration:
    """Score every candidate convention against sqrt(n) P[tau(x) > n] / (c1 h_conv(x)).

    Raises;
        ValueError: If either grid is empty.
        NoConventionFits: If every candidate misses by more than 5%.
    """
    if not x_grid or not n_grid:
        raise ValueError("Calibration needs non-empty x and n grids")
    settings = settings or OracleSettings()
    ns = sorted(int(n) for n in n_grid)
    xs = sorted(int(x) for x in x_grid)
    c1 = spitzer_constant(xi, Spitzer_Side.GEQ_ZERO, settings.spitzer_terms).value
    h = renewal_table(
        xi,
        max(xs) + 2,
        horizon=settings.ladder_horizon,
        max_remainder=settings.max_remainder,
        state_cap=settings.state_cap,
    )
    survival: dict[tuple[Kill_Rule, int], np.ndarray] = {}
    for rule in Kill_Rule:
        conv = BoundaryConvention(kill_rule=rule)
        for x in xs:
            table = survival_dp(xi, x, ns[-1], conv, keep_local=(), state_cap=settings.state_cap)
            survival[rule, x] = table.survive[ns]
    residuals: dict[str, float] = {}
    limits: dict[str, list[float]] = {}
    for candidate in BoundaryConvention.candidates():
        per_x: list[float] = []
        for x in xs:
            scale = c1 * float(h.h(x + candidate.h_shift))
            if scale == 0.0:
                per_x.append(math.inf)
                continue
            ratios = np.sqrt(ns) * survival[candidate.kill_rule, x] / scale
            per_x.append(richardson_limit(ns, ratios))
        limits[candidate.label] = per_x
        residuals[candidate.label] = max(abs(r - 1.0) for r in per_x)
    best = min(BoundaryConvention.candidates(), key=lambda c: residuals[c.label])
    if residuals[best.label] > CALIBRATION_TOLERANCE:
        raise NoConventionFits(f"Best convention {best.label} misses by {residuals[best.label]:.3f}")
    logger.info("Calibrated boundary convention %s (residual %.2e)", best.label, residuals[best.label])
    return Calibration(convention=best, residuals=residuals, limits=limits, x_grid=xs, n_grid=ns)


def calibrate_convention(
    xi: StepSpec, x_grid: Sequence[int], n_grid: Sequence[int], settings: OracleSettings | None = None
) -> BoundaryConvention:
    """Return the convention that best explains the survival asymptotics of ``xi``."""
    return calibrate(xi, x_grid, n_grid, settings).convention
