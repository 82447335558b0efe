"""Ratio checks of the killed-walk and return-time asymptotics against the exact oracle."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from models.errors import WrongModelKind
from models.lattice import StepSpec, Walk_Kind, WalkModel
from models.params import OracleSettings
from oracle.constants import ConstantsReport, Spitzer_Side, c2_from_identity, spitzer_constant
from oracle.convention import BoundaryConvention
from oracle.ladder import RenewalTable, renewal_table
from oracle.returns import green_potential, return_time_law
from oracle.survival import survival_dp
from sbm.densities import TRUNCATE_SD, DensityGrid, a1_kernel, a2_kernel, joint_density_from_zero, skew_density
from sbm.identities import half_normal_functional, imck_identity, imck_quadrature, last_zero_mixture
from verify.ratios import RatioCheck, RatioRow

logger = logging.getLogger(__name__)

TAIL_TOLERANCE: float = 0.02
X_SPREAD_TOLERANCE: float = 0.03
LOCAL_TOLERANCE: float = 0.05
C2_TOLERANCE: float = 0.03
REAGGREGATION_TOLERANCE: float = 0.01
RETURN_TAIL_TOLERANCE: float = 0.03
RETURN_LOCAL_TOLERANCE: float = 0.05
GREEN_TOLERANCE: float = 0.03
ALPHA_TOLERANCE: float = 0.02
MIXTURE_TOLERANCE: float = 1e-6
IDENTITY_TOLERANCE: float = 1e-8
KOLMOGOROV_TOLERANCE: float = 1e-6

NORMALISATION_ALPHAS: tuple[float, ...] = (0.0, 0.3, 0.5, 0.7, 1.0)
NORMALISATION_STARTS: tuple[float, ...] = (-2.0, 0.0, 2.0)
NORMALISATION_TIMES: tuple[float, ...] = (0.25, 1.0, 4.0)
HALF_LINE_NODES: int = 400


def _renewal(xi: StepSpec, x_max: int, settings: OracleSettings) -> RenewalTable:
    return renewal_table(
        xi, x_max, horizon=settings.ladder_horizon, max_remainder=settings.max_remainder, state_cap=settings.state_cap
    )


def _kill_probability(xi: StepSpec, conv: BoundaryConvention, y: int) -> float:
    """P[y + xi < floor] for a walk alive at y."""
    return xi.pmf.cdf(conv.floor - y - 1)


# ---- killed walk ----
def check_tail(
    xi: StepSpec,
    x_grid: Sequence[int],
    n_grid: Sequence[int],
    conv: BoundaryConvention,
    settings: OracleSettings | None = None,
    *,
    name: str = "tail",
) -> RatioCheck:
    """sqrt(n) P[tau(x) > n] / (c1 h_conv(x)) for every start x, plus the spread of the limits over x.

    Args;
        xi: One side's step law.
        x_grid: Start positions.
        n_grid: Increasing times; the last two drive the extrapolation.
        conv: Boundary convention for the kill rule and the h shift.
        settings: Oracle truncation settings.
        name: Check name in the report.

    Returns;
        The ratio check.
    """
    settings = settings or OracleSettings()
    ns = sorted(int(n) for n in n_grid)
    xs = sorted(int(x) for x in x_grid)
    c1 = spitzer_constant(xi, Spitzer_Side.GEQ_ZERO, settings.spitzer_terms)
    h = _renewal(xi, max(xs) + conv.h_shift + 1, settings)
    rows: list[RatioRow] = []
    for x in xs:
        scale = c1.value * float(h.h_conv(x, conv))
        table = survival_dp(xi, x, ns[-1], conv, keep_local=(), state_cap=settings.state_cap)
        ratios = np.sqrt(ns) * table.survive[ns] / scale if scale > 0.0 else np.full(len(ns), math.nan)
        rows.append(RatioRow.extrapolate(f"x={x}", ns, ratios, TAIL_TOLERANCE))
    limits = [row.extrapolated_limit for row in rows if math.isfinite(row.extrapolated_limit)]
    if len(limits) > 1:
        rows.append(RatioRow.fixed("x spread", max(limits) / min(limits), X_SPREAD_TOLERANCE))
    logger.info("Tail check %s over %d starts", name, len(xs))
    return RatioCheck(
        name=name,
        claim="sqrt(n) P[tau(x) > n] ~ c1 h(x)",
        inputs={"x_grid": xs, "n_grid": ns, "convention": conv.label},
        rows=rows,
        numbers={"c1": c1.value, "c1_error": c1.error, "renewal_remainder": h.remainder_mass},
    )


def check_local(
    xi: StepSpec,
    x: int,
    y_grid: Sequence[int],
    n_grid: Sequence[int],
    conv: BoundaryConvention,
    settings: OracleSettings | None = None,
    *,
    name: str = "local",
) -> RatioCheck:
    """Local limits of the killed walk.

    Rows: n^(3/2) P[tau(x) > n, x + S(n) = y] / (c2 h(x) h_tilde(y)) per y;
    n^(3/2) P[tau(x) = n] / ((c1 / 2) h(x)); the mean fitted local constant over c2 from the
    descent identity; and the first-passage mass rebuilt from the local rows at n - 1.
    """
    settings = settings or OracleSettings()
    ns = sorted(int(n) for n in n_grid)
    ys = sorted(int(y) for y in y_grid)
    c1 = spitzer_constant(xi, Spitzer_Side.GEQ_ZERO, settings.spitzer_terms).value
    reach = max(x, *ys) + conv.h_shift + 1
    h = _renewal(xi, reach, settings)
    h_tilde = _renewal(xi.negated(), max(reach, -xi.min_step + 2), settings)
    c2 = c2_from_identity(c1, h_tilde, xi, conv)
    keep = set(ns) | {n - 1 for n in ns}
    table = survival_dp(xi, x, ns[-1], conv, keep_local=keep, state_cap=settings.state_cap)
    hx = float(h.h_conv(x, conv))
    root = np.power(np.asarray(ns, dtype=np.float64), 1.5)

    rows: list[RatioRow] = []
    for y in ys:
        scale = c2 * hx * float(h_tilde.h_conv(y, conv))
        locals_ = np.array([table.local_at(n, y) for n in ns])
        ratios = root * locals_ / scale if scale > 0.0 else np.full(len(ns), math.nan)
        rows.append(RatioRow.extrapolate(f"y={y}", ns, ratios, LOCAL_TOLERANCE))
    limits = [row.extrapolated_limit for row in rows if math.isfinite(row.extrapolated_limit)]
    if limits:
        rows.append(RatioRow.fixed("c2 fit / identity", math.fsum(limits) / len(limits), C2_TOLERANCE))

    passage = table.first_passage[ns]
    rows.append(RatioRow.extrapolate("first passage", ns, root * passage / (0.5 * c1 * hx), LOCAL_TOLERANCE))

    rebuilt = []
    for n in ns:
        row = table.local_row(n - 1)
        kill = np.array([_kill_probability(xi, conv, y) for y in range(row.size)])
        rebuilt.append(math.fsum(row * kill))
    reaggregated = np.asarray(rebuilt) / passage
    rows.append(
        RatioRow.fixed(
            "re-aggregation", float(reaggregated[-1]), REAGGREGATION_TOLERANCE, n_grid=ns, ratios=reaggregated
        )
    )
    return RatioCheck(
        name=name,
        claim="n^(3/2) P[tau(x) > n, end at y] ~ c2 h(x) h_tilde(y) and n^(3/2) P[tau(x) = n] ~ (c1/2) h(x)",
        inputs={"x": x, "y_grid": ys, "n_grid": ns, "convention": conv.label},
        rows=rows,
        numbers={"c1": c1, "c2": c2, "h_x": hx, "leaked_mass": table.leaked_mass},
    )


def check_local_spread(
    xi: StepSpec,
    x_grid: Sequence[int],
    y_grid: Sequence[int],
    n: int,
    conv: BoundaryConvention,
    settings: OracleSettings | None = None,
    *,
    name: str = "local_spread",
) -> RatioCheck:
    """n^(3/2) P[tau(x) > n, x + S(n) = y] / (h(x) h_tilde(y)) over every start and end point.

    The limit does not depend on (x, y), so the single row is the largest of these cross
    ratios over the smallest.
    """
    settings = settings or OracleSettings()
    xs = sorted(int(x) for x in x_grid)
    ys = sorted(int(y) for y in y_grid)
    reach = max(*xs, *ys) + conv.h_shift + 1
    h = _renewal(xi, reach, settings)
    h_tilde = _renewal(xi.negated(), max(reach, -xi.min_step + 2), settings)
    cross: list[float] = []
    for x in xs:
        table = survival_dp(xi, x, n, conv, keep_local=(n,), state_cap=settings.state_cap)
        hx = float(h.h_conv(x, conv))
        for y in ys:
            scale = hx * float(h_tilde.h_conv(y, conv))
            cross.append(n**1.5 * table.local_at(n, y) / scale if scale > 0.0 else math.nan)
    finite = [value for value in cross if math.isfinite(value) and value > 0.0]
    spread = max(finite) / min(finite) if len(finite) == len(cross) else math.nan
    return RatioCheck(
        name=name,
        claim="n^(3/2) P[tau(x) > n, end at y] / (h(x) h_tilde(y)) does not depend on x or y",
        inputs={"x_grid": xs, "y_grid": ys, "n": n, "convention": conv.label},
        rows=[RatioRow.fixed("cross-ratio spread", spread, LOCAL_TOLERANCE)],
        numbers={"min_cross_ratio": min(finite, default=math.nan), "max_cross_ratio": max(finite, default=math.nan)},
    )


def check_harmonicity(
    xi: StepSpec,
    x_max: int,
    conv: BoundaryConvention,
    settings: OracleSettings | None = None,
    *,
    table: RenewalTable | None = None,
    name: str = "harmonicity",
) -> RatioCheck:
    """E[h_conv(x + xi); x + xi survives] / h_conv(x) for 0 <= x <= x_max.

    The row is indexed by x. Its tolerance is the worst relative bracket bound, so the check
    passes when every residual sits inside the error the renewal table reports.
    """
    settings = settings or OracleSettings()
    if table is None:
        table = _renewal(xi, x_max + xi.max_step + conv.h_shift + 1, settings)
    steps = xi.pmf.values
    probs = xi.pmf.probs
    xs = np.arange(x_max + 1)
    ratios: list[float] = []
    bounds: list[float] = []
    absolute: list[float] = []
    residuals: list[float] = []
    used: list[int] = []
    for x in xs:
        base = float(table.h_conv(x, conv))
        if base <= 0.0:
            continue
        used.append(int(x))
        targets = x + steps
        alive = targets >= conv.floor
        values = np.where(alive, table.h_conv(np.where(alive, targets, 0), conv), 0.0)
        errors = np.where(alive, table.error(np.where(alive, targets, 0) + conv.h_shift), 0.0)
        expected = math.fsum(probs * values)
        bound = math.fsum(probs * errors) + float(table.error(x + conv.h_shift))
        ratios.append(expected / base)
        bounds.append(bound / base)
        absolute.append(bound)
        residuals.append(abs(expected - base))
    worst = max(ratios, key=lambda r: abs(r - 1.0))
    tolerance = max(max(bounds), np.finfo(float).eps * 64)
    row = RatioRow.fixed("harmonic ratio", worst, tolerance, n_grid=used, ratios=ratios)
    return RatioCheck(
        name=name,
        claim="h is harmonic for the killed walk",
        inputs={"x_max": x_max, "convention": conv.label},
        rows=[row],
        numbers={
            "max_residual": max(residuals),
            "max_bound": max(absolute),
            "renewal_remainder": table.remainder_mass,
        },
    )


# ---- return times ----
def check_return_times(
    model: WalkModel, n_grid: Sequence[int], report: ConstantsReport, settings: OracleSettings | None = None
) -> RatioCheck:
    """Tail, local and Green asymptotics of the first return to zero, and alpha as a limit for X.

    The constants come from ``report``; the sequences come from the exact return-time law.
    """
    settings = settings or OracleSettings()
    ns = sorted(int(n) for n in n_grid)
    law = return_time_law(model, ns[-1], state_cap=settings.state_cap)
    green = green_potential(law.pmf, ns[-1])
    root = np.sqrt(ns)
    rows = [
        RatioRow.extrapolate("tail", ns, root * law.tail[ns] / report.tail_constant, RETURN_TAIL_TOLERANCE),
        RatioRow.extrapolate("local", ns, root**3 * law.pmf[ns] / report.local_constant, RETURN_LOCAL_TOLERANCE),
        RatioRow.extrapolate("green", ns, root * green.sigma[ns] * math.pi * report.tail_constant, GREEN_TOLERANCE),
    ]
    numbers = {
        "tail_constant": report.tail_constant,
        "green_constant": report.green_constant,
        "p_tau1_equals_1": float(law.pmf[1]),
        "restart_at_zero": model.restart.pmf.prob(0),
        "green_identity_residual": green.identity_residual(),
    }
    if model.kind is Walk_Kind.X:
        ratios = np.asarray(law.alpha_limit_ratio(np.asarray(ns)))
        if report.alpha > 0.0:
            scaled = ratios / report.alpha
        else:
            scaled = 1.0 + ratios
        rows.append(RatioRow.extrapolate("alpha limit", ns, scaled, ALPHA_TOLERANCE))
        numbers["alpha"] = report.alpha
        numbers["alpha_limit"] = float(rows[-1].extrapolated_limit * report.alpha) if report.alpha > 0 else 0.0
    return RatioCheck(
        name="return_times",
        claim="P[tau_1 > n] ~ C n^(-1/2), P[tau_1 = n] ~ (C/2) n^(-3/2), Sigma_n ~ 1/(pi C sqrt(n))",
        inputs={"kind": model.kind.value, "n_grid": ns, "convention": report.convention.label},
        rows=rows,
        numbers=numbers,
    )


def check_green_x(
    model: WalkModel, n_grid: Sequence[int], report: ConstantsReport, settings: OracleSettings | None = None
) -> RatioCheck:
    """The Green row of :func:`check_return_times` on its own, for the two-sided chain."""
    if model.kind is not Walk_Kind.X:
        raise WrongModelKind("check_green_x needs the two-sided model")
    full = check_return_times(model, n_grid, report, settings)
    return RatioCheck(
        name="green_x",
        claim="Sigma_n ~ 1/(pi (c1 E[h(eta); eta > 0] + c1' E[h'(-eta); eta < 0]) sqrt(n))",
        inputs=full.inputs,
        rows=[full.row("green")],
        numbers={"green_constant": report.green_constant},
    )


def check_alpha_consistency(
    report: ConstantsReport, alpha_limit: float | None = None, sign_frequency: float | None = None
) -> RatioCheck:
    """Pairwise agreement of alpha from the constants, from the return-time limit and from the sign frequency.

    Each row carries ``1 + difference`` so the usual target of 1 applies.
    """
    estimates = {"parameter": report.alpha}
    if alpha_limit is not None:
        estimates["return limit"] = alpha_limit
    if sign_frequency is not None:
        estimates["sign frequency"] = sign_frequency
    labels = list(estimates)
    rows = [
        RatioRow.fixed(f"{a} vs {b}", 1.0 + estimates[a] - estimates[b], ALPHA_TOLERANCE)
        for i, a in enumerate(labels)
        for b in labels[i + 1 :]
    ]
    numbers = {f"alpha_{label.replace(' ', '_')}": value for label, value in estimates.items()}
    if report.harrison_shepp_alpha is not None:
        numbers["alpha_nearest_neighbour"] = report.harrison_shepp_alpha
    return RatioCheck(
        name="alpha_consistency",
        claim="the three estimates of alpha agree",
        inputs={"convention": report.convention.label},
        rows=rows,
        numbers=numbers,
    )


# ---- closed forms ----
TEST_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "u": lambda u: u,
    "u^2": lambda u: u * u,
    "exp(-u)": lambda u: math.exp(-u),
    "cos(u)": math.cos,
}


def check_last_zero_mixture(times: Sequence[float] = (0.5, 1.0)) -> RatioCheck:
    """The arcsine-weighted meander mixture against the half-normal law, for a few test functions."""
    rows = []
    for t in times:
        for label, phi in TEST_FUNCTIONS.items():
            ratio = last_zero_mixture(phi, t) / half_normal_functional(phi, t)
            rows.append(RatioRow.fixed(f"{label} at t={t:g}", ratio, MIXTURE_TOLERANCE))
    return RatioCheck(
        name="last_zero_mixture",
        claim="splitting at the last zero rebuilds the half-normal marginal",
        inputs={"times": list(times), "functions": list(TEST_FUNCTIONS)},
        rows=rows,
    )


def _half_lines(reach: float) -> list[DensityGrid]:
    # the densities jump at zero, so each half line gets its own rule
    return [
        DensityGrid.gauss_legendre(-reach, 0.0, HALF_LINE_NODES),
        DensityGrid.gauss_legendre(0.0, reach, HALF_LINE_NODES),
    ]


def check_identities() -> RatioCheck:
    """Closed-form identities of the limit laws, each against an independent quadrature."""
    grid = np.logspace(-1.0, 1.0, 5)
    imck = max(abs(imck_quadrature(a, b) - imck_identity(a, b)) for a in grid for b in grid)

    normal = 0.0
    for t in NORMALISATION_TIMES:
        for x in NORMALISATION_STARTS:
            halves = _half_lines(abs(x) + TRUNCATE_SD * math.sqrt(t))
            for alpha in NORMALISATION_ALPHAS:
                mass = sum(half.integrate(np.asarray(skew_density(alpha, t, x, half.nodes))) for half in halves)
                normal = max(normal, abs(mass - 1.0))

    halves = _half_lines(TRUNCATE_SD)
    chapman = 0.0
    for alpha in (0.3, 0.8):
        for x, y in ((0.4, -0.2), (-0.5, 0.9), (0.0, 0.3)):
            lhs = sum(
                half.integrate(
                    np.asarray(skew_density(alpha, 0.4, x, half.nodes))
                    * np.asarray(skew_density(alpha, 0.6, half.nodes, y))
                )
                for half in halves
            )
            chapman = max(chapman, abs(lhs - float(skew_density(alpha, 1.0, x, y))))

    vs, us = np.meshgrid(np.linspace(0.05, 2.0, 9), np.linspace(0.05, 2.0, 9))
    kernels = np.asarray(a1_kernel(0.25, 0.75, vs, us)) + np.asarray(a2_kernel(0.25, 0.75, vs, us))
    split_error = float(np.max(np.abs(kernels - np.asarray(joint_density_from_zero(1.0, 0.25, 0.75, vs, us)))))

    rows = [
        RatioRow.fixed("exponential integral", 1.0 + imck, IDENTITY_TOLERANCE),
        RatioRow.fixed("normalisation", 1.0 + normal, IDENTITY_TOLERANCE),
        RatioRow.fixed("chapman-kolmogorov", 1.0 + chapman, KOLMOGOROV_TOLERANCE),
        RatioRow.fixed("kernel split", 1.0 + split_error, KOLMOGOROV_TOLERANCE),
    ]
    return RatioCheck(
        name="identities",
        claim="closed-form densities and integrals agree with quadrature",
        rows=rows,
        numbers={"imck": imck, "normalisation": normal, "chapman_kolmogorov": chapman, "kernel_split": split_error},
    )
