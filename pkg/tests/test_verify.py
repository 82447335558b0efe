from __future__ import annotations

import math

import numpy as np
import pytest

from models.base import Verdict
from models.errors import NonpositiveTime, WrongModelKind
from models.params import OracleSettings
from models.streams import RandomStream
from oracle.constants import calibrate_convention, constants_report
from oracle.convention import BoundaryConvention
from sbm.densities import DensityGrid, a2_kernel, skew_a2_kernel, skew_cdf
from verify.fits import (
    KS_THRESHOLD,
    P_THRESHOLD,
    SIGN_TOLERANCE,
    check_joint,
    check_marginal,
    dither,
    marginal_quantile,
)
from verify.lemmas import (
    check_alpha_consistency,
    check_green_x,
    check_harmonicity,
    check_identities,
    check_last_zero_mixture,
    check_local,
    check_local_spread,
    check_return_times,
    check_tail,
)
from verify.ratios import FitTest, RatioCheck, RatioRow, TightnessReport
from verify.report import Provenance, VerificationReport
from verify.tightness import tightness_diagnostics

N_GRID = [256, 512, 1024]


@pytest.fixture(scope="module")
def harmonic() -> BoundaryConvention:
    return BoundaryConvention.harmonic()


@pytest.fixture(scope="module")
def skew_constants(perturbed_skew, harmonic, oracle_settings):
    return constants_report(perturbed_skew, harmonic, oracle_settings)


# ---- ratio rows ----
def test_ratio_row_extrapolates_and_judges():
    ns = [100.0, 400.0]
    ratios = [1.0 + 0.3 / math.sqrt(n) for n in ns]
    row = RatioRow.extrapolate("x=0", ns, ratios, 0.01)
    assert row.extrapolated_limit == pytest.approx(1.0)
    assert row.correction == pytest.approx(0.3)
    assert row.envelope == pytest.approx(ratios[0])
    assert row.verdict is Verdict.PASS
    assert row.miss == pytest.approx(0.0, abs=1e-9)


def test_non_finite_rows_are_not_applicable():
    row = RatioRow.extrapolate("x=3", [1.0, 2.0], [math.nan, 1.0], 0.1)
    assert row.verdict is Verdict.NA
    assert row.miss == math.inf


def test_ratio_check_headline_is_the_worst_row():
    rows = [RatioRow.fixed("good", 1.001, 0.01), RatioRow.fixed("bad", 1.2, 0.1)]
    check = RatioCheck(name="demo", claim="", rows=rows)
    assert check.verdict is Verdict.FAIL
    assert check.extrapolated_limit == pytest.approx(1.2)
    assert check.tolerance == pytest.approx(0.1)
    assert check.row("good").verdict is Verdict.PASS
    with pytest.raises(KeyError):
        check.row("missing")


# ---- killed walk ----
def test_tail_ratios_tend_to_one(lazy, harmonic, oracle_settings):
    check = check_tail(lazy, [0, 1, 2], N_GRID, harmonic, oracle_settings)
    assert check.verdict is Verdict.PASS
    assert [row.label for row in check.rows] == ["x=0", "x=1", "x=2", "x spread"]
    assert check.numbers["c1"] == pytest.approx(2.0 / math.sqrt(math.pi), rel=1e-4)
    assert check.inputs["convention"] == "on_negative/0"


def test_local_ratios_tend_to_one(lazy, harmonic, oracle_settings):
    check = check_local(lazy, 1, [0, 1, 2], N_GRID, harmonic, oracle_settings)
    assert check.verdict is Verdict.PASS
    # the first-passage mass is rebuilt exactly from the survivors one step earlier
    assert check.row("re-aggregation").extrapolated_limit == pytest.approx(1.0, abs=1e-9)
    assert check.numbers["c2"] == pytest.approx(4.0 / math.sqrt(math.pi), rel=1e-3)


def test_tail_ratios_on_an_asymmetric_walk(skip_free_up):
    settings = OracleSettings(spitzer_terms=1024, ladder_horizon=50_000, x_max=64)
    xs, ns = [0, 1, 2, 5], [512, 1024, 2048, 4096]
    conv = calibrate_convention(skip_free_up, xs, ns, settings)
    assert conv.label == "on_negative/0"
    check = check_tail(skip_free_up, xs, ns, conv, settings)
    assert [row.label for row in check.rows] == ["x=0", "x=1", "x=2", "x=5", "x spread"]
    for row in check.rows[:4]:
        assert row.extrapolated_limit == pytest.approx(1.0, abs=0.02), row.label
    assert check.verdict is Verdict.PASS


def test_local_cross_ratios_share_one_limit(lazy, harmonic, oracle_settings):
    check = check_local_spread(lazy, [0, 1, 2], [1, 2, 3], 4096, harmonic, oracle_settings)
    assert check.verdict is Verdict.PASS
    assert 1.0 <= check.row("cross-ratio spread").extrapolated_limit < 1.05
    # the common limit is c2
    c2 = 4.0 / math.sqrt(math.pi)
    assert check.numbers["min_cross_ratio"] == pytest.approx(c2, rel=0.05)
    assert check.numbers["max_cross_ratio"] == pytest.approx(c2, rel=0.05)


def test_renewal_function_is_harmonic_only_under_its_own_rule(lazy, harmonic, oracle_settings):
    assert check_harmonicity(lazy, 20, harmonic, oracle_settings).verdict is Verdict.PASS
    literal = check_harmonicity(lazy, 20, BoundaryConvention.literal(), oracle_settings)
    assert literal.verdict is Verdict.FAIL
    assert literal.numbers["max_residual"] > 0.1


def test_harmonic_residuals_stay_inside_the_truncation_bound(lazy, skip_free_up, harmonic):
    check = check_harmonicity(lazy, 50, harmonic, OracleSettings())
    assert check.verdict is Verdict.PASS
    assert check.numbers["max_bound"] <= 1e-3
    assert check.numbers["max_residual"] <= check.numbers["max_bound"] + 1e-9
    # a longer ladder horizon narrows the bracket when ladder heights can skip levels
    short = check_harmonicity(skip_free_up, 50, harmonic, OracleSettings(ladder_horizon=5_000))
    long = check_harmonicity(skip_free_up, 50, harmonic, OracleSettings(ladder_horizon=40_000))
    assert long.numbers["renewal_remainder"] < short.numbers["renewal_remainder"]
    assert 0.0 < long.numbers["max_bound"] < short.numbers["max_bound"]


# ---- return times ----
def test_reflected_return_times(reflected_lazy, harmonic, oracle_settings):
    report = constants_report(reflected_lazy, harmonic, oracle_settings)
    check = check_return_times(reflected_lazy, N_GRID, report, oracle_settings)
    assert check.verdict is Verdict.PASS
    assert [row.label for row in check.rows] == ["tail", "local", "green"]
    assert check.numbers["p_tau1_equals_1"] == 0.0
    assert check.numbers["restart_at_zero"] == 0.0
    with pytest.raises(WrongModelKind):
        check_green_x(reflected_lazy, N_GRID, report, oracle_settings)


def test_two_sided_return_times_recover_alpha(perturbed_skew, skew_constants, oracle_settings):
    check = check_return_times(perturbed_skew, N_GRID, skew_constants, oracle_settings)
    assert check.verdict is Verdict.PASS
    assert check.row("alpha limit").verdict is Verdict.PASS
    assert check.numbers["alpha"] == pytest.approx(2.0 / 3.0, abs=1e-6)
    assert check.numbers["alpha_limit"] == pytest.approx(2.0 / 3.0, abs=0.02)
    green = check_green_x(perturbed_skew, N_GRID, skew_constants, oracle_settings)
    assert [row.label for row in green.rows] == ["green"]
    assert green.verdict is check.row("green").verdict


def test_alpha_consistency_rows(skew_constants):
    agree = check_alpha_consistency(skew_constants, 0.67, 0.66)
    assert len(agree.rows) == 3
    assert agree.verdict is Verdict.PASS
    assert agree.numbers["alpha_sign_frequency"] == 0.66
    disagree = check_alpha_consistency(skew_constants, sign_frequency=0.9)
    assert [row.label for row in disagree.rows] == ["parameter vs sign frequency"]
    assert disagree.verdict is Verdict.FAIL
    assert check_alpha_consistency(skew_constants).verdict is Verdict.NA


def test_closed_form_checks_pass():
    assert check_last_zero_mixture().verdict is Verdict.PASS
    identities = check_identities()
    assert identities.verdict is Verdict.PASS
    assert identities.numbers["kernel_split"] < 1e-10
    assert identities.row("normalisation").verdict is Verdict.PASS
    assert identities.numbers["normalisation"] < 1e-8


# ---- fits ----
@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
def test_marginal_quantiles_invert_the_cdf(alpha):
    levels = np.linspace(0.05, 0.95, 19)
    edges = marginal_quantile(alpha, 0.7, levels)
    assert np.all(np.diff(edges) >= 0.0)
    np.testing.assert_allclose(skew_cdf(alpha, 0.7, 0.0, edges), levels, atol=1e-9)
    ends = marginal_quantile(alpha, 0.7, np.array([0.0, 1.0]))
    assert ends[-1] == np.inf
    assert ends[0] == (0.0 if alpha == 1.0 else -np.inf)


def test_dither_spreads_over_lattice_cells():
    raw = np.tile([0, 0, 3, -2], 500)
    spread = dither(raw, 4, 1.0, 1.0, 1.0, RandomStream(0))
    zeros, threes, twos = spread[raw == 0], spread[raw == 3], spread[raw == -2]
    assert np.all((zeros >= 0.0) & (zeros < 0.25))
    assert np.all((threes >= 1.25) & (threes < 1.75))
    assert np.all((twos >= -1.25) & (twos < -0.75))
    below = dither(np.zeros(2000), 4, 1.0, 1.0, 0.0, RandomStream(0))
    assert np.all(below <= 0.0)


def test_fit_arguments_are_checked(perturbed_symmetric):
    stream = RandomStream(0)
    with pytest.raises(ValueError):
        check_marginal(perturbed_symmetric, 1.0, 256, 10_000, stream)
    with pytest.raises(ValueError):
        check_marginal(perturbed_symmetric, 1.0, 512, 9_999, stream)
    with pytest.raises(ValueError):
        check_marginal(perturbed_symmetric, 1.5, 512, 10_000, stream)
    with pytest.raises(NonpositiveTime):
        check_joint(perturbed_symmetric, 0.5, 0.5, 512, 10_000, 8, stream)
    with pytest.raises(ValueError):
        check_joint(perturbed_symmetric, 0.25, 0.5, 512, 10_000, 3, stream)


def test_marginal_at_time_zero_is_not_applicable(perturbed_symmetric):
    fit = check_marginal(perturbed_symmetric, 0.0, 512, 10_000, RandomStream(0), alpha=0.5)
    assert fit.verdict is Verdict.NA
    assert fit.notes == ["degenerate at zero"]


def test_two_sided_marginal_fit(perturbed_symmetric):
    fit = check_marginal(perturbed_symmetric, 1.0, 512, 10_000, RandomStream(3), alpha=0.5, chunk_size=2500)
    assert fit.name == "marginal_X"
    assert fit.sample_size == 10_000
    assert fit.statistic < 0.04
    assert fit.numbers["sign_frequency"] == pytest.approx(0.5, abs=0.03)
    assert set(fit.curves) == {"u", "empirical_density", "reference_density"}
    assert len(fit.curves["u"]) == 64


def kernel_mass(kernel, reach: float = 8.0, count: int = 200) -> float:
    """Integrate a two-time kernel over the plane, one Gauss-Legendre rule per quadrant."""
    halves = [DensityGrid.gauss_legendre(-reach, 0.0, count), DensityGrid.gauss_legendre(0.0, reach, count)]
    total = 0.0
    for first in halves:
        for second in halves:
            v, u = np.meshgrid(first.nodes, second.nodes, indexing="ij")
            total += float(first.weights @ np.asarray(kernel(v, u)) @ second.weights)
    return total


@pytest.mark.slow
def test_reflected_marginal_is_half_normal(reflected_lazy):
    fit = check_marginal(reflected_lazy, 0.5, 2048, 100_000, RandomStream(29))
    assert fit.name == "marginal_Y"
    assert fit.sample_size == 100_000
    assert fit.statistic <= KS_THRESHOLD
    assert fit.verdict is Verdict.PASS


@pytest.mark.slow
@pytest.mark.parametrize("model_name", ["perturbed_symmetric", "perturbed_skew"])
def test_two_sided_marginal_and_sign_frequency(model_name, request, harmonic, oracle_settings):
    model = request.getfixturevalue(model_name)
    alpha = constants_report(model, harmonic, oracle_settings).alpha
    expected = 0.5 if model_name == "perturbed_symmetric" else 2.0 / 3.0
    assert alpha == pytest.approx(expected, abs=1e-6)
    fit = check_marginal(model, 1.0, 2048, 100_000, RandomStream(31), alpha=alpha)
    assert fit.statistic <= KS_THRESHOLD
    assert fit.numbers["sign_frequency"] == pytest.approx(alpha, abs=SIGN_TOLERANCE)
    assert fit.verdict is Verdict.PASS


@pytest.mark.slow
@pytest.mark.parametrize(
    ("model_name", "alpha"),
    [("reflected_lazy", 1.0), ("perturbed_symmetric", 0.5), ("perturbed_skew", 2.0 / 3.0)],
)
def test_joint_fit_and_zero_avoiding_split(model_name, alpha, request):
    model = request.getfixturevalue(model_name)
    s, t, n = 0.25, 0.75, 2048
    fit = check_joint(model, s, t, n, 100_000, 8, RandomStream(17), alpha=alpha)
    assert fit.name == ("joint_Y" if model_name == "reflected_lazy" else "joint_X")
    assert fit.numbers["dof"] == 63.0
    assert fit.p_value > P_THRESHOLD

    if model_name == "reflected_lazy":
        avoid = kernel_mass(lambda v, u: a2_kernel(s, t, v, u))
    else:
        avoid = kernel_mass(lambda v, u: skew_a2_kernel(alpha, s, t, v, u))
    assert avoid == pytest.approx(fit.numbers["arcsine_avoid_mass"], abs=1e-6)
    assert fit.numbers["avoid_mass"] == pytest.approx(avoid, abs=1e-6)
    allowance = 3.0 * fit.numbers["split_stderr"] + 1.0 / math.sqrt(n)
    assert abs(fit.numbers["avoid_share"] - avoid) <= allowance
    assert fit.verdict is Verdict.PASS


# ---- tightness ----
def test_tightness_curves(reflected_lazy):
    report = tightness_diagnostics(reflected_lazy, [256, 64], [0.1, 0.0, 0.05], 1000, RandomStream(5))
    assert report.n_grid == [64, 256]
    assert report.delta_grid == [0.0, 0.05, 0.1]
    # every restart draws gamma = 1
    assert report.max_restart_scaled == pytest.approx([1 / 8, 1 / 16])
    assert set(report.modulus) == {"q0.5", "q0.9"}
    assert report.modulus["q0.9"][0][0] == 0.0
    assert report.verdict is Verdict.PASS


def test_tightness_arguments(reflected_lazy):
    with pytest.raises(ValueError):
        tightness_diagnostics(reflected_lazy, [64], [0.1], 999, RandomStream(0))
    with pytest.raises(ValueError):
        tightness_diagnostics(reflected_lazy, [64], [1.5], 1000, RandomStream(0))


# ---- report ----
def test_report_round_trips_every_check_kind():
    report = VerificationReport(
        provenance=Provenance(
            config_hash="abc", version="dev", convention="on_negative/0", kind="Y", n=8, paths=1, chunk_size=1
        )
    )
    assert report.verdict is Verdict.NA
    report.add(RatioCheck(name="tail", claim="", rows=[RatioRow.fixed("x=0", 1.001, 0.02)]))
    report.add(
        FitTest(
            name="marginal_Y",
            claim="",
            statistic_name="ks",
            statistic=0.05,
            sample_size=10,
            threshold=0.02,
            verdict=Verdict.FAIL,
        )
    )
    report.add(
        TightnessReport(
            n_grid=[8],
            delta_grid=[0.0],
            mean_visits_scaled=[1.0],
            max_restart_scaled=[math.nan],
            modulus={"q0.5": [[0.0]]},
            verdict=Verdict.PASS,
        )
    )
    assert report.verdict is Verdict.FAIL
    assert report.names() == ["tail", "marginal_Y", "tightness"]
    assert report.summary() == {"tail": "pass", "marginal_Y": "fail", "tightness": "pass"}

    loaded = VerificationReport.model_validate_json(report.model_dump_json())
    assert isinstance(loaded.get("tail"), RatioCheck)
    assert isinstance(loaded.get("marginal_Y"), FitTest)
    assert isinstance(loaded.get("tightness"), TightnessReport)
    assert math.isnan(loaded.get("tightness").max_restart_scaled[0])
    assert loaded.verdict is Verdict.FAIL
    with pytest.raises(KeyError):
        loaded.get("joint_X")
