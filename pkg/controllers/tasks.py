"""Pipeline tasks: each reads the shared run context and writes its own files."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from disk.export import emit_plotdata, render_charts
from disk.storage import IO
from disk.tables import density_csv, path_csv, ratio_csv, renewal_csv, survival_csv, write_csv
from models.base import Model
from models.errors import ConfigInvalid
from models.lattice import Walk_Kind, WalkModel
from models.params import RunConfig, Task_Name
from models.streams import RandomStream
from models.version import get_app_version
from oracle.constants import Calibration, ConstantsReport, calibrate, constants_report
from oracle.convention import BoundaryConvention
from oracle.ladder import renewal_table
from oracle.returns import green_potential, return_time_law
from oracle.survival import survival_dp
from sbm.densities import skew_density
from verify.fits import MIN_FIT_N, MIN_FIT_PATHS, check_joint, check_marginal, fit_batches
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
from verify.ratios import RatioCheck
from verify.report import Provenance, VerificationReport
from verify.tightness import tightness_diagnostics
from walks.batch import MIN_PATHS, Estimate, Statistic, estimate_from_batches, record_times, simulate_chunks
from walks.simulate import simulate_path

logger = logging.getLogger(__name__)

# children of the run stream
SIMULATE_STREAM: int = 0
DUMP_STREAM: int = 1
FIT_STREAM: int = 2
TIGHTNESS_STREAM: int = 3

# limit marginal at rescaled time 1
DENSITY_HALF_WIDTH: float = 6.0
DENSITY_POINTS: int = 481


class SimulationSummary(Model):
    n: int
    paths: int
    estimates: list[Estimate]


@dataclass(slots=True)
class RunContext:
    """State shared by the tasks of one run; each task owns the files it writes."""

    config: RunConfig
    model: WalkModel
    out_dir: Path
    convention: BoundaryConvention | None = None
    calibration: Calibration | None = None
    constants: ConstantsReport | None = None
    report: VerificationReport | None = None
    outputs: dict[Task_Name, list[Path]] = field(default_factory=dict)

    @property
    def stream(self) -> RandomStream:
        if self.config.seed is None:
            raise ConfigInvalid("A seed is required for stochastic tasks")
        return RandomStream(self.config.seed)

    def record(self, task: Task_Name, *paths: Path) -> None:
        self.outputs.setdefault(task, []).extend(paths)


def resolve_convention(ctx: RunContext) -> BoundaryConvention:
    """Fix the boundary convention, calibrating on the positive-side step law when ``auto``."""
    if ctx.convention is not None:
        return ctx.convention
    choice = ctx.config.convention
    if choice == "auto":
        grids = ctx.config.grids
        ctx.calibration = calibrate(ctx.model.xi, grids.x_grid, grids.n_grid, ctx.config.oracle)
        ctx.convention = ctx.calibration.convention
    else:
        ctx.convention = BoundaryConvention.parse(choice.removeprefix("fixed:"))
    logger.info("Boundary convention %s", ctx.convention.label)
    return ctx.convention


def ensure_constants(ctx: RunContext) -> ConstantsReport:
    if ctx.constants is None:
        ctx.constants = constants_report(ctx.model, resolve_convention(ctx), ctx.config.oracle)
    return ctx.constants


# ---- tasks ----
def task_constants(ctx: RunContext) -> None:
    report = ensure_constants(ctx)
    ctx.record(Task_Name.CONSTANTS, IO.save_json(report, ctx.out_dir / "constants.json"))
    if ctx.calibration is not None:
        ctx.record(Task_Name.CONSTANTS, IO.save_json(ctx.calibration, ctx.out_dir / "calibration.json"))


def task_dp(ctx: RunContext) -> None:
    """Survival tables per start, the renewal table, the return-time law and the limit density at time 1."""
    conv = resolve_convention(ctx)
    grids, oracle = ctx.config.grids, ctx.config.oracle
    horizon = max(grids.n_grid)
    sides = [("", ctx.model.xi)]
    if ctx.model.xi_prime is not None:
        sides.append(("prime-", ctx.model.xi_prime.negated()))
    for prefix, xi in sides:
        for x in grids.x_grid:
            table = survival_dp(xi, x, horizon, conv, keep_local=(), state_cap=oracle.state_cap)
            ctx.record(Task_Name.DP, survival_csv(table, ctx.out_dir / f"survival-{prefix}x{x}.csv"))
        h = renewal_table(
            xi,
            oracle.x_max,
            horizon=oracle.ladder_horizon,
            max_remainder=oracle.max_remainder,
            state_cap=oracle.state_cap,
        )
        ctx.record(Task_Name.DP, renewal_csv(h, ctx.out_dir / f"renewal-{prefix}h.csv"))
    law = return_time_law(ctx.model, horizon, state_cap=oracle.state_cap)
    green = green_potential(law.pmf, horizon)
    rows = zip(range(horizon + 1), law.pmf, law.tail, law.tail_positive, green.sigma)
    header = ("n", "pmf", "tail", "tail_positive", "green")
    ctx.record(Task_Name.DP, write_csv(ctx.out_dir / "returns.csv", header, rows))
    alpha = ensure_constants(ctx).alpha
    coordinates = np.linspace(-DENSITY_HALF_WIDTH, DENSITY_HALF_WIDTH, DENSITY_POINTS)
    density = np.asarray(skew_density(alpha, 1.0, 0.0, coordinates))
    ctx.record(Task_Name.DP, density_csv(coordinates, density, ctx.out_dir / "density-t1.csv"))


def task_simulate(ctx: RunContext) -> None:
    """Monte Carlo estimates of the return-time and rescaled-path statistics, plus optional path dumps."""
    sampling, grids = ctx.config.sampling, ctx.config.grids
    if sampling.paths < MIN_PATHS:
        raise ConfigInvalid(f"simulate needs at least {MIN_PATHS} paths, got {sampling.paths}")
    t, s = grids.t_joint, grids.s
    record = {*record_times(sampling.n, t), *record_times(sampling.n, s)}
    batches = simulate_chunks(
        ctx.model,
        sampling.n,
        sampling.paths,
        ctx.stream.child(SIMULATE_STREAM),
        record=record,
        chunk_size=sampling.chunk_size,
        workers=ctx.config.threads,
    )
    estimates = [
        estimate_from_batches(batches, statistic, ctx.model, t=t, s=s, chunk_size=sampling.chunk_size)
        for statistic in Statistic
    ]
    payload = SimulationSummary(n=sampling.n, paths=sampling.paths, estimates=estimates)
    ctx.record(Task_Name.SIMULATE, IO.save_json(payload, ctx.out_dir / "simulate.json"))
    dumps = ctx.stream.child(DUMP_STREAM)
    for index in range(sampling.dump_paths):
        bundle = simulate_path(ctx.model, sampling.n, dumps.child(index))
        ctx.record(Task_Name.SIMULATE, path_csv(bundle, ctx.out_dir / f"path-{index}.csv"))


def task_verify(ctx: RunContext) -> None:
    """Run every check, then write the report, ratio tables, plot data and charts."""
    config = ctx.config
    grids, sampling, oracle = config.grids, config.sampling, config.oracle
    conv = resolve_convention(ctx)
    constants = ensure_constants(ctx)
    model = ctx.model
    report = VerificationReport(
        provenance=Provenance(
            seed=config.seed,
            config_hash=config.config_hash(),
            version=get_app_version(),
            convention=conv.label,
            kind=model.kind.value,
            n=sampling.n,
            paths=sampling.paths,
            chunk_size=sampling.chunk_size,
            grids=grids.model_dump(mode="json"),
        )
    )
    report.add(check_tail(model.xi, grids.x_grid, grids.n_grid, conv, oracle))
    if model.xi_prime is not None:
        report.add(check_tail(model.xi_prime.negated(), grids.x_grid, grids.n_grid, conv, oracle, name="tail_prime"))
    report.add(check_local(model.xi, grids.local_x, grids.y_grid, grids.n_grid, conv, oracle))
    report.add(check_local_spread(model.xi, grids.x_grid, grids.y_grid, max(grids.n_grid), conv, oracle))
    report.add(check_harmonicity(model.xi, grids.harmonic_x_max, conv, oracle))
    returns = check_return_times(model, grids.n_grid, constants, oracle)
    report.add(returns)
    if model.kind is Walk_Kind.X:
        report.add(check_green_x(model, grids.n_grid, constants, oracle))
    report.add(check_identities())
    report.add(check_last_zero_mixture())

    if sampling.paths >= MIN_FIT_PATHS and sampling.n >= MIN_FIT_N:
        fit_stream = ctx.stream.child(FIT_STREAM)
        batches = fit_batches(
            model,
            sampling.n,
            sampling.paths,
            fit_stream,
            [grids.t, grids.s, grids.t_joint],
            chunk_size=sampling.chunk_size,
            workers=config.threads,
        )
        kwargs = {"alpha": constants.alpha, "batches": batches, "chunk_size": sampling.chunk_size}
        marginal = check_marginal(model, grids.t, sampling.n, sampling.paths, fit_stream, **kwargs)
        report.add(marginal)
        report.add(
            check_joint(model, grids.s, grids.t_joint, sampling.n, sampling.paths, grids.bins, fit_stream, **kwargs)
        )
        if model.kind is Walk_Kind.X:
            report.add(
                check_alpha_consistency(
                    constants, returns.numbers.get("alpha_limit"), marginal.numbers.get("sign_frequency")
                )
            )
    else:
        logger.warning("Skipping goodness-of-fit checks: need n >= %d and paths >= %d", MIN_FIT_N, MIN_FIT_PATHS)
    if sampling.tightness_paths >= MIN_PATHS:
        report.add(
            tightness_diagnostics(
                model,
                grids.tightness_n,
                grids.delta_grid,
                sampling.tightness_paths,
                ctx.stream.child(TIGHTNESS_STREAM),
                chunk_size=sampling.chunk_size,
                workers=config.threads,
            )
        )
    ctx.report = report
    ctx.record(Task_Name.VERIFY, IO.save_json(report, ctx.out_dir / "verify.json"))
    for check in report.checks:
        if isinstance(check, RatioCheck):
            ctx.record(Task_Name.VERIFY, ratio_csv(check, ctx.out_dir / f"ratio-{check.name}.csv"))
    ctx.record(Task_Name.VERIFY, *emit_plotdata(report, "all", ctx.out_dir / "plots"))
    ctx.record(Task_Name.VERIFY, *render_charts(report, ctx.out_dir / "charts", tuple(config.charts)))
    logger.info("Verification verdict %s: %s", report.verdict.value, report.summary())


TASKS: dict[Task_Name, Callable[[RunContext], None]] = {
    Task_Name.CONSTANTS: task_constants,
    Task_Name.DP: task_dp,
    Task_Name.SIMULATE: task_simulate,
    Task_Name.VERIFY: task_verify,
}
