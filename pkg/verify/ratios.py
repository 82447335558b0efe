"""Result types for verifications: ratio tables, goodness-of-fit tests and scaling diagnostics."""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any, Literal

from pydantic import Field, model_validator

from models.base import Model, Verdict
from oracle.extrapolation import correction_term, richardson_limit


class RatioRow(Model):
    """One ratio sequence and its extrapolated limit.

    ``n_grid`` holds whatever the sequence is indexed by (usually n, sometimes x).
    """

    label: str
    n_grid: list[float] = Field(default_factory=list)
    raw_ratios: list[float] = Field(default_factory=list)
    extrapolated_limit: float
    correction: float = 0.0
    envelope: float
    tolerance: float = Field(gt=0.0)
    verdict: Verdict

    @classmethod
    def extrapolate(cls, label: str, n_grid: Sequence[float], ratios: Sequence[float], tolerance: float) -> RatioRow:
        """Fit r + b n^(-1/2) on the two largest n and judge the limit r."""
        ratios = [float(r) for r in ratios]
        if not all(math.isfinite(r) for r in ratios):
            limit, correction = math.nan, 0.0
        else:
            limit = richardson_limit(n_grid, ratios)
            correction = correction_term(n_grid, ratios)
        return cls.fixed(label, limit, tolerance, n_grid=n_grid, ratios=ratios, correction=correction)

    @classmethod
    def fixed(
        cls,
        label: str,
        limit: float,
        tolerance: float,
        *,
        n_grid: Sequence[float] = (),
        ratios: Sequence[float] = (),
        correction: float = 0.0,
    ) -> RatioRow:
        """Judge a limit computed elsewhere."""
        finite = [r for r in ratios if math.isfinite(r)]
        envelope = max([*finite, limit]) if math.isfinite(limit) else math.nan
        return cls(
            label=label,
            n_grid=[float(n) for n in n_grid],
            raw_ratios=[float(r) for r in ratios],
            extrapolated_limit=float(limit),
            correction=correction,
            envelope=envelope,
            tolerance=tolerance,
            verdict=Verdict.within(limit, 1.0, tolerance),
        )

    @property
    def miss(self) -> float:
        """|limit - 1| in units of the tolerance; infinite when the limit is not finite."""
        if not math.isfinite(self.extrapolated_limit):
            return math.inf
        return abs(self.extrapolated_limit - 1.0) / self.tolerance


class RatioCheck(Model):
    """A named family of ratio rows; passes when every row does.

    The headline limit and tolerance are those of the row that misses by the most.
    """

    type: Literal["ratio"] = "ratio"
    name: str
    claim: str
    inputs: dict[str, Any] = Field(default_factory=dict)
    rows: list[RatioRow]
    target: float = 1.0
    extrapolated_limit: float = math.nan
    tolerance: float = 1.0
    numbers: dict[str, float] = Field(default_factory=dict)
    verdict: Verdict = Verdict.NA

    @model_validator(mode="after")
    def _headline(self) -> RatioCheck:
        if self.rows:
            worst = max(self.rows, key=lambda row: row.miss)
            object.__setattr__(self, "extrapolated_limit", worst.extrapolated_limit)
            object.__setattr__(self, "tolerance", worst.tolerance)
            object.__setattr__(self, "verdict", Verdict.combine([row.verdict for row in self.rows]))
        return self

    def row(self, label: str) -> RatioRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(f"{self.name} has no row {label!r}")


class FitTest(Model):
    """A goodness-of-fit verdict with its threshold recorded next to it."""

    type: Literal["fit"] = "fit"
    name: str
    claim: str
    statistic_name: str
    statistic: float
    sample_size: int = Field(gt=0)
    threshold: float
    p_value: float | None = None
    inputs: dict[str, Any] = Field(default_factory=dict)
    numbers: dict[str, float] = Field(default_factory=dict)
    curves: dict[str, list[float]] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)
    verdict: Verdict


class TightnessReport(Model):
    """Scaling curves of the zero set and of the path modulus.

    ``modulus`` maps a quantile label to one row per n, one column per delta.
    """

    type: Literal["tightness"] = "tightness"
    name: str = "tightness"
    claim: str = "zero visits grow like sqrt(n), restarts are negligible, the modulus shrinks with delta"
    inputs: dict[str, Any] = Field(default_factory=dict)
    n_grid: list[int]
    delta_grid: list[float]
    mean_visits_scaled: list[float]
    max_restart_scaled: list[float]
    modulus: dict[str, list[list[float]]]
    numbers: dict[str, float] = Field(default_factory=dict)
    verdict: Verdict
