"""The verification report: every check plus the provenance needed to reproduce it."""

from __future__ import annotations

from typing import Annotated, Any

from pydantic import Field, model_validator

from models.base import Model, Verdict
from verify.ratios import FitTest, RatioCheck, TightnessReport

Check = Annotated[RatioCheck | FitTest | TightnessReport, Field(discriminator="type")]


class Provenance(Model):
    """Where the numbers came from."""

    seed: int | None = None
    config_hash: str
    version: str
    convention: str
    kind: str
    n: int
    paths: int
    chunk_size: int
    grids: dict[str, Any] = Field(default_factory=dict)


class VerificationReport(Model):
    """All checks of a run; the overall verdict fails if any check does."""

    provenance: Provenance
    checks: list[Check] = Field(default_factory=list)
    verdict: Verdict = Verdict.NA

    @model_validator(mode="after")
    def _overall(self) -> VerificationReport:
        object.__setattr__(self, "verdict", Verdict.combine([check.verdict for check in self.checks]))
        return self

    def add(self, check: Check) -> None:
        self.checks = [*self.checks, check]

    def get(self, name: str) -> Check:
        """Return the check called ``name``.

        Raises;
            KeyError: If no check has that name.
        """
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def names(self) -> list[str]:
        return [check.name for check in self.checks]

    def summary(self) -> dict[str, str]:
        return {check.name: check.verdict.value for check in self.checks}
