"""Shared model base and verdict vocabulary for Skewalk."""

from __future__ import annotations

import math
from enum import StrEnum
from typing import Self

from pydantic import BaseModel, ConfigDict


class Model(BaseModel):
    """Base Pydantic model with shared configuration."""

    model_config = ConfigDict(
        str_strip_whitespace=True, validate_assignment=True, extra="forbid", ser_json_inf_nan="constants"
    )

    def replace(self, **updates) -> Self:
        """Return a copy with the provided fields updated.

        Args;
            **updates: Field updates to apply.

        Returns;
            The updated model copy.
        """
        return self.model_copy(update=updates)


class Verdict(StrEnum):
    """Outcome of a single verification."""

    PASS = "pass"
    FAIL = "fail"
    NA = "na"

    @classmethod
    def within(cls, value: float, target: float, tolerance: float) -> Verdict:
        """Return PASS when ``value`` lies within ``tolerance`` of ``target``.

        Non-finite values yield NA rather than FAIL.
        """
        if not math.isfinite(value):
            return cls.NA
        return cls.PASS if abs(value - target) <= tolerance else cls.FAIL

    @classmethod
    def combine(cls, verdicts: list[Verdict]) -> Verdict:
        """Return FAIL if any verdict failed, PASS if any passed, else NA."""
        if any(v is cls.FAIL for v in verdicts):
            return cls.FAIL
        if any(v is cls.PASS for v in verdicts):
            return cls.PASS
        return cls.NA
