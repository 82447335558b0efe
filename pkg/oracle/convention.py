"""Boundary conventions pairing a kill rule with a renewal-function shift."""

from __future__ import annotations

from enum import StrEnum
from typing import Literal

import numpy as np

from models.base import Model
from models.errors import ConfigInvalid


class Kill_Rule(StrEnum):
    """When a walk started at x is killed."""

    ON_NONPOSITIVE = "on_nonpositive"  # x + S(n) <= 0
    ON_NEGATIVE = "on_negative"  # x + S(n) < 0


class BoundaryConvention(Model):
    """A kill rule plus the shift applied to h.

    Under this convention ``h_conv(x) = h(x + h_shift)``, taken as 0 for negative arguments.
    """

    kill_rule: Kill_Rule
    h_shift: Literal[0, 1] = 0

    @classmethod
    def literal(cls) -> BoundaryConvention:
        """The kill rule of the first-passage time with h unshifted."""
        return cls(kill_rule=Kill_Rule.ON_NONPOSITIVE, h_shift=0)

    @classmethod
    def harmonic(cls) -> BoundaryConvention:
        """The pairing under which h is harmonic for the killed walk."""
        return cls(kill_rule=Kill_Rule.ON_NEGATIVE, h_shift=0)

    @classmethod
    def candidates(cls) -> list[BoundaryConvention]:
        return [cls(kill_rule=rule, h_shift=shift) for rule in Kill_Rule for shift in (0, 1)]

    @classmethod
    def parse(cls, text: str) -> BoundaryConvention:
        """Parse ``"on_negative:0"`` or ``"on_negative/0"``."""
        rule, sep, shift = text.replace("/", ":").partition(":")
        try:
            return cls(kill_rule=Kill_Rule(rule.strip()), h_shift=int(shift) if sep else 0)
        except ValueError as exc:
            raise ConfigInvalid(f"Bad boundary convention {text!r}: {exc}") from exc

    @property
    def label(self) -> str:
        return f"{self.kill_rule.value}/{self.h_shift}"

    @property
    def floor(self) -> int:
        """Lowest surviving position."""
        return 1 if self.kill_rule is Kill_Rule.ON_NONPOSITIVE else 0

    def survives(self, positions: np.ndarray | int) -> np.ndarray | bool:
        return np.asarray(positions) >= self.floor

    def offset_for(self, kill_rule: Kill_Rule) -> int:
        """Return the argument shift that turns h into the harmonic function for ``kill_rule``.

        A walk killed on ``x + S <= 0`` is one killed on ``x - 1 + S < 0``, so switching
        rules moves the argument by one on top of ``h_shift``.
        """
        return (
            self.h_shift
            + int(self.kill_rule is Kill_Rule.ON_NONPOSITIVE)
            - int(kill_rule is Kill_Rule.ON_NONPOSITIVE)
        )
