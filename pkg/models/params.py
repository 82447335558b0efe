"""Run configuration: model laws, tasks, grids and numerical settings."""

from __future__ import annotations

import hashlib
import json
from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import Field, field_validator, model_validator

from models.base import Model
from models.lattice import LatticePMF, Walk_Kind

SCHEMA_VERSION: int = 1
HASH_EXCLUDE: set[str] = {"threads", "out_dir"}
CONVENTION_PATTERN: str = r"^(auto|fixed:(on_negative|on_nonpositive)(:[01])?)$"

PMFSource = dict[int, float] | Path


class Task_Name(StrEnum):
    """Pipeline stages, in dependency order."""

    CONSTANTS = "constants"
    DP = "dp"
    SIMULATE = "simulate"
    VERIFY = "verify"
    ALL = "all"

    @property
    def stochastic(self) -> bool:
        return self in {Task_Name.SIMULATE, Task_Name.VERIFY, Task_Name.ALL}


TASK_ORDER: tuple[Task_Name, ...] = (Task_Name.CONSTANTS, Task_Name.DP, Task_Name.SIMULATE, Task_Name.VERIFY)


class Formats(StrEnum):
    """Chart file formats."""

    svg = "svg"
    png = "png"


class ModelSpec(Model):
    """Step and restart laws, inline as ``value -> probability`` maps or as pmf text files."""

    kind: Walk_Kind
    xi: PMFSource
    xi_prime: PMFSource | None = None
    restart: PMFSource

    @model_validator(mode="after")
    def _check_sides(self) -> ModelSpec:
        if self.kind is Walk_Kind.X and self.xi_prime is None:
            raise ValueError("kind X needs xi_prime")
        if self.kind is Walk_Kind.Y and self.xi_prime is not None:
            raise ValueError("kind Y takes no xi_prime")
        return self

    def files(self) -> list[Path]:
        return [src for src in (self.xi, self.xi_prime, self.restart) if isinstance(src, Path)]

    def canonical_laws(self) -> dict[str, dict[str, float] | None]:
        """Return every law as a ``value -> probability`` map, reading pmf files for their atoms."""
        laws: dict[str, dict[str, float] | None] = {}
        for key in ("xi", "xi_prime", "restart"):
            source = getattr(self, key)
            if isinstance(source, Path):
                pmf = LatticePMF.parse(source.read_text(encoding="utf-8"))
                laws[key] = {str(value): prob for value, prob in pmf.atoms}
            elif source is not None:
                laws[key] = {str(value): float(prob) for value, prob in sorted(source.items())}
            else:
                laws[key] = None
        return laws


class Grids(Model):
    """Grids for the ratio checks, the Monte Carlo checks and the tightness diagnostics."""

    x_grid: list[int] = Field(default_factory=lambda: [0, 1, 2, 5])
    y_grid: list[int] = Field(default_factory=lambda: [1, 2, 3])
    n_grid: list[int] = Field(default_factory=lambda: [512, 1024, 2048, 4096])
    local_x: int = 1
    harmonic_x_max: int = 50
    t: float = Field(default=0.5, ge=0.0, le=1.0)
    s: float = Field(default=0.25, gt=0.0, lt=1.0)
    t_joint: float = Field(default=0.75, gt=0.0, le=1.0)
    bins: int = Field(default=8, ge=4)
    tightness_n: list[int] = Field(default_factory=lambda: [256, 512, 1024, 2048])
    delta_grid: list[float] = Field(default_factory=lambda: [0.0, 0.01, 0.05, 0.1])

    @field_validator("x_grid", "y_grid", "n_grid", "tightness_n", "delta_grid")
    @classmethod
    def _nonempty(cls, value: list[Any]) -> list[Any]:
        if not value:
            raise ValueError("grid must not be empty")
        return sorted(value)

    @field_validator("x_grid", "y_grid")
    @classmethod
    def _nonnegative(cls, value: list[int]) -> list[int]:
        if min(value) < 0:
            raise ValueError("space grid entries must be non-negative")
        return value

    @field_validator("n_grid", "tightness_n")
    @classmethod
    def _positive(cls, value: list[int]) -> list[int]:
        if min(value) < 2:
            raise ValueError("time grid entries must be at least 2")
        return value

    @model_validator(mode="after")
    def _check_times(self) -> Grids:
        if not self.s < self.t_joint:
            raise ValueError(f"joint times need s < t, got s={self.s}, t={self.t_joint}")
        return self


class SamplingSettings(Model):
    """Monte Carlo sizes."""

    n: int = Field(default=2048, ge=2)
    paths: int = Field(default=100_000, ge=1)
    chunk_size: int = Field(default=10_000, ge=1)
    tightness_paths: int = Field(default=1000, ge=1)
    dump_paths: int = Field(default=0, ge=0)


class OracleSettings(Model):
    """Truncation and caps for the exact computations."""

    spitzer_terms: int = Field(default=2048, ge=16)
    ladder_horizon: int = Field(default=20_000, ge=1)
    x_max: int = Field(default=512, ge=1)
    max_remainder: float = Field(default=0.1, gt=0.0, lt=1.0)
    state_cap: int = Field(default=4_000_000, ge=1)


class RunConfig(Model):
    """Everything a run needs; serialised as JSON."""

    version: int = Field(default=SCHEMA_VERSION)
    model: ModelSpec
    tasks: list[Task_Name] = Field(default_factory=lambda: [Task_Name.ALL])
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    threads: int = Field(default=1, ge=1)
    out_dir: Path = Path("out")
    convention: str = Field(default="auto", pattern=CONVENTION_PATTERN)
    grids: Grids = Field(default_factory=Grids)
    sampling: SamplingSettings = Field(default_factory=SamplingSettings)
    oracle: OracleSettings = Field(default_factory=OracleSettings)
    charts: list[Formats] = Field(default_factory=lambda: [Formats.svg])

    @model_validator(mode="after")
    def _check_run(self) -> RunConfig:
        if not self.tasks:
            raise ValueError("task list must not be empty")
        if self.seed is None and any(task.stochastic for task in self.tasks):
            raise ValueError("a seed is required for stochastic tasks")
        for path in self.model.files():
            if not path.is_file():
                raise ValueError(f"referenced file does not exist: {path}")
        return self

    def expanded_tasks(self) -> list[Task_Name]:
        """Return the requested tasks in dependency order, with ``all`` expanded."""
        wanted = set(TASK_ORDER) if Task_Name.ALL in self.tasks else set(self.tasks)
        return [task for task in TASK_ORDER if task in wanted]

    def hash_payload(self) -> dict[str, Any]:
        """The canonical dump, with pmf files replaced by the atoms they hold."""
        payload = self.model_dump(mode="json", exclude=HASH_EXCLUDE)
        payload["model"].update(self.model.canonical_laws())
        return payload

    def config_hash(self) -> str:
        """Return the sha256 of the canonical JSON of every semantically meaningful field."""
        canonical = json.dumps(self.hash_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
