"""Run orchestration: build the model, run the requested tasks and write the manifest."""

from __future__ import annotations

import hashlib
import logging
from datetime import UTC, datetime
from pathlib import Path

from pydantic import Field, model_validator

from controllers.tasks import TASKS, RunContext
from disk.storage import IO, build_model
from models.base import Model, Verdict
from models.params import RunConfig, Task_Name
from models.version import get_app_version

logger = logging.getLogger(__name__)

MANIFEST_NAME: str = "manifest.json"


class OutputFile(Model):
    path: str  # relative to the output directory
    sha256: str
    size: int


class RunManifest(Model):
    """What a run produced, with checksums.

    Timestamps are the only fields that differ between two runs of the same config.
    """

    config_hash: str
    version: str
    seed: int | None = None
    started: datetime
    finished: datetime | None = None
    tasks: list[Task_Name]
    outputs: dict[Task_Name, list[OutputFile]] = Field(default_factory=dict)
    verdict: Verdict = Verdict.NA

    @model_validator(mode="after")
    def _check_times(self) -> RunManifest:
        if self.finished is not None and self.finished < self.started:
            raise ValueError("finished precedes started")
        return self

    def files(self) -> list[OutputFile]:
        return [entry for entries in self.outputs.values() for entry in entries]

    def checksums(self) -> dict[str, str]:
        return {entry.path: entry.sha256 for entry in self.files()}


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def describe_outputs(paths: list[Path], out_dir: Path) -> list[OutputFile]:
    """Checksum each written file, in a stable order."""
    entries = []
    for path in sorted(set(paths)):
        entries.append(
            OutputFile(path=path.relative_to(out_dir).as_posix(), sha256=sha256_file(path), size=path.stat().st_size)
        )
    return entries


def run(config: RunConfig, out_dir: Path | None = None) -> RunManifest:
    """Execute the configured tasks in dependency order and write ``manifest.json``.

    A failed check is recorded in the verdict; only broken inputs or numerics raise.

    Args;
        config: A validated run configuration.
        out_dir: Overrides ``config.out_dir``.

    Returns;
        The manifest, also written to the output directory.

    Raises;
        ConfigInvalid: If a law fails validation.
        ResourceLimit: If a DP exceeds its state cap.
        NumericalFailure: If an oracle routine cannot produce a trustworthy value.
    """
    out_dir = (out_dir or config.out_dir).resolve()
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = config.expanded_tasks()
    manifest = RunManifest(
        config_hash=config.config_hash(),
        version=get_app_version(),
        seed=config.seed,
        started=datetime.now(UTC),
        tasks=tasks,
    )
    ctx = RunContext(config=config, model=build_model(config.model), out_dir=out_dir)
    logger.info("Run %s: tasks %s into %s", manifest.config_hash[:12], ", ".join(tasks), out_dir)
    for task in tasks:
        logger.info("Task %s", task.value)
        TASKS[task](ctx)
        manifest.outputs = {**manifest.outputs, task: describe_outputs(ctx.outputs.get(task, []), out_dir)}
    if ctx.report is not None:
        manifest.verdict = ctx.report.verdict
    manifest.finished = datetime.now(UTC)
    IO.save_json(manifest, out_dir / MANIFEST_NAME)
    logger.info("Run finished with verdict %s", manifest.verdict.value)
    return manifest
