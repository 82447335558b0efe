"""Persistence helpers for run configurations, pmf files and reports."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from models.errors import ConfigInvalid, InvalidPMF
from models.lattice import LatticePMF, Walk_Kind, WalkModel
from models.params import SCHEMA_VERSION, ModelSpec, PMFSource, RunConfig

M = TypeVar("M", bound=BaseModel)

# pre-versioned configs named the restart law after the chain
_LEGACY_RESTART_KEYS = ("gamma", "eta")


def dict_to_config(dic: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
    """Coerce a config dictionary into a RunConfig, migrating and resolving pmf paths.

    Args;
        dic: Parsed JSON.
        base_dir: Directory relative pmf paths are resolved against.

    Returns;
        The validated config.

    Raises;
        ConfigInvalid: If the dictionary does not validate.
    """
    v = int(dic.get("version", 0))
    if v != SCHEMA_VERSION:
        dic = _migrate(dic, v)
    if base_dir is not None:
        dic = _resolve_paths(dic, base_dir)
    try:
        return RunConfig.model_validate(dic)
    except ValidationError as exc:
        raise ConfigInvalid(str(exc)) from exc


def read_pmf(path: Path) -> LatticePMF:
    """Read a pmf text file (``value probability`` per line)."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidPMF(f"Cannot read pmf file {path}: {exc}") from exc
    return LatticePMF.parse(text)


def write_pmf(pmf: LatticePMF, path: Path, exact: bool = False) -> Path:
    path.write_text(pmf.to_text(exact=exact), encoding="utf-8")
    return path


def to_pmf(source: PMFSource) -> LatticePMF:
    if isinstance(source, Path):
        return read_pmf(source)
    return LatticePMF.from_mapping(source)


def build_model(spec: ModelSpec) -> WalkModel:
    """Turn the laws of a config into a validated walk model."""
    xi = to_pmf(spec.xi)
    restart = to_pmf(spec.restart)
    if spec.kind is Walk_Kind.Y:
        return WalkModel.reflected(xi, restart)
    assert spec.xi_prime is not None
    return WalkModel.perturbed(xi, to_pmf(spec.xi_prime), restart)


class IO:
    """Read/write configs and reports on disk."""

    @staticmethod
    def load_config(path: Path) -> RunConfig:
        """Load a config, resolving pmf paths against its directory.

        Raises;
            ConfigInvalid: If the file is missing, is not JSON or does not validate.
        """
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"Cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigInvalid(f"Config {path} must hold a JSON object")
        return dict_to_config(raw, path.parent)

    @staticmethod
    def save_config(config: RunConfig, path: Path) -> Path:
        return IO.save_json(config, path)

    @staticmethod
    def save_json(model: BaseModel, path: Path) -> Path:
        """Write any model as indented JSON."""
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=4, exclude_none=True) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def load_json(path: Path, kind: type[M]) -> M:
        return kind.model_validate_json(path.read_text(encoding="utf-8"))


def _migrate(data: dict[str, Any], from_version: int) -> dict[str, Any]:
    dic = dict(data)
    if from_version < 1 and isinstance(dic.get("model"), dict):
        model = dict(dic["model"])
        for key in _LEGACY_RESTART_KEYS:
            if key in model and "restart" not in model:
                model["restart"] = model.pop(key)
        dic["model"] = model
    dic["version"] = SCHEMA_VERSION
    return dic


def _resolve_paths(data: dict[str, Any], base_dir: Path) -> dict[str, Any]:
    model = data.get("model")
    if not isinstance(model, dict):
        return data
    resolved = dict(model)
    for key in ("xi", "xi_prime", "restart"):
        value = resolved.get(key)
        if isinstance(value, str):
            path = Path(value)
            resolved[key] = str(path if path.is_absolute() else base_dir / path)
    return {**data, "model": resolved}
