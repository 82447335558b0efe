"""Version stamp written into reports and manifests."""

from __future__ import annotations

import os
import subprocess
from functools import cache
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

VERSION_ENV: str = "SKEWALK_VERSION"
DIST_NAME: str = "skewalk"


@cache
def get_app_version() -> str:
    """Return the version stamped into reports and manifests.

    Looks at ``SKEWALK_VERSION`` first, then installed distribution metadata, then ``git describe`` of the
    checkout. A checkout with uncommitted changes is stamped ``-dirty`` so a report never claims a clean
    revision it did not come from.

    Returns;
        The version string, ``dev`` when nothing else is known.
    """
    env_version = os.getenv(VERSION_ENV, "").strip()
    if env_version:
        return env_version
    try:
        return version(DIST_NAME)
    except PackageNotFoundError:
        pass
    return _describe_checkout(Path(__file__).resolve()) or "dev"


def _describe_checkout(path: Path) -> str | None:
    root = next((parent for parent in path.parents if (parent / ".git").exists()), None)
    if root is None:
        return None
    try:
        described = subprocess.check_output(
            ["git", "describe", "--tags", "--always", "--dirty"], cwd=root, stderr=subprocess.DEVNULL, text=True
        )
    except (OSError, subprocess.CalledProcessError):
        return None
    return described.strip() or None
