"""Counter-based random streams keyed by (seed, path of child indices)."""

from __future__ import annotations

from typing import Any

import numpy as np


class RandomStream:
    """A reproducible stream of random draws.

    The stream is keyed by the root seed and a tuple of child indices, so a chunk
    or path always sees the same draws no matter which worker runs it.
    """

    __slots__ = ("seed", "key", "_generator")

    def __init__(self, seed: int, key: tuple[int, ...] = ()) -> None:
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self._generator: np.random.Generator | None = None

    def __repr__(self) -> str:
        return f"RandomStream({self.identifier})"

    def __getstate__(self) -> dict[str, Any]:
        return {"seed": self.seed, "key": self.key}

    def __setstate__(self, state: dict[str, Any]) -> None:
        self.seed = state["seed"]
        self.key = state["key"]
        self._generator = None

    @property
    def identifier(self) -> str:
        """Return a printable id such as ``"7/3/12"``."""
        return "/".join(str(part) for part in (self.seed, *self.key))

    @property
    def generator(self) -> np.random.Generator:
        """Return the underlying generator, created on first use."""
        if self._generator is None:
            entropy = np.random.SeedSequence([self.seed, *self.key])
            self._generator = np.random.Generator(np.random.Philox(entropy))
        return self._generator

    def child(self, index: int) -> RandomStream:
        """Return the independent child stream at ``index``."""
        if index < 0:
            raise ValueError(f"Child index must be non-negative, got {index}")
        return RandomStream(self.seed, (*self.key, index))

    def uniform(self, size: int | None = None) -> np.ndarray | float:
        """Return uniforms on [0, 1)."""
        return self.generator.random(size)
