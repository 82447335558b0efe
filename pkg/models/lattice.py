"""Finite-support integer laws: pmfs, validated step specs, walk models and sampling."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction
from functools import reduce

import numpy as np

from models.errors import (
    DegenerateRestart,
    InvalidPMF,
    NegativeRestartForY,
    NotCentered,
    Periodic,
    ResourceLimit,
    WrongModelKind,
)
from models.streams import RandomStream

PROB_TOL: float = 1e-12
PRUNE_BELOW: float = 1e-300
MAX_SUPPORT: int = 10_000_000

ExactPMF = dict[int, Fraction]


class Step_Role(StrEnum):
    """What a law is used for inside a walk model."""

    STEP = "step"
    RESTART_Y = "restart_Y"
    RESTART_X = "restart_X"


class Walk_Kind(StrEnum):
    """Two-sided perturbed walk X, or one-sided reflected chain Y."""

    X = "X"
    Y = "Y"


@dataclass(frozen=True, slots=True, eq=False)
class LatticePMF:
    """A probability mass function with finite support on the integers.

    ``complete`` is False for sub-probability laws such as a truncated ladder-height law.
    """

    values: np.ndarray
    probs: np.ndarray
    complete: bool = True

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.int64).reshape(-1)
        probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise InvalidPMF("A pmf needs at least one atom")
        if values.size != probs.size:
            raise InvalidPMF(f"Got {values.size} values but {probs.size} probabilities")
        if values.size > 1 and np.any(np.diff(values) <= 0):
            raise InvalidPMF("Values must be strictly increasing")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InvalidPMF("Probabilities must be finite and non-negative")
        total = math.fsum(probs)
        if self.complete and abs(total - 1.0) > PROB_TOL:
            raise InvalidPMF(f"Probabilities sum to {total!r}, not 1")
        if not self.complete and total > 1.0 + PROB_TOL:
            raise InvalidPMF(f"Sub-probability mass {total!r} exceeds 1")
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    # ---- constructors ----
    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float], *, complete: bool = True) -> LatticePMF:
        """Build a pmf from a ``value -> probability`` mapping.

        Args;
            mapping: Atoms keyed by integer value.
            complete: Whether the mass must sum to one.

        Returns;
            The pmf, sorted by value.
        """
        if not mapping:
            raise InvalidPMF("A pmf needs at least one atom")
        keys = sorted(int(k) for k in mapping)
        if len(set(keys)) != len(keys):
            raise InvalidPMF("Duplicate values")
        lookup = {int(k): float(v) for k, v in mapping.items()}
        return cls(np.array(keys), np.array([lookup[k] for k in keys]), complete=complete)

    @classmethod
    def point(cls, value: int) -> LatticePMF:
        """Return the point mass at ``value``."""
        return cls(np.array([value]), np.array([1.0]))

    @classmethod
    def from_dense(cls, offset: int, dense: np.ndarray, *, complete: bool = True) -> LatticePMF:
        """Build a pmf from a dense array whose index 0 sits at ``offset``.

        Atoms at or below the pruning floor are dropped.
        """
        dense = np.asarray(dense, dtype=np.float64)
        keep = np.flatnonzero(dense > PRUNE_BELOW)
        if keep.size == 0:
            raise InvalidPMF("No atom above the pruning floor")
        probs = dense[keep]
        if complete:
            # float drift from long convolution chains
            probs = probs / math.fsum(probs)
        return cls(keep + offset, probs, complete=complete)

    @classmethod
    def from_exact(cls, exact: ExactPMF) -> LatticePMF:
        """Convert an exact rational pmf to floats."""
        return cls.from_mapping({k: float(v) for k, v in exact.items()})

    @classmethod
    def parse(cls, text: str) -> LatticePMF:
        """Parse the ``value<TAB>probability`` text format.

        Probabilities may be decimals or fractions such as ``1/3``. Blank lines and
        ``#`` comments are ignored.
        """
        atoms: dict[int, Fraction] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidPMF(f"Line {lineno}: expected 'value probability', got {raw!r}")
            try:
                value = int(parts[0])
                prob = Fraction(parts[1])
            except ValueError as exc:
                raise InvalidPMF(f"Line {lineno}: {exc}") from exc
            if value in atoms:
                raise InvalidPMF(f"Line {lineno}: duplicate value {value}")
            atoms[value] = prob
        if sum(atoms.values(), Fraction(0)) == 1:
            return cls.from_exact(atoms)
        return cls.from_mapping({k: float(v) for k, v in atoms.items()})

    def to_text(self, exact: bool = False) -> str:
        """Write the format :meth:`parse` reads, with fractions when ``exact``."""
        if exact:
            lines = [f"{v}\t{p}" for v, p in self.to_exact().items()]
        else:
            lines = [f"{v}\t{p!r}" for v, p in self.atoms]
        return "\n".join(lines) + "\n"

    # ---- views ----
    @property
    def mass(self) -> float:
        return math.fsum(self.probs)

    @property
    def min_value(self) -> int:
        return int(self.values[0])

    @property
    def max_value(self) -> int:
        return int(self.values[-1])

    @property
    def atoms(self) -> list[tuple[int, float]]:
        return [(int(v), float(p)) for v, p in zip(self.values, self.probs)]

    def as_dict(self) -> dict[int, float]:
        return dict(self.atoms)

    def dense(self) -> tuple[int, np.ndarray]:
        """Return ``(offset, array)`` with array[i] = P[value = offset + i]."""
        out = np.zeros(self.max_value - self.min_value + 1)
        out[self.values - self.min_value] = self.probs
        return self.min_value, out

    def prob(self, value: int) -> float:
        idx = np.searchsorted(self.values, value)
        if idx < self.values.size and self.values[idx] == value:
            return float(self.probs[idx])
        return 0.0

    def cdf(self, value: float) -> float:
        """Return P[X <= value]."""
        return math.fsum(self.probs[self.values <= value])

    def tail(self, value: float) -> float:
        """Return P[X >= value]."""
        return math.fsum(self.probs[self.values >= value])

    def negated(self) -> LatticePMF:
        return LatticePMF(-self.values[::-1], self.probs[::-1].copy(), complete=self.complete)

    def shifted(self, by: int) -> LatticePMF:
        return LatticePMF(self.values + by, self.probs.copy(), complete=self.complete)

    def to_exact(self, max_denominator: int = 1_000_000) -> ExactPMF:
        """Return the nearest rational pmf with bounded denominators."""
        return {int(v): Fraction(float(p)).limit_denominator(max_denominator) for v, p in self.atoms}

    def __repr__(self) -> str:
        body = ", ".join(f"{v}: {p:.6g}" for v, p in self.atoms[:8])
        more = ", ..." if self.values.size > 8 else ""
        return f"LatticePMF({{{body}{more}}})"


# ---- arithmetic ----
def moments(pmf: LatticePMF) -> tuple[float, float]:
    """Return the mean and variance of a pmf.

    Args;
        pmf: The law to summarise.

    Returns;
        ``(mean, variance)`` as exact finite sums over the support.
    """
    values = pmf.values.astype(np.float64)
    mean = math.fsum(values * pmf.probs)
    variance = math.fsum((values - mean) ** 2 * pmf.probs)
    return mean, variance


def convolve(a: LatticePMF, b: LatticePMF) -> LatticePMF:
    """Return the law of the sum of independent draws from ``a`` and ``b``."""
    off_a, dense_a = a.dense()
    off_b, dense_b = b.dense()
    return LatticePMF.from_dense(off_a + off_b, np.convolve(dense_a, dense_b), complete=a.complete and b.complete)


def nth_convolution(p: LatticePMF, k: int, *, max_support: int = MAX_SUPPORT) -> LatticePMF:
    """Return the law of ``S(k)``, the sum of ``k`` independent draws from ``p``.

    Binary exponentiation over pmfs; atoms below the pruning floor are dropped.

    Raises;
        ValueError: If ``k`` is negative.
        ResourceLimit: If the support of ``S(k)`` would exceed ``max_support``.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k == 0:
        return LatticePMF.point(0)
    width = k * (p.max_value - p.min_value) + 1
    if width > max_support:
        raise ResourceLimit(f"Support of S({k}) would hold {width} atoms (cap {max_support})")
    result: LatticePMF | None = None
    power = p
    while k:
        if k & 1:
            result = power if result is None else convolve(result, power)
        k >>= 1
        if k:
            power = convolve(power, power)
    assert result is not None
    return result


def exact_convolve(a: Mapping[int, Fraction], b: Mapping[int, Fraction]) -> ExactPMF:
    """Rational convolution for small golden fixtures."""
    out: ExactPMF = {}
    for va, pa in a.items():
        for vb, pb in b.items():
            out[va + vb] = out.get(va + vb, Fraction(0)) + pa * pb
    return {v: out[v] for v in sorted(out) if out[v]}


def exact_nth_convolution(p: Mapping[int, Fraction], k: int) -> ExactPMF:
    result: ExactPMF = {0: Fraction(1)}
    for _ in range(k):
        result = exact_convolve(result, p)
    return result


def span_gcd(values: Iterable[int]) -> int:
    """Return gcd{b - a : a, b in support}; 0 for a single atom."""
    vals = [int(v) for v in values]
    return reduce(math.gcd, (abs(v - vals[0]) for v in vals[1:]), 0)


# ---- alias sampling ----
def _alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    size = probs.size
    scaled = probs * size / probs.sum()
    threshold = np.ones(size)
    alias = np.arange(size)
    small = [i for i in range(size) if scaled[i] < 1.0]
    large = [i for i in range(size) if scaled[i] >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        threshold[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = scaled[hi] + scaled[lo] - 1.0
        (small if scaled[hi] < 1.0 else large).append(hi)
    return threshold, alias


@dataclass(frozen=True, slots=True, eq=False)
class StepSpec:
    """A pmf with its moments, span and a prebuilt alias table."""

    pmf: LatticePMF
    role: Step_Role = Step_Role.STEP
    mean: float = field(init=False)
    variance: float = field(init=False)
    span_gcd: int = field(init=False)
    _threshold: np.ndarray = field(init=False, repr=False)
    _alias: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mean, variance = moments(self.pmf)
        threshold, alias = _alias_table(self.pmf.probs)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)
        object.__setattr__(self, "span_gcd", span_gcd(self.pmf.values))
        object.__setattr__(self, "_threshold", threshold)
        object.__setattr__(self, "_alias", alias)

    @classmethod
    def describe(cls, pmf: LatticePMF, role: Step_Role = Step_Role.STEP) -> StepSpec:
        """Wrap a pmf without checking the role's hypotheses.

        Use for fixtures and sign-flipped laws; walk models should go through
        :func:`validate_step_spec`.
        """
        return cls(pmf, role)

    @property
    def min_step(self) -> int:
        return self.pmf.min_value

    @property
    def max_step(self) -> int:
        return self.pmf.max_value

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def negated(self) -> StepSpec:
        """Return the spec of ``-xi``; centring and span are preserved."""
        return StepSpec(self.pmf.negated(), self.role)


def validate_step_spec(pmf: LatticePMF, role: Step_Role | str = Step_Role.STEP) -> StepSpec:
    """Check a pmf against the hypotheses for its role.

    Args;
        pmf: The law to validate.
        role: ``step`` for the walk increments, ``restart_Y`` or ``restart_X`` for restart laws.

    Returns;
        The validated spec.

    Raises;
        InvalidPMF: If the pmf is a sub-probability law.
        NotCentered: If a step law has nonzero mean.
        Periodic: If a step law is not aperiodic.
        DegenerateRestart: If a restart law is the point mass at zero.
        NegativeRestartForY: If the reflected chain gets a restart law with negative atoms.
    """
    role = Step_Role(role)
    if not pmf.complete:
        raise InvalidPMF("Step and restart laws must carry total mass 1")
    spec = StepSpec(pmf, role)
    if role is Step_Role.STEP:
        scale = max(1.0, float(np.max(np.abs(pmf.values))))
        if abs(spec.mean) > PROB_TOL * scale:
            raise NotCentered(f"Step law has mean {spec.mean!r}")
        if spec.span_gcd != 1:
            raise Periodic(f"Step law has span gcd {spec.span_gcd}; an aperiodic law needs 1")
        return spec
    if role is Step_Role.RESTART_Y and pmf.min_value < 0:
        raise NegativeRestartForY(f"Restart law for Y has negative atom {pmf.min_value}")
    if pmf.prob(0) >= 1.0 - PROB_TOL:
        raise DegenerateRestart("Restart law is the point mass at 0")
    return spec


def sample_many(spec: StepSpec, stream: RandomStream, size: int) -> np.ndarray:
    """Draw ``size`` values using one uniform per draw."""
    uniforms = np.asarray(stream.uniform(size), dtype=np.float64)
    count = spec.pmf.values.size
    scaled = uniforms * count
    column = np.minimum(scaled.astype(np.int64), count - 1)
    keep = (scaled - column) < spec._threshold[column]
    picked = np.where(keep, column, spec._alias[column])
    return spec.pmf.values[picked]


def sample(spec: StepSpec, stream: RandomStream) -> int:
    """Draw one value from ``spec``."""
    return int(sample_many(spec, stream, 1)[0])


# ---- walk models ----
@dataclass(frozen=True, slots=True, eq=False)
class WalkModel:
    """A validated perturbed walk: steps on each side plus the restart law at zero."""

    kind: Walk_Kind
    xi: StepSpec
    restart: StepSpec
    xi_prime: StepSpec | None = None

    def __post_init__(self) -> None:
        if self.kind is Walk_Kind.X and self.xi_prime is None:
            raise WrongModelKind("The two-sided model needs a negative-side step law")
        if self.kind is Walk_Kind.Y and self.xi_prime is not None:
            raise WrongModelKind("The reflected model has no negative-side step law")
        expected = Step_Role.RESTART_X if self.kind is Walk_Kind.X else Step_Role.RESTART_Y
        if self.restart.role is not expected:
            raise WrongModelKind(f"Restart law validated for {self.restart.role}, model needs {expected}")

    @classmethod
    def reflected(cls, xi: LatticePMF, gamma: LatticePMF) -> WalkModel:
        """Build the one-sided chain Y from its step and restart laws."""
        return cls(Walk_Kind.Y, validate_step_spec(xi), validate_step_spec(gamma, Step_Role.RESTART_Y))

    @classmethod
    def perturbed(cls, xi: LatticePMF, xi_prime: LatticePMF, eta: LatticePMF) -> WalkModel:
        """Build the two-sided chain X from both step laws and the restart law."""
        return cls(
            Walk_Kind.X,
            validate_step_spec(xi),
            validate_step_spec(eta, Step_Role.RESTART_X),
            validate_step_spec(xi_prime),
        )

    @property
    def sigma(self) -> float:
        return self.xi.sigma

    @property
    def sigma_prime(self) -> float:
        return self.xi_prime.sigma if self.xi_prime is not None else self.xi.sigma

    def require(self, kind: Walk_Kind) -> None:
        if self.kind is not kind:
            raise WrongModelKind(f"Operation needs a model of kind {kind}, got {self.kind}")
