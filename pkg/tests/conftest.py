"""Shared fixtures: small walks whose laws are known by hand."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from models.lattice import LatticePMF, StepSpec, WalkModel, validate_step_spec
from models.params import OracleSettings
from oracle.convention import BoundaryConvention

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

LAZY = {-1: 0.25, 0: 0.5, 1: 0.25}


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def lazy_pmf() -> LatticePMF:
    return LatticePMF.from_mapping(LAZY)


@pytest.fixture(scope="session")
def lazy(lazy_pmf: LatticePMF) -> StepSpec:
    return validate_step_spec(lazy_pmf)


@pytest.fixture(scope="session")
def asymmetric() -> StepSpec:
    """The centred law {-2: 1/3, +1: 2/3}; it has period 3 so only ``describe`` accepts it."""
    return StepSpec.describe(LatticePMF.from_exact({-2: Fraction(1, 3), 1: Fraction(2, 3)}))


@pytest.fixture(scope="session")
def skip_free_up() -> StepSpec:
    return validate_step_spec(LatticePMF.from_mapping({-2: 0.25, 0: 0.25, 1: 0.5}))


@pytest.fixture(scope="session")
def reflected_lazy(lazy_pmf: LatticePMF) -> WalkModel:
    """Y with lazy steps and the restart law gamma = 1."""
    return WalkModel.reflected(lazy_pmf, LatticePMF.point(1))


@pytest.fixture(scope="session")
def perturbed_symmetric(lazy_pmf: LatticePMF) -> WalkModel:
    """X with lazy steps on both sides and eta = +-1 with equal mass."""
    return WalkModel.perturbed(lazy_pmf, lazy_pmf, LatticePMF.from_mapping({-1: 0.5, 1: 0.5}))


@pytest.fixture(scope="session")
def perturbed_skew(lazy_pmf: LatticePMF) -> WalkModel:
    """X with lazy steps on both sides and eta in {+2, -1} with equal mass."""
    return WalkModel.perturbed(lazy_pmf, lazy_pmf, LatticePMF.from_mapping({-1: 0.5, 2: 0.5}))


@pytest.fixture(scope="session")
def nonpositive() -> BoundaryConvention:
    return BoundaryConvention.parse("on_nonpositive")


@pytest.fixture(scope="session")
def oracle_settings() -> OracleSettings:
    return OracleSettings(spitzer_terms=1024, ladder_horizon=4000, x_max=64)
