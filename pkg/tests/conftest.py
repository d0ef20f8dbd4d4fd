"""
This file defines commonly used test fixtures. These are meant to be reused in unit tests.
- Fixtures named after a frequency (golden, silver) return the Frequency at 256 bits.
- Fixtures prefixed with `free_` or `amo_` return a QpCocycle or its PotentialSpec.
- `amo_gap_edge` is the lower edge of the gap labelled k = 1 of the subcritical AMO; it is only built by slow tests.

Given that the fixtures are unlikely to be modified by the underlying code, the fixtures are set with a scope of
"session". Everything here is a frozen dataclass, so in-place modification is not possible anyway.
"""

from __future__ import annotations

import numpy as np
import pytest

from qpcalc.arithmetic import Frequency
from qpcalc.cocycle import PotentialSpec, QpCocycle
from qpcalc.ids import find_plateaus, ids_rotation_scan, locate_gap_edge
from qpcalc.utils import get_named_frequency, get_potential


@pytest.fixture(scope="session")
def golden() -> Frequency:
    """Golden mean frequency [0; 1, 1, 1, ...] at 256 bits."""
    return get_named_frequency("golden", 256)


@pytest.fixture(scope="session")
def silver() -> Frequency:
    """Silver mean frequency [0; 2, 2, 2, ...] at 256 bits."""
    return get_named_frequency("silver", 256)


@pytest.fixture(scope="session")
def free_potential() -> PotentialSpec:
    return get_potential("free")


@pytest.fixture(scope="session")
def amo_potential() -> PotentialSpec:
    """Subcritical almost Mathieu potential 2 * 0.5 cos(2 pi x)."""
    return get_potential("amo", coupling=0.5)


@pytest.fixture(scope="session")
def free_cocycle(golden: Frequency, free_potential: PotentialSpec) -> QpCocycle:
    return QpCocycle.schrodinger(golden, free_potential, 0.0)


@pytest.fixture(scope="session")
def amo_cocycle(golden: Frequency) -> QpCocycle:
    return QpCocycle.almost_mathieu(golden, 0.5, 0.0)


@pytest.fixture(scope="session")
def amo_gap_edge(golden: Frequency, amo_potential: PotentialSpec) -> float:
    es = np.linspace(-3.0, 3.0, 1201)
    values = ids_rotation_scan(amo_potential, golden, es, 20_000)
    a = float(golden)
    left, right, _ = next(p for p in find_plateaus(es, values) if abs(p[2] - a) < 1e-3)
    return locate_gap_edge(amo_potential, golden, 1, (left - 0.005, (left + right) / 2), 1e-10, n=400_000)
