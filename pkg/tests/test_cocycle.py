"""Tests for cocycles, iterates, Lyapunov exponents and rotation numbers."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from qpcalc.cocycle import (
    ConjugationRecord,
    FourierSeries,
    LyapunovCalc,
    PotentialSpec,
    QpCocycle,
    RotationCalc,
    UHCalc,
    conjugate,
    iterate,
    lyapunov,
    rotation_matrix,
    rotation_number,
    uh_probe,
)

if TYPE_CHECKING:
    from qpcalc.arithmetic import Frequency


def test_potential_spec(amo_potential: PotentialSpec) -> None:
    assert amo_potential.band == pytest.approx(math.log(2) / (2 * math.pi))
    assert amo_potential.evaluate(0.0) == pytest.approx(1.0)
    assert amo_potential.evaluate(np.array([0.25, 0.5])) == pytest.approx([0.0, -1.0], abs=1e-15)
    assert not amo_potential.is_constant
    assert PotentialSpec.free().is_constant
    assert PotentialSpec.from_json(amo_potential.to_json()) == amo_potential
    with pytest.raises(ValueError, match="coupling"):
        PotentialSpec.almost_mathieu(-1.0)


def test_schrodinger_cocycle(amo_cocycle: QpCocycle) -> None:
    m = amo_cocycle.evaluate(0.0)
    assert m == pytest.approx(np.array([[-1.0, -1.0], [1.0, 0.0]]))
    assert amo_cocycle.det_defect() < 1e-14
    assert amo_cocycle.energy == 0.0
    assert amo_cocycle.with_energy(1.5).evaluate(0.0)[0, 0] == pytest.approx(0.5)
    assert abs(float(amo_cocycle.evaluate_mp(0.25).a)) < 1e-30
    assert amo_cocycle.orbit(0.0, 5).shape == (5, 2, 2)


def test_constant_cocycle_has_no_energy(golden: Frequency) -> None:
    c = QpCocycle.constant(golden, np.eye(2))
    assert not c.is_schrodinger
    with pytest.raises(ValueError, match="energy"):
        _ = c.energy


def test_iterate_two_sided(amo_cocycle: QpCocycle) -> None:
    fwd = iterate(amo_cocycle, 0.3, 40)
    back = iterate(amo_cocycle, (0.3 + 40 * float(amo_cocycle.alpha)) % 1.0, -40)
    assert back.matrix() @ fwd.matrix() == pytest.approx(np.eye(2), abs=1e-8)
    assert np.linalg.det(fwd.matrix()) == pytest.approx(1.0, rel=1e-8)
    assert iterate(amo_cocycle, 0.1, 0).matrix() == pytest.approx(np.eye(2))


def test_lyapunov_free_outside_spectrum(golden: Frequency, free_potential: PotentialSpec) -> None:
    c = QpCocycle.schrodinger(golden, free_potential, 3.0)
    est = lyapunov(c, 2000)
    assert est.value == pytest.approx(math.acosh(1.5), abs=1e-3)
    assert est.fluctuation < 1e-2


def test_lyapunov_amo(amo_cocycle: QpCocycle) -> None:
    # Subcritical: L vanishes on the spectrum. N(0) = 1/2 is no gap label, so E = 0 is in it.
    assert lyapunov(amo_cocycle, 4000).value < 2e-2
    assert lyapunov(amo_cocycle.with_energy(4.0), 2000).value > 0.5
    with pytest.raises(ValueError, match="n=0"):
        lyapunov(amo_cocycle, 0)


@pytest.mark.parametrize(("energy", "expected"), [(0.0, 0.25), (1.0, math.acos(0.5) / (2 * math.pi)), (-3.0, 0.5)])
def test_rotation_number_free(free_cocycle: QpCocycle, energy: float, expected: float) -> None:
    est = rotation_number(free_cocycle.with_energy(energy), 20_000)
    assert est.value == pytest.approx(expected, abs=1e-3)
    assert est.error == pytest.approx(5e-5)


def test_rotation_number_constant_rotation(golden: Frequency) -> None:
    c = QpCocycle.constant(golden, rotation_matrix(2 * math.pi * 0.1))
    assert rotation_number(c, 1000).value == pytest.approx(0.1, abs=1e-3)


def test_conjugation_shifts_rotation(golden: Frequency) -> None:
    c = QpCocycle.constant(golden, rotation_matrix(2 * math.pi * 0.1))
    b = ConjugationRecord.rotation(2)
    assert not b.projective
    conj = conjugate(c, b)
    expected = (0.1 + b.rotation_shift(float(golden))) % 1.0
    assert rotation_number(conj, 2000).value == pytest.approx(expected, abs=2e-3)
    assert b.inverse().degree == -2
    assert ConjugationRecord.rotation(1).projective


def test_uh_probe(free_cocycle: QpCocycle) -> None:
    outside = uh_probe(free_cocycle.with_energy(3.0), 400)
    assert outside.uniformly_hyperbolic
    assert outside.margin == pytest.approx(math.acosh(1.5), rel=5e-2)
    inside = uh_probe(free_cocycle, 400)
    assert not inside.uniformly_hyperbolic
    assert inside.margin == 0.0


def test_fourier_series(golden: Frequency) -> None:
    series = FourierSeries({0: np.eye(2), 1: 0.5 * np.eye(2), -1: 0.5 * np.eye(2)}, band=0.2)
    vals = series.evaluate(np.array([0.0, 0.5]))
    assert vals[:, 0, 0] == pytest.approx([2.0, 0.0], abs=1e-14)
    assert np.isrealobj(vals)
    assert series.decay_constant() == pytest.approx(0.5 * math.exp(2 * math.pi * 0.2))
    back = FourierSeries.from_json(series.to_json())
    assert back.evaluate(np.array([0.3])) == pytest.approx(series.evaluate(np.array([0.3])))
    with pytest.raises(ValueError, match="at least one"):
        FourierSeries({})
    c = QpCocycle(golden, series)
    assert c.evaluate(0.0)[1, 1] == pytest.approx(2.0)


def test_calculators(golden: Frequency, free_potential: PotentialSpec) -> None:
    cocycles = [QpCocycle.schrodinger(golden, free_potential, e) for e in (-1.0, 0.0, 1.0, 3.0)]
    results = list(RotationCalc(n=5000).calc_many(cocycles))
    rhos = [r["rotation_number"] for r in results]
    assert rhos == sorted(rhos, reverse=True)
    assert rhos[-1] == pytest.approx(0.0, abs=1e-3)

    lyap = LyapunovCalc(n=1000).calc(cocycles[-1])
    assert {*lyap} == {"lyapunov", "lyapunov_raw", "lyapunov_fluctuation"}
    assert UHCalc(n=200).calc(cocycles[-1])["uniformly_hyperbolic"]
