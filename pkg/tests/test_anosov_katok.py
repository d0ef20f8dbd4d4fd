from __future__ import annotations

import dataclasses
import logging
import math
from typing import TYPE_CHECKING

import numpy as np
import pytest
from mpmath import mp, mpf

from qpcalc.anosov_katok import (
    RECONSTRUCTION_TOL,
    AkBuildCalc,
    AkState,
    TrigPoly,
    ak_build,
    ak_goodness_report,
    ak_schedule,
    ak_step,
)
from qpcalc.base import PrecisionExhaustedError
from qpcalc.cli import ak_threshold
from qpcalc.cocycle import QpCocycle, rotation_number
from qpcalc.linalg2 import Mat2, exp2, su11_algebra
from qpcalc.subordinacy import profile
from qpcalc.utils import get_named_frequency

if TYPE_CHECKING:
    from qpcalc.anosov_katok import AkBuild
    from qpcalc.arithmetic import Frequency

DELTA, H, H_PRIME = 2.0, 0.2, 0.1


@pytest.fixture(scope="module")
def two_stage(golden: Frequency) -> AkBuild:
    return ak_build(golden, DELTA, H, H_PRIME, 2)


def test_trig_poly() -> None:
    with mp.workprec(128):
        h2 = TrigPoly.h_matrix(2)
        product = h2 @ TrigPoly.h_matrix(-2)
        th = mpf("0.3")
        assert (product.evaluate(th) - Mat2.identity()).max_abs() < mpf(2) ** -100
        a = mpf("0.61")
        poly = TrigPoly({0: Mat2.identity(), 2: Mat2.diag(1, 2), -2: Mat2.diag(3, 0)})
        assert (poly.shifted(a).evaluate(th) - poly.evaluate(th + a)).max_abs() < mpf(2) ** -100
        p = poly.evaluate(th)
        assert (poly.adjugate().evaluate(th) @ p - Mat2.identity() * p.det()).max_abs() < mpf(2) ** -100
        assert float(poly.norm()) == pytest.approx(1 + 2 + 3)
        assert float(poly.norm(0.1)) == pytest.approx(1 + 5 * math.exp(math.pi * 2 * 0.1))

        trimmed, dropped = TrigPoly({0: Mat2.identity(), 2: Mat2.identity() * mpf("1e-30")}).trimmed()
        assert set(trimmed.modes) == {0}
        assert float(dropped) == pytest.approx(1e-30)

        series = poly.to_fourier_series()
        assert series.evaluate(0.3).shape == (2, 2)
        with pytest.raises(ValueError, match="even"):
            TrigPoly.h_matrix(1).to_fourier_series()


def test_schedule(golden: Frequency, caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING, logger="qpcalc.anosov_katok"):
        sched = ak_schedule(golden, DELTA, H, H_PRIME, 2)
    # k = 4 is the first k with (k alpha) mod 2 + e^{-2k} in [0, 1/2).
    assert sched.ks == [0, 4]
    assert sched.stages[0].lam == 0
    assert float(sched.stages[1].lam) == pytest.approx(math.exp(-2 * math.pi * H * 4))
    assert float(sched.stages[1].gap) == pytest.approx(math.exp(-DELTA * 4), rel=1e-12)
    assert float(sched.stages[1].t) == pytest.approx(math.hypot(math.exp(-2 * math.pi * H * 4), math.exp(-8.0)))
    assert sched.summability() == pytest.approx(math.exp(-0.9 * 2 * math.pi * (H - H_PRIME) * 4))
    # 2 pi theta is far above eps / 4 for this coarse schedule.
    assert sched.near_identity > sched.eps_budget / 4
    assert "near-identity" in caplog.text
    d = sched.as_dict()
    assert d["precision_bits"] == 256
    assert len(d["stages"]) == 2


def test_schedule_validation(golden: Frequency) -> None:
    with pytest.raises(ValueError, match="2 pi h"):
        ak_schedule(golden, 1.0, H, H_PRIME, 2)
    with pytest.raises(ValueError, match="2 pi h"):
        ak_schedule(golden, DELTA, H, 0.3, 2)
    with pytest.raises(ValueError, match="n_stages=0"):
        ak_schedule(golden, DELTA, H, H_PRIME, 0)
    # The second engineered resonance needs e^{-2 k} with k in the tens of thousands.
    with pytest.raises(PrecisionExhaustedError, match="depth"):
        ak_schedule(golden, DELTA, H, H_PRIME, 3)


def test_step(golden: Frequency) -> None:
    sched = ak_schedule(golden, DELTA, H, H_PRIME, 2)
    state = ak_step(AkState.initial(sched), sched, n_check=64)
    assert state.stage == 1
    assert state.degree == 4
    (entry,) = state.ledger
    assert entry.reconstruction_residual <= RECONSTRUCTION_TOL
    assert entry.d_norm2_in_range
    assert entry.as_dict()["stage"] == 0
    with pytest.raises(ValueError, match="last one"):
        ak_step(state, sched)


def test_build(two_stage: AkBuild) -> None:
    diag = two_stage.diagnostics
    assert diag["ks"] == [0, 4]
    assert diag["degree"] == 4
    assert diag["det_defect"] < 1e-20
    assert not diag["near_identity_ok"]
    assert diag["rotation_expected"] == pytest.approx(float(two_stage.schedule.theta % 1))
    assert all(e["reconstruction_residual"] <= RECONSTRUCTION_TOL for e in diag["ledger"])
    # A_inf = A_{S-1}(theta), so the last normal-form residual vanishes.
    assert diag["almost_reducibility_residuals"][-1] < 1e-15
    assert two_stage.final.stage == 1
    assert two_stage.a_infinity.det_defect() < 1e-12


def test_build_budget(golden: Frequency) -> None:
    with pytest.raises(ValueError, match="Summability budget"):
        ak_build(golden, DELTA, H, H_PRIME, 2, eps_budget=0.1)


def test_rotation_number_of_limit(two_stage: AkBuild) -> None:
    rho = rotation_number(two_stage.a_infinity, 20_000).value
    expected = two_stage.diagnostics["rotation_expected"]
    assert min(abs(rho - expected), 1 - abs(rho - expected)) <= 1e-3


def test_goodness_report(two_stage: AkBuild) -> None:
    report = ak_goodness_report(two_stage)
    (row,) = report.rows
    assert row.k == 4
    assert row.degree == 4
    # The gap is engineered to e^{-delta k} exactly.
    assert row.eta_hat == pytest.approx(DELTA, rel=1e-9)
    assert row.zeta > 0
    assert row.b_bound_ok
    # nu and 2 rho are read off the constant recovered from the built cocycle.
    assert float(row.two_rho) == pytest.approx(float(two_stage.schedule.stages[1].gap), rel=1e-12)
    assert row.mismatch <= 1e-40
    assert report.as_dict()["rows"][0]["schedule_mismatch"] == row.mismatch
    assert report.tol == pytest.approx(0.1 * DELTA)
    prof = report.eta_profile(1, two_stage.schedule)
    assert prof.n == 4
    assert math.isinf(prof.N)
    assert prof.h == pytest.approx(2 * math.pi * H)
    assert report.to_json().startswith("{")


def test_goodness_report_reads_the_built_state(two_stage: AkBuild) -> None:
    # Swap the stage-1 constant for one with twice the gap; the report follows the state, not the schedule.
    st = two_stage.schedule.stages[1]
    with mp.workprec(two_stage.schedule.alpha.precision_bits):
        gap = 2 * st.gap
        a = exp2(su11_algebra(mp.pi * mp.sqrt(st.lam**2 + gap**2), 1j * mp.pi * st.lam))
    state = dataclasses.replace(
        two_stage.states[1], a_bar=a, b_bar=TrigPoly.constant(Mat2.identity()), cocycle=TrigPoly.constant(a)
    )
    tampered = dataclasses.replace(two_stage, states=(two_stage.states[0], state))
    (row,) = ak_goodness_report(tampered).rows
    assert float(row.two_rho) == pytest.approx(2 * float(st.gap), rel=1e-12)
    assert row.mismatch == pytest.approx(1.0, rel=1e-6)


def test_detp_window_at_resonance(two_stage: AkBuild) -> None:
    # det P climbs faster than k^2 up to k ~ e^{eta_hat n}.
    prof_eta = ak_goodness_report(two_stage).eta_profile(1, two_stage.schedule)
    peak = prof_eta.eta_hat * prof_eta.n
    prof = profile(two_stage.a_infinity, 0.0, int(math.ceil(math.exp(peak + 0.5))))
    assert prof.slope(math.exp(peak - 2), math.exp(peak)) >= ak_threshold(H, DELTA)


def test_calc(golden: Frequency) -> None:
    seed = QpCocycle.constant(golden, np.eye(2))
    calc = AkBuildCalc(n_check=32)
    res = calc.calc(seed)
    assert {*res} == {"ak_build", "ak_schedule", "ak_goodness", "a_infinity"}
    assert res["ak_schedule"]["delta"] == DELTA
    assert res["a_infinity"].band == pytest.approx(H_PRIME)
    (again,) = calc.calc_many([seed])
    assert again["ak_schedule"] == res["ak_schedule"]


@pytest.mark.slow
def test_three_stage_exponents() -> None:
    alpha = get_named_frequency("golden", 2**17)
    build = ak_build(alpha, DELTA, H, H_PRIME, 3, n_check=64)
    assert len(build.schedule.ks) == 3
    assert all(e["reconstruction_residual"] <= RECONSTRUCTION_TOL for e in build.diagnostics["ledger"])
    last = ak_goodness_report(build).rows[-1]
    assert last.zeta == pytest.approx(2 * math.pi * H, rel=0.1)
    assert last.eta_hat == pytest.approx(DELTA, rel=0.1)
    rho = rotation_number(build.a_infinity, 20_000).value
    expected = build.diagnostics["rotation_expected"]
    assert min(abs(rho - expected), 1 - abs(rho - expected)) <= 1e-3
