"""Tests for the closed-form scaling laws and log-log fitting."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from qpcalc.arithmetic import resonances
from qpcalc.output import read_csv
from qpcalc.scaling import (
    EtaProfile,
    ScalingLaw,
    ak_f,
    amo_case,
    amo_f,
    dislocation_gap,
    eta_n,
    eta_plus,
    fit_loglog,
    fit_loglog_windows,
    general_f,
    holder_exponent,
    local_dimensions,
    psi,
    psi_increment,
    reducible_prediction,
    stratified_bound,
)

if TYPE_CHECKING:
    from pathlib import Path

    from qpcalc.arithmetic import Frequency


@st.composite
def resonance_windows(draw: st.DrawFn, count: int = 3, separation: float = 1.0) -> tuple[float, list[int], list[float]]:
    """(h, sizes, etas) with |k_{s+1}| > separation (2 eta / h - 1) |k_s| (1 + s), s >= 0.1, for resonant windows."""
    h = draw(st.floats(min_value=0.05, max_value=2.0))
    n = draw(st.integers(min_value=1, max_value=50))
    sizes, etas = [], []
    for _ in range(count):
        r = draw(st.one_of(st.floats(min_value=0.2, max_value=1.0), st.floats(min_value=1.01, max_value=6.0)))
        s = draw(st.floats(min_value=0.1, max_value=10.0))
        sizes.append(n)
        etas.append(r * h)
        n = math.ceil(n * max(separation * (2 * r - 1), 2.0) * (1 + s))
    return h, sizes, etas


@st.composite
def admissible_window(draw: st.DrawFn, ratio: float = 1.0) -> tuple[float, int, float, float]:
    """(h, n, N, eta) for a resonant window with hN >= ratio (2 eta - h) n (1 + s)."""
    h, sizes, etas = draw(resonance_windows(count=1))
    r = draw(st.floats(min_value=1.01, max_value=6.0))
    s = draw(st.floats(min_value=0.1, max_value=10.0))
    n = sizes[0]
    return h, n, float(math.ceil(n * ratio * (2 * r - 1) * (1 + s))), r * h


def test_general_f_branches() -> None:
    h, n, N, eta = 1.0, 10, 100.0, 2.0
    assert general_f(math.exp(-50.0), h, n, N, 0.5) == 1.0
    # Plateau value at the junction (2 eta - h) n.
    assert general_f(30.0, h, n, N, eta, log_scale=True) == pytest.approx(eta / (2 * eta - h))
    assert general_f(100.0, h, n, N, eta, log_scale=True) == pytest.approx(1.0)
    assert general_f(10.0, h, n, N, eta, log_scale=True) == pytest.approx(1.0)
    assert general_f(1e9, h, n, math.inf, eta, log_scale=True) == pytest.approx(1 - 10 / 1e9)
    assert general_f(1e9, h, n, math.inf, math.inf, log_scale=True) == pytest.approx(0.5 + 5 / 1e9)
    with pytest.raises(ValueError, match="outside the window"):
        general_f(5.0, h, n, N, eta, log_scale=True)
    with pytest.raises(ValueError, match="eps=0"):
        general_f(0.0, h, n, N, eta)


def test_psi_endpoints() -> None:
    h, n, N, eta = 1.0, 10, 100.0, 2.0
    assert psi(50.0, n, N, 0.8, h, log_scale=True) == 2.0
    assert psi(eta * n, n, N, eta, h, log_scale=True) == pytest.approx(4 - 2 * h / eta)
    assert psi(h * N, n, N, eta, h, log_scale=True) == pytest.approx(2.0, abs=1e-15)
    assert psi(math.exp(h * n), n, N, eta, h) == pytest.approx(2.0)
    with pytest.raises(ValueError, match="outside"):
        psi(101.0, n, N, eta, h, log_scale=True)


@settings(max_examples=200, deadline=None)
@given(admissible_window(), st.floats(min_value=0.0, max_value=1.0))
def test_f_is_two_over_psi(window: tuple[float, int, float, float], u: float) -> None:
    # eps = x^{-psi(x) / 2}, so ln(1/eps) = psi(x) ln x / 2.
    h, n, N, eta = window
    lx = h * n + u * (h * N - h * n)
    p = psi(lx, n, N, eta, h, log_scale=True)
    L = min(max(p * lx / 2, h * n), h * N)
    assert general_f(L, h, n, N, eta, log_scale=True) == pytest.approx(2 / p, rel=1e-12)


def test_eta_profile() -> None:
    prof = EtaProfile(n=10, N=1000, zeta=1.0, eta_hat=2.0, eta=2.0, gamma0=5.0, h=1.0)
    assert prof.k_range == (10.0, 1000.0)
    assert prof.discrepancy == 0.0
    # Both branches give 4 - 2 zeta / eta_hat at ln k = eta_hat n.
    assert eta_n(20.0, prof, log_scale=True) == pytest.approx(3.0)
    assert eta_n(np.nextafter(20.0, np.inf), prof, log_scale=True) == pytest.approx(3.0)
    assert eta_n(10.0, prof, log_scale=True) == pytest.approx(2.0)
    assert eta_plus(1000.0, prof, log_scale=True) == pytest.approx(2.0 + 20 / 1000)
    assert eta_plus(math.exp(10.0), prof) == pytest.approx(2.0)
    flat = EtaProfile(n=10, N=1000, zeta=math.inf, eta_hat=math.inf, eta=3.0, gamma0=5.0, h=1.0)
    assert eta_plus(500.0, flat, log_scale=True) == 2.0
    assert math.isnan(flat.discrepancy)
    with pytest.raises(ValueError, match="admissible range"):
        eta_n(5.0, prof, log_scale=True)
    with pytest.raises(ValueError, match="admissible range"):
        eta_plus(5.0, flat, log_scale=True)
    with pytest.raises(ValueError, match="n <= N"):
        EtaProfile(n=10, N=5, zeta=1.0, eta_hat=1.0, eta=1.0, gamma0=1.0, h=1.0)


def test_ak_law(tmp_path: Path) -> None:
    h, delta = 0.1, 1.0
    rate = 2 * math.pi * h
    law = ScalingLaw.for_anosov_katok([3, -30, 3000], h, delta)
    assert law.kind == "ak"
    assert law.h == pytest.approx(rate)
    assert [w.n for w in law.windows] == [3, 30, 3000]
    assert law.eps_star == pytest.approx(math.exp(-rate * 3))
    assert ak_f(rate * 30, h, delta, [3, 30, 3000], log_scale=True) == pytest.approx(1.0)
    plateau = ak_f((2 * delta - rate) * 30, h, delta, [3, 30, 3000], log_scale=True)
    assert plateau == pytest.approx(delta / (2 * delta - rate))
    expected = sorted([rate * k for k in (3, 30, 3000)] + [(2 * delta - rate) * k for k in (3, 30, 3000)])
    assert law.junctions() == pytest.approx(expected)
    # The last window stops at its junction since the next resonance is unknown.
    assert law.windows[-1].cover_hi == pytest.approx((2 * delta - rate) * 3000)
    assert law.evaluate((2 * delta - rate) * 3000 * (1 + 1e-13), log_scale=True).branch == "resonant"
    miss = law.evaluate(rate, log_scale=True)
    assert miss.branch == "uncovered"
    assert miss.window_id == -1
    assert math.isnan(miss.f)
    with pytest.raises(ValueError, match="not covered"):
        ak_f(rate, h, delta, [3, 30, 3000], log_scale=True)

    eps = np.exp(-np.linspace(rate * 3, rate * 300, 25))
    meta, header, rows = read_csv(law.to_csv(tmp_path / "predictor.csv", eps, meta={"delta": delta}))
    assert meta["law"] == "ak"
    assert meta["delta"] == "1.0"
    assert header == ["eps", "f_predicted", "window_id", "branch"]
    assert len(rows) == 25
    assert {row[3] for row in rows} <= {"resonant", "bridge"}
    assert law.as_dict()["windows"][0]["b"] == pytest.approx((delta - rate) * 3 / (rate * 30 - delta * 3))


def test_scaling_law_validation() -> None:
    with pytest.raises(ValueError, match="Unrecognized kind"):
        ScalingLaw("foo", 1.0, ())
    with pytest.raises(ValueError, match="positive"):
        ScalingLaw("general", 0.0, ())
    with pytest.raises(ValueError, match="one eta per"):
        ScalingLaw.from_sizes("general", 1.0, [1, 2], [1.0])


def test_amo_law_at_gap_label(golden: Frequency) -> None:
    with mp.workprec(golden.precision_bits):
        phase = (3 * golden.value) % 1
    res = resonances(golden, phase, 0.1, 100)
    assert res[-1].exact
    h = math.log(2)
    law = ScalingLaw.for_amo(0.5, res)
    assert math.isinf(law.windows[-1].N)
    # Exact hit: the gap-edge branch decays to 1/2.
    # Window [2h, 3h] stays resonant up to its end since the k = -2 junction lies beyond 3h.
    assert amo_f(h * 3, 0.5, res, log_scale=True) == pytest.approx(0.5 + 1 / 3)
    assert amo_f(4 * h, 0.5, res, log_scale=True) == pytest.approx(0.875)
    assert amo_f(30 * h, 0.5, res, log_scale=True) == pytest.approx(0.55)
    with pytest.raises(ValueError, match="0 < coupling < 1"):
        ScalingLaw.for_amo(1.5, res)


def test_dislocation_gap() -> None:
    law = ScalingLaw.from_sizes("general", 1.0, [10, 1000], [2.0, 1.5], last_N=math.inf)
    # Resonant branch is decreasing in ln(1/eps).
    assert dislocation_gap(law, 12.0, 0.2, log_scale=True) < 0
    assert dislocation_gap(law, 500.0, 0.0, log_scale=True) == 0.0
    with pytest.raises(ValueError, match="tau=1"):
        dislocation_gap(law, 12.0, 1.0, log_scale=True)


@settings(max_examples=300, deadline=None)
@given(resonance_windows(), st.booleans())
def test_laws_continuous_and_in_range(windows: tuple[float, list[int], list[float]], final_hit: bool) -> None:
    h, sizes, etas = windows
    if final_hit:
        etas[-1] = math.inf
    law = ScalingLaw.from_sizes("general", h, sizes, etas, last_N=math.inf)
    for i, (n, eta) in enumerate(zip(sizes, etas)):
        if h < eta < math.inf:
            j = (2 * eta - h) * n
            after = law.evaluate(np.nextafter(j, np.inf), log_scale=True)
            assert abs(after.f - law.evaluate(j, log_scale=True).f) <= 1e-12
        if i + 1 < len(sizes):
            N = sizes[i + 1]
            left = general_f(h * N, h, n, N, eta, log_scale=True)
            next_N = sizes[i + 2] if i + 2 < len(sizes) else math.inf
            right = general_f(h * N, h, N, next_N, etas[i + 1], log_scale=True)
            assert abs(left - right) <= 1e-12
    grid = np.geomspace(h * sizes[0], 4 * h * sizes[-1], 400)
    values = np.array([v.f for v in law.evaluate_many(grid, log_scale=True)])
    assert np.all(values > 0.5)
    assert np.all(values <= 1.0 + 1e-12)


def _check_psi_monotone(window: tuple[float, int, float, float]) -> None:
    h, n, N, eta = window
    lx = np.linspace(h * n, h * N, 200)
    g = np.array([psi(x, n, N, eta, h, log_scale=True) * x for x in lx])
    assert np.all(np.diff(g) > 0)
    assert psi(eta * n, n, N, eta, h, log_scale=True) == pytest.approx(
        psi(np.nextafter(eta * n, np.inf), n, N, eta, h, log_scale=True), abs=1e-12
    )


def _check_increment(window: tuple[float, int, float, float], u: float, d: float) -> None:
    h, n, N, eta = window
    d = min(d, N / n - 1)
    hi = h * N / (1 + d)
    lx = h * n + u * (hi - h * n)
    inc = psi_increment(lx, d, n, N, eta, h, log_scale=True)
    # x^psi(x) has slope 4 before eta n and 2 - 2 (eta - h) n / (hN - eta n) after it.
    assert inc >= (2 - 2 * (eta - h) * n / (h * N - eta * n)) * d - 1e-9
    if eta * n <= h * N / 250:
        assert inc >= (2 - 1e-2) * d - 1e-9


def _check_dislocation(windows: tuple[float, list[int], list[float]], u: float, tau: float) -> None:
    h, sizes, etas = windows
    law = ScalingLaw.from_sizes("general", h, sizes, etas, last_N=math.inf)
    L = h * sizes[0] * (4 * sizes[-1] / sizes[0]) ** u
    assert dislocation_gap(law, L, tau, log_scale=True) <= 0.6 * tau + 1e-12


@settings(max_examples=300, deadline=None)
@given(admissible_window())
def test_psi_monotone(window: tuple[float, int, float, float]) -> None:
    _check_psi_monotone(window)


@settings(max_examples=300, deadline=None)
@given(
    st.one_of(admissible_window(), admissible_window(ratio=250.0)),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.5),
)
def test_psi_increment(window: tuple[float, int, float, float], u: float, d: float) -> None:
    _check_increment(window, u, d)


@settings(max_examples=300, deadline=None)
@given(
    resonance_windows(separation=8.0),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=0.99),
)
def test_dislocation_bound(windows: tuple[float, list[int], list[float]], u: float, tau: float) -> None:
    _check_dislocation(windows, u, tau)


@pytest.mark.slow
@settings(max_examples=100_000, deadline=None)
@given(admissible_window())
def test_psi_monotone_exhaustive(window: tuple[float, int, float, float]) -> None:
    _check_psi_monotone(window)


@pytest.mark.slow
@settings(max_examples=10_000, deadline=None)
@given(
    resonance_windows(separation=8.0),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=0.99),
)
def test_dislocation_bound_exhaustive(windows: tuple[float, list[int], list[float]], u: float, tau: float) -> None:
    _check_dislocation(windows, u, tau)


def test_local_dimensions() -> None:
    assert local_dimensions(math.exp(-1), 2.0) == pytest.approx((2 / 3, 1.0))
    assert local_dimensions(math.exp(-1), 0.5) == pytest.approx((1.0, 1.0))
    assert local_dimensions(0.5, 1.0, gap_edge=True) == (0.5, 0.5)
    assert local_dimensions(0.5, math.inf) == (0.5, 0.5)


@pytest.mark.parametrize(
    ("delta", "expected", "case"),
    [(math.inf, 0.5, "gap_edge"), (0.5, 1.0, "lipschitz"), (1.0, 1.0, "resonant"), (2.0, 2 / 3, "resonant")],
)
def test_stratified_bound(delta: float, expected: float, case: str) -> None:
    bound = stratified_bound(delta, 1.0)
    assert bound.exponent == pytest.approx(expected)
    assert bound.case == case
    assert holder_exponent(delta, 1.0) == pytest.approx(expected)


def test_stratified_bound_negative() -> None:
    with pytest.raises(ValueError, match="delta=-1"):
        stratified_bound(-1.0, 1.0)


def test_reducible_prediction() -> None:
    assert reducible_prediction("rotation") == (2.0, 1.0, 1.0)
    assert reducible_prediction("parabolic").det_exponent == 4.0
    with pytest.raises(ValueError, match="Unrecognized kind"):
        reducible_prediction("elliptic")


def test_amo_case(golden: Frequency) -> None:
    a = float(golden)
    edge = amo_case(0.5, (3 * a) % 1, golden, 30, 1e-9)
    assert edge.case == 3
    assert edge.name == "gap_edge"
    assert edge.label == 3
    assert edge.holder == 0.5
    weak = amo_case(0.5, 0.5, golden, 5, 1e-9, delta=0.1)
    assert weak.name == "lipschitz"
    assert (weak.lower_dim, weak.upper_dim) == (1.0, 1.0)
    strong = amo_case(0.5, 0.5, golden, 5, 1e-9, delta=2.0)
    assert strong.case == 2
    assert strong.lower_dim == pytest.approx(2 / (4 + math.log(0.5)))
    with pytest.raises(ValueError, match="coupling"):
        amo_case(1.0, 0.5, golden, 5, 1e-9)


def test_fit_loglog() -> None:
    eps = np.geomspace(1e-1, 1e-4, 20)
    fit = fit_loglog(eps, eps**0.7)
    assert fit.slope == pytest.approx(0.7, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_samples == 20
    assert fit.as_dict()["slope"] == fit.slope

    rng = np.random.default_rng(42)
    noisy = fit_loglog(eps, 3 * eps**0.7 * (1 + 0.05 * rng.standard_normal(20)))
    assert noisy.band > 0
    assert abs(noisy.slope - 0.7) <= 2 * noisy.band
    assert noisy.contains(noisy.slope + noisy.band / 2)
    assert fit_loglog(eps, np.full(20, 0.3)).slope == pytest.approx(0.0, abs=1e-12)

    with pytest.raises(ValueError, match="at least 8"):
        fit_loglog(eps[:5], eps[:5])
    with pytest.raises(ValueError, match="decades"):
        fit_loglog(np.geomspace(1e-1, 1e-2, 10), np.ones(10))
    with pytest.raises(ValueError, match="positive"):
        fit_loglog(eps, -eps)
    with pytest.raises(ValueError, match="same length"):
        fit_loglog(eps, eps[:-1])


def test_fit_loglog_windows() -> None:
    eps = np.geomspace(1e-1, 1e-6, 60)
    mass = np.where(eps > 1e-3, eps, 1e-3 * (eps / 1e-3) ** 0.5)
    fits = fit_loglog_windows(eps, mass, [(1e-3, 1e-1), (1e-6, 1e-3)])
    assert [f.slope for f in fits] == pytest.approx([1.0, 0.5], abs=1e-10)
