"""Tests for Weyl m-functions, the whole-line M and spectral-measure windows."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from qpcalc.base import ConvergenceError
from qpcalc.cocycle import QpCocycle
from qpcalc.scaling import amo_case, fit_loglog
from qpcalc.weyl import (
    M_TOL,
    N_CEILING,
    N_MAX,
    MeasureScalingCalc,
    MFunctionCalc,
    aj_ratio,
    attracting_root,
    depth_cap,
    dislocation_check,
    half_line_m,
    im_M_lower_bound,
    jitomirskaya_last_ratio,
    m_beta,
    m_functions,
    measure_window,
    poisson_mass,
    smoothed_mass,
    whole_line_M,
    whole_line_M_values,
)

if TYPE_CHECKING:
    from qpcalc.arithmetic import Frequency


def _free_im_M(z: complex) -> float:
    # |Im M| = |Im 2 / sqrt(z^2 - 4)| for the free operator.
    return abs((2 / np.sqrt(complex(z) ** 2 - 4)).imag)


@pytest.mark.parametrize("z", [1j, 0.5 + 0.1j, -1.5 + 0.05j, 3.0 + 0.01j])
def test_attracting_root(z: complex) -> None:
    w = attracting_root(z)
    assert abs(w) < 1
    assert abs(w * w - z * w + 1) < 1e-14


@pytest.mark.parametrize("z", [1j, 0.5 + 0.1j, -1.5 + 0.05j])
def test_free_m_functions_closed_form(free_cocycle: QpCocycle, z: complex) -> None:
    m_plus, m_minus, n, _ = m_functions(free_cocycle, 0.0, z)
    assert n == 0
    w = attracting_root(z)
    assert complex(m_plus) == pytest.approx(-w)
    assert complex(m_minus) == pytest.approx(1 / w)

    rec_plus, rec_minus, n_used, residual = m_functions(free_cocycle, 0.3, z, force_recursion=True)
    assert n_used > 0
    assert residual <= 1e-12
    assert complex(rec_plus) == pytest.approx(-w, rel=1e-8)
    assert complex(rec_minus) == pytest.approx(1 / w, rel=1e-8)


def test_m_functions_vectorized(amo_cocycle: QpCocycle) -> None:
    z = np.array([0.1 + 0.1j, 0.5 + 0.05j, -1.0 + 0.2j])
    m_plus, m_minus, _, _ = m_functions(amo_cocycle, 0.2, z)
    assert m_plus.shape == z.shape
    # Herglotz on both half lines.
    assert np.all(m_plus.imag > 0)
    assert np.all(m_minus.imag > 0)
    with pytest.raises(ValueError, match="Im z > 0"):
        m_functions(amo_cocycle, 0.2, 0.5 + 0j)
    with pytest.raises(ValueError, match="Schrodinger"):
        m_functions(QpCocycle.constant(amo_cocycle.alpha, np.eye(2)), 0.0, 1j)


@pytest.mark.parametrize("beta", [-1.2, -0.4, 0.3, 1.0, math.pi / 2])
def test_whole_line_M_is_beta_independent(amo_cocycle: QpCocycle, beta: float) -> None:
    triple = whole_line_M(amo_cocycle, 0.2, 0.4 + 0.05j)
    assert triple.M.imag > 0
    assert triple.M_beta(beta) == pytest.approx(triple.M, rel=1e-10)
    mp_, mm_ = triple.rotated(beta)
    assert mp_.imag > 0
    assert mm_.imag > 0


def test_m_beta() -> None:
    assert m_beta(0.3 + 0.7j, 0.0) == pytest.approx(0.3 + 0.7j)
    assert m_beta(0.3 + 0.7j, 0.0, "-") == pytest.approx(0.3 + 0.7j)
    # Rotating by pi/2 on the + side sends m to -1/m.
    assert m_beta(0.3 + 0.7j, math.pi / 2) == pytest.approx(-1 / (0.3 + 0.7j))
    with pytest.raises(ValueError, match="Unrecognized side"):
        m_beta(1j, 0.0, "0")


def test_depth_cap() -> None:
    assert depth_cap(1.0) == N_MAX
    assert depth_cap(1e-6) >= 4 * math.log(1 / M_TOL) / 1e-6
    assert depth_cap(1e-6, 1e-6) < depth_cap(1e-6)
    assert depth_cap(1e-12) == N_CEILING
    with pytest.raises(ValueError, match="im_z=0"):
        depth_cap(0)


def test_m_functions_depth_exhausted(amo_cocycle: QpCocycle) -> None:
    with pytest.raises(ConvergenceError, match="did not converge by N=1024") as excinfo:
        m_functions(amo_cocycle, 0.0, 1e-6j, n_max=1024)
    assert excinfo.value.residual > M_TOL


def test_m_functions_precision_per_node(amo_cocycle: QpCocycle) -> None:
    # 4 + 1e-9 i lies off the spectrum, so the software-precision node converges quickly next to a float node.
    z = np.array([4.0 + 1e-9j, 0.5 + 0.1j])
    m_plus, m_minus, _, residual = m_functions(amo_cocycle, 0.2, z)
    assert residual <= M_TOL
    assert np.all(m_plus.imag > 0)
    assert np.all(m_minus.imag > 0)
    near_plus, near_minus, _, _ = m_functions(amo_cocycle, 0.2, 4.0 + 1e-7j)
    assert m_plus[0].real == pytest.approx(complex(near_plus).real, rel=1e-6)
    assert m_minus[0].real == pytest.approx(complex(near_minus).real, rel=1e-6)
    alone_plus, alone_minus, _, _ = m_functions(amo_cocycle, 0.2, 0.5 + 0.1j)
    assert m_plus[1] == pytest.approx(complex(alone_plus), rel=1e-10)
    assert m_minus[1] == pytest.approx(complex(alone_minus), rel=1e-10)


def test_half_line_m(amo_cocycle: QpCocycle) -> None:
    triple = whole_line_M(amo_cocycle, 0.1, -0.7 + 0.1j)
    assert half_line_m(amo_cocycle, 0.1, -0.7 + 0.1j) == pytest.approx(triple.m_plus)
    assert half_line_m(amo_cocycle, 0.1, -0.7 + 0.1j, "-", 0.4) == pytest.approx(triple.rotated(0.4)[1])


def test_free_M_matches_green_function(free_cocycle: QpCocycle) -> None:
    z = np.array([0.3 + 0.2j, -1.0 + 0.01j, 2.5 + 0.1j])
    vals = whole_line_M_values(free_cocycle, 0.0, z)
    assert vals.imag == pytest.approx([_free_im_M(x) for x in z], rel=1e-10)


def test_im_M_lower_bound(free_cocycle: QpCocycle, amo_cocycle: QpCocycle) -> None:
    # Free at i eps: Im M ~ 1 and Im m_beta ~ 1 for every beta, so the ratio sits near 4.
    assert im_M_lower_bound(whole_line_M(free_cocycle, 0.0, 0.01j)) == pytest.approx(4, rel=5e-2)
    assert im_M_lower_bound(whole_line_M(amo_cocycle, 0.0, 0.2 + 0.05j)) >= 1


def test_poisson_mass(free_cocycle: QpCocycle) -> None:
    eps = 0.05
    assert poisson_mass(free_cocycle, 0.0, 0.0, eps) == pytest.approx(2 * eps / math.sqrt(4 + eps**2))
    with pytest.raises(ValueError, match="eps=0"):
        poisson_mass(free_cocycle, 0.0, 0.0, 0)


def test_measure_window_free(free_cocycle: QpCocycle) -> None:
    # Density 2 / (pi sqrt(4 - E^2)), so mu(-eps, eps) = (4 / pi) arcsin(eps / 2).
    eps = 0.1
    exact = 4 / math.pi * math.asin(eps / 2)
    window = measure_window(free_cocycle, 0.0, 0.0, eps)
    assert window.method == "stieltjes"
    assert window.mass == pytest.approx(exact, rel=1e-2)
    assert window.eta_used == pytest.approx(1e-3)
    assert window.n_nodes > 0
    bound = measure_window(free_cocycle, 0.0, 0.0, eps, method="poisson_bound")
    assert bound.mass >= window.mass
    with pytest.raises(ValueError, match="Unrecognized method"):
        measure_window(free_cocycle, 0.0, 0.0, eps, method="trapezoid")


@pytest.mark.parametrize("name", ["free_cocycle", "amo_cocycle"])
def test_smoothed_mass_total(name: str, request: pytest.FixtureRequest) -> None:
    # The canonical measure has total mass 2 and its support lies inside [-3, 3].
    c = request.getfixturevalue(name)
    assert smoothed_mass(c, 0.0, -4.0, 4.0, 1e-3) == pytest.approx(2.0, abs=2e-2)
    with pytest.raises(ValueError, match="a < b"):
        smoothed_mass(c, 0.0, 1.0, -1.0, 1e-3)


def test_measure_window_amo(amo_cocycle: QpCocycle) -> None:
    window = measure_window(amo_cocycle, 0.0, 0.0, 0.1)
    bound = measure_window(amo_cocycle, 0.0, 0.0, 0.1, method="poisson_bound")
    assert 0 < window.mass <= bound.mass * (1 + 1e-3)
    assert window.bias < window.mass


def test_free_ratios(free_cocycle: QpCocycle) -> None:
    # m+(i eps) ~ i, det P_(k) = k^2 and ||u_0||^2_L = L / 2, so both ratios are O(1) constants.
    for eps in (1e-2, 3e-3):
        assert jitomirskaya_last_ratio(free_cocycle, 0.0, 0.0, eps) == pytest.approx(1, rel=2e-2)
        assert aj_ratio(free_cocycle, 0.0, 0.0, eps, n_beta=64) == pytest.approx(2, rel=2e-2)


def test_dislocation_check(free_cocycle: QpCocycle) -> None:
    check = dislocation_check(free_cocycle, 0.0, 0.0, 0.1, tau=0.1, method="poisson_bound")
    assert check.mass == pytest.approx(4 * 0.1 / math.sqrt(4.01))
    assert check.poisson_term < check.mass
    assert check.implied_constant <= 0


def test_calculators(free_cocycle: QpCocycle) -> None:
    res = MFunctionCalc(eps=1e-2).calc(free_cocycle)
    assert res["M"].imag == pytest.approx(_free_im_M(0.01j), rel=1e-10)
    assert res["n_used"] == 0

    out = MeasureScalingCalc(eps_grid=np.geomspace(1e-1, 1e-3, 10)).calc(free_cocycle)
    assert len(out["windows"]) == 10
    # Absolutely continuous at an interior energy: local dimension 1.
    assert out["local_dimension"].slope == pytest.approx(1.0, abs=1e-2)


def _free_oracle_points(n: int, im_lo: float) -> np.ndarray:
    rng = np.random.default_rng(7)
    return rng.uniform(-3, 3, n) + 1j * np.geomspace(im_lo, 1, n)


def _check_free_oracle(c: QpCocycle, z: np.ndarray) -> None:
    w = attracting_root(z)
    m_plus, m_minus, _, _ = m_functions(c, 0.0, z, force_recursion=True)
    np.testing.assert_allclose(m_plus, -w, rtol=1e-10)
    np.testing.assert_allclose(m_minus, 1 / w, rtol=1e-10)
    np.testing.assert_allclose(whole_line_M_values(c, 0.0, z).imag, [_free_im_M(x) for x in z], rtol=1e-10)


def test_free_oracle_recursion(free_cocycle: QpCocycle) -> None:
    _check_free_oracle(free_cocycle, _free_oracle_points(100, 1e-2))


@pytest.mark.slow
def test_free_oracle_recursion_full(free_cocycle: QpCocycle) -> None:
    _check_free_oracle(free_cocycle, _free_oracle_points(1000, 1e-4))


@pytest.mark.slow
def test_jitomirskaya_last_sandwich(free_cocycle: QpCocycle, amo_cocycle: QpCocycle) -> None:
    for c in (free_cocycle, amo_cocycle):
        for eps in np.geomspace(1e-1, 1e-6, 11):
            assert 1e-2 <= jitomirskaya_last_ratio(c, 0.0, 0.0, float(eps)) <= 1e2


@pytest.mark.slow
def test_m_functions_amo_small_im_z(amo_cocycle: QpCocycle) -> None:
    m_plus, m_minus, n_used, residual = m_functions(amo_cocycle, 0.0, np.array([1e-6j, 0.3 + 1e-6j]))
    assert residual <= M_TOL
    assert n_used <= depth_cap(1e-6)
    assert np.all(m_plus.imag > 0)
    assert np.all(m_minus.imag > 0)
    assert poisson_mass(amo_cocycle, 0.0, 0.0, 1e-6) > 0


@pytest.mark.slow
def test_measure_window_amo_small_eps(amo_cocycle: QpCocycle) -> None:
    window = measure_window(amo_cocycle, 0.0, 0.3, 1e-4, eta_ratio=0.1)
    bound = measure_window(amo_cocycle, 0.0, 0.3, 1e-4, method="poisson_bound")
    assert window.eta_used == pytest.approx(1e-5)
    assert 0 <= window.mass <= bound.mass * (1 + 1e-3)


def _poisson_slope(c: QpCocycle, E: float) -> float:
    windows = [measure_window(c, 0.0, E, float(eps), method="poisson_bound") for eps in np.geomspace(1e-2, 1e-6, 16)]
    return fit_loglog([w.eps for w in windows], [w.mass for w in windows]).slope


@pytest.mark.slow
def test_gap_edge_scaling(amo_cocycle: QpCocycle, amo_gap_edge: float) -> None:
    assert _poisson_slope(amo_cocycle, amo_gap_edge) == pytest.approx(0.5, abs=0.05)


@pytest.mark.slow
def test_lipschitz_scaling(amo_cocycle: QpCocycle, golden: Frequency) -> None:
    # N(0) = 1/2 has no resonance up to K = 1000 at strength -ln(0.5) / 2.
    assert amo_case(0.5, 0.5, golden, 1000, 1e-9).name == "lipschitz"
    assert _poisson_slope(amo_cocycle, 0.0) == pytest.approx(1.0, abs=0.05)
