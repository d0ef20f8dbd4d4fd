"""Weyl-Titchmarsh m-functions of quasi-periodic Schrodinger operators and spectral-measure windows.

The half-line m-functions come from Riccati continued fractions run toward the origin from depth N. For the right
half line r(n-1) = 1 / ((z - v(n)) - r(n)) gives r(0) = u(1)/u(0) of the solution that is l^2 at +infinity and
m+ = -r(0); for the left half line s(n+1) = 1 / ((z - v(n)) - s(n)) gives s(0) = u(-1)/u(0) and m- = (z - v(0)) - s(0).
Both are Herglotz.

Each step is the Moebius map of G_n = [[0, 1], [-1, z - v(n)]], so r(0) is the image of the seed under
G_1 G_2 ... G_N. The products are formed by pairwise reduction over blocks of sites, vectorized over z and
renormalized after every level, and extended outward as N doubles. Two seeds per z, the local attracting root and 0,
are pushed through the same product; their agreement is the convergence test. The seeds separate like
exp(-c Im z N), so the depth cap grows like ln(1 / tol) / Im z.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from mpmath import mp, mpc, mpf
from numpy.polynomial.legendre import leggauss

from .base import ConvergenceError, SpectralCalc
from .cocycle import Schrodinger
from .subordinacy import match_length, pk, solution_norm

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .arithmetic import Frequency
    from .cocycle import PotentialSpec, QpCocycle

logger = logging.getLogger(__name__)

M_TOL = 1e-12
N_START = 64
# Depth cap: max(N_MAX, DEPTH_FACTOR ln(1 / tol) / Im z), never above N_CEILING.
N_MAX = 1 << 22
N_CEILING = 1 << 31
DEPTH_FACTOR = 4.0
# Site matrices held in memory at once, summed over the z being extended.
BLOCK_SITES = 1 << 20
MIN_BLOCK = 256
# Below this Im z a node runs in software precision.
MP_THRESHOLD = 1e-8
MP_BITS = 256
MP_N_MAX = 1 << 20
MAX_PANEL_NODES = 1024


def _potential(c: QpCocycle) -> PotentialSpec:
    if not isinstance(c.generator, Schrodinger):
        raise ValueError("m-functions are defined for Schrodinger cocycles only")
    return c.generator.potential


def depth_cap(im_z: float, tol: float = M_TOL) -> int:
    """Largest recursion depth tried at Im z before giving up."""
    if im_z <= 0:
        raise ValueError(f"{im_z=} must be positive")
    need = DEPTH_FACTOR * math.log(1 / tol) / im_z
    return int(min(max(N_MAX, math.ceil(need)), N_CEILING))


def attracting_root(zp: complex | np.ndarray) -> complex | np.ndarray:
    """Root w of w^2 - z' w + 1 = 0 with |w| < 1, the attracting fixed point of r -> 1 / (z' - r)."""
    zp = np.asarray(zp, dtype=complex)
    s = np.sqrt(zp * zp - 4)
    w1, w2 = (zp - s) / 2, (zp + s) / 2
    out = np.where(np.abs(w1) <= np.abs(w2), w1, w2)
    return out if out.ndim else complex(out)


def m_beta(m: complex | np.ndarray, beta: float, side: str = "+") -> complex | np.ndarray:
    """Moebius rotation of a half-line m-function to boundary angle beta.

    m_beta^+ = (cos b m + sin b) / (-sin b m + cos b) and m_beta^- = (cos b m - sin b) / (sin b m + cos b); the
    whole-line M assembled from the rotated pair does not depend on beta.
    """
    cb, sb = math.cos(beta), math.sin(beta)
    if side == "+":
        return (cb * m + sb) / (-sb * m + cb)
    if side == "-":
        return (cb * m - sb) / (sb * m + cb)
    raise ValueError(f"Unrecognized {side=}, must be one of ('+', '-')")


def _assemble(m_plus: complex | np.ndarray, m_minus: complex | np.ndarray) -> complex | np.ndarray:
    return (m_plus * m_minus - 1) / (m_plus + m_minus)


def _site_potential(
    potential: PotentialSpec, alpha: Frequency, theta: float, sign: int, start: int, count: int
) -> np.ndarray:
    """v(theta + sign m alpha) for m = start, ..., start + count - 1.

    The block's base phase is reduced at the frequency's precision; offsets inside the block are float.
    """
    with mp.workprec(alpha.precision_bits):
        base = float(mp.frac(mpf(theta) + sign * start * alpha.value))
    offsets = (np.arange(count, dtype=float) * (sign * float(alpha))) % 1.0
    return np.atleast_1d(np.asarray(potential.evaluate((base + offsets) % 1.0), dtype=float))


def _chain(g: np.ndarray) -> np.ndarray:
    """Ordered product g[:, 0] @ g[:, 1] @ ... of a (m, L, 2, 2) stack, one renormalized level at a time."""
    eye = np.eye(2, dtype=complex)
    while g.shape[1] > 1:
        if g.shape[1] % 2:
            g = np.concatenate([g, np.broadcast_to(eye, (g.shape[0], 1, 2, 2))], axis=1)
        g = g[:, 0::2] @ g[:, 1::2]
        g /= np.max(np.abs(g), axis=(-2, -1), keepdims=True)
    return g[:, 0]


def _extend(
    prod: np.ndarray,
    potential: PotentialSpec,
    alpha: Frequency,
    theta: float,
    z: np.ndarray,
    sign: int,
    first: int,
    last: int,
) -> np.ndarray:
    """prod @ G_first @ ... @ G_last for every z, block by block."""
    block = max(MIN_BLOCK, BLOCK_SITES // z.size)
    for start in range(first, last + 1, block):
        count = min(block, last + 1 - start)
        v = _site_potential(potential, alpha, theta, sign, start, count)
        g = np.zeros((z.size, count, 2, 2), dtype=complex)
        g[..., 0, 1] = 1.0
        g[..., 1, 0] = -1.0
        g[..., 1, 1] = z[:, None] - v[None, :]
        prod = prod @ _chain(g)
        prod /= np.max(np.abs(prod), axis=(-2, -1), keepdims=True)
    return prod


def _half_line(
    potential: PotentialSpec,
    alpha: Frequency,
    theta: float,
    z: np.ndarray,
    sign: int,
    offset: np.ndarray,
    tol: float,
    n_max: int | None,
) -> tuple[np.ndarray, int, float]:
    """m = offset - G_1 ... G_N (seed) on the half line in direction ``sign``, N doubling per z until converged.

    Converged z drop out of the product; the others keep their prefix and are extended to the new depth.
    """
    caps = np.array([n_max or depth_cap(float(im), tol) for im in z.imag], dtype=np.int64)
    prod = np.broadcast_to(np.eye(2, dtype=complex), (z.size, 2, 2)).copy()
    m = np.empty(z.size, dtype=complex)
    n_used = np.zeros(z.size, dtype=np.int64)
    res = np.zeros(z.size)
    active = np.arange(z.size)
    done, n = 0, N_START
    while active.size:
        prod[active] = _extend(prod[active], potential, alpha, theta, z[active], sign, done + 1, n)
        p, za = prod[active], z[active]
        seed = np.asarray(attracting_root(za - _site_potential(potential, alpha, theta, sign, n, 1)[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            m_root = offset[active] - (p[:, 0, 0] * seed + p[:, 0, 1]) / (p[:, 1, 0] * seed + p[:, 1, 1])
            m_zero = offset[active] - p[:, 0, 1] / p[:, 1, 1]
            r = np.abs(m_root - m_zero) / np.abs(m_root)
        r = np.where(np.isfinite(r), r, np.inf)
        ok = r <= tol
        m[active[ok]], n_used[active[ok]], res[active[ok]] = m_root[ok], n, r[ok]
        stuck = ~ok & (n >= caps[active])
        if np.any(stuck):
            worst = int(np.argmax(np.where(stuck, r, -1.0)))
            raise ConvergenceError(
                f"m-function recursion did not converge by N={n} at z={complex(za[worst])}", residual=float(r[worst])
            )
        logger.debug("Half line %+d at N=%d: %d of %d z converged", sign, n, int(ok.sum()), active.size)
        active = active[~ok]
        done, n = n, 2 * n
    return m, int(n_used.max(initial=0)), float(res.max(initial=0.0))


def _m_pair_float(
    potential: PotentialSpec, alpha: Frequency, theta: float, z: np.ndarray, tol: float, n_max: int | None
) -> tuple[np.ndarray, np.ndarray, int, float]:
    v0 = float(potential.evaluate(theta % 1.0))
    m_plus, n_p, r_p = _half_line(potential, alpha, theta, z, 1, np.zeros_like(z), tol, n_max)
    m_minus, n_m, r_m = _half_line(potential, alpha, theta, z, -1, z - v0, tol, n_max)
    return m_plus, m_minus, max(n_p, n_m), max(r_p, r_m)


def _m_pair_mp(
    potential: PotentialSpec, alpha: Frequency, theta: float, z: complex, tol: float, n_max: int | None
) -> tuple[complex, complex, int, float]:
    """Scalar variant at MP_BITS for Im z below MP_THRESHOLD, with the product kept as four mpc entries."""
    cap = min(n_max or depth_cap(z.imag, tol), MP_N_MAX)
    pair, n_used, residual = [], 0, 0.0
    with mp.workprec(MP_BITS):
        zz, th, a = mpc(z), mpf(theta), alpha.value
        v0 = potential.evaluate(th)
        for sign, offset in ((1, mpc(0)), (-1, zz - v0)):
            p00, p01, p10, p11 = mpc(1), mpc(0), mpc(0), mpc(1)
            done, n = 0, N_START
            while True:
                for j in range(done + 1, n + 1):
                    w = zz - potential.evaluate(th + sign * j * a)
                    p00, p01, p10, p11 = -p01, p00 + p01 * w, -p11, p10 + p11 * w
                seed = mpc(complex(attracting_root(complex(zz - potential.evaluate(th + sign * n * a)))))
                m_root = offset - (p00 * seed + p01) / (p10 * seed + p11)
                r = float(abs(m_root - (offset - p01 / p11)) / abs(m_root))
                if r <= tol:
                    break
                if n >= cap:
                    raise ConvergenceError(
                        f"m-function recursion did not converge by N={n} at {MP_BITS} bits, z={z}", residual=r
                    )
                done, n = n, 2 * n
            pair.append(complex(m_root))
            n_used, residual = max(n_used, n), max(residual, r)
    return pair[0], pair[1], n_used, residual


def m_functions(
    c: QpCocycle,
    theta: float,
    z: complex | np.ndarray,
    *,
    force_recursion: bool = False,
    tol: float = M_TOL,
    n_max: int | None = None,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """(m+, m-, N used, residual) at beta = 0 for one or many z in the upper half plane.

    Constant potentials use the closed form m+ = -w, m- = 1/w with w the attracting root at z - v, unless
    ``force_recursion`` is set. Otherwise nodes with Im z >= MP_THRESHOLD share one vectorized float64 product and
    the rest run one at a time at MP_BITS. ``n_max`` overrides the depth cap of :func:`depth_cap`.
    """
    potential = _potential(c)
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("m-functions need Im z > 0")
    if potential.is_constant and not force_recursion:
        w = np.asarray(attracting_root(z - potential.constant))
        return -w, 1 / w, 0, 0.0
    flat = z.ravel()
    m_plus = np.empty(flat.shape, dtype=complex)
    m_minus = np.empty(flat.shape, dtype=complex)
    n_used, residual = 0, 0.0
    low = flat.imag < MP_THRESHOLD
    if not np.all(low):
        idx = np.flatnonzero(~low)
        m_plus[idx], m_minus[idx], n_used, residual = _m_pair_float(potential, c.alpha, theta, flat[idx], tol, n_max)
    for i in np.flatnonzero(low):
        m_plus[i], m_minus[i], n, res = _m_pair_mp(potential, c.alpha, theta, complex(flat[i]), tol, n_max)
        n_used, residual = max(n_used, n), max(residual, res)
    return m_plus.reshape(z.shape), m_minus.reshape(z.shape), n_used, residual


def half_line_m(
    c: QpCocycle, theta: float, z: complex, side: str = "+", beta: float = 0.0, *, force_recursion: bool = False
) -> complex:
    """m_beta^side(z).

    Args:
        c: Schrodinger cocycle; its energy is ignored in favor of z.
        theta: Phase.
        z: Spectral parameter with Im z > 0.
        side: "+" or "-".
        beta: Boundary angle.
        force_recursion: Skip closed forms for constant potentials.

    Raises:
        ConvergenceError: when the recursion depth cap is reached; carries the residual.

    Returns:
        complex
    """
    m_plus, m_minus, _, _ = m_functions(c, theta, z, force_recursion=force_recursion)
    m = complex(m_plus) if side == "+" else complex(m_minus)
    return complex(m_beta(m, beta, side))


@dataclass(frozen=True)
class MTriple:
    """m+, m- (beta = 0) and the whole-line M = (m+ m- - 1) / (m+ + m-) at z."""

    z: complex
    m_plus: complex
    m_minus: complex
    M: complex
    n_used: int
    residual: float

    def rotated(self, beta: float) -> tuple[complex, complex]:
        """(m_beta^+, m_beta^-)."""
        return complex(m_beta(self.m_plus, beta, "+")), complex(m_beta(self.m_minus, beta, "-"))

    def M_beta(self, beta: float) -> complex:
        """M assembled from the beta-rotated pair; equal to M for every beta."""
        return complex(_assemble(*self.rotated(beta)))


def whole_line_M(
    c: QpCocycle, theta: float, z: complex, *, force_recursion: bool = False, check_beta: float = math.pi / 4
) -> MTriple:
    """Whole-line M(z) with a beta-independence check.

    Raises:
        ValueError: if m+ + m- vanishes (impossible for Im z > 0).

    Returns:
        MTriple
    """
    m_plus, m_minus, n, res = m_functions(c, theta, z, force_recursion=force_recursion)
    m_plus, m_minus = complex(m_plus), complex(m_minus)
    denom = m_plus + m_minus
    if abs(denom) <= 1e-300:
        raise ValueError(f"Degenerate m+ + m- = 0 at {z=}")
    triple = MTriple(complex(z), m_plus, m_minus, complex(_assemble(m_plus, m_minus)), n, res)
    spread = abs(triple.M_beta(check_beta) - triple.M) / abs(triple.M)
    if spread > 1e-8:
        logger.warning("M depends on beta: relative spread %.2g at z=%s", spread, z)
    return triple


def whole_line_M_values(c: QpCocycle, theta: float, z: np.ndarray, **kwargs: bool) -> np.ndarray:
    """Vectorized M(z) over an array of z."""
    m_plus, m_minus, _, _ = m_functions(c, theta, z, **kwargs)
    return _assemble(m_plus, m_minus)


def poisson_mass(c: QpCocycle, theta: float, E: float, eps: float, **kwargs: bool) -> float:
    """eps Im M(E + i eps), the Poisson-smoothed spectral mass around E."""
    if eps <= 0:
        raise ValueError(f"{eps=} must be positive")
    return eps * whole_line_M(c, theta, complex(E, eps), **kwargs).M.imag


@dataclass(frozen=True)
class MeasureWindow:
    """Estimate of mu(E - eps, E + eps).

    For ``stieltjes`` the mass is the eta -> 0 extrapolation 2 I(eta/2) - I(eta) of the smoothed integrals
    I(eta) = (1/pi) int Im M(x + i eta) dx and ``bias`` = |I(eta) - I(eta/2)|. For ``poisson_bound`` the mass is the
    upper bound 2 eps Im M(E + i eps).
    """

    E: float
    eps: float
    mass: float
    method: str
    eta_used: float
    bias: float = 0.0
    n_nodes: int = 0


def _contour_integrals(
    c: QpCocycle, theta: float, a: float, b: float, eta: float, rtol: float, **kwargs: bool
) -> tuple[float, float, int]:
    """(I(eta), I(eta / 2), nodes) for the window [a, b].

    Cauchy's theorem on the rectangle with corners a + i eta and b + i top gives
    pi I(eta) = int_a^b Im M(x + i top) dx + int_eta^top (Re M(a + i t) - Re M(b + i t)) dt.
    Both integrands are smooth away from t = 0; the legs use panels halving down to eta / 2, and the bottom panel
    [eta / 2, eta] turns I(eta) into I(eta / 2).
    """
    top = max(b - a, 2 * eta)
    depth = max(1, math.ceil(math.log2(top / eta)))
    edges = np.concatenate([eta * 2.0 ** np.arange(-1, depth), [top]])
    lo, hi = edges[:-1, None], edges[1:, None]
    prev, n = None, 8
    while n <= MAX_PANEL_NODES:
        x, w = leggauss(n)
        t = ((hi - lo) * (x + 1) / 2 + lo).ravel()
        wt = ((hi - lo) / 2 * w).ravel()
        xs = (b - a) * (x + 1) / 2 + a
        z = np.concatenate([a + 1j * t, b + 1j * t, xs + 1j * top])
        vals = np.asarray(whole_line_M_values(c, theta, z, **kwargs))
        k = t.size
        legs = ((vals[:k].real - vals[k : 2 * k].real) * wt).reshape(lo.size, n).sum(axis=1)
        across = (b - a) / 2 * float(w @ vals[2 * k :].imag)
        full = (across + float(legs[1:].sum())) / math.pi
        half = full + float(legs[0]) / math.pi
        if prev is not None and max(abs(full - prev[0]), abs(half - prev[1])) <= rtol * abs(half) + 1e-14 * top:
            return full, half, vals.size
        logger.debug("Contour quadrature at %d nodes/panel: I(eta)=%.10g, I(eta/2)=%.10g", n, full, half)
        prev, n = (full, half), 2 * n
    raise ConvergenceError(
        f"Stieltjes quadrature did not converge at {MAX_PANEL_NODES} nodes per panel",
        residual=abs(full - prev[0]),  # type: ignore[index]
    )


def smoothed_mass(
    c: QpCocycle, theta: float, a: float, b: float, eta: float, *, rtol: float = 1e-3, force_recursion: bool = False
) -> float:
    """I(eta) = (1/pi) int_a^b Im M(x + i eta) dx, the spectral mass of [a, b] smoothed at scale eta.

    Over a bracket of the whole spectrum this tends to 2, the total mass of the canonical measure.
    """
    if not a < b or eta <= 0:
        raise ValueError(f"Need a < b and eta > 0, got {a=}, {b=}, {eta=}")
    full, _, _ = _contour_integrals(c, theta, a, b, eta, rtol, force_recursion=force_recursion)
    return full


def measure_window(
    c: QpCocycle,
    theta: float,
    E: float,
    eps: float,
    eta_ratio: float = 1e-2,
    *,
    method: str = "stieltjes",
    rtol: float = 1e-3,
    force_recursion: bool = False,
) -> MeasureWindow:
    """mu(E - eps, E + eps) by Stieltjes inversion at finite eta = eta_ratio * eps.

    The cost of ``stieltjes`` is dominated by the nodes at Im z ~ eta, each needing a recursion depth ~ 1 / eta
    inside the spectrum. ``poisson_bound`` needs a single node at Im z = eps.

    Args:
        c: Schrodinger cocycle.
        theta: Phase.
        E: Window center.
        eps: Window half-width, > 0.
        eta_ratio: Smoothing scale relative to eps.
        method: "stieltjes" or "poisson_bound".
        rtol: Relative quadrature tolerance.
        force_recursion: Skip closed forms for constant potentials.

    Raises:
        ConvergenceError: on quadrature or recursion non-convergence.

    Returns:
        MeasureWindow
    """
    if eps <= 0:
        raise ValueError(f"{eps=} must be positive")
    bound = 2 * poisson_mass(c, theta, E, eps, force_recursion=force_recursion)
    if method == "poisson_bound":
        return MeasureWindow(E, eps, bound, method, eps)
    if method != "stieltjes":
        raise ValueError(f"Unrecognized {method=}, must be one of ('stieltjes', 'poisson_bound')")
    eta = eta_ratio * eps
    full, half, n_nodes = _contour_integrals(c, theta, E - eps, E + eps, eta, rtol, force_recursion=force_recursion)
    mass = max(2 * half - full, 0.0)
    if mass > bound * (1 + rtol):
        logger.warning("Window mass %.6g exceeds the Poisson bound %.6g at E=%g, eps=%g", mass, bound, E, eps)
    return MeasureWindow(E, eps, mass, method, eta, abs(full - half), n_nodes)


def im_M_lower_bound(triple: MTriple, betas: Sequence[float] | None = None) -> float:
    """Smallest Im M / (min(Im m_beta^+, Im m_beta^-) / 4) over a beta grid; at least 1 when the bound holds."""
    betas = np.linspace(-math.pi / 2, math.pi / 2, 33)[1:] if betas is None else betas
    worst = math.inf
    for beta in betas:
        mp_, mm_ = triple.rotated(float(beta))
        worst = min(worst, triple.M.imag / (min(mp_.imag, mm_.imag) / 4))
    return worst


def jitomirskaya_last_ratio(c: QpCocycle, theta: float, E: float, eps: float, beta: float = 0.0) -> float:
    """eps Im m_beta^+(E + i eps) ||u_beta||^2_{L+(eps)}, which stays inside a fixed band [1/C, C]."""
    c_e = c.with_energy(E)
    length = match_length(c_e, theta, eps, "+")
    m = half_line_m(c, theta, complex(E, eps), "+", beta)
    return eps * m.imag * solution_norm(c_e, theta, beta, max(length, 1.0), "+") ** 2


def aj_ratio(c: QpCocycle, theta: float, E: float, eps: float, n_beta: int = 256) -> float:
    """2 eps sup_beta |m_beta^+(E + i eps)| / ||P_(k)^{-1}|| at k = L+(eps)/2; bounded above and below."""
    c_e = c.with_energy(E)
    k = max(1, math.ceil(match_length(c_e, theta, eps, "+") / 2))
    m = half_line_m(c, theta, complex(E, eps), "+")
    betas = np.linspace(-math.pi / 2, math.pi / 2, n_beta + 1)[1:]
    sup = max(abs(m_beta(m, float(b), "+")) for b in betas)
    return 2 * eps * sup / pk(c_e, theta, k, "+").inv_norm()


@dataclass(frozen=True)
class DislocationCheck:
    """mu(E - eps, E + eps) against eps^{1+tau} Im M(E + i eps^{1+tau}).

    ``implied_constant`` is (poisson_term - mass) / eps^{4/3 + 2 tau}, the smallest C for which
    mass >= poisson_term - C eps^{4/3 + 2 tau}; non-positive values mean the inequality holds with C = 0.
    """

    E: float
    eps: float
    tau: float
    mass: float
    poisson_term: float
    implied_constant: float


def dislocation_check(
    c: QpCocycle, theta: float, E: float, eps: float, tau: float = 0.1, **kwargs: float
) -> DislocationCheck:
    window = measure_window(c, theta, E, eps, **kwargs)  # type: ignore[arg-type]
    scale = eps ** (1 + tau)
    term = poisson_mass(c, theta, E, scale)
    return DislocationCheck(E, eps, tau, window.mass, term, (term - window.mass) / eps ** (4 / 3 + 2 * tau))


class MFunctionCalc(SpectralCalc):
    """m-functions at E + i eps, with E the cocycle energy."""

    def __init__(self, *, eps: float = 1e-3, theta: float = 0.0, beta: float = 0.0) -> None:
        """
        Args:
            eps (float): Imaginary part of the spectral parameter. Defaults to 1e-3.
            theta (float): Phase. Defaults to 0.
            beta (float): Boundary angle of the reported half-line functions. Defaults to 0.
        """
        self.eps = eps
        self.theta = theta
        self.beta = beta

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            m_plus, m_minus: beta-rotated half-line m-functions,
            M: whole-line m-function,
            n_used: recursion depth,
            residual: seed disagreement,
        }
        """
        triple = whole_line_M(cocycle, self.theta, complex(cocycle.energy, self.eps))
        m_plus, m_minus = triple.rotated(self.beta)
        return {
            "m_plus": m_plus,
            "m_minus": m_minus,
            "M": triple.M,
            "n_used": triple.n_used,
            "residual": triple.residual,
        }


class MeasureScalingCalc(SpectralCalc):
    """Measure windows mu(E - eps, E + eps) over an eps ladder and the fitted local scaling exponent."""

    def __init__(
        self,
        *,
        eps_grid: Sequence[float] | None = None,
        theta: float = 0.0,
        eta_ratio: float = 1e-2,
        method: str = "poisson_bound",
    ) -> None:
        """
        Args:
            eps_grid: Window half-widths. Defaults to 12 values from 1e-1 to 1e-3.
            theta (float): Phase. Defaults to 0.
            eta_ratio (float): Stieltjes smoothing ratio. Defaults to 1e-2.
            method (str): "poisson_bound" (eps Im M(E + i eps), cheap) or "stieltjes". Defaults to "poisson_bound".
        """
        self.eps_grid = np.geomspace(1e-1, 1e-3, 12) if eps_grid is None else np.asarray(eps_grid, dtype=float)
        self.theta = theta
        self.eta_ratio = eta_ratio
        self.method = method

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            windows: list of MeasureWindow,
            local_dimension: fitted slope of ln mass against ln eps (a LogLogFit),
        }
        """
        from .scaling import fit_loglog

        windows = [
            measure_window(cocycle, self.theta, cocycle.energy, float(eps), self.eta_ratio, method=self.method)
            for eps in self.eps_grid
        ]
        fit = fit_loglog([w.eps for w in windows], [w.mass for w in windows])
        return {"windows": windows, "local_dimension": fit}
