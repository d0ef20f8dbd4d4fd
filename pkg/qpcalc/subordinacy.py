"""Power-law subordinacy: half-line solution norms, the accumulation matrices P_(k) and their det profiles."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .base import PrecisionExhaustedError, SpectralCalc
from .cocycle import ORBIT_CHUNK, inverse2
from .output import write_csv

if TYPE_CHECKING:
    from collections.abc import Iterator
    from pathlib import Path

    from .cocycle import ConjugationRecord, QpCocycle

logger = logging.getLogger(__name__)

SIDES = ("+", "-")
# Products are rescaled once an entry exceeds this.
RESCALE = 1e64
# det P is flagged once eps_mach * p11 * p22 / det exceeds this.
CANCELLATION_LIMIT = 1e-6
GRID_RATIO = 1.05
PROFILE_COLUMNS = ("k", "detP_plus", "detP_minus", "invnormP", "normP", "x11", "eps_of_k")


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"Unrecognized {side=}, must be one of {SIDES}")


def _factors(c: QpCocycle, theta: float, side: str, start: int, count: int) -> np.ndarray:
    """Step matrices m = start, ..., start + count - 1.

    The + side steps with A(theta + m alpha), so that the product of the first m maps (u(1), u(0)) to
    (u(m+1), u(m)). The - side steps with A(theta + (1 - m) alpha)^{-1}, mapping (u(1), u(0)) to (u(1-m), u(-m)).
    """
    m = np.arange(start, start + count, dtype=float)
    a = float(c.alpha)
    if side == "+":
        return c.evaluate((theta + (m * a) % 1.0) % 1.0)
    return inverse2(c.evaluate((theta + ((1.0 - m) * a) % 1.0) % 1.0))


def _walk(c: QpCocycle, theta: float, side: str, n_steps: int) -> Iterator[tuple[int, float, float, float, float]]:
    for start in range(1, n_steps + 1, ORBIT_CHUNK):
        count = min(ORBIT_CHUNK, n_steps + 1 - start)
        for m, ((a, b), (cc, d)) in enumerate(_factors(c, theta, side, start, count).tolist(), start):
            yield m, a, b, cc, d


def _seed(beta: float) -> tuple[float, float]:
    """(u(1), u(0)) for the boundary condition u(0) cos(beta) + u(1) sin(beta) = 0, unit norm."""
    return math.cos(beta), -math.sin(beta)


def solution_norm(c: QpCocycle, theta: float, beta: float, L: float, side: str = "+") -> float:
    """||u_beta||_L on a half line.

    The + side sums |u(n)|^2 for n = 1, ..., floor(L) and the - side for n = 0, -1, ..., -(floor(L) - 1); in both
    cases the next site enters with weight L - floor(L).

    Args:
        c: Cocycle (Schrodinger for the usual interpretation).
        theta: Phase.
        beta: Boundary angle in (-pi/2, pi/2].
        L: Length, >= 1.
        side: "+" or "-".

    Returns:
        The norm (not its square).
    """
    _check_side(side)
    if L < 1:
        raise ValueError(f"{L=} must be >= 1")
    if not -math.pi / 2 < beta <= math.pi / 2:
        raise ValueError(f"{beta=} must lie in (-pi/2, pi/2]")
    n_full = int(math.floor(L))
    frac = L - n_full
    x, y = _seed(beta)
    # + side: x = u(m+1), y = u(m); - side: x = u(1-m), y = u(-m).
    total = x * x if side == "+" else y * y
    last = total
    for m, a, b, cc, d in _walk(c, theta, side, n_full):
        x, y = a * x + b * y, cc * x + d * y
        last = x * x if side == "+" else y * y
        if m < n_full:
            total += last
    norm2 = total + frac * last
    if not math.isfinite(norm2):
        raise PrecisionExhaustedError(f"Solution norm overflowed at {L=}", achieved=n_full)
    return math.sqrt(norm2)


@dataclass(frozen=True)
class PkMatrix:
    """P_(k),+- = sum_{j=1}^k A_{2j-1}^* A_{2j-1}; the true matrix is ``matrix * exp(log_scale)``."""

    k: int
    side: str
    matrix: np.ndarray
    theta: float
    log_scale: float = 0.0

    @property
    def scaled(self) -> np.ndarray:
        return self.matrix * math.exp(self.log_scale)

    def log_det(self) -> float:
        (p11, p12), (_, p22) = self.matrix
        return math.log(p11 * p22 - p12 * p12) + 2 * self.log_scale

    def det(self) -> float:
        return math.exp(self.log_det())

    def eigvals(self) -> tuple[float, float]:
        """(lambda_min, lambda_max) of the unscaled matrix, closed form."""
        (p11, p12), (_, p22) = self.matrix
        lam_max = (p11 + p22 + math.hypot(p11 - p22, 2 * p12)) / 2
        return (p11 * p22 - p12 * p12) / lam_max, lam_max

    def norm(self) -> float:
        return self.eigvals()[1] * math.exp(self.log_scale)

    def inv_norm(self) -> float:
        """||P^{-1}|| = lambda_max / det."""
        return 1 / (self.eigvals()[0] * math.exp(self.log_scale))

    def quadratic_form(self, beta: float) -> float:
        """<P u~_beta, u~_beta> with u~_beta = (u(1), u(0))."""
        v = np.array(_seed(beta))
        return float(v @ self.scaled @ v)


def _pk_stream(c: QpCocycle, theta: float, side: str, k_max: int) -> Iterator[tuple[int, float, float, float, float]]:
    """Yield (k, p11, p12, p22, log_scale) for k = 1, ..., k_max in one pass of 2 k_max - 1 steps."""
    m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    p11 = p12 = p22 = 0.0
    log_scale = 0.0
    for m, a, b, cc, d in _walk(c, theta, side, 2 * k_max - 1):
        m00, m01, m10, m11 = a * m00 + b * m10, a * m01 + b * m11, cc * m00 + d * m10, cc * m01 + d * m11
        if m % 2 == 0:
            continue
        p11 += m00 * m00 + m10 * m10
        p12 += m00 * m01 + m10 * m11
        p22 += m01 * m01 + m11 * m11
        big = max(abs(m00), abs(m01), abs(m10), abs(m11))
        if big > RESCALE:
            r = 1.0 / big
            m00, m01, m10, m11 = m00 * r, m01 * r, m10 * r, m11 * r
            p11, p12, p22 = p11 * r * r, p12 * r * r, p22 * r * r
            log_scale += 2 * math.log(big)
        yield (m + 1) // 2, p11, p12, p22, log_scale


def _exhausted(p11: float, p12: float, p22: float) -> bool:
    det = p11 * p22 - p12 * p12
    return det <= 0 or np.finfo(float).eps * p11 * p22 / det > CANCELLATION_LIMIT


def pk(c: QpCocycle, theta: float, k: int, side: str = "+") -> PkMatrix:
    """The exact partial sum P_(k),side.

    Args:
        c: Cocycle.
        theta: Phase.
        k: Number of terms, >= 1.
        side: "+" or "-".

    Returns:
        PkMatrix
    """
    _check_side(side)
    if k < 1:
        raise ValueError(f"{k=} must be >= 1")
    *_, (kk, p11, p12, p22, log_scale) = _pk_stream(c, theta, side, k)
    return PkMatrix(kk, side, np.array([[p11, p12], [p12, p22]]), theta, log_scale)


def pk_identity_check(c: QpCocycle, theta: float, k: int, beta: float, side: str = "+") -> float:
    """Relative gap between <P_(k) u~_beta, u~_beta> and ||u_beta||_{2k}^2."""
    form = pk(c, theta, k, side).quadratic_form(beta)
    norm2 = solution_norm(c, theta, beta, 2 * k, side) ** 2
    return abs(form - norm2) / norm2


def inf_beta_product(c: QpCocycle, theta: float, k: int, side: str = "+", n_beta: int = 2000) -> float:
    """min over a dense beta grid of ||u_beta||_{2k}^2 ||u_{beta + pi/2}||_{2k}^2, computed from solution norms."""
    best = math.inf
    for beta in np.linspace(-math.pi / 2, 0, n_beta, endpoint=False) + math.pi / (2 * n_beta):
        b1, b2 = float(beta), float(beta) + math.pi / 2
        prod = solution_norm(c, theta, b1, 2 * k, side) ** 2 * solution_norm(c, theta, b2, 2 * k, side) ** 2
        best = min(best, prod)
    return best


@dataclass(frozen=True)
class SubordinacyProfile:
    """det/norm curves of P_(k),+- on a geometric k grid together with eps(k) = (det P_(k),+)^{-1/2}.

    ``x11`` is the first entry of B(theta+alpha)^T P_(k),+ B(theta+alpha) when a conjugator B was supplied, else NaN.
    ``truncated_at`` is the first grid k at which float cancellation made det P unreliable (the curves stop there).
    """

    theta: float
    ks: np.ndarray
    det_plus: np.ndarray
    det_minus: np.ndarray
    inv_norm_plus: np.ndarray
    norm_plus: np.ndarray
    x11: np.ndarray
    eps_of_k: np.ndarray
    truncated_at: int | None = None

    def slope(self, k_lo: float, k_hi: float, side: str = "+") -> float:
        """Least-squares slope of ln det P_(k) against ln k over k_lo <= k <= k_hi."""
        det = self.det_plus if side == "+" else self.det_minus
        mask = (self.ks >= k_lo) & (self.ks <= k_hi) & np.isfinite(det)
        if mask.sum() < 2:
            raise ValueError(f"Fewer than two profile points in [{k_lo}, {k_hi}]")
        return float(np.polyfit(np.log(self.ks[mask]), np.log(det[mask]), 1)[0])

    def rows(self) -> Iterator[tuple]:
        yield from zip(
            self.ks.tolist(),
            self.det_plus.tolist(),
            self.det_minus.tolist(),
            self.inv_norm_plus.tolist(),
            self.norm_plus.tolist(),
            self.x11.tolist(),
            self.eps_of_k.tolist(),
        )

    def to_csv(self, path: str | Path, meta: dict | None = None) -> Path:
        """Columns k, detP_plus, detP_minus, invnormP (= ||P_+^{-1}||^{-1}), normP, x11, eps_of_k."""
        return write_csv(path, PROFILE_COLUMNS, self.rows(), meta=meta)


def geometric_grid(k_max: int, ratio: float = GRID_RATIO) -> np.ndarray:
    """Integers 1 = k_0 < k_1 < ... <= k_max spaced by roughly ``ratio``."""
    n = math.ceil(math.log(k_max) / math.log(ratio)) + 1
    return np.unique(np.rint(np.geomspace(1, k_max, n)).astype(int))


def profile(
    c: QpCocycle,
    theta: float,
    k_max: int,
    grid_ratio: float = GRID_RATIO,
    *,
    conjugator: ConjugationRecord | None = None,
) -> SubordinacyProfile:
    """Subordinacy profile on a geometric k grid.

    Args:
        c: Cocycle.
        theta: Phase.
        k_max: Largest k, >= 16.
        grid_ratio: Ratio between consecutive grid points.
        conjugator: Optional B used for the x11 column.

    Returns:
        SubordinacyProfile
    """
    if k_max < 16:
        raise ValueError(f"{k_max=} must be >= 16")
    grid = geometric_grid(k_max, grid_ratio)
    wanted = set(grid.tolist())
    b = None if conjugator is None else np.asarray(conjugator(theta + float(c.alpha)), dtype=float)

    records: dict[str, dict[int, tuple[float, float, float, float]]] = {"+": {}, "-": {}}
    truncated_at = None
    for side in SIDES:
        for k, p11, p12, p22, log_scale in _pk_stream(c, theta, side, k_max):
            if k not in wanted:
                continue
            if _exhausted(p11, p12, p22):
                truncated_at = k if truncated_at is None else min(truncated_at, k)
                logger.warning("Profile truncated at k=%d on side %s: det P lost to cancellation", k, side)
                break
            records[side][k] = (p11, p12, p22, log_scale)
        logger.debug("Profile side %s: %d grid points", side, len(records[side]))

    ks = np.array(sorted(k for k in records["+"] if k in records["-"]), dtype=int)
    det_plus, det_minus, inv_norm, norm, x11 = [], [], [], [], []
    for k in ks.tolist():
        pp = PkMatrix(k, "+", _sym(*records["+"][k][:3]), theta, records["+"][k][3])
        pm = PkMatrix(k, "-", _sym(*records["-"][k][:3]), theta, records["-"][k][3])
        det_plus.append(pp.det())
        det_minus.append(pm.det())
        inv_norm.append(1 / pp.inv_norm())
        norm.append(pp.norm())
        x11.append(math.nan if b is None else float((b.T @ pp.scaled @ b)[0, 0]))
    det_plus_arr = np.array(det_plus)
    return SubordinacyProfile(
        theta=theta,
        ks=ks,
        det_plus=det_plus_arr,
        det_minus=np.array(det_minus),
        inv_norm_plus=np.array(inv_norm),
        norm_plus=np.array(norm),
        x11=np.array(x11),
        eps_of_k=1 / np.sqrt(det_plus_arr),
        truncated_at=truncated_at,
    )


def _sym(p11: float, p12: float, p22: float) -> np.ndarray:
    return np.array([[p11, p12], [p12, p22]])


def match_length(c: QpCocycle, theta: float, eps: float, side: str = "+", *, k_max: int = 1 << 22) -> float:
    """The length L(eps) solving det P_(k),side = 1 / eps^2 with L = 2k.

    det P_(k) is monotone in k; between integers k it is interpolated linearly, with det P_(0) = 0.

    Args:
        c: Cocycle.
        theta: Phase.
        eps: Scale in (0, 1).
        side: "+" or "-".
        k_max: Search cap.

    Raises:
        ValueError: on eps outside (0, 1) or when the solution has L < 1.
        PrecisionExhaustedError: when k_max is reached or det P is lost to cancellation first.

    Returns:
        L(eps)
    """
    _check_side(side)
    if not 0 < eps < 1:
        raise ValueError(f"{eps=} must lie in (0, 1)")
    log_target = -2 * math.log(eps)
    prev_log_det, prev_k = -math.inf, 0
    for k, p11, p12, p22, log_scale in _pk_stream(c, theta, side, k_max):
        if _exhausted(p11, p12, p22):
            raise PrecisionExhaustedError(f"det P lost to cancellation at {k=} before reaching {eps=}", achieved=k)
        log_det = math.log(p11 * p22 - p12 * p12) + 2 * log_scale
        if log_det >= log_target:
            # Interpolate in units of the current det to stay in range.
            target, prev = math.exp(log_target - log_det), math.exp(prev_log_det - log_det)
            k_star = prev_k + (target - prev) / (1.0 - prev) if prev < 1.0 else float(k)
            length = 2 * k_star
            if length < 1:
                raise ValueError(f"{eps=} is too large: L = {length:.3g} < 1")
            return length
        prev_log_det, prev_k = log_det, k
    raise PrecisionExhaustedError(f"det P did not reach 1/eps^2 for {eps=} within {k_max=}", achieved=k_max)


def match_length_minus(c: QpCocycle, theta: float, eps: float, **kwargs: int) -> float:
    """L^-(eps) from det P_(k),- = 1 / eps^2."""
    return match_length(c, theta, eps, "-", **kwargs)


class SubordinacyCalc(SpectralCalc):
    """det P_(k) profile with fitted log-log slope."""

    def __init__(self, *, theta: float = 0.0, k_max: int = 10_000, grid_ratio: float = GRID_RATIO) -> None:
        """
        Args:
            theta (float): Phase. Defaults to 0.
            k_max (int): Largest k. Defaults to 10_000.
            grid_ratio (float): Geometric grid ratio. Defaults to 1.05.
        """
        self.theta = theta
        self.k_max = k_max
        self.grid_ratio = grid_ratio

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            subordinacy_profile: SubordinacyProfile,
            det_slope: slope of ln det P_(k),+ against ln k over the last decade,
        }
        """
        prof = profile(cocycle, self.theta, self.k_max, self.grid_ratio)
        k_hi = prof.ks[-1]
        return {"subordinacy_profile": prof, "det_slope": prof.slope(k_hi / 10, k_hi)}
