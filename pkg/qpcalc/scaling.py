"""Scaling laws for local spectral measure and det P_(k), and log-log fitting of measured data against them.

Every law here is a closed-form function of the resonance data (|k_s|, eta_n) and a decay rate h. Exponentials of
the window endpoints overflow double precision long before the resonances get interesting, so every function accepts
``log_scale=True`` to take ln(1/eps) (or ln x) instead of eps (or x) itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
from scipy import stats
from sklearn.metrics import r2_score

from .output import write_csv

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from .arithmetic import Frequency, ResonanceSequence

logger = logging.getLogger(__name__)

# Relative slack on window endpoints so values computed at an endpoint do not fall off the window.
ENDPOINT_SLACK = 1e-12
PREDICTOR_COLUMNS = ("eps", "f_predicted", "window_id", "branch")
BRANCHES = ("weak", "resonant", "bridge", "tail", "uncovered")


def _log_inv(eps: float, log_scale: bool) -> float:
    if log_scale:
        return float(eps)
    if not eps > 0:
        raise ValueError(f"{eps=} must be positive")
    return -math.log(eps)


def _in_range(x: float, lo: float, hi: float) -> bool:
    slack = ENDPOINT_SLACK * max(1.0, abs(lo), abs(hi) if math.isfinite(hi) else 0.0)
    return lo - slack <= x <= hi + slack


def _f_branches(L: float, h: float, n: int, N: float, eta: float) -> tuple[float, str]:
    if eta <= h:
        return 1.0, "weak"
    junction = math.inf if math.isinf(eta) else (2 * eta - h) * n
    # A truncated last window (N unknown) only covers the resonant branch.
    if L <= junction or math.isnan(N) or (not math.isinf(N) and junction >= h * N):
        return 0.5 + h * n / (2 * L), "resonant"
    if math.isinf(N):
        return 1.0 - (eta - h) * n / L, "tail"
    b = (eta - h) * n / (h * N - eta * n)
    return 1.0 / (1.0 - b) - b / (1.0 - b) * h * N / L, "bridge"


def general_f(eps: float, h: float, n: int, N: float, eta_n: float, *, log_scale: bool = False) -> float:
    """Exponent f(eps) inside one resonance window ln(1/eps) in [hn, hN].

    Args:
        eps: Window half-width, or ln(1/eps) when ``log_scale``.
        h: Decay rate of the resonance windows.
        n: |k_s|, size of the current resonance.
        N: |k_{s+1}|, size of the next one; math.inf when there is none.
        eta_n: Resonance strength -ln||phase - k_s alpha|| / |k_s|; math.inf for an exact hit.
        log_scale: Interpret ``eps`` as ln(1/eps).

    Returns:
        1 for weak resonances (eta_n <= h). Otherwise 1/2 + hn / (2 ln(1/eps)) up to ln(1/eps) = (2 eta_n - h) n,
        then 1/(1 - b) - b/(1 - b) hN / ln(1/eps) with b = (eta_n - h) n / (hN - eta_n n), or
        1 - (eta_n - h) n / ln(1/eps) when N is infinite.
    """
    L = _log_inv(eps, log_scale)
    if not _in_range(L, h * n, h * N):
        raise ValueError(f"ln(1/eps)={L:.6g} lies outside the window [{h * n:.6g}, {h * N:.6g}]")
    return _f_branches(L, h, n, N, eta_n)[0]


def psi(x: float, n: int, N: float, eta_n: float, h: float, *, log_scale: bool = False) -> float:
    """Exponent psi with det P_(k) ~ k^psi(k) on [e^{hn}, e^{hN}].

    Continuous, equal to 4 - 2h/eta_n at ln x = eta_n n, tapering linearly in ln x to exactly 2 at ln x = hN.
    """
    lx = float(x) if log_scale else math.log(x)
    if not _in_range(lx, h * n, h * N):
        raise ValueError(f"ln x={lx:.6g} lies outside [{h * n:.6g}, {h * N:.6g}]")
    if eta_n <= h:
        return 2.0
    if math.isinf(eta_n) or lx <= eta_n * n:
        return 4.0 - 2.0 * h * n / lx
    taper = 1.0 if math.isinf(N) else 1.0 - (lx - eta_n * n) / (h * N - eta_n * n)
    return 2.0 + (2.0 * eta_n * n - 2.0 * h * n) / lx * taper


def psi_increment(
    x: float, delta_tilde: float, n: int, N: float, eta_n: float, h: float, *, log_scale: bool = False
) -> float:
    """Delta(x, y) = (1 + d) psi(y) - psi(x) for y = x^{1 + d}; the exponent of y^psi(y) / x^psi(x) per ln x."""
    lx = float(x) if log_scale else math.log(x)
    ly = (1.0 + delta_tilde) * lx
    return (1.0 + delta_tilde) * psi(ly, n, N, eta_n, h, log_scale=True) - psi(lx, n, N, eta_n, h, log_scale=True)


@dataclass(frozen=True)
class EtaProfile:
    """Resonance data of one good stage: n = |k_s|, N = |k_{s+1}| and the three decay rates.

    zeta: -ln|nu_n| / n for the off-diagonal entry of the triangular normal form.
    eta_hat: -ln||2 rho_n||_T / n for its rotation.
    eta: -ln||phase - k_s alpha||_T / n for the phase itself.
    math.inf is the flag for a vanishing nu_n or rho_n.
    """

    n: int
    N: float
    zeta: float
    eta_hat: float
    eta: float
    gamma0: float
    h: float

    def __post_init__(self) -> None:
        if self.n < 0 or self.N < self.n:
            raise ValueError(f"Need 0 <= n <= N, got n={self.n}, N={self.N}")

    @property
    def discrepancy(self) -> float:
        """|eta - eta_hat|, nan when exactly one is flagged infinite."""
        if math.isinf(self.eta) and math.isinf(self.eta_hat):
            return 0.0
        return abs(self.eta - self.eta_hat) if not (math.isinf(self.eta) or math.isinf(self.eta_hat)) else math.nan

    @property
    def k_range(self) -> tuple[float, float]:
        """Admissible ln k range [gamma0 n / 5, gamma0 N / 5]."""
        return self.gamma0 * self.n / 5, self.gamma0 * self.N / 5


def eta_n(k: float, prof: EtaProfile, *, log_scale: bool = False) -> float:
    """Raw exponent eta^n(k): 4 - 2 zeta n / ln k up to ln k = eta_hat n, then 2 + 2 (eta_hat - zeta) n / ln k."""
    lk = float(k) if log_scale else math.log(k)
    lo, hi = prof.k_range
    if not _in_range(lk, lo, hi):
        raise ValueError(f"ln k={lk:.6g} lies outside the admissible range [{lo:.6g}, {hi:.6g}]")
    if math.isinf(prof.zeta):
        return -math.inf
    if math.isinf(prof.eta_hat) or lk <= prof.eta_hat * prof.n:
        return 4.0 - 2.0 * prof.zeta * prof.n / lk
    return 2.0 + 2.0 * (prof.eta_hat - prof.zeta) * prof.n / lk


def eta_plus(k: float, prof: EtaProfile, *, log_scale: bool = False) -> float:
    """max(eta^n(k), 2), identically 2 when nu_n vanishes."""
    if math.isinf(prof.zeta):
        lk = float(k) if log_scale else math.log(k)
        lo, hi = prof.k_range
        if not _in_range(lk, lo, hi):
            raise ValueError(f"ln k={lk:.6g} lies outside the admissible range [{lo:.6g}, {hi:.6g}]")
        return 2.0
    return max(eta_n(k, prof, log_scale=log_scale), 2.0)


class ScalingValue(NamedTuple):
    f: float
    window_id: int
    branch: str


@dataclass(frozen=True)
class ScalingWindow:
    """ln(1/eps) in [h n, cover_hi]; cover_hi is h N when the next resonance is known."""

    index: int
    n: int
    N: float
    eta: float
    cover_hi: float

    def b(self, h: float) -> float:
        if self.eta <= h or math.isinf(self.N) or math.isinf(self.eta):
            return 0.0
        return (self.eta - h) * self.n / (h * self.N - self.eta * self.n)


@dataclass(frozen=True)
class ScalingLaw:
    """Piecewise exponent f over a run of resonance windows.

    kind is "amo", "general" or "ak"; h is the effective window rate (-ln lambda, h or 2 pi h respectively).
    """

    kind: str
    h: float
    windows: tuple[ScalingWindow, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("amo", "general", "ak"):
            raise ValueError(f"Unrecognized kind={self.kind!r}, must be one of ('amo', 'general', 'ak')")
        if not self.h > 0:
            raise ValueError(f"Window rate must be positive, got h={self.h}")

    @staticmethod
    def _truncated_cover(h: float, n: int, eta: float, bound: float | None) -> float:
        if eta > h:
            return math.inf if math.isinf(eta) else (2 * eta - h) * n
        return h * n if bound is None else h * bound

    @classmethod
    def from_sizes(
        cls,
        kind: str,
        h: float,
        sizes: Sequence[int],
        etas: Sequence[float],
        *,
        last_N: float | None = None,
        search_bound: float | None = None,
    ) -> ScalingLaw:
        """Windows between consecutive resonance sizes.

        The last window runs to ``last_N`` when it is known (math.inf for a final exact hit). Otherwise only the
        part of it that does not depend on the next resonance is covered: the resonant branch, or up to
        h * search_bound for a weak one, since no resonance was found below the search bound.
        """
        if len(sizes) != len(etas) or not sizes:
            raise ValueError("Need one eta per resonance size and at least one resonance.")
        windows = []
        for i, (n, eta) in enumerate(zip(sizes, etas)):
            if i + 1 < len(sizes):
                N = float(sizes[i + 1])
                windows.append(ScalingWindow(i, int(n), N, eta, h * N))
            elif last_N is not None:
                windows.append(ScalingWindow(i, int(n), last_N, eta, h * last_N))
            else:
                cover = cls._truncated_cover(h, int(n), eta, search_bound)
                windows.append(ScalingWindow(i, int(n), math.nan, eta, cover))
        return cls(kind, h, tuple(windows))

    @classmethod
    def from_resonances(cls, res: ResonanceSequence, h: float, *, kind: str = "general") -> ScalingLaw:
        """Law built from the nonzero resonances of a phase (the IDS value for the AMO)."""
        entries = [e for e in res if e.k != 0]
        if not entries:
            raise ValueError("The resonance sequence has no nonzero resonance to open a window.")
        last_N = math.inf if entries[-1].exact else None
        return cls.from_sizes(
            kind,
            h,
            [abs(e.k) for e in entries],
            [math.inf if e.exact else float(e.eta) for e in entries],
            last_N=last_N,
            search_bound=res.search_bound,
        )

    @classmethod
    def for_amo(cls, coupling: float, res: ResonanceSequence) -> ScalingLaw:
        if not 0 < coupling < 1:
            raise ValueError(f"The almost Mathieu law needs 0 < coupling < 1, got {coupling}")
        return cls.from_resonances(res, -math.log(coupling), kind="amo")

    @classmethod
    def for_anosov_katok(cls, ks: Sequence[int], h: float, delta: float) -> ScalingLaw:
        """Anosov-Katok law: rate 2 pi h and strength delta in every window."""
        sizes = sorted({abs(int(k)) for k in ks if k})
        return cls.from_sizes("ak", 2 * math.pi * h, sizes, [delta] * len(sizes))

    @property
    def eps_star(self) -> float:
        """Largest covered eps, e^{-h |k_1|}."""
        return math.exp(-self.h * self.windows[0].n)

    def junctions(self) -> list[float]:
        """ln(1/eps) of every branch switch and window boundary, in order."""
        points = []
        for w in self.windows:
            points.append(self.h * w.n)
            if self.h < w.eta < math.inf:
                points.append((2 * w.eta - self.h) * w.n)
        return sorted(points)

    def evaluate(self, eps: float, *, log_scale: bool = False) -> ScalingValue:
        L = _log_inv(eps, log_scale)
        for w in self.windows:
            hi = w.cover_hi
            if _in_range(L, self.h * w.n, hi):
                f, branch = _f_branches(L, self.h, w.n, w.N, w.eta)
                return ScalingValue(f, w.index, branch)
        return ScalingValue(math.nan, -1, "uncovered")

    def evaluate_many(self, eps: Sequence[float] | np.ndarray, *, log_scale: bool = False) -> list[ScalingValue]:
        return [self.evaluate(float(e), log_scale=log_scale) for e in np.asarray(eps, dtype=float)]

    def to_csv(
        self, path: str | Path, eps: Sequence[float] | np.ndarray, *, meta: dict[str, Any] | None = None
    ) -> Path:
        rows = [(float(e), *self.evaluate(float(e))) for e in eps]
        return write_csv(path, PREDICTOR_COLUMNS, rows, meta={"law": self.kind, "h": self.h, **(meta or {})})

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "h": self.h,
            "windows": [
                {"n": w.n, "N": w.N, "eta": w.eta, "cover_hi": w.cover_hi, "b": w.b(self.h)} for w in self.windows
            ],
        }


def _covered(law: ScalingLaw, eps: float, log_scale: bool) -> float:
    value = law.evaluate(eps, log_scale=log_scale)
    if value.branch == "uncovered":
        raise ValueError(f"eps={eps!r} is not covered by the resonance data (log_scale={log_scale})")
    return value.f


def amo_f(eps: float, coupling: float, res: ResonanceSequence, *, log_scale: bool = False) -> float:
    """Almost Mathieu exponent from the resonances of N(E): the general law with h = -ln(coupling)."""
    return _covered(ScalingLaw.for_amo(coupling, res), eps, log_scale)


def ak_f(eps: float, h: float, delta: float, k_seq: Sequence[int], *, log_scale: bool = False) -> float:
    """Anosov-Katok exponent: windows at the scheduled resonances with rate 2 pi h and strength delta."""
    return _covered(ScalingLaw.for_anosov_katok(k_seq, h, delta), eps, log_scale)


def dislocation_gap(law: ScalingLaw, eps: float, tau: float, *, log_scale: bool = False) -> float:
    """f(eps^{1 + tau}) - f(eps); nan if either point is uncovered."""
    if not 0 <= tau < 1:
        raise ValueError(f"{tau=} must lie in [0, 1)")
    L = _log_inv(eps, log_scale)
    a = law.evaluate(L, log_scale=True)
    b = law.evaluate((1 + tau) * L, log_scale=True)
    return b.f - a.f


def local_dimensions(coupling: float, delta: float, gap_edge: bool = False) -> tuple[float, float]:
    """(lower, upper) local dimension of the almost Mathieu spectral measure at an energy in the spectrum.

    Gap edges (and the delta = inf convention) give (1/2, 1/2); otherwise the lower dimension is
    delta / max(2 delta + ln(coupling), delta) and the upper one is 1.
    """
    if gap_edge or math.isinf(delta):
        return 0.5, 0.5
    if not 0 < coupling < 1:
        raise ValueError(f"Need 0 < coupling < 1, got {coupling}")
    if delta <= 0:
        return 1.0, 1.0
    return delta / max(2 * delta + math.log(coupling), delta), 1.0


class StratifiedBound(NamedTuple):
    exponent: float
    case: str


def stratified_bound(delta: float, two_pi_h: float) -> StratifiedBound:
    """Upper Holder exponent of mu(E - eps, E + eps) and of N(E + eps) - N(E - eps) at a subcritical energy."""
    if delta < 0:
        raise ValueError(f"{delta=} must be non-negative")
    if math.isinf(delta):
        return StratifiedBound(0.5, "gap_edge")
    if delta < two_pi_h:
        return StratifiedBound(1.0, "lipschitz")
    return StratifiedBound(delta / (2 * delta - two_pi_h), "resonant")


def holder_exponent(delta: float, two_pi_h: float) -> float:
    """Exponent of :func:`stratified_bound`: 1/2 at gap edges, 1 below 2 pi h, delta / (2 delta - 2 pi h) above."""
    return stratified_bound(delta, two_pi_h).exponent


class ReducibleScaling(NamedTuple):
    det_exponent: float
    inv_norm_exponent: float
    measure_exponent: float


def reducible_prediction(kind: str) -> ReducibleScaling:
    """Growth of det P_(k) and ||P_(k)^-1||^-1 in k, and the measure exponent, for reducible cocycles.

    kind is "rotation" (conjugate to a constant rotation) or "parabolic" (conjugate to [[1, nu], [0, 1]], nu != 0).
    """
    if kind == "rotation":
        return ReducibleScaling(2.0, 1.0, 1.0)
    if kind == "parabolic":
        return ReducibleScaling(4.0, 1.0, 0.5)
    raise ValueError(f"Unrecognized {kind=}, must be one of ('rotation', 'parabolic')")


@dataclass(frozen=True)
class AmoCase:
    """Which of the three almost Mathieu regimes an IDS value falls in, with the predicted exponents."""

    case: int
    label: int | None
    delta: float
    lower_dim: float
    upper_dim: float
    holder: float

    @property
    def name(self) -> str:
        return {1: "lipschitz", 2: "resonant", 3: "gap_edge"}[self.case]


def amo_case(
    coupling: float,
    n_star: float,
    alpha: Frequency,
    K: int,
    tol: float,
    *,
    delta: float | None = None,
) -> AmoCase:
    """Classify N(E) = n_star for the subcritical almost Mathieu operator.

    Case 3 when n_star carries a gap label |k| <= K within tol, case 1 when the resonance strength delta is below
    -ln(coupling), case 2 otherwise. delta is estimated from |k| <= K unless given.
    """
    from .arithmetic import delta_exponent
    from .ids import gap_label

    if not 0 < coupling < 1:
        raise ValueError(f"Need 0 < coupling < 1, got {coupling}")
    h = -math.log(coupling)
    label = gap_label(n_star, alpha, K, tol)
    if label.labelled:
        return AmoCase(3, label.k, math.inf, 0.5, 0.5, 0.5)
    if delta is None:
        delta = delta_exponent(alpha, n_star, K).lower_bound
    lower, upper = local_dimensions(coupling, delta)
    if delta < h:
        return AmoCase(1, None, delta, 1.0, 1.0, 1.0)
    return AmoCase(2, None, delta, lower, upper, lower)


@dataclass(frozen=True)
class LogLogFit:
    """Least-squares fit ln(mass) = slope ln(eps) + intercept with a two-sided t confidence half-width."""

    slope: float
    intercept: float
    band: float
    r2: float
    n_samples: int
    residuals: np.ndarray

    def contains(self, value: float) -> bool:
        return abs(value - self.slope) <= self.band

    def as_dict(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "band": self.band,
            "r2": self.r2,
            "n_samples": self.n_samples,
        }


def fit_loglog(
    eps: Sequence[float] | np.ndarray,
    mass: Sequence[float] | np.ndarray,
    *,
    min_samples: int = 8,
    min_decades: float = 1.5,
    confidence: float = 0.95,
) -> LogLogFit:
    """Slope of ln(mass) against ln(eps).

    Args:
        eps: Window half-widths.
        mass: Measured masses, all positive.
        min_samples: Fewest samples accepted.
        min_decades: Fewest decades of eps accepted.
        confidence: Level of the slope band.

    Returns:
        LogLogFit
    """
    x = np.log(np.asarray(eps, dtype=float))
    m = np.asarray(mass, dtype=float)
    if len(x) != len(m):
        raise ValueError("eps and mass must have the same length.")
    if len(x) < min_samples:
        raise ValueError(f"Need at least {min_samples} samples, got {len(x)}")
    if np.any(m <= 0):
        raise ValueError("Masses must be positive for a log-log fit.")
    decades = (x.max() - x.min()) / math.log(10)
    if decades < min_decades:
        raise ValueError(f"eps spans {decades:.2f} decades, need at least {min_decades}")
    y = np.log(m)
    res = stats.linregress(x, y)
    predicted = res.slope * x + res.intercept
    band = float(stats.t.ppf(0.5 + confidence / 2, len(x) - 2) * res.stderr)
    fit = LogLogFit(float(res.slope), float(res.intercept), band, float(r2_score(y, predicted)), len(x), y - predicted)
    logger.debug("log-log slope %.6f +- %.2g (r2=%.4f, %d samples)", fit.slope, fit.band, fit.r2, fit.n_samples)
    return fit


def fit_loglog_windows(
    eps: Sequence[float] | np.ndarray,
    mass: Sequence[float] | np.ndarray,
    windows: Sequence[tuple[float, float]],
    **kwargs: Any,
) -> list[LogLogFit]:
    """One :func:`fit_loglog` per (eps_lo, eps_hi) window."""
    e = np.asarray(eps, dtype=float)
    m = np.asarray(mass, dtype=float)
    fits = []
    for lo, hi in windows:
        mask = (e >= lo) & (e <= hi)
        fits.append(fit_loglog(e[mask], m[mask], **kwargs))
    return fits
