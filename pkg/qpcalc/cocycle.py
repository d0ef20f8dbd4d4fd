"""Quasi-periodic cocycles (alpha, A): construction, iterates, Lyapunov exponent, fibered rotation number,
conjugation with degree bookkeeping and a uniform-hyperbolicity probe."""

from __future__ import annotations

import abc
import functools
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
from mpmath import mp, mpf
from sklearn.metrics import r2_score

from .base import SpectralCalc
from .linalg2 import Mat2

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from .arithmetic import Frequency

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
# Float products are renormalized after this many steps; Schrodinger steps grow by at most |E| + ||v|| + 1.
RENORM_EVERY = 8
# Orbit matrices are materialized in chunks of this size.
ORBIT_CHUNK = 1 << 16
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class PotentialSpec:
    """Real trigonometric potential v(x) = constant + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x).

    Args:
        cos_coeffs: a_1, a_2, ...
        sin_coeffs: b_1, b_2, ...
        constant: Mean value.
        band: Width h of the strip |Im x| < h on which the potential is treated as analytic (h' < h in the analysis).
            Trigonometric polynomials are entire, so this is the band the downstream scaling laws use.
        name: Label used in output files.
    """

    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    constant: float = 0.0
    band: float = math.inf
    name: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "cos_coeffs", tuple(float(a) for a in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(b) for b in self.sin_coeffs))
        if not self.band > 0:
            raise ValueError(f"{self.band=} must be positive")

    @classmethod
    def free(cls) -> PotentialSpec:
        """v = 0."""
        return cls(name="free")

    @classmethod
    def almost_mathieu(cls, coupling: float) -> PotentialSpec:
        """v(x) = 2 lambda cos(2 pi x). For 0 < lambda < 1 the band is the subcritical radius -ln(lambda) / 2 pi."""
        if coupling <= 0:
            raise ValueError(f"{coupling=} must be positive")
        band = -math.log(coupling) / (2 * math.pi) if coupling < 1 else math.inf
        return cls(cos_coeffs=(2 * coupling,), band=band, name="amo")

    @property
    def is_constant(self) -> bool:
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    def evaluate(self, x: float | np.ndarray | mpf) -> float | np.ndarray | mpf:
        """v(x) for floats, arrays or mpmath floats."""
        if isinstance(x, mpf):
            val = mpf(self.constant)
            for k, a in enumerate(self.cos_coeffs, 1):
                val += a * mp.cos(2 * mp.pi * k * x)
            for k, b in enumerate(self.sin_coeffs, 1):
                val += b * mp.sin(2 * mp.pi * k * x)
            return val
        arr = np.asarray(x, dtype=float)
        out = np.full(arr.shape, self.constant)
        for k, a in enumerate(self.cos_coeffs, 1):
            out += a * np.cos(TWO_PI * k * arr)
        for k, b in enumerate(self.sin_coeffs, 1):
            out += b * np.sin(TWO_PI * k * arr)
        return out if out.ndim else float(out)

    def sup_norm(self, h: float | None = None) -> float:
        """Upper estimate of sup_{|Im x| < h} |v(x)|, with h defaulting to the band."""
        h = self.band if h is None else h
        total = abs(self.constant)
        for k, (a, b) in enumerate(itertools.zip_longest(self.cos_coeffs, self.sin_coeffs, fillvalue=0.0), 1):
            if a or b:
                total += (abs(a) + abs(b)) * math.cosh(2 * math.pi * k * h)
        return total

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "constant": self.constant,
            "cos": list(self.cos_coeffs),
            "sin": list(self.sin_coeffs),
            "band": self.band if math.isfinite(self.band) else "inf",
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @classmethod
    def from_json(cls, s: str) -> PotentialSpec:
        d = json.loads(s)
        return cls(tuple(d["cos"]), tuple(d["sin"]), d["constant"], float(d["band"]), d["name"])


def inverse2(m: np.ndarray) -> np.ndarray:
    """Closed-form inverse of stacked 2x2 matrices."""
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out / det[..., None, None]


def _norm2(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def rotation_matrix(phi: float | np.ndarray) -> np.ndarray:
    """Counterclockwise rotation R(phi), stacked over the shape of phi."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


class CocycleGenerator(abc.ABC):
    """Map theta -> A(theta) in SL(2, R)."""

    @abc.abstractmethod
    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        """A(theta) as a (..., 2, 2) float array."""

    def evaluate_mp(self, theta: float | mpf) -> Mat2:
        """A(theta) at software precision; subclasses without an exact form fall back to float64."""
        return Mat2.from_numpy(self.evaluate(np.asarray(float(theta))), kind="sl2R")


@dataclass(frozen=True)
class Schrodinger(CocycleGenerator):
    """S_E^v(theta) = [[E - v(theta), -1], [1, 0]]."""

    potential: PotentialSpec
    energy: float

    def diagonal(self, theta: np.ndarray) -> np.ndarray:
        """E - v(theta)."""
        return self.energy - np.asarray(self.potential.evaluate(np.asarray(theta, dtype=float)))

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        a = self.diagonal(theta)
        out = np.zeros((*a.shape, 2, 2))
        out[..., 0, 0] = a
        out[..., 0, 1] = -1.0
        out[..., 1, 0] = 1.0
        return out

    def evaluate_mp(self, theta: float | mpf) -> Mat2:
        a = mpf(self.energy) - self.potential.evaluate(mpf(theta))
        return Mat2(a, -1, 1, 0, "sl2R")


@dataclass(frozen=True)
class AlmostMathieu(Schrodinger):
    """Schrodinger cocycle of v(x) = 2 lambda cos(2 pi x)."""

    potential: PotentialSpec = field(init=False)
    coupling: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "potential", PotentialSpec.almost_mathieu(self.coupling))


@dataclass(frozen=True, eq=False)
class FourierSeries(CocycleGenerator):
    """A(theta) = sum_k A_k e^{2 pi i k theta} with coefficient decay ||A_k|| <= C e^{-2 pi h |k|}.

    Args:
        coefficients: Mapping k -> (2, 2) complex coefficient.
        band: Analyticity band h.
    """

    coefficients: Mapping[int, np.ndarray]
    band: float = math.inf

    def __post_init__(self) -> None:
        coeffs = {int(k): np.asarray(v, dtype=complex).reshape(2, 2) for k, v in self.coefficients.items()}
        if not coeffs:
            raise ValueError("FourierSeries needs at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "_modes", np.array(sorted(coeffs), dtype=float))
        object.__setattr__(self, "_stack", np.stack([coeffs[k] for k in sorted(coeffs)]))

    @classmethod
    def from_mat2(cls, coefficients: Mapping[int, Mat2], band: float = math.inf) -> FourierSeries:
        return cls({k: m.to_numpy() for k, m in coefficients.items()}, band)

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        phase = np.exp(2j * np.pi * theta[..., None] * self._modes)  # type: ignore[attr-defined]
        out = np.einsum("...k,kij->...ij", phase, self._stack)  # type: ignore[attr-defined]
        if np.max(np.abs(out.imag), initial=0.0) <= 1e-12 * (1 + np.max(np.abs(out), initial=0.0)):
            return out.real
        return out

    def decay_constant(self) -> float:
        """Fitted C in ||A_k|| <= C e^{-2 pi h |k|}."""
        h = self.band if math.isfinite(self.band) else 0.0
        return max(
            float(np.linalg.norm(m, 2)) * math.exp(2 * math.pi * h * abs(k)) for k, m in self.coefficients.items()
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "band": self.band if math.isfinite(self.band) else "inf",
            "coefficients": [
                {"k": k, "re": m.real.tolist(), "im": m.imag.tolist()} for k, m in sorted(self.coefficients.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @classmethod
    def from_json(cls, s: str) -> FourierSeries:
        d = json.loads(s)
        coeffs = {c["k"]: np.array(c["re"]) + 1j * np.array(c["im"]) for c in d["coefficients"]}
        return cls(coeffs, float(d["band"]))


def _rotation_fn(degree: int, theta: np.ndarray) -> np.ndarray:
    return rotation_matrix(np.pi * degree * np.asarray(theta, dtype=float))


def _identity_fn(theta: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(2), (*np.shape(theta), 2, 2)).copy()


def _inverted_fn(fn: Callable[[np.ndarray], np.ndarray], theta: np.ndarray) -> np.ndarray:
    return inverse2(fn(theta))


@dataclass(frozen=True)
class ConjugationRecord:
    """A conjugator B: R -> SL(2, R) with its degree.

    ``projective`` marks conjugators only defined in PSL(2, R), i.e. B(theta + 1) = -B(theta); the conjugated
    cocycle B(theta + alpha)^{-1} A(theta) B(theta) is still 1-periodic.
    """

    matrix_fn: Callable[[np.ndarray], np.ndarray]
    degree: int = 0
    projective: bool = False

    def __call__(self, theta: float | np.ndarray) -> np.ndarray:
        return self.matrix_fn(np.asarray(theta, dtype=float))

    @classmethod
    def identity(cls) -> ConjugationRecord:
        return cls(_identity_fn)

    @classmethod
    def rotation(cls, degree: int) -> ConjugationRecord:
        """B(theta) = R(pi k theta), projective when k is odd."""
        return cls(functools.partial(_rotation_fn, degree), degree, projective=bool(degree % 2))

    @classmethod
    def from_fourier(cls, series: FourierSeries, degree: int = 0, projective: bool = False) -> ConjugationRecord:
        return cls(series.evaluate, degree, projective)

    def inverse(self) -> ConjugationRecord:
        return ConjugationRecord(functools.partial(_inverted_fn, self.matrix_fn), -self.degree, self.projective)

    def rotation_shift(self, alpha: float) -> float:
        """Expected rho(conjugated) - rho(original) mod 1, i.e. -degree * alpha / 2."""
        return (-self.degree * float(alpha) / 2) % 1.0


@dataclass(frozen=True, eq=False)
class Conjugated(CocycleGenerator):
    """theta -> B(theta + alpha)^{-1} A(theta) B(theta)."""

    base: CocycleGenerator
    record: ConjugationRecord
    alpha: float

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return inverse2(self.record(theta + self.alpha)) @ self.base.evaluate(theta) @ self.record(theta)


@dataclass(frozen=True)
class QpCocycle:
    """A quasi-periodic cocycle (alpha, A).

    Args:
        alpha: Frequency.
        generator: Schrodinger, AlmostMathieu, FourierSeries or Conjugated generator.
        precision_bits: Software precision for mpmath evaluations. Defaults to the frequency's.
    """

    alpha: Frequency
    generator: CocycleGenerator
    precision_bits: int | None = None

    def __post_init__(self) -> None:
        if self.precision_bits is None:
            object.__setattr__(self, "precision_bits", self.alpha.precision_bits)

    @classmethod
    def schrodinger(cls, alpha: Frequency, potential: PotentialSpec, energy: float) -> QpCocycle:
        return cls(alpha, Schrodinger(potential, float(energy)))

    @classmethod
    def almost_mathieu(cls, alpha: Frequency, coupling: float, energy: float) -> QpCocycle:
        return cls(alpha, AlmostMathieu(float(energy), coupling=coupling))

    @classmethod
    def constant(cls, alpha: Frequency, matrix: np.ndarray | Sequence[Sequence[float]]) -> QpCocycle:
        """theta-independent cocycle."""
        return cls(alpha, FourierSeries({0: np.asarray(matrix, dtype=complex)}))

    @property
    def is_schrodinger(self) -> bool:
        return isinstance(self.generator, Schrodinger)

    @property
    def energy(self) -> float:
        if not isinstance(self.generator, Schrodinger):
            raise ValueError("Only Schrodinger cocycles carry an energy")
        return self.generator.energy

    @property
    def potential(self) -> PotentialSpec:
        if not isinstance(self.generator, Schrodinger):
            raise ValueError("Only Schrodinger cocycles carry a potential")
        return self.generator.potential

    def with_energy(self, energy: float) -> QpCocycle:
        """Same potential and frequency at another energy."""
        return replace(self, generator=replace(self.generator, energy=float(energy)))  # type: ignore[type-var]

    def evaluate(self, theta: float | np.ndarray) -> np.ndarray:
        return self.generator.evaluate(np.asarray(theta, dtype=float))

    __call__ = evaluate

    def evaluate_mp(self, theta: float | mpf) -> Mat2:
        with mp.workprec(self.precision_bits):  # type: ignore[arg-type]
            return self.generator.evaluate_mp(theta)

    def orbit_phases(self, theta: float, n: int, start: int = 0) -> np.ndarray:
        """theta + j alpha mod 1 for j = start, ..., start + n - 1."""
        j = np.arange(start, start + n, dtype=float)
        return (theta + (j * float(self.alpha)) % 1.0) % 1.0

    def orbit(self, theta: float, n: int, start: int = 0) -> np.ndarray:
        """A(theta + j alpha) for j = start, ..., start + n - 1 as an (n, 2, 2) array."""
        return self.evaluate(self.orbit_phases(theta, n, start))

    def det_defect(self, n_samples: int = 64) -> float:
        """max |det A(theta) - 1| on a sampling grid."""
        m = self.evaluate(self.alpha.sampling_grid(n_samples))
        return float(np.max(np.abs(np.linalg.det(m) - 1)))


@dataclass(frozen=True)
class Iterate:
    """A_n(theta) = mantissa * exp(log_scale), stacked over the theta shape."""

    mantissa: np.ndarray
    log_scale: np.ndarray

    def matrix(self) -> np.ndarray:
        return self.mantissa * np.exp(self.log_scale)[..., None, None]

    def log_norm(self) -> np.ndarray:
        """ln ||A_n(theta)|| in the spectral norm."""
        return self.log_scale + np.log(_norm2(self.mantissa))


def _propagate(c: QpCocycle, theta: np.ndarray, n: int, checkpoints: Sequence[int] = ()) -> dict[int, Iterate]:
    """Forward products A(theta + (n-1) alpha) ... A(theta) for n >= 0, recorded at the given step counts."""
    theta = np.asarray(theta, dtype=float)
    wanted = {int(k) for k in checkpoints if 0 <= k <= n} | {n}
    m = np.broadcast_to(np.eye(2), (*theta.shape, 2, 2)).astype(float).copy()
    log_scale = np.zeros(theta.shape)
    out: dict[int, Iterate] = {}
    if 0 in wanted:
        out[0] = Iterate(m.copy(), log_scale.copy())
    a = float(c.alpha)
    gen = c.generator
    for j in range(n):
        phase = (theta + (j * a) % 1.0) % 1.0
        if isinstance(gen, Schrodinger):
            diag = gen.diagonal(phase)[..., None]
            top = diag * m[..., 0, :] - m[..., 1, :]
            m[..., 1, :] = m[..., 0, :]
            m[..., 0, :] = top
        else:
            m = gen.evaluate(phase) @ m
        if (j + 1) % RENORM_EVERY == 0 or j + 1 in wanted:
            s = np.max(np.abs(m), axis=(-2, -1))
            m = m / s[..., None, None]
            log_scale = log_scale + np.log(s)
        if j + 1 in wanted:
            out[j + 1] = Iterate(m.copy(), log_scale.copy())
    return out


def iterate(c: QpCocycle, theta: float | np.ndarray, n: int) -> Iterate:
    """The n-th iterate A_n(theta), two-sided.

    A_n(theta) = A(theta + (n-1) alpha) ... A(theta) for n >= 1, A_0 = I and A_{-n}(theta) = A_n(theta - n alpha)^{-1}.
    Products are renormalized as they go and the exponent is kept in ``log_scale``.

    Args:
        c: Cocycle.
        theta: Base phase(s).
        n: Any integer.

    Returns:
        Iterate
    """
    theta = np.asarray(theta, dtype=float)
    if n >= 0:
        return _propagate(c, theta, n)[n]
    fwd = _propagate(c, (theta + n * float(c.alpha)) % 1.0, -n)[-n]
    # det A = 1, so the inverse of mantissa * e^s is adj(mantissa) * e^s.
    m = fwd.mantissa
    adj = np.empty_like(m)
    adj[..., 0, 0], adj[..., 1, 1] = m[..., 1, 1], m[..., 0, 0]
    adj[..., 0, 1], adj[..., 1, 0] = -m[..., 0, 1], -m[..., 1, 0]
    return Iterate(adj, fwd.log_scale)


@dataclass(frozen=True)
class LyapunovEstimate:
    """Lyapunov exponent with the raw (1/n) <ln||A_n||> value and the fluctuation |L(n) - L(n/2)|."""

    value: float
    raw: float
    fluctuation: float
    n: int
    n_samples: int


def lyapunov(c: QpCocycle, n: int, theta_samples: int = 256) -> LyapunovEstimate:
    """Lyapunov exponent from theta-averages of ln||A_n(theta)|| on a convergent-denominator grid.

    The reported value is the Cesaro difference (n L(n) - m L(m)) / (n - m) with m = n // 2, which removes the O(1/n)
    bias of the raw average.

    Args:
        c: Cocycle.
        n: Iterate length, >= 1.
        theta_samples: Upper bound on the grid size.

    Returns:
        LyapunovEstimate
    """
    if n < 1:
        raise ValueError(f"{n=} must be >= 1")
    grid = c.alpha.sampling_grid(theta_samples)
    half = n // 2
    its = _propagate(c, grid, n, checkpoints=(half,))
    log_n = its[n].log_norm()
    raw = float(np.mean(log_n)) / n
    if half == 0:
        return LyapunovEstimate(max(raw, 0.0), raw, math.inf, n, grid.size)
    log_half = its[half].log_norm()
    value = float(np.mean(log_n - log_half)) / (n - half)
    fluctuation = abs(raw - float(np.mean(log_half)) / half)
    logger.debug("Lyapunov n=%d raw=%.6g stabilized=%.6g", n, raw, value)
    return LyapunovEstimate(max(value, 0.0), raw, fluctuation, n, grid.size)


@dataclass(frozen=True)
class RotationEstimate:
    """Fibered rotation number with its 1/n error bar and Cesaro drift |rho(n) - rho(n/2)|."""

    value: float
    error: float
    converged: bool
    n: int
    drift: float


def sturm_rotation(
    potential: PotentialSpec, alpha: float, energies: float | np.ndarray, n: int, theta0: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Rotation numbers of Schrodinger cocycles at many energies by Riccati sign counting.

    With t_{j+1} = 1 / (a_j - t_j), a_j = E - v(theta0 + j alpha), the projective lift of the Schrodinger flow
    advances by pi whenever a_j - t_j < 0, so rho = (pi count + arctan t_n - arctan t_0) / (2 pi n). The count is
    non-increasing in E, hence so is rho, and rho lies in [0, 1/2].

    Returns:
        (rho at n, rho at n // 2) as arrays shaped like ``energies``.
    """
    energies = np.asarray(energies, dtype=float)
    half = max(n // 2, 1)
    phases = (theta0 + (np.arange(n, dtype=float) * alpha) % 1.0) % 1.0
    vs = np.asarray(potential.evaluate(phases), dtype=float).reshape(n)
    t = np.zeros(energies.shape)
    count = np.zeros(energies.shape, dtype=np.int64)
    rho_half = np.zeros(energies.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(n):
            d = (energies - vs[j]) - t
            count += d < 0
            t = 1.0 / d
            if j + 1 == half:
                rho_half = (np.pi * count + np.arctan(t)) / (TWO_PI * half)
    rho = (np.pi * count + np.arctan(t)) / (TWO_PI * n)
    return np.clip(rho, 0.0, 0.5), np.clip(rho_half, 0.0, 0.5)


def _angle_rotation(c: QpCocycle, n: int, theta0: float) -> tuple[float, float]:
    """Average principal angular increment of A on the projective line, at n and n // 2 steps."""
    half = max(n // 2, 1)
    x, y = 1.0, 0.0
    total, total_half = 0.0, 0.0
    for start in range(0, n, ORBIT_CHUNK):
        mats = c.orbit(theta0, min(ORBIT_CHUNK, n - start), start).tolist()
        for j, ((a, b), (cc, d)) in enumerate(mats, start):
            u, w = a * x + b * y, cc * x + d * y
            total += math.atan2(x * w - y * u, x * u + y * w)
            r = math.hypot(u, w)
            x, y = u / r, w / r
            if j + 1 == half:
                total_half = total
    return total / (TWO_PI * n), total_half / (TWO_PI * half)


def rotation_number(c: QpCocycle, n: int, theta0: float = 0.0) -> RotationEstimate:
    """Fibered rotation number.

    Schrodinger cocycles use exact Riccati sign counting (rho in [0, 1/2], continuous and non-increasing in E, with
    rho = 1/2 below the spectrum). Other cocycles use the average principal angular increment reduced mod 1, which
    requires A to be homotopic to the identity with steps below pi.

    Args:
        c: Cocycle.
        n: Number of steps, >= 1.
        theta0: Base phase.

    Returns:
        RotationEstimate
    """
    if n < 1:
        raise ValueError(f"{n=} must be >= 1")
    if isinstance(c.generator, Schrodinger):
        rho, rho_half = sturm_rotation(c.generator.potential, float(c.alpha), c.generator.energy, n, theta0)
        value, value_half = float(rho), float(rho_half)
    else:
        value, value_half = _angle_rotation(c, n, theta0)
        value, value_half = value % 1.0, value_half % 1.0
    drift = abs(value - value_half)
    drift = min(drift, 1 - drift)
    converged = drift <= 8.0 / max(n // 2, 1)
    if not converged:
        logger.warning("Rotation number drift %.3g at n=%d is not Cesaro-convergent", drift, n)
    return RotationEstimate(value, 1.0 / n, converged, n, drift)


def conjugate(c: QpCocycle, b: ConjugationRecord, *, n_check: int = 256) -> QpCocycle:
    """The cocycle B(theta + alpha)^{-1} A(theta) B(theta).

    Its rotation number differs from the original by -degree * alpha / 2 mod 1 (see
    :meth:`ConjugationRecord.rotation_shift`).

    Raises:
        ValueError: when B has condition number above 1e12 at a sample point.
    """
    grid = c.alpha.sampling_grid(n_check)
    mats = b(grid)
    cond = _norm2(mats) * _norm2(inverse2(mats))
    if not np.all(np.isfinite(cond)) or np.max(cond) > MAX_CONDITION:
        raise ValueError(f"Near-singular conjugator: condition number {np.max(cond):.3g} exceeds {MAX_CONDITION:.0e}")
    logger.debug("Conjugating by degree %d; expected rotation shift %.6f", b.degree, b.rotation_shift(float(c.alpha)))
    return QpCocycle(c.alpha, Conjugated(c.generator, b, float(c.alpha)), c.precision_bits)


@dataclass(frozen=True)
class UHResult:
    """Outcome of the uniform-hyperbolicity probe; margin is the fitted rate when hyperbolic, else 0."""

    uniformly_hyperbolic: bool
    margin: float
    rate: float
    r2: float
    cone_consistent: bool


def uh_probe(c: QpCocycle, n: int, *, theta_samples: int = 128, min_rate: float = 1e-2) -> UHResult:
    """Probe uniform hyperbolicity.

    Fits the growth rate of min_theta ln||A_m(theta)|| over a ladder of m up to n, and checks that the most
    contracted direction of A_n(theta) and of A_{n/2}(theta) agree (a consistent stable cone field).

    Args:
        c: Cocycle.
        n: Longest iterate, >= 1.
        theta_samples: Upper bound on the theta grid size.
        min_rate: Smallest rate accepted as exponential growth.

    Returns:
        UHResult
    """
    if n < 1:
        raise ValueError(f"{n=} must be >= 1")
    grid = c.alpha.sampling_grid(theta_samples)
    ladder = sorted({int(m) for m in np.geomspace(max(1, n // 16), n, 8)} | {max(n // 2, 1), n})
    its = _propagate(c, grid, n, checkpoints=ladder)
    mins = np.array([np.min(its[m].log_norm()) for m in ladder])
    ms = np.array(ladder, dtype=float)
    if len(ladder) < 2:
        return UHResult(False, 0.0, 0.0, 0.0, False)
    rate, intercept = np.polyfit(ms, mins, 1)
    r2 = float(r2_score(mins, rate * ms + intercept)) if np.ptp(mins) > 0 else 0.0

    def stable_dir(it: Iterate) -> np.ndarray:
        _, _, vh = np.linalg.svd(it.mantissa)
        return vh[..., 1, :]

    s_n, s_half = stable_dir(its[n]), stable_dir(its[max(n // 2, 1)])
    sin_angle = np.abs(s_n[..., 0] * s_half[..., 1] - s_n[..., 1] * s_half[..., 0])
    cone = bool(np.max(sin_angle) <= 1e-3)
    hyperbolic = bool(rate > min_rate and cone and r2 >= 0.9)
    return UHResult(hyperbolic, float(rate) if hyperbolic else 0.0, float(rate), r2, cone)


class LyapunovCalc(SpectralCalc):
    """Lyapunov exponent calculator."""

    def __init__(self, *, n: int = 10_000, theta_samples: int = 256) -> None:
        """
        Args:
            n (int): Iterate length. Defaults to 10_000.
            theta_samples (int): Upper bound on the theta grid size. Defaults to 256.
        """
        self.n = n
        self.theta_samples = theta_samples

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            lyapunov: Cesaro-stabilized estimate,
            lyapunov_raw: (1/n) <ln||A_n||>,
            lyapunov_fluctuation: |L(n) - L(n/2)|,
        }
        """
        est = lyapunov(cocycle, self.n, self.theta_samples)
        return {"lyapunov": est.value, "lyapunov_raw": est.raw, "lyapunov_fluctuation": est.fluctuation}


class RotationCalc(SpectralCalc):
    """Fibered rotation number calculator."""

    def __init__(self, *, n: int = 100_000, theta0: float = 0.0) -> None:
        self.n = n
        self.theta0 = theta0

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            rotation_number: value in [0, 1),
            rotation_error: 1/n error bar,
            rotation_converged: whether rho(n) and rho(n/2) agree,
        }
        """
        est = rotation_number(cocycle, self.n, self.theta0)
        return {"rotation_number": est.value, "rotation_error": est.error, "rotation_converged": est.converged}


class UHCalc(SpectralCalc):
    """Uniform hyperbolicity probe."""

    def __init__(self, *, n: int = 2_000, theta_samples: int = 128, min_rate: float = 1e-2) -> None:
        self.n = n
        self.theta_samples = theta_samples
        self.min_rate = min_rate

    def calc(self, cocycle: QpCocycle) -> dict:
        res = uh_probe(cocycle, self.n, theta_samples=self.theta_samples, min_rate=self.min_rate)
        return {"uniformly_hyperbolic": res.uniformly_hyperbolic, "uh_margin": res.margin, "uh_r2": res.r2}
