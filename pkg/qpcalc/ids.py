"""Integrated density of states by eigenvalue counting and by rotation number, gap labels and gap edges."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .arithmetic import torus_dist
from .base import SpectralCalc
from .cocycle import rotation_number, sturm_rotation
from .output import write_csv, write_json

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from .arithmetic import Frequency
    from .cocycle import PotentialSpec, QpCocycle

logger = logging.getLogger(__name__)

MIN_SIZE = 100
SECTIONS = 16
PLATEAU_SLOPE = 1e-2
PLATEAU_WIDTH = 1e-3
IDS_COLUMNS = ("E", "N_counting", "N_rotation")


def _diagonal(v: PotentialSpec, alpha: float, theta: float, size: int) -> np.ndarray:
    phases = (theta + (np.arange(size, dtype=float) * alpha) % 1.0) % 1.0
    return np.asarray(v.evaluate(phases), dtype=float).reshape(size)


def ids_counting(
    v: PotentialSpec, alpha: Frequency | float, theta: float, energies: float | np.ndarray, size: int
) -> float | np.ndarray:
    """Fraction of eigenvalues below E of the Dirichlet truncation H_N on {0, ..., N - 1}.

    The count is the number of negative pivots in the LDL^T factorization of H_N - E (Sturm sequence), done for all
    energies at once. Changing the boundary condition moves the count by at most 2, i.e. the result by 2/N.

    Args:
        v: Potential.
        alpha: Frequency.
        theta: Phase of site 0.
        energies: One energy or an array of energies.
        size: Truncation size N >= 100.

    Returns:
        N_N(E) with the shape of ``energies``.
    """
    if size < MIN_SIZE:
        raise ValueError(f"Truncation size must be at least {MIN_SIZE}, got {size}.")
    scalar = np.ndim(energies) == 0
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    diag = _diagonal(v, float(alpha), theta, size)
    tiny = np.finfo(float).tiny
    q = diag[0] - e
    count = (q < 0).astype(np.int64)
    for j in range(1, size):
        q = np.where(q == 0, tiny, q)
        q = (diag[j] - e) - 1.0 / q
        count += q < 0
    out = count / size
    return float(out[0]) if scalar else out


def ids_rotation(c: QpCocycle, n: int, theta0: float = 0.0) -> float:
    """N(E) = 1 - 2 rho(E) for a Schrodinger cocycle at its energy."""
    if not c.is_schrodinger:
        raise ValueError("The rotation-number route to the IDS needs a Schrodinger cocycle.")
    return 1.0 - 2.0 * rotation_number(c, n, theta0).value


def ids_rotation_scan(
    v: PotentialSpec, alpha: Frequency | float, energies: np.ndarray, n: int, theta0: float = 0.0
) -> np.ndarray:
    """Vectorized :func:`ids_rotation` over an energy grid."""
    rho, _ = sturm_rotation(v, float(alpha), energies, n, theta0)
    return 1.0 - 2.0 * rho


@dataclass(frozen=True)
class GapLabel:
    """Gap label k with N* = k alpha mod 1, or None when nothing fits within the tolerance."""

    n_star: float
    k: int | None
    residual: float

    @property
    def labelled(self) -> bool:
        return self.k is not None


def gap_label(n_star: float, alpha: Frequency | float, K: int, tol: float) -> GapLabel:
    """Smallest |k| <= K with ||N* - k alpha||_T <= tol; on ties the positive k wins."""
    if not 0.0 <= n_star <= 1.0:
        raise ValueError(f"Plateau value must lie in [0, 1], got {n_star}.")
    a = float(alpha)
    best = math.inf
    for m in range(K + 1):
        for k in (m, -m) if m else (0,):
            r = float(torus_dist(n_star - k * a))
            best = min(best, r)
            if r <= tol:
                return GapLabel(n_star, k, r)
    return GapLabel(n_star, None, best)


def locate_gap_edge(
    v: PotentialSpec,
    alpha: Frequency | float,
    k: int,
    bracket: tuple[float, float],
    tol_e: float,
    *,
    n: int = 100_000,
    theta0: float = 0.0,
) -> float:
    """Energy where the IDS leaves the plateau k alpha mod 1.

    Each round evaluates N = 1 - 2 rho at 16 interior points of the bracket and keeps the sub-interval where the
    plateau predicate |N - N*|_T <= 4/n flips, so the bracket shrinks 17-fold per round.

    Args:
        v: Potential.
        alpha: Frequency.
        k: Gap label.
        bracket: (E_lo, E_hi) with exactly one endpoint on the plateau.
        tol_e: Target bracket width.
        n: Rotation-number iterate length; sets the plateau tolerance 4/n.
        theta0: Base phase.

    Returns:
        The bracket endpoint on the plateau side once the bracket is narrower than ``tol_e``.
    """
    a = float(alpha)
    n_star = (k * a) % 1.0
    tol_n = 4.0 / n

    def on_plateau(es: np.ndarray) -> np.ndarray:
        values = ids_rotation_scan(v, a, es, n, theta0)
        return np.asarray([float(torus_dist(x - n_star)) <= tol_n for x in values])

    lo, hi = sorted(bracket)
    flag_lo, flag_hi = on_plateau(np.array([lo, hi]))
    if flag_lo == flag_hi:
        raise ValueError(f"Bracket [{lo}, {hi}] does not straddle the boundary of the plateau N = {n_star}.")
    while hi - lo > tol_e:
        inner = np.linspace(lo, hi, SECTIONS + 2)[1:-1]
        flags = np.concatenate([[flag_lo], on_plateau(inner), [flag_hi]])
        es = np.concatenate([[lo], inner, [hi]])
        i = int(np.flatnonzero(flags[:-1] != flags[1:])[0])
        lo, hi = es[i], es[i + 1]
        flag_lo, flag_hi = flags[i], flags[i + 1]
    edge = float(lo if flag_lo else hi)
    logger.debug("Gap k=%d edge at E=%.15g (bracket width %.3g)", k, edge, hi - lo)
    return edge


@dataclass(frozen=True)
class IdsCurve:
    energies: np.ndarray
    n_counting: np.ndarray
    n_rotation: np.ndarray
    size: int
    discrepancy: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "discrepancy", float(np.max(np.abs(self.n_counting - self.n_rotation), initial=0.0)))

    @property
    def monotone(self) -> bool:
        """Both branches non-decreasing along the (sorted) energy grid."""
        return bool(np.all(np.diff(self.n_counting) >= 0) and np.all(np.diff(self.n_rotation) >= 0))

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.energies.tolist(), self.n_counting.tolist(), self.n_rotation.tolist()))

    def to_csv(self, path: str | Path, meta: dict[str, Any] | None = None) -> Path:
        return write_csv(path, IDS_COLUMNS, self.rows(), meta={"size": self.size, **(meta or {})})

    def as_dict(self) -> dict[str, Any]:
        return {
            "E": self.energies.tolist(),
            "N_counting": self.n_counting.tolist(),
            "N_rotation": self.n_rotation.tolist(),
            "size": self.size,
            "discrepancy": self.discrepancy,
        }


def ids_curve(
    v: PotentialSpec,
    alpha: Frequency | float,
    energies: Sequence[float] | np.ndarray,
    *,
    size: int = 10_000,
    n_rotation: int | None = None,
    theta: float = 0.0,
) -> IdsCurve:
    """Both IDS branches on a sorted energy grid."""
    es = np.sort(np.asarray(energies, dtype=float))
    counting = np.asarray(ids_counting(v, alpha, theta, es, size))
    rotation = ids_rotation_scan(v, alpha, es, n_rotation or size, theta)
    curve = IdsCurve(es, counting, rotation, size)
    logger.info("IDS on %d energies: max counting/rotation discrepancy %.3g", len(es), curve.discrepancy)
    return curve


def find_plateaus(
    energies: np.ndarray,
    values: np.ndarray,
    *,
    slope_tol: float = PLATEAU_SLOPE,
    min_width: float = PLATEAU_WIDTH,
) -> list[tuple[float, float, float]]:
    """Maximal runs where dN/dE < slope_tol that are wider than min_width.

    Returns:
        (E_left, E_right, N*) per plateau, N* being the mean of the run.
    """
    es = np.asarray(energies, dtype=float)
    ns = np.asarray(values, dtype=float)
    flat = np.diff(ns) / np.diff(es) < slope_tol
    plateaus = []
    start = None
    for i, f in enumerate(np.append(flat, False)):
        if f and start is None:
            start = i
        elif not f and start is not None:
            left, right = es[start], es[i]
            if right - left > min_width:
                plateaus.append((float(left), float(right), float(np.mean(ns[start : i + 1]))))
            start = None
    return plateaus


def gap_report(
    curve: IdsCurve, alpha: Frequency | float, *, K: int = 30, tol: float | None = None
) -> list[dict[str, Any]]:
    """Label every observed plateau of the rotation branch.

    Returns:
        List of {k, N_star, E_left, E_right, residual}; k is None for unlabelled plateaus.
    """
    tol = tol if tol is not None else max(1e-4, 4.0 / curve.size)
    report = []
    for left, right, n_star in find_plateaus(curve.energies, curve.n_rotation):
        label = gap_label(min(max(n_star, 0.0), 1.0), alpha, K, tol)
        if not label.labelled:
            logger.warning("Plateau N*=%.6f on [%.6f, %.6f] has no label with |k| <= %d", n_star, left, right, K)
        report.append({"k": label.k, "N_star": n_star, "E_left": left, "E_right": right, "residual": label.residual})
    return report


def write_gap_report(path: str | Path, report: list[dict[str, Any]]) -> Path:
    return write_json(path, report)


class IdsCalc(SpectralCalc):
    """Integrated density of states calculator. The energy of the input cocycle is ignored."""

    def __init__(
        self,
        *,
        energies: Sequence[float] | np.ndarray = tuple(np.linspace(-3.0, 3.0, 601)),
        size: int = 10_000,
        theta: float = 0.0,
        max_label: int = 30,
    ) -> None:
        """
        Args:
            energies (Sequence[float]): Energy grid. Defaults to 601 points on [-3, 3].
            size (int): Truncation size for the counting branch and iterate length for the rotation branch.
                Defaults to 10_000.
            theta (float): Phase. Defaults to 0.
            max_label (int): Largest |k| tried when labelling plateaus. Defaults to 30.
        """
        self.energies = np.asarray(energies, dtype=float)
        self.size = size
        self.theta = theta
        self.max_label = max_label

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            ids_curve: IdsCurve with both branches,
            gaps: list of {k, N_star, E_left, E_right, residual},
        }
        """
        curve = ids_curve(cocycle.potential, cocycle.alpha, self.energies, size=self.size, theta=self.theta)
        return {"ids_curve": curve, "gaps": gap_report(curve, cocycle.alpha, K=self.max_label)}
