"""Continued-fraction and torus arithmetic: frequencies, resonances and engineered phases."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Union

import numpy as np
from joblib import Parallel, delayed
from mpmath import mp, mpf

from .base import PrecisionExhaustedError
from .output import write_csv

if TYPE_CHECKING:
    from collections.abc import Iterator
    from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_PRECISION = 256
MIN_PRECISION = 64
# Fewer digits than this leave a rational that is too coarse to act as an irrational rotation.
MIN_CF_DEPTH = 4
# Convergents are kept while the denominator fits in this many bits.
CONVERGENT_BITS = 128

Real = Union[float, np.ndarray, mpf]


def torus_dist(x: Real) -> Real:
    """Distance to the nearest integer, inf_j |x - j|.

    Works on python floats, numpy arrays and mpmath floats. mpmath inputs are rounded at the ambient mpmath
    precision, so callers wrap this in ``mp.workprec``.

    Args:
        x: Real number(s).

    Returns:
        Value(s) in [0, 1/2] of the same kind as the input.
    """
    if isinstance(x, mpf):
        return abs(x - mp.nint(x))
    if isinstance(x, np.ndarray):
        return np.abs(x - np.rint(x))
    return float(abs(x - round(x)))


def _mods(x: mpf, modulus: int) -> mpf:
    """Signed representative of x modulo `modulus` in [-modulus/2, modulus/2)."""
    return x - modulus * mp.floor(x / modulus + mpf(1) / 2)


@dataclass(frozen=True)
class Frequency:
    """An irrational rotation number given by a finite continued fraction [0; a_1, a_2, ...].

    The value is the rational p_N/q_N of the full expansion, evaluated at ``precision_bits``. Use enough digits that
    |alpha - p_N/q_N| is below the working precision (see :func:`qpcalc.utils.get_named_frequency`).

    Args:
        cf_digits: Partial quotients a_1, a_2, ... (all >= 1).
        precision_bits: Software precision used for every distance involving this frequency.
    """

    cf_digits: tuple[int, ...]
    precision_bits: int = DEFAULT_PRECISION
    value: mpf = field(init=False, repr=False, compare=False)
    convergents: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)
    exact_ratio: tuple[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Validate digits and evaluate the convergent recurrences."""
        digits = tuple(int(a) for a in self.cf_digits)
        if not digits:
            raise ValueError("cf_digits must be non-empty")
        if any(a < 1 for a in digits):
            raise ValueError(f"Continued fraction digits must be positive integers, got {digits[:10]=}")
        if len(digits) < MIN_CF_DEPTH:
            raise ValueError(f"Rational tail exhausted: need at least {MIN_CF_DEPTH} digits, got {len(digits)}")
        if self.precision_bits < MIN_PRECISION:
            raise ValueError(f"{self.precision_bits=} must be at least {MIN_PRECISION}")

        p_prev, p = 1, 0
        q_prev, q = 0, 1
        convergents = [(p, q)]
        for a in digits:
            p_prev, p = p, a * p + p_prev
            q_prev, q = q, a * q + q_prev
            if q.bit_length() <= CONVERGENT_BITS:
                convergents.append((p, q))
        with mp.workprec(self.precision_bits):
            value = mpf(p) / q

        object.__setattr__(self, "cf_digits", digits)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "convergents", tuple(convergents))
        object.__setattr__(self, "exact_ratio", (p, q))

    def __float__(self) -> float:
        return float(self.value)

    def kalpha_dist(self, k: int) -> mpf:
        """||k alpha||_T at working precision.

        When |k| is a stored convergent denominator q_n the float result is cross-checked against the exact
        integer expression |q_n p_N - p_n q_N| / q_N.

        Args:
            k: Integer multiple.

        Returns:
            mpf distance.
        """
        with mp.workprec(self.precision_bits):
            dist = torus_dist(k * self.value)
            denominators = {qn: pn for pn, qn in self.convergents}
            if abs(k) in denominators and k != 0:
                p_n = denominators[abs(k)]
                p_N, q_N = self.exact_ratio
                exact = torus_dist(mpf(abs(k) * p_N - p_n * q_N) / q_N)
                if abs(exact - dist) > abs(k) * mpf(2) ** (16 - self.precision_bits):
                    logger.warning("Float and convergent evaluations of ||%d alpha|| disagree", k)
                dist = exact
        return dist

    def diophantine_floor(self) -> float:
        """Largest ln(q_{n+1}) / q_n over stored convergents.

        Resonance exponents at or below this value can be produced by the frequency alone, so engineered phases
        must target exponents above it.
        """
        qs = [q for _, q in self.convergents]
        return max(math.log(q_next) / q for q, q_next in zip(qs[:-1], qs[1:]))

    def diophantine_constants(self) -> dict[str, float]:
        """Estimate (gamma, tau) with ||k alpha|| >= gamma / |k|^tau from the stored convergents.

        These are metadata only; nothing downstream depends on them.
        """
        pairs = [(p, q) for p, q in self.convergents if q >= 2]
        tau = max(1.0, *(math.log(q_next) / math.log(q) for (_, q), (_, q_next) in zip(pairs[:-1], pairs[1:])))
        gamma = min(float(self.kalpha_dist(q)) * q**tau for _, q in pairs)
        return {"gamma": gamma, "tau": tau}

    def sampling_grid(self, n_points: int) -> np.ndarray:
        """Equispaced theta grid whose size is the largest convergent denominator not exceeding n_points.

        Args:
            n_points: Upper bound on the grid size.

        Returns:
            Array j/q_n, j = 0..q_n-1.
        """
        q = max(q for _, q in self.convergents if q <= max(n_points, 1))
        return np.arange(q) / q

    def as_dict(self) -> dict[str, Any]:
        """JSON-able representation."""
        return {"cf_digits": list(self.cf_digits), "precision_bits": self.precision_bits}

    def to_json(self) -> str:
        """Serialize to a JSON string."""
        return json.dumps(self.as_dict())

    @classmethod
    def from_json(cls, s: str) -> Frequency:
        """Deserialize from :meth:`to_json` output."""
        d = json.loads(s)
        return cls(tuple(d["cf_digits"]), precision_bits=int(d["precision_bits"]))


def build_frequency(cf_digits: list[int] | tuple[int, ...], precision_bits: int = DEFAULT_PRECISION) -> Frequency:
    """Build a Frequency from continued-fraction digits.

    Args:
        cf_digits: Partial quotients a_1, a_2, ....
        precision_bits: Working precision in bits.

    Returns:
        Frequency
    """
    return Frequency(tuple(cf_digits), precision_bits=precision_bits)


@dataclass(frozen=True)
class ResonanceEntry:
    """One resonance k of a phase: gap = ||phase - k alpha||_T and eta = -ln(gap)/|k|.

    ``exact`` marks a vanishing gap (phase = k alpha mod 1 at working precision); its eta is +inf.
    """

    k: int
    gap: mpf
    eta: float | None
    exact: bool = False


@dataclass(frozen=True)
class ResonanceSequence:
    """Ordered resonances of ``phase`` against ``alpha`` with |k| <= search_bound."""

    phase: mpf
    epsilon0: float
    entries: tuple[ResonanceEntry, ...]
    search_bound: int
    engineered_ks: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ResonanceEntry]:
        return iter(self.entries)

    def __getitem__(self, idx: int) -> ResonanceEntry:
        return self.entries[idx]

    @property
    def ks(self) -> list[int]:
        """Resonant integers in order."""
        return [e.k for e in self.entries]

    def find(self, k: int) -> ResonanceEntry | None:
        """Entry with the given k, if present."""
        return next((e for e in self.entries if e.k == k), None)

    def repulsion_ratios(self, c: float = 1.0) -> list[float]:
        """|k_{s+1}| / exp(c * epsilon0 * |k_s|) for consecutive entries."""
        pairs = zip(self.entries[:-1], self.entries[1:])
        return [abs(nxt.k) / math.exp(c * self.epsilon0 * abs(cur.k)) for cur, nxt in pairs]

    def rows(self) -> list[tuple[int, mpf, float | str | None]]:
        return [(e.k, e.gap, "inf" if e.exact else e.eta) for e in self.entries]

    def to_csv(self, path: str | Path, meta: dict[str, Any] | None = None) -> Path:
        """Write rows (k, gap, eta) under a provenance header; gaps keep their exact binary form."""
        header = {"epsilon0": self.epsilon0, "search_bound": self.search_bound, **(meta or {})}
        return write_csv(path, ("k", "gap", "eta"), self.rows(), meta=header)


def _exact_tol(precision_bits: int) -> mpf:
    return mpf(2) ** (8 - precision_bits)


def resonances(alpha: Frequency, phase: float | mpf, epsilon0: float, K: int) -> ResonanceSequence:
    """All epsilon0-resonances of ``phase`` with |k| <= K.

    k is a resonance when ||phase - k alpha|| <= exp(-epsilon0 |k|) and the distance is the minimum over
    |j| <= |k|. Between k and -k the smaller distance wins, ties go to positive k. Entry 0 is always k=0 with the
    distance ||phase||. An exact hit closes the sequence since nothing further can beat a zero gap.

    Args:
        alpha: Frequency.
        phase: The phase being resonated (e.g. 2 rho or N(E)).
        epsilon0: Resonance threshold rate, > 0.
        K: Search bound, >= 1.

    Returns:
        ResonanceSequence
    """
    if K < 1:
        raise ValueError(f"{K=} must be >= 1")
    if epsilon0 <= 0:
        raise ValueError(f"{epsilon0=} must be positive")
    with mp.workprec(alpha.precision_bits):
        phase = mpf(phase)
        tol = _exact_tol(alpha.precision_bits)
        best = torus_dist(phase)
        entries = [ResonanceEntry(0, best, None, exact=best <= tol)]
        a = alpha.value
        if not entries[0].exact:
            for k in range(1, K + 1):
                d_plus = torus_dist(phase - k * a)
                d_minus = torus_dist(phase + k * a)
                kk, d = (k, d_plus) if d_plus <= d_minus else (-k, d_minus)
                if d > best:
                    continue
                best = d
                if d <= tol:
                    entries.append(ResonanceEntry(kk, mpf(0), math.inf, exact=True))
                    logger.debug("Exact resonance at k=%d", kk)
                    break
                rate = float(-mp.log(d)) / k
                if rate >= epsilon0:
                    entries.append(ResonanceEntry(kk, d, rate))
    return ResonanceSequence(phase=phase, epsilon0=epsilon0, entries=tuple(entries), search_bound=K)


@dataclass(frozen=True)
class DeltaEstimate:
    """Finite-K lower bound for the resonance strength delta(alpha, phase) = limsup -ln||phase - k alpha|| / |k|.

    A limsup can only be bounded from below with finitely many k; ``exact`` flags the +inf convention for exact hits.
    """

    lower_bound: float
    witness_k: int
    search_bound: int
    exact: bool = False

    @property
    def is_infinite(self) -> bool:
        """Whether the estimate carries the +inf flag."""
        return self.exact


def _delta_chunk(alpha: Frequency, phase: mpf, k_lo: int, k_hi: int) -> tuple[float, int, bool]:
    best_rate, best_k = -math.inf, 0
    with mp.workprec(alpha.precision_bits):
        tol = _exact_tol(alpha.precision_bits)
        a = alpha.value
        for k in range(k_lo, k_hi):
            for kk in (k, -k):
                d = torus_dist(phase - kk * a)
                if d <= tol:
                    return math.inf, kk, True
                rate = float(-mp.log(d)) / k
                if rate > best_rate:
                    best_rate, best_k = rate, kk
    return best_rate, best_k, False


def delta_exponent(alpha: Frequency, phase: float | mpf, K: int, *, n_jobs: int | None = None) -> DeltaEstimate:
    """max over 1 <= |k| <= K of -ln||phase - k alpha|| / |k|, or +inf on an exact hit.

    The scan is partitioned into k-ranges that can run in parallel; the reduction is done in k order so the witness
    does not depend on scheduling.

    Args:
        alpha: Frequency.
        phase: Phase.
        K: Search bound, >= 1.
        n_jobs: joblib worker count. None runs in-process.

    Returns:
        DeltaEstimate
    """
    if K < 1:
        raise ValueError(f"{K=} must be >= 1")
    with mp.workprec(alpha.precision_bits):
        phase = mpf(phase)
    n_chunks = 1 if n_jobs in (None, 1) else max(1, min(K, 4 * abs(n_jobs)))
    bounds = np.linspace(1, K + 1, n_chunks + 1).astype(int)
    chunks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    results = Parallel(n_jobs=n_jobs)(delayed(_delta_chunk)(alpha, phase, lo, hi) for lo, hi in chunks)
    best_rate, best_k = -math.inf, 0
    for rate, kk, exact in results:
        if exact:
            return DeltaEstimate(math.inf, kk, K, exact=True)
        if rate > best_rate:
            best_rate, best_k = rate, kk
    return DeltaEstimate(max(best_rate, 0.0), best_k, K)


def _residues(alpha: Frequency, psi: mpf, ks: np.ndarray, modulus: int) -> np.ndarray:
    """(psi - k alpha) mods `modulus` in float64 via 64-bit fixed-point wraparound arithmetic.

    The truncation error is about |k| * 2**-63, so this is a screen; survivors are re-checked at full precision.
    """
    with mp.workprec(alpha.precision_bits):
        scale = mpf(2) ** 64 / modulus
        a_fixed = np.uint64(int(mp.floor(alpha.value * scale)) % 2**64)
        psi_fixed = np.uint64(int(mp.floor(psi * scale)) % 2**64)
    with np.errstate(over="ignore"):
        raw = (psi_fixed - ks.astype(np.uint64) * a_fixed).view(np.int64)
    return raw.astype(np.float64) * (modulus / 2.0**64)


def engineer_phase(
    alpha: Frequency,
    eta_target: float,
    depth: int,
    seed_k: int,
    *,
    tol: float | None = None,
    parity: bool = False,
    max_disturbance: float = 0.01,
    max_k: int = 10**7,
) -> tuple[mpf, ResonanceSequence]:
    """Construct a phase phi whose double 2 phi resonates with alpha at a prescribed exponential rate.

    Stage 1 sets 2 phi = seed_k alpha + exp(-eta_target seed_k). Every later stage scans k upward from the last
    resonance in geometrically growing chunks for the first k whose residue 2 phi - k alpha is small enough that
    nudging it to exp(-eta_target k) moves earlier gaps by at most ``max_disturbance`` relatively, and applies the
    nudge.

    Args:
        alpha: Frequency.
        eta_target: Target exponent, must exceed ``alpha.diophantine_floor()``.
        depth: Number of engineered resonances, >= 1.
        seed_k: First resonance k_1 >= 1.
        tol: Exponent tolerance; gaps land in [exp(-(eta+tol)k), exp(-(eta-tol)k)]. Defaults to 0.02 * eta_target.
        parity: If True, also enforce (2 phi - k_s alpha) mod 2 in [0, 1/2) at every engineered k_s.
        max_disturbance: Largest allowed relative change of earlier gaps per nudge.
        max_k: Hard cap on the scan.

    Raises:
        ValueError: on inadmissible targets.
        PrecisionExhaustedError: when the next resonance is out of reach of ``alpha.precision_bits`` or ``max_k``.

    Returns:
        (phi mod 1, ResonanceSequence of 2 phi with epsilon0 = eta_target - tol and the engineered ks recorded).
    """
    tol = 0.02 * eta_target if tol is None else tol
    if depth < 1:
        raise ValueError(f"{depth=} must be >= 1")
    if seed_k < 1:
        raise ValueError(f"{seed_k=} must be >= 1")
    floor = alpha.diophantine_floor()
    if eta_target <= floor:
        raise ValueError(f"{eta_target=} does not exceed the Diophantine floor {floor:.4f} of the frequency")

    bits = alpha.precision_bits
    k_cap = min(max_k, int((bits - 32) * math.log(2) / (eta_target + tol)))
    if seed_k > k_cap:
        raise PrecisionExhaustedError(
            f"{seed_k=} needs more than {bits} bits", achieved=0, precision_bits=bits
        )
    modulus = 2 if parity else 1

    with mp.workprec(bits):
        a = alpha.value
        psi = seed_k * a + mp.exp(-eta_target * seed_k)
        ks = [seed_k]

        def admissible(psi_: mpf, ks_: list[int]) -> bool:
            for k in ks_:
                r = _mods(psi_ - k * a, modulus)
                if not mp.exp(-(eta_target + tol) * k) <= abs(r) <= mp.exp(-(eta_target - tol) * k):
                    return False
                if parity and r < 0:
                    return False
            return True

        while len(ks) < depth:
            g_min = min(abs(_mods(psi - k * a, modulus)) for k in ks)
            allowed = max_disturbance * g_min
            k_lo, chunk, found = ks[-1] + 1, 1024, False
            while not found and k_lo <= k_cap:
                k_hi = min(k_cap, k_lo + chunk - 1)
                cand = np.arange(k_lo, k_hi + 1, dtype=np.int64)
                r = _residues(alpha, psi, cand, modulus)
                screen = 2 * float(allowed) + k_hi * 2.0**-60
                for k in cand[np.abs(r) <= screen].tolist():
                    target = mp.exp(-eta_target * k)
                    r_k = _mods(psi - k * a, modulus)
                    sign = 1 if parity or abs(target - r_k) <= abs(-target - r_k) else -1
                    shift = sign * target - r_k
                    if abs(shift) > allowed or not admissible(psi + shift, [*ks, k]):
                        continue
                    psi += shift
                    ks.append(k)
                    found = True
                    logger.debug("Engineered resonance %d at k=%d", len(ks), k)
                    break
                k_lo, chunk = k_hi + 1, 2 * chunk
            if not found:
                raise PrecisionExhaustedError(
                    f"Reached depth {len(ks)} of {depth}: no admissible k <= {k_cap} at {bits} bits",
                    achieved=len(ks),
                    precision_bits=bits,
                )

        phi = (psi / 2) % 1
        double_phi = 2 * phi
    seq = resonances(alpha, double_phi, max(eta_target - tol, 1e-12), ks[-1])
    logger.info("Engineered %d resonances at k=%s", depth, ks)
    return phi, ResonanceSequence(seq.phase, seq.epsilon0, seq.entries, seq.search_bound, engineered_ks=tuple(ks))
