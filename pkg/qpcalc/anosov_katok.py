"""Fibered Anosov-Katok construction of a near-identity cocycle with prescribed resonances.

Starting from a phase theta whose double resonates with alpha at rate delta along k_2 < k_3 < ..., every stage
conjugates a constant su(1,1) cocycle A_s to A_{s+1} through D_s H_{k_{s+2} - k_{s+1}}(theta) after a small
perturbation e^{f_s(theta)}. The conjugated cocycles A_s(theta) = B_s(theta + alpha) A_s B_s(theta)^{-1} converge to a
cocycle A_inf in the band h' whose triangular normal forms have off-diagonal entries ~ e^{-2 pi h |k_s|} and
rotations ~ e^{-delta |k_s|}.

Everything runs at the frequency's software precision: the gaps e^{-delta k_s} and couplings e^{-2 pi h k_s} are far
below double precision from the third resonance on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from mpmath import mp, mpc, mpf

from .arithmetic import engineer_phase
from .base import ConvergenceError, SpectralCalc
from .cocycle import FourierSeries, QpCocycle
from .linalg2 import Mat2, bch_log, elliptic_normal_form, exp2, log2, schur_upper, su11_algebra, to_sl2r
from .output import canonical_json
from .scaling import EtaProfile

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from .arithmetic import Frequency, ResonanceSequence

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-10
TRUNCATION_REL = 1e-20
SEED_SEARCH = 1000


def _mod2(x: mpf) -> mpf:
    """Representative of x modulo 2 in [-1, 1)."""
    return x - 2 * mp.floor(x / 2 + mpf(1) / 2)


@dataclass(frozen=True)
class TrigPoly:
    """Matrix trigonometric polynomial sum_m C_m e^{i pi m theta} over half-integer frequencies m / 2.

    Odd modes only appear in projective conjugators (B(theta + 1) = -B(theta)); cocycles have even modes only.
    """

    modes: Mapping[int, Mat2]

    @classmethod
    def constant(cls, m: Mat2) -> TrigPoly:
        return cls({0: m})

    @classmethod
    def h_matrix(cls, m: int) -> TrigPoly:
        """H_m(theta) = diag(e^{i pi m theta}, e^{-i pi m theta})."""
        if m == 0:
            return cls({0: Mat2.identity()})
        return cls({m: Mat2.diag(1, 0), -m: Mat2.diag(0, 1)})

    def __iter__(self) -> Iterator[tuple[int, Mat2]]:
        return iter(sorted(self.modes.items()))

    def __matmul__(self, other: TrigPoly) -> TrigPoly:
        out: dict[int, Mat2] = {}
        for m1, c1 in self:
            for m2, c2 in other:
                term = c1 @ c2
                out[m1 + m2] = out[m1 + m2] + term if m1 + m2 in out else term
        return TrigPoly(out)

    def __sub__(self, other: TrigPoly) -> TrigPoly:
        out = dict(self.modes)
        for m, c in other:
            out[m] = out[m] - c if m in out else -c
        return TrigPoly(out)

    def conjugated_by(self, d: Mat2) -> TrigPoly:
        """theta -> D P(theta) D^{-1}."""
        d_inv = d.inverse()
        return TrigPoly({m: d @ c @ d_inv for m, c in self})

    def shifted(self, alpha: mpf) -> TrigPoly:
        """theta -> P(theta + alpha)."""
        return TrigPoly({m: c * mp.expjpi(m * alpha) for m, c in self})

    def adjugate(self) -> TrigPoly:
        """Pointwise adjugate, the inverse wherever det = 1."""
        return TrigPoly({m: Mat2(c.d, -c.b, -c.c, c.a) for m, c in self})

    def evaluate(self, theta: mpf) -> Mat2:
        out = Mat2.zeros()
        for m, c in self:
            out = out + c * mp.expjpi(m * theta)
        return out

    def norm(self, h: float = 0.0) -> mpf:
        """sum_m ||C_m|| e^{pi |m| h}, an upper bound for the sup of ||P|| on the band |Im theta| <= h."""
        return mp.fsum(c.spectral_norm() * mp.exp(mp.pi * abs(m) * h) for m, c in self)

    def sup_norm(self, n_grid: int = 256) -> mpf:
        """max of ||P(theta)|| over theta = j / n_grid."""
        return max(self.evaluate(mpf(j) / n_grid).spectral_norm() for j in range(n_grid))

    def trimmed(self, rel: float = TRUNCATION_REL) -> tuple[TrigPoly, mpf]:
        """Drop modes below ``rel`` times the largest one; also returns the largest dropped norm."""
        norms = {m: c.spectral_norm() for m, c in self}
        cut = max(norms.values()) * rel
        kept = {m: c for m, c in self if norms[m] >= cut}
        dropped = max((norms[m] for m in self.modes if m not in kept), default=mpf(0))
        return TrigPoly(kept), dropped

    def to_fourier_series(self, band: float = math.inf) -> FourierSeries:
        """Integer-frequency series in the SL(2, R) frame; needs even modes only."""
        if any(m % 2 for m in self.modes):
            raise ValueError("Only even half-frequency modes define a 1-periodic cocycle")
        return FourierSeries.from_mat2({m // 2: to_sl2r(c) for m, c in self}, band)


@dataclass(frozen=True)
class AkStage:
    """
    k = k_{s+1}; lam = e^{-2 pi h |k|} (0 at stage 0); gap = (2 theta - k alpha) mod 2 in [0, 1/2);
    t = sqrt(lam^2 + gap^2).
    """

    k: int
    lam: mpf
    t: mpf
    gap: mpf

    @property
    def generator(self) -> Mat2:
        """pi i [[t, lam], [-lam, -t]]."""
        return su11_algebra(mp.pi * self.t, 1j * mp.pi * self.lam)

    def as_dict(self) -> dict[str, Any]:
        return {"k": self.k, "lambda": self.lam, "t": self.t, "gap": self.gap}


@dataclass(frozen=True)
class AkSchedule:
    alpha: Frequency
    theta: mpf
    delta: float
    h: float
    h_prime: float
    eps_budget: float
    stages: tuple[AkStage, ...]
    resonances: ResonanceSequence

    @property
    def ks(self) -> list[int]:
        return [st.k for st in self.stages]

    @property
    def slack(self) -> float:
        """Default tolerance replacing o(1) in the exponent bounds: 10% of 2 pi (h - h')."""
        return 0.1 * 2 * math.pi * (self.h - self.h_prime)

    def summability(self) -> float:
        """sum over s >= 2 of e^{-(2 pi h - 2 pi h' - slack) |k_s|}."""
        rate = 2 * math.pi * (self.h - self.h_prime) - self.slack
        return math.fsum(math.exp(-rate * abs(k)) for k in self.ks[1:])

    @property
    def near_identity(self) -> float:
        """2 pi theta, to be compared with eps_budget / 4."""
        return float(2 * mp.pi * self.theta)

    def as_dict(self) -> dict[str, Any]:
        return {
            "theta": self.theta,
            "delta": self.delta,
            "h": self.h,
            "h_prime": self.h_prime,
            "eps_budget": self.eps_budget,
            "precision_bits": self.alpha.precision_bits,
            "stages": [st.as_dict() for st in self.stages],
            "summability": self.summability(),
            "near_identity": self.near_identity,
        }


def _seed(alpha: Frequency, delta: float) -> int:
    """Smallest k with (k alpha) mod 2 + e^{-delta k} in [0, 1/2), so stage 0 is in the even, lower-half case."""
    with mp.workprec(alpha.precision_bits):
        for k in range(1, SEED_SEARCH + 1):
            r = _mod2(k * alpha.value)
            if r >= 0 and r + mp.exp(-delta * k) < mpf(1) / 2:
                return k
    raise ValueError(f"No seed k <= {SEED_SEARCH} puts 2 theta in the even lower-half parity case")


def ak_schedule(
    alpha: Frequency,
    delta: float,
    h: float,
    h_prime: float,
    n_stages: int,
    eps_budget: float = 0.5,
    *,
    seed_k: int | None = None,
    max_disturbance: float = 0.1,
) -> AkSchedule:
    """Resonance schedule k_1 = 0 < k_2 < ... < k_S with the phase theta engineered to resonate along it.

    Args:
        alpha: Frequency; its precision must hold e^{-delta k_S}.
        delta: Resonance strength.
        h: Band of the unperturbed construction; the couplings are e^{-2 pi h |k|}.
        h_prime: Band of the limit cocycle, 0 < h' < h.
        n_stages: Number S of constant cocycles A_0, ..., A_{S-1}.
        eps_budget: Closeness budget; the tail sum must stay below eps_budget / 2.
        seed_k: First nonzero resonance; by default the smallest k with an admissible parity.
        max_disturbance: Passed to :func:`qpcalc.arithmetic.engineer_phase`.

    Raises:
        ValueError: on inadmissible parameters or a parity failure.
        PrecisionExhaustedError: when the resonances exceed the working precision.

    Returns:
        AkSchedule
    """
    if not 0 < 2 * math.pi * h_prime < 2 * math.pi * h <= delta < math.inf:
        raise ValueError(f"Need 0 < 2 pi h' < 2 pi h <= delta < inf, got {h_prime=}, {h=}, {delta=}")
    if n_stages < 1:
        raise ValueError(f"{n_stages=} must be >= 1")
    seed_k = _seed(alpha, delta) if seed_k is None else seed_k
    theta, seq = engineer_phase(
        alpha, delta, max(n_stages - 1, 1), seed_k, parity=True, max_disturbance=max_disturbance
    )
    ks = [0, *seq.engineered_ks][:n_stages]
    stages = []
    with mp.workprec(alpha.precision_bits):
        for s, k in enumerate(ks):
            gap = _mod2(2 * theta - k * alpha.value)
            if not 0 <= gap < mpf(1) / 2:
                raise ValueError(f"Stage {s} (k={k}) left the even lower-half parity case: gap={mp.nstr(gap, 8)}")
            lam = mpf(0) if s == 0 else mp.exp(-2 * mp.pi * h * abs(k))
            stages.append(AkStage(k, lam, mp.sqrt(lam * lam + gap * gap), gap))
    sched = AkSchedule(alpha, theta, delta, h, h_prime, eps_budget, tuple(stages), seq)
    if sched.near_identity > eps_budget / 4:
        logger.warning(
            "2 pi theta = %.4g exceeds eps/4 = %.4g: the schedule is outside the near-identity regime",
            sched.near_identity,
            eps_budget / 4,
        )
    logger.info("Anosov-Katok schedule ks=%s, theta=%s", ks, mp.nstr(theta, 12))
    return sched


@dataclass(frozen=True)
class StageLedger:
    """Norm bookkeeping of one construction step s -> s + 1."""

    stage: int
    d_norm2: mpf
    d_norm2_in_range: bool
    x_norm: mpf
    f_norm: mpf
    f_bound: mpf
    step_norm: mpf
    reconstruction_residual: float

    @property
    def f_bound_ok(self) -> bool:
        return bool(self.f_norm <= self.f_bound)

    def as_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "D_norm2": self.d_norm2,
            "D_norm2_in_range": self.d_norm2_in_range,
            "X_norm": self.x_norm,
            "f_norm": self.f_norm,
            "f_bound": self.f_bound,
            "f_bound_ok": self.f_bound_ok,
            "step_norm": self.step_norm,
            "reconstruction_residual": self.reconstruction_residual,
        }


@dataclass(frozen=True)
class AkState:
    """Constant cocycle A_s, accumulated conjugator B_s and the resulting A_s(theta)."""

    stage: int
    a_bar: Mat2
    b_bar: TrigPoly
    degree: int
    cocycle: TrigPoly
    ledger: tuple[StageLedger, ...] = field(default=())

    @classmethod
    def initial(cls, sched: AkSchedule) -> AkState:
        with mp.workprec(sched.alpha.precision_bits):
            a0 = exp2(sched.stages[0].generator)
        return cls(0, a0, TrigPoly.constant(Mat2.identity()), sched.stages[0].k, TrigPoly.constant(a0))


def _cocycle_of(b_bar: TrigPoly, a_bar: Mat2, alpha: mpf) -> TrigPoly:
    return b_bar.shifted(alpha) @ TrigPoly.constant(a_bar) @ b_bar.adjugate()


def ak_step(state: AkState, sched: AkSchedule, *, n_check: int = 256) -> AkState:
    """One construction step s -> s + 1.

    With s* = k_{s+2} - k_{s+1}, X = -pi i diag(g_{s+1}, -g_{s+1}) and Y = pi i [[t, lam], [-lam, -t]] of stage s + 1,
    f~_s(theta) = H_{s*}(theta) log(e^X e^Y) H_{s*}(theta)^{-1} and f_s = D_s f~_s D_s^{-1}. The step checks
    H_{s*}(theta + alpha)^{-1} D_s^{-1} A_s e^{f_s(theta)} D_s H_{s*}(theta) = A_{s+1} on an n_check-point grid.

    Raises:
        ValueError: when ||X|| + ||Y|| leaves the convergence radius of the logarithm (the schedule is too coarse).
        ConvergenceError: when the reconstruction residual exceeds 1e-10.
    """
    s = state.stage
    if s + 1 >= len(sched.stages):
        raise ValueError(f"Stage {s} is the last one of the schedule")
    cur, nxt = sched.stages[s], sched.stages[s + 1]
    with mp.workprec(sched.alpha.precision_bits):
        alpha = sched.alpha.value
        nf = elliptic_normal_form(mp.pi * cur.t, 1j * mp.pi * cur.lam, rho=mp.pi * cur.gap)
        d, d_inv = nf.D, nf.D.inverse()
        s_star = nxt.k - cur.k
        x = Mat2.diag(-1j * mp.pi * nxt.gap, 1j * mp.pi * nxt.gap)
        y0 = nxt.generator
        try:
            z = bch_log(x, y0)
        except ValueError as exc:
            raise ValueError(f"Stage {s}: {exc}; regenerate the schedule with faster k-growth") from exc
        f_tilde = TrigPoly(
            {0: Mat2.diag(z.a, z.d), 2 * s_star: Mat2(0, z.b, 0, 0), -2 * s_star: Mat2(0, 0, z.c, 0)}
        )
        f_bar = f_tilde.conjugated_by(d)
        a_next = exp2(y0)
        h_star = TrigPoly.h_matrix(s_star)

        residual = mpf(0)
        for j in range(n_check):
            th = mpf(j) / n_check
            inner = d_inv @ state.a_bar @ exp2(f_bar.evaluate(th)) @ d
            lhs = h_star.evaluate(th + alpha).inverse() @ inner @ h_star.evaluate(th)
            residual = max(residual, (lhs - a_next).max_abs())
        if residual > RECONSTRUCTION_TOL:
            raise ConvergenceError(
                f"Stage {s} reconstruction residual {mp.nstr(residual, 6)}", residual=float(residual)
            )

        b_next = state.b_bar @ TrigPoly.constant(d) @ h_star
        cocycle_next = _cocycle_of(b_next, a_next, alpha)
        step_norm = (cocycle_next - state.cocycle).norm(sched.h_prime)

        rate = 2 * mp.pi * (sched.h - sched.h_prime) - sched.slack
        f_bound = mp.exp(-rate * abs(nxt.k))
        if cur.lam > 0:
            d_norm2 = nf.norm2
            lo, fuzz = cur.t / cur.gap, mpf(2) ** -40
            in_range = bool(lo * (1 - fuzz) <= d_norm2 <= 2 * lo * (1 + fuzz))
        else:
            d_norm2, in_range = mpf(1), True
        entry = StageLedger(
            s, d_norm2, in_range, x.spectral_norm(), f_tilde.norm(sched.h_prime), f_bound, step_norm, float(residual)
        )
    if not entry.f_bound_ok and abs(nxt.k) >= 50:
        logger.warning("Stage %d: ||f|| = %s exceeds the bound %s", s, mp.nstr(entry.f_norm, 6), mp.nstr(f_bound, 6))
    logger.debug("Stage %d -> %d: s*=%d, ||A_{s+1} - A_s||=%s", s, s + 1, s_star, mp.nstr(step_norm, 6))
    return AkState(s + 1, a_next, b_next, state.degree + s_star, cocycle_next, (*state.ledger, entry))


@dataclass(frozen=True)
class AkBuild:
    """Result of :func:`ak_build`: the schedule, every intermediate state and the limit cocycle."""

    schedule: AkSchedule
    states: tuple[AkState, ...]
    modes: TrigPoly
    a_infinity: QpCocycle
    diagnostics: dict[str, Any]

    @property
    def final(self) -> AkState:
        return self.states[-1]


def _decay_rate(series: TrigPoly) -> float:
    """Smallest -ln(||C_k|| / ||C_0||) / (2 pi |k|) over the integer modes k != 0."""
    c0 = series.modes[0].spectral_norm()
    rates = [
        float(-mp.log(c.spectral_norm() / c0) / (mp.pi * abs(m))) for m, c in series if m and c.spectral_norm() > 0
    ]
    return min(rates, default=math.inf)


def ak_build(
    alpha: Frequency,
    delta: float,
    h: float,
    h_prime: float,
    n_stages: int,
    eps_budget: float = 0.5,
    *,
    seed_k: int | None = None,
    n_check: int = 256,
) -> AkBuild:
    """Run the construction through stage S - 1 and return A_inf = A_{S-1}(theta).

    Raises:
        ValueError: when the tail sum of the schedule exceeds eps_budget / 2.
    """
    sched = ak_schedule(alpha, delta, h, h_prime, n_stages, eps_budget, seed_k=seed_k)
    tail = sched.summability()
    if tail >= eps_budget / 2:
        raise ValueError(f"Summability budget exceeded: tail sum {tail:.4g} >= eps/2 = {eps_budget / 2:.4g}")
    states = [AkState.initial(sched)]
    for _ in range(n_stages - 1):
        states.append(ak_step(states[-1], sched, n_check=n_check))
    final = states[-1]
    with mp.workprec(alpha.precision_bits):
        modes, dropped = final.cocycle.trimmed()
        distance = (modes - TrigPoly.constant(Mat2.identity())).norm(h_prime)
        a0_distance = (states[0].a_bar - Mat2.identity()).spectral_norm()
        det_defect = max(abs(modes.evaluate(mpf(j) / 64).det() - 1) for j in range(64))
        residuals = [float((_normal_residual(st, modes, alpha.value)).norm(h_prime)) for st in states]
        decay = _decay_rate(modes)
    series = modes.to_fourier_series(band=h_prime)
    diagnostics = {
        "ks": sched.ks,
        "theta": sched.theta,
        "near_identity": sched.near_identity,
        "near_identity_ok": sched.near_identity <= eps_budget / 4,
        "A0_distance": float(a0_distance),
        "pi_t0": float(mp.pi * sched.stages[0].t),
        "summability": tail,
        "step_norms": [float(e.step_norm) for e in final.ledger],
        "distance_to_identity": float(distance),
        "almost_reducibility_residuals": residuals,
        "max_truncated": float(dropped),
        "det_defect": float(det_defect),
        "fourier_decay_rate": decay,
        "degree": final.degree,
        "rotation_expected": float(sched.theta % 1),
        "ledger": [e.as_dict() for e in final.ledger],
    }
    cocycle = QpCocycle(alpha, series)
    logger.info("A_inf after %d stages: ||A_inf - Id||_h' = %.4g", n_stages, float(distance))
    return AkBuild(sched, tuple(states), modes, cocycle, diagnostics)


def _normal_residual(state: AkState, a_inf: TrigPoly, alpha: mpf) -> TrigPoly:
    """F_s(theta) = B_s(theta + alpha)^{-1} A_inf(theta) B_s(theta) - A_s."""
    return state.b_bar.shifted(alpha).adjugate() @ a_inf @ state.b_bar - TrigPoly.constant(state.a_bar)


@dataclass(frozen=True)
class GoodnessRow:
    stage: int
    k: int
    nu: mpc
    two_rho: mpf
    zeta: float
    eta_hat: float
    residual_norm: float
    b_norm: float
    b_bound: float
    degree: int
    mismatch: float = 0.0

    @property
    def b_bound_ok(self) -> bool:
        return self.b_norm <= self.b_bound * (1 + 1e-12)

    def as_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "k": self.k,
            "nu_abs": float(abs(self.nu)),
            "two_rho": self.two_rho,
            "zeta": self.zeta,
            "eta_hat": self.eta_hat,
            "F_norm": self.residual_norm,
            "B_norm": self.b_norm,
            "B_bound": self.b_bound,
            "B_bound_ok": self.b_bound_ok,
            "degree": self.degree,
            "schedule_mismatch": self.mismatch,
        }


@dataclass(frozen=True)
class GoodnessReport:
    rows: tuple[GoodnessRow, ...]
    c0: float
    c0_prime: float
    tol: float

    def eta_profile(self, stage: int, sched: AkSchedule, gamma0: float | None = None) -> EtaProfile:
        """Resonance data of one stage for :func:`qpcalc.scaling.eta_plus`, with the window rate 2 pi h."""
        row = next(r for r in self.rows if r.stage == stage)
        nxt = sched.stages[stage + 1].k if stage + 1 < len(sched.stages) else math.inf
        gamma0 = 2 * math.pi * sched.h_prime if gamma0 is None else gamma0
        return EtaProfile(abs(row.k), abs(nxt), row.zeta, row.eta_hat, row.eta_hat, gamma0, 2 * math.pi * sched.h)

    def as_dict(self) -> dict[str, Any]:
        return {"rows": [r.as_dict() for r in self.rows], "C0": self.c0, "C0_prime": self.c0_prime, "tol": self.tol}

    def to_json(self) -> str:
        return canonical_json(self.as_dict())


def _stage_constant(state: AkState, alpha: mpf) -> Mat2:
    """A_s recovered from the stage cocycle as B_s(alpha)^{-1} A_s(0) B_s(0)."""
    zero = mpf(0)
    return state.b_bar.evaluate(alpha).inverse() @ state.cocycle.evaluate(zero) @ state.b_bar.evaluate(zero)


def ak_goodness_report(build: AkBuild, *, tol: float | None = None, n_grid: int = 256) -> GoodnessReport:
    """Triangular normal forms of every stage and the fitted goodness constants.

    For stage s >= 1 with n = |k_{s+1}| the constant A_s is recovered from the built cocycle A_s(theta) and B_s, and
    its logarithm is triangularized unitarily: nu is the off-diagonal entry and 2 rho the rotation angle over pi.
    Then zeta = -ln|nu| / n and eta_hat = -ln(2 rho) / n; ``mismatch`` is the larger relative deviation of |nu| and
    2 rho from the values the schedule prescribes. Also reported: the sup norm of B_s against
    e^{(delta - 2 pi h + tol) |k_s| / 2} and the residual ||F_s||_0. (C_0', C_0) come from a least-squares fit of
    ln ||B_s||_0 against ln |k_s|.
    """
    sched = build.schedule
    tol = 0.1 * sched.delta if tol is None else tol
    rows = []
    with mp.workprec(sched.alpha.precision_bits):
        alpha = sched.alpha.value
        for state in build.states[1:]:
            s = state.stage
            gen = log2(_stage_constant(state, alpha))
            _, rho, nu = schur_upper(mp.im(gen.a), gen.b)
            two_rho = rho / mp.pi
            st = sched.stages[s]
            _, _, nu_sched = schur_upper(mp.pi * st.t, 1j * mp.pi * st.lam)
            mismatch = max(abs(two_rho - st.gap) / st.gap, abs(abs(nu) - abs(nu_sched)) / abs(nu_sched))
            n = abs(st.k)
            k_prev = abs(sched.stages[s - 1].k)
            rows.append(
                GoodnessRow(
                    stage=s,
                    k=st.k,
                    nu=nu,
                    two_rho=two_rho,
                    zeta=float(-mp.log(abs(nu)) / n),
                    eta_hat=float(-mp.log(two_rho) / n),
                    residual_norm=float(_normal_residual(state, build.modes, alpha).norm()),
                    b_norm=float(state.b_bar.sup_norm(n_grid)),
                    b_bound=math.exp((sched.delta - 2 * math.pi * sched.h + tol) * k_prev / 2),
                    degree=state.degree,
                    mismatch=float(mismatch),
                )
            )
    fit_rows = [r for r in rows if abs(sched.stages[r.stage - 1].k) > 0]
    if len(fit_rows) >= 2:
        x = np.log([abs(sched.stages[r.stage - 1].k) for r in fit_rows])
        y = np.log([r.b_norm for r in fit_rows])
        c0, log_c0_prime = np.polyfit(x, y, 1)
        c0, c0_prime = float(max(c0, 0.0)), float(math.exp(log_c0_prime))
    else:
        c0, c0_prime = 0.0, max((r.b_norm for r in rows), default=1.0)
    return GoodnessReport(tuple(rows), c0, c0_prime, tol)


class AkBuildCalc(SpectralCalc):
    """Anosov-Katok construction calculator: schedule, steps, limit cocycle and goodness report.

    Only the frequency of the cocycle passed to :meth:`calc` is used; the construction starts from the identity.
    """

    def __init__(
        self,
        *,
        delta: float = 2.0,
        h: float = 0.2,
        h_prime: float = 0.1,
        n_stages: int = 2,
        eps_budget: float = 0.5,
        n_check: int = 256,
    ) -> None:
        """
        Args:
            delta (float): Resonance strength. Defaults to 2.
            h (float): Construction band. Defaults to 0.2.
            h_prime (float): Band of the limit cocycle. Defaults to 0.1.
            n_stages (int): Number of constant cocycles. Defaults to 2.
            eps_budget (float): Closeness budget. Defaults to 0.5.
            n_check (int): Grid size of the per-stage reconstruction check. Defaults to 256.
        """
        self.delta = delta
        self.h = h
        self.h_prime = h_prime
        self.n_stages = n_stages
        self.eps_budget = eps_budget
        self.n_check = n_check

    def calc(self, cocycle: QpCocycle) -> dict:
        """
        Returns: {
            ak_build: AkBuild with the limit cocycle,
            ak_schedule: schedule as a dict,
            ak_goodness: goodness report as a dict,
            a_infinity: FourierSeries of the limit cocycle,
        }
        """
        build = ak_build(
            cocycle.alpha, self.delta, self.h, self.h_prime, self.n_stages, self.eps_budget, n_check=self.n_check
        )
        report = ak_goodness_report(build)
        return {
            "ak_build": build,
            "ak_schedule": build.schedule.as_dict(),
            "ak_goodness": report.as_dict(),
            "a_infinity": build.a_infinity.generator,
        }
