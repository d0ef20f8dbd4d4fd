"""Command line experiment runner.

Every subcommand reads an :class:`ExperimentConfig` (JSON, ``--config``), runs one pipeline and writes CSV/JSON
artifacts plus a gnuplot script into ``--out``. Each artifact carries the SHA-256 hash of the resolved config and the
working precision. Exit codes: 0 success, 2 invalid input, 3 precision exhausted, 4 no convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .anosov_katok import AkBuildCalc, ak_goodness_report
from .arithmetic import build_frequency, delta_exponent, resonances
from .base import ConvergenceError, PrecisionExhaustedError
from .cocycle import LyapunovCalc, QpCocycle, RotationCalc, rotation_number
from .ids import find_plateaus, gap_label, gap_report, ids_counting, ids_curve, ids_rotation_scan, locate_gap_edge
from .output import config_hash, format_value, write_csv, write_gnuplot, write_json
from .scaling import ScalingLaw, amo_case, fit_loglog
from .subordinacy import profile
from .utils import get_named_frequency, get_potential
from .weyl import attracting_root, measure_window, whole_line_M

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from .arithmetic import Frequency

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_PRECISION, EXIT_CONVERGENCE = 0, 2, 3, 4
COCYCLE_KINDS = ("schrodinger", "rotation", "parabolic", "ak")
LAWS = ("amo", "ak")
MIN_PRECISION = 64


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration.

    ``energy_rule`` selects the energy instead of ``energy``: "gap-edge k=<k>" picks the lower edge of the gap labelled
    k, "gap-edge k=<k> side=upper" the upper one. The eps grid is log-spaced from eps_hi down to eps_lo.
    """

    experiment: str = "selftest"
    potential: str = "amo"
    coupling: float = 0.5
    frequency: str = "golden"
    cf_digits: tuple[int, ...] | None = None
    cocycle: str = "schrodinger"
    energy: float = 0.0
    energy_rule: str | None = None
    phase: float | None = None
    e_lo: float = -3.0
    e_hi: float = 3.0
    e_count: int = 601
    eps_lo: float = 1e-6
    eps_hi: float = 1e-2
    eps_count: int = 16
    thetas: tuple[float, ...] = (0.0,)
    random_thetas: int = 0
    precision: int = 256
    size: int = 10_000
    n_rotation: int = 100_000
    K: int = 1000
    epsilon0: float | None = None
    max_label: int = 30
    k_max: int = 10_000
    method: str = "poisson_bound"
    eta_ratio: float = 1e-2
    law: str = "amo"
    delta: float = 2.0
    h: float = 0.2
    h_prime: float = 0.1
    stages: int = 2
    eps_budget: float = 0.5
    tol_e: float = 1e-9
    out: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.precision < MIN_PRECISION:
            raise ValueError(f"{self.precision=} must be at least {MIN_PRECISION} bits")
        if not 0 < self.eps_lo < self.eps_hi:
            raise ValueError(f"Need 0 < eps_lo < eps_hi, got {self.eps_lo=}, {self.eps_hi=}")
        if self.eps_count < 2:
            raise ValueError(f"{self.eps_count=} must be >= 2")
        if self.cocycle not in COCYCLE_KINDS:
            raise ValueError(f"Unrecognized {self.cocycle=}, must be one of {COCYCLE_KINDS}")
        if self.law not in LAWS:
            raise ValueError(f"Unrecognized {self.law=}, must be one of {LAWS}")
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if self.cf_digits is not None:
            object.__setattr__(self, "cf_digits", tuple(int(a) for a in self.cf_digits))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValueError(f"Unrecognized config keys {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> ExperimentConfig:
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"Cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ValueError(f"Config {path} must hold a JSON object")
        return cls.from_dict(d)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.as_dict())

    @property
    def eps_grid(self) -> np.ndarray:
        """Strictly decreasing eps values."""
        return np.geomspace(self.eps_hi, self.eps_lo, self.eps_count)

    @property
    def energies(self) -> np.ndarray:
        return np.linspace(self.e_lo, self.e_hi, self.e_count)

    @property
    def theta_probes(self) -> tuple[float, ...]:
        """Configured phases followed by ``random_thetas`` draws seeded by ``seed``."""
        rng = np.random.default_rng(self.seed)
        return self.thetas + tuple(rng.random(self.random_thetas).tolist())

    @property
    def alpha(self) -> Frequency:
        if self.cf_digits is not None:
            return build_frequency(list(self.cf_digits), self.precision)
        return get_named_frequency(self.frequency, self.precision)

    def meta(self) -> dict[str, Any]:
        return {"experiment": self.experiment, "config_hash": self.hash, "precision_bits": self.precision}


def make_cocycle(cfg: ExperimentConfig, energy: float | None = None) -> QpCocycle:
    """The cocycle named by ``cfg.cocycle``; Schrodinger cocycles sit at ``energy`` (default cfg.energy)."""
    alpha = cfg.alpha
    if cfg.cocycle == "rotation":
        phi = 2 * math.pi * (cfg.phase if cfg.phase is not None else 0.25)
        return QpCocycle.constant(alpha, [[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    if cfg.cocycle == "parabolic":
        return QpCocycle.constant(alpha, [[1.0, 1.0], [0.0, 1.0]])
    if cfg.cocycle == "ak":
        return _ak_result(cfg)["ak_build"].a_infinity
    potential = get_potential(cfg.potential, coupling=cfg.coupling)
    return QpCocycle.schrodinger(alpha, potential, cfg.energy if energy is None else energy)


def _ak_result(cfg: ExperimentConfig) -> dict[str, Any]:
    calc = AkBuildCalc(delta=cfg.delta, h=cfg.h, h_prime=cfg.h_prime, n_stages=cfg.stages, eps_budget=cfg.eps_budget)
    return calc.calc(QpCocycle.constant(cfg.alpha, np.eye(2)))


def _epsilon0(cfg: ExperimentConfig) -> float:
    if cfg.epsilon0 is not None:
        return cfg.epsilon0
    return -math.log(cfg.coupling) / 2 if cfg.potential == "amo" and 0 < cfg.coupling < 1 else 0.1


def _phase(cfg: ExperimentConfig, energy: float) -> float:
    """cfg.phase, or the IDS value N(E) at ``energy``."""
    if cfg.phase is not None:
        return cfg.phase
    potential = get_potential(cfg.potential, coupling=cfg.coupling)
    return float(ids_rotation_scan(potential, cfg.alpha, np.array([energy]), cfg.n_rotation)[0])


def _gap_edges(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Plateaus of the IDS on the energy grid, labelled and refined to both edges."""
    potential = get_potential(cfg.potential, coupling=cfg.coupling)
    alpha = cfg.alpha
    es = cfg.energies
    values = ids_rotation_scan(potential, alpha, es, cfg.n_rotation)
    step = float(es[1] - es[0])
    rows = []
    for left, right, n_star in find_plateaus(es, values):
        label = gap_label(min(max(n_star, 0.0), 1.0), alpha, cfg.max_label, max(1e-4, 4.0 / cfg.n_rotation))
        if not label.labelled:
            logger.warning("Unlabelled plateau N*=%.6f on [%.4f, %.4f]", n_star, left, right)
            continue
        mid = (left + right) / 2
        edges = {}
        for side, bracket in (("lower", (left - step, mid)), ("upper", (mid, right + step))):
            try:
                edges[side] = locate_gap_edge(potential, alpha, label.k, bracket, cfg.tol_e, n=cfg.n_rotation)
            except ValueError as exc:
                logger.warning("Gap k=%d: %s edge not bracketed (%s)", label.k, side, exc)
                edges[side] = math.nan
        rows.append({"k": label.k, "N_star": n_star, "E_lower": edges["lower"], "E_upper": edges["upper"]})
    return rows


def resolve_energy(cfg: ExperimentConfig) -> float:
    """cfg.energy, or the energy picked by cfg.energy_rule."""
    if cfg.energy_rule is None:
        return cfg.energy
    parts = dict(p.split("=", 1) for p in cfg.energy_rule.split()[1:] if "=" in p)
    if not cfg.energy_rule.startswith("gap-edge") or "k" not in parts:
        raise ValueError(f"Unrecognized energy_rule={cfg.energy_rule!r}, expected 'gap-edge k=<k> [side=upper]'")
    k, side = int(parts["k"]), parts.get("side", "lower")
    for row in _gap_edges(cfg):
        if row["k"] == k and math.isfinite(row[f"E_{side}"]):
            logger.info("Energy rule %r resolved to E=%.15g", cfg.energy_rule, row[f"E_{side}"])
            return row[f"E_{side}"]
    raise ValueError(f"No {side} edge of the gap labelled k={k} on the configured energy grid")


def _emit(
    cfg: ExperimentConfig,
    name: str,
    columns: Sequence[str],
    rows: Any,
    *,
    x: str,
    ys: Sequence[str],
    loglog: bool = False,
) -> Path:
    out = Path(cfg.out)
    csv_path = write_csv(out / f"{name}.csv", columns, rows, meta=cfg.meta())
    write_gnuplot(out / f"{name}.gp", csv_path, x, ys, columns, loglog=loglog)
    return csv_path


def run_resonances(cfg: ExperimentConfig) -> None:
    energy = resolve_energy(cfg)
    res = resonances(cfg.alpha, _phase(cfg, energy), _epsilon0(cfg), cfg.K)
    res.to_csv(Path(cfg.out) / "resonances.csv", meta=cfg.meta())
    logger.info("%d resonances with |k| <= %d", len(res), cfg.K)


def run_delta(cfg: ExperimentConfig) -> None:
    energy = resolve_energy(cfg)
    phase = _phase(cfg, energy)
    est = delta_exponent(cfg.alpha, phase, cfg.K, n_jobs=cfg.threads)
    write_json(
        Path(cfg.out) / "delta.json",
        {
            **cfg.meta(),
            "phase": phase,
            "delta_lower_bound": est.lower_bound,
            "witness_k": est.witness_k,
            "search_bound": est.search_bound,
            "exact": est.exact,
        },
    )


def run_ids_scan(cfg: ExperimentConfig) -> None:
    potential = get_potential(cfg.potential, coupling=cfg.coupling)
    curve = ids_curve(potential, cfg.alpha, cfg.energies, size=cfg.size, n_rotation=cfg.n_rotation)
    out = Path(cfg.out)
    curve.to_csv(out / "ids.csv", meta=cfg.meta())
    write_gnuplot(out / "ids.gp", out / "ids.csv", "E", ["N_counting", "N_rotation"], ["E", "N_counting", "N_rotation"])
    gaps = gap_report(curve, cfg.alpha, K=cfg.max_label)
    write_json(out / "gaps.json", {**cfg.meta(), "discrepancy": curve.discrepancy, "gaps": gaps})


def run_gap_edges(cfg: ExperimentConfig) -> None:
    rows = [(r["k"], r["N_star"], r["E_lower"], r["E_upper"]) for r in _gap_edges(cfg)]
    write_csv(Path(cfg.out) / "gap_edges.csv", ("k", "N_star", "E_lower", "E_upper"), rows, meta=cfg.meta())


def run_mfunc(cfg: ExperimentConfig) -> None:
    c = make_cocycle(cfg, resolve_energy(cfg))
    rows = []
    for theta in cfg.theta_probes:
        for eps in cfg.eps_grid.tolist():
            t = whole_line_M(c, theta, complex(c.energy, eps))
            rows.append((theta, eps, t.m_plus.real, t.m_plus.imag, t.m_minus.real, t.m_minus.imag, t.M.real, t.M.imag))
    columns = ("theta", "eps", "re_m_plus", "im_m_plus", "re_m_minus", "im_m_minus", "re_M", "im_M")
    _emit(cfg, "mfunc", columns, rows, x="eps", ys=["im_M"], loglog=True)


def run_measure_scaling(cfg: ExperimentConfig) -> None:
    energy = resolve_energy(cfg)
    c = make_cocycle(cfg, energy)
    theta = cfg.theta_probes[0]
    windows = [measure_window(c, theta, energy, eps, cfg.eta_ratio, method=cfg.method) for eps in cfg.eps_grid.tolist()]
    rows = [(w.eps, w.mass, w.bias, w.eta_used) for w in windows]
    _emit(cfg, "measure", ("eps", "mass", "bias", "eta"), rows, x="eps", ys=["mass"], loglog=True)
    fit = fit_loglog([w.eps for w in windows], [w.mass for w in windows])
    report: dict[str, Any] = {**cfg.meta(), "E": energy, "fit": fit.as_dict()}
    if cfg.potential == "amo" and 0 < cfg.coupling < 1:
        case = amo_case(cfg.coupling, _phase(cfg, energy), cfg.alpha, cfg.max_label, max(1e-4, 4.0 / cfg.n_rotation))
        report["amo_case"] = dataclasses.asdict(case) | {"name": case.name}
    write_json(Path(cfg.out) / "measure_fit.json", report)
    logger.info("Fitted local exponent %.4f +- %.2g", fit.slope, fit.band)


def _law(cfg: ExperimentConfig) -> ScalingLaw:
    if cfg.law == "ak":
        return ScalingLaw.for_anosov_katok(_ak_result(cfg)["ak_build"].schedule.ks, cfg.h, cfg.delta)
    energy = resolve_energy(cfg)
    res = resonances(cfg.alpha, _phase(cfg, energy), _epsilon0(cfg), cfg.K)
    return ScalingLaw.for_amo(cfg.coupling, res)


def run_predict_f(cfg: ExperimentConfig) -> None:
    law = _law(cfg)
    out = Path(cfg.out)
    law.to_csv(out / "predict_f.csv", cfg.eps_grid, meta=cfg.meta())
    columns = ("eps", "f_predicted", "window_id", "branch")
    write_gnuplot(out / "predict_f.gp", out / "predict_f.csv", "eps", ["f_predicted"], columns)
    write_json(out / "law.json", {**cfg.meta(), "law": law.as_dict(), "eps_star": law.eps_star})


def run_detp_profile(cfg: ExperimentConfig) -> None:
    c = make_cocycle(cfg, resolve_energy(cfg))
    prof = profile(c, cfg.theta_probes[0], cfg.k_max)
    out = Path(cfg.out)
    prof.to_csv(out / "detp.csv", meta=cfg.meta())
    columns = ("k", "detP_plus", "detP_minus", "invnormP", "normP", "x11", "eps_of_k")
    write_gnuplot(out / "detp.gp", out / "detp.csv", "k", ["detP_plus", "detP_minus"], columns, loglog=True)


def _energy_scan(cfg: ExperimentConfig, calc: Any, keys: Sequence[str], name: str) -> None:
    cocycles = [make_cocycle(cfg, float(e)) for e in cfg.energies]
    results = calc.calc_many(cocycles, n_jobs=cfg.threads)
    rows = [(c.energy, *(r[k] for k in keys)) for c, r in zip(cocycles, results)]
    _emit(cfg, name, ("E", *keys), rows, x="E", ys=[keys[0]])


def run_lyapunov(cfg: ExperimentConfig) -> None:
    calc = LyapunovCalc(n=cfg.size)
    _energy_scan(cfg, calc, ("lyapunov", "lyapunov_raw", "lyapunov_fluctuation"), "lyapunov")


def run_rotation(cfg: ExperimentConfig) -> None:
    calc = RotationCalc(n=cfg.n_rotation, theta0=cfg.theta_probes[0])
    _energy_scan(cfg, calc, ("rotation_number", "rotation_error", "rotation_converged"), "rotation")


def run_ak_build(cfg: ExperimentConfig) -> None:
    result = _ak_result(cfg)
    out = Path(cfg.out)
    write_json(
        out / "ak_report.json",
        {
            **cfg.meta(),
            "schedule": result["ak_schedule"],
            "diagnostics": result["ak_build"].diagnostics,
            "goodness": result["ak_goodness"],
        },
    )
    write_json(out / "a_infinity.json", {**cfg.meta(), "series": result["a_infinity"].as_dict()})


def ak_threshold(h: float, delta: float) -> float:
    """Smallest det P slope accepted at the resonance peak: 2 + (2 - 2 (2 pi h) / delta) / 2."""
    return 2 + 0.5 * (2 - 2 * (2 * math.pi * h) / delta)


def run_ak_verify(cfg: ExperimentConfig) -> None:
    """Rebuild A_inf and check the rotation identity and the det P window shape at the first resonance."""
    build = _ak_result(cfg)["ak_build"]
    report = ak_goodness_report(build)
    a_inf = build.a_infinity
    rho = rotation_number(a_inf, cfg.n_rotation).value
    expected = build.diagnostics["rotation_expected"]
    rho_err = min(abs(rho - expected), 1 - abs(rho - expected))

    prof_eta = report.eta_profile(1, build.schedule) if len(report.rows) else None
    checks: dict[str, Any] = {"rotation_number": rho, "rotation_expected": expected, "rotation_ok": rho_err <= 1e-3}
    if prof_eta is not None:
        peak = prof_eta.eta_hat * prof_eta.n
        k_lo, k_hi = math.exp(peak - 2), math.exp(peak)
        prof = profile(a_inf, 0.0, int(math.ceil(math.exp(peak + 0.5))))
        slope = prof.slope(k_lo, k_hi)
        checks |= {
            "detp_window": [k_lo, k_hi],
            "detp_slope": slope,
            "detp_threshold": ak_threshold(cfg.h, cfg.delta),
            "detp_ok": slope >= ak_threshold(cfg.h, cfg.delta),
        }
    write_json(Path(cfg.out) / "ak_verify.json", {**cfg.meta(), **checks})
    failed = [k for k, v in checks.items() if k.endswith("_ok") and not v]
    if failed:
        raise ConvergenceError(f"Anosov-Katok verification failed: {failed}", residual=rho_err)


def run_selftest(cfg: ExperimentConfig) -> None:
    """Free-Laplacian m-function oracle and counting IDS against a dense eigensolver."""
    alpha = cfg.alpha
    free = QpCocycle.schrodinger(alpha, get_potential("free"), 0.0)
    zs = np.array([0.3 + 0.1j, -1.5 + 1e-3j, 2.5 + 0.5j])
    worst = 0.0
    for z in zs.tolist():
        m = whole_line_M(free, 0.0, z, force_recursion=True).m_plus
        exact = -complex(attracting_root(z))
        worst = max(worst, abs(m - exact) / abs(exact))
    amo = get_potential("amo", coupling=cfg.coupling)
    size = 200
    diag = np.asarray(amo.evaluate((np.arange(size) * float(alpha)) % 1.0), dtype=float)
    eig = eigvalsh_tridiagonal(diag, np.ones(size - 1))
    es = np.linspace(-2.5, 2.5, 11)
    counting = np.asarray(ids_counting(amo, alpha, 0.0, es, size))
    dense = np.searchsorted(eig, es) / size
    ids_err = float(np.max(np.abs(counting - dense)))
    write_json(Path(cfg.out) / "selftest.json", {**cfg.meta(), "m_rel_err": worst, "ids_err": ids_err})
    if worst > 1e-8 or ids_err > 1.0 / size:
        raise ConvergenceError(f"Self-test failed: m error {worst:.2g}, IDS error {ids_err:.2g}", residual=worst)
    logger.info("Self-test passed")


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], None]] = {
    "resonances": run_resonances,
    "delta": run_delta,
    "ids-scan": run_ids_scan,
    "gap-edges": run_gap_edges,
    "mfunc": run_mfunc,
    "measure-scaling": run_measure_scaling,
    "predict-f": run_predict_f,
    "detp-profile": run_detp_profile,
    "lyapunov": run_lyapunov,
    "rotation": run_rotation,
    "ak-build": run_ak_build,
    "ak-verify": run_ak_verify,
    "selftest": run_selftest,
}


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment and map failures to exit codes."""
    try:
        if cfg.experiment not in EXPERIMENTS:
            raise ValueError(f"Unrecognized experiment={cfg.experiment!r}, must be one of {tuple(EXPERIMENTS)}")
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(cfg.out) / "config.json", {**cfg.as_dict(), "config_hash": cfg.hash})
        EXPERIMENTS[cfg.experiment](cfg)
    except PrecisionExhaustedError as exc:
        logger.error("Precision exhausted: %s (reached %s at %s bits)", exc, exc.achieved, exc.precision_bits)
        return EXIT_PRECISION
    except ConvergenceError as exc:
        logger.error("No convergence: %s (residual %s)", exc, format_value(exc.residual))
        return EXIT_CONVERGENCE
    except ValueError as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Quasi-periodic Schrodinger operator experiments.")
    parser.add_argument("experiment", choices=tuple(EXPERIMENTS), help="Pipeline to run.")
    parser.add_argument("--config", type=Path, default=None, help="JSON experiment config.")
    parser.add_argument("--out", type=str, default=None, help="Output directory.")
    parser.add_argument("--threads", type=int, default=None, help="Worker count for energy scans.")
    parser.add_argument("--precision", type=int, default=None, help="Working precision in bits.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for random theta probes.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG.")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (if any) with the command-line overrides applied."""
    base = ExperimentConfig.from_json(args.config).as_dict() if args.config is not None else {}
    base["experiment"] = args.experiment
    for key in ("out", "threads", "precision", "seed"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    return ExperimentConfig.from_dict(base)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(stream=sys.stderr, level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        cfg = load_config(args)
    except (TypeError, ValueError) as exc:
        logger.error("Invalid config: %s", exc)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
