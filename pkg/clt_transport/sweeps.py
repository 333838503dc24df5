"""
Parameter sweeps over distribution families and the acceptance checks run on them.

A sweep builds one law per grid parameter, computes the distances, class
parameters and band constants for it (one SweepRow), and evaluates the
named checks of its config over the collected rows. Rows are independent,
so they may be computed in worker processes; they are always reported in
grid order.
"""

import configparser
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from . import bounds
from . import cumulants as cu
from . import dist_core as dc
from . import tilt
from . import transport as tr
from .exceptions import CLTTransportError, ReportError, SweepConfigError
from .models import CheckResult, SweepConfig, SweepRow, SweepSummary
from .settings import CONFIG_DIR, get_settings
from .utils.debug import time_function, timed

logger = logging.getLogger(__name__)

LOCK_FILE = CONFIG_DIR / "locked_constants.yaml"
LAW_DIR = CONFIG_DIR / "laws"
SWEEP_DIR = CONFIG_DIR / "sweeps"

# Fixed column order of the CSV report; runtimes live in the timings sidecar.
REPORT_COLUMNS = [name for name in SweepRow.model_fields if name != "runtime_seconds"]
RATIO_COLUMNS = [
    "w1_over_tau",
    "wpsi_over_tau",
    "rho_sigma_over_tau",
    "wpsi_sqrt_n",
    "levy_kolmogorov_ratio",
    "tail_multiplier",
    "c7",
    "c11",
]
SUMMARY_COLUMNS = ["rho", "levy", "w1", "wp", "wpsi"] + RATIO_COLUMNS


# ---------------------------------------------------------------------------
# Laws from text
# ---------------------------------------------------------------------------

def _numbers(args: str, count: Tuple[int, int], spec: str) -> List[float]:
    values = [float(v) for v in args.split(",")] if args else []
    if not count[0] <= len(values) <= count[1]:
        raise SweepConfigError(f"law spec {spec!r} takes {count[0]}..{count[1]} numbers")
    return values


def resolve_law_file(path: Union[str, Path], base: Optional[Path] = None) -> Path:
    """Find a lattice file as given, relative to base, or in the bundled laws directory."""
    candidates = [Path(path)]
    if base is not None:
        candidates.append(base / path)
    candidates.append(LAW_DIR / path)
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise SweepConfigError(f"law file {path} not found")


def parse_law_spec(spec: str, base: Optional[Path] = None) -> dc.Law:
    """
    Build a law from a short text spec.

    Forms: rademacher, rademacher_sum:n, bernoulli:p, binomial:n[,p],
    poisson:lam, dirac:c, gaussian[:mean,variance], grid:step[,variance],
    file:path. Prefixes center: and normalize: apply to any lattice spec,
    e.g. normalize:binomial:64.

    Raises:
        SweepConfigError: for an unknown or malformed spec
    """
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    head = head.lower()
    try:
        if head in ("center", "normalize"):
            inner = parse_law_spec(rest, base)
            if isinstance(inner, dc.GaussianLaw):
                return dc.GaussianLaw(0.0, 1.0 if head == "normalize" else inner.variance)
            return dc.center(inner) if head == "center" else dc.normalize(inner)
        if head == "file":
            return dc.load_lattice_file(resolve_law_file(rest, base))
        if head == "rademacher":
            return dc.rademacher()
        if head == "rademacher_sum":
            (n,) = _numbers(rest, (1, 1), spec)
            return dc.affine(dc.binomial(int(n), 0.5), 2.0, -int(n))
        if head == "bernoulli":
            (p,) = _numbers(rest, (1, 1), spec)
            return dc.bernoulli(p)
        if head == "binomial":
            values = _numbers(rest, (1, 2), spec)
            return dc.binomial(int(values[0]), values[1] if len(values) > 1 else 0.5)
        if head == "poisson":
            (lam,) = _numbers(rest, (1, 1), spec)
            return dc.poisson(lam)
        if head == "dirac":
            (c,) = _numbers(rest, (1, 1), spec)
            return dc.dirac(c)
        if head in ("gaussian", "normal"):
            values = _numbers(rest, (0, 2), spec)
            mean, var = (values + [0.0, 1.0][len(values):])[:2] if values else (0.0, 1.0)
            return dc.GaussianLaw(mean, var)
        if head == "grid":
            values = _numbers(rest, (1, 2), spec)
            return dc.discretized_gaussian(variance=values[1] if len(values) > 1 else 1.0, step=values[0])
    except ValueError as e:
        if isinstance(e, SweepConfigError):
            raise
        raise SweepConfigError(f"bad law spec {spec!r}: {e}") from e
    raise SweepConfigError(f"unknown law spec {spec!r}")


def parse_tail_law(spec: str) -> Optional[dc.LogLattice]:
    """
    Log-mass form of the specs with a closed-form pmf (rademacher_sum,
    binomial, poisson, under any center:/normalize: prefixes); None for the rest.
    """
    head, _, rest = spec.strip().partition(":")
    head = head.lower()
    try:
        if head in ("center", "normalize"):
            inner = parse_tail_law(rest)
            if inner is None:
                return None
            return dc.log_center(inner) if head == "center" else dc.log_normalize(inner)
        if head == "rademacher_sum":
            (n,) = _numbers(rest, (1, 1), spec)
            return dc.log_affine(dc.log_binomial(int(n), 0.5), 2.0, -int(n))
        if head == "binomial":
            values = _numbers(rest, (1, 2), spec)
            return dc.log_binomial(int(values[0]), values[1] if len(values) > 1 else 0.5)
        if head == "poisson":
            (lam,) = _numbers(rest, (1, 1), spec)
            return dc.log_poisson(lam)
    except ValueError as e:
        if isinstance(e, SweepConfigError):
            raise
        raise SweepConfigError(f"bad law spec {spec!r}: {e}") from e
    return None


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyInstance:
    law: dc.LatticeDistribution
    n: Optional[int]
    tau_as: Optional[float]
    """Almost-sure bound of one summand over the normalization, for bounded sums."""

    tails: Optional[dc.LogLattice] = None
    """The same law with its full tails in log-mass form, for the exponential W_psi."""


def _wants_tails(config: SweepConfig) -> bool:
    return "wpsi" in config.distances and config.orlicz_kind == "exp"


def _bounded_sum(
    summand: dc.LatticeDistribution,
    n: int,
    normalize: bool,
    mass_tolerance: float,
    total: Optional[dc.LatticeDistribution] = None,
    tails: Optional[dc.LogLattice] = None,
) -> FamilyInstance:
    """Centered n-fold sum; total and tails, when given, must already be centered."""
    summand = dc.center(summand)
    if total is None:
        total = dc.power_convolve(summand, n)
        total = dc.make_lattice(total.support, total.mass, mass_tolerance=mass_tolerance)
    bound = float(np.max(np.abs(summand.support)))
    if normalize:
        scale = 1.0 / math.sqrt(n * dc.variance(summand))
        scaled_tails = dc.log_affine(tails, scale) if tails is not None else None
        return FamilyInstance(dc.affine(total, scale), n, bound * scale, scaled_tails)
    return FamilyInstance(total, n, bound, tails)


def build_family(config: SweepConfig, parameter: float, base: Optional[Path] = None) -> FamilyInstance:
    """
    The family member of config at one grid parameter, centered (and normalized on request).

    tau_as is set for the bounded-sum families: binomial, rademacher_sum and bounded_iid.
    tails is set when the exponential W_psi is requested.
    """
    tol = config.mass_tolerance
    family = config.family
    with_tails = _wants_tails(config)
    if family == "poisson":
        law = dc.center(dc.poisson(parameter, mass_tolerance=tol))
        tails = dc.log_center(dc.log_poisson(parameter)) if with_tails else None
        if config.normalize:
            tails = dc.log_normalize(tails) if tails is not None else None
            return FamilyInstance(dc.normalize(law), None, None, tails)
        return FamilyInstance(law, None, None, tails)
    if family == "custom":
        if not config.law_file:
            raise SweepConfigError("custom family needs law_file")
        law = dc.center(dc.load_lattice_file(resolve_law_file(config.law_file, base), mass_tolerance=tol))
        law = dc.normalize(law) if config.normalize else law
        return FamilyInstance(law, None, None, dc.log_lattice(law) if with_tails else None)

    n = int(round(parameter))
    if n < 1 or n != parameter:
        raise SweepConfigError(f"{family} needs integer n >= 1, got {parameter}")
    if family == "rademacher_sum":
        law = dc.affine(dc.binomial(n, 0.5, mass_tolerance=tol), 2.0, -n)
        tails = dc.log_affine(dc.log_binomial(n, 0.5), 2.0, -n) if with_tails else None
        if config.normalize:
            scale = 1.0 / math.sqrt(n)
            tails = dc.log_affine(tails, scale) if tails is not None else None
            return FamilyInstance(dc.affine(law, scale), n, scale, tails)
        return FamilyInstance(law, n, 1.0, tails)
    if family == "binomial":
        total = dc.center(dc.binomial(n, config.p, mass_tolerance=tol))
        tails = dc.log_center(dc.log_binomial(n, config.p)) if with_tails else None
        return _bounded_sum(dc.bernoulli(config.p), n, config.normalize, tol, total, tails)
    if family == "bounded_iid":
        if not config.law_file:
            raise SweepConfigError("bounded_iid family needs law_file")
        summand = dc.load_lattice_file(resolve_law_file(config.law_file, base))
        tails = None
        if with_tails:
            # convolve on the summand's own grid, then center
            tails = dc.log_affine(dc.log_power_convolve(dc.log_lattice(summand), n), 1.0, -n * dc.mean(summand))
        return _bounded_sum(summand, n, config.normalize, tol, tails=tails)
    raise SweepConfigError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Rows
# ---------------------------------------------------------------------------

def _orlicz_cost(config: SweepConfig) -> tr.OrliczCost:
    return tr.OrliczCost(config.orlicz_kind, config.wp_order if config.orlicz_kind == "pow" else 1.0)


def _safe_ratio(num: Optional[float], den: Optional[float]) -> Optional[float]:
    if num is None or den is None or not den > 0:
        return None
    return num / den


@timed
def _build_row(config: SweepConfig, parameter: float, base: Optional[Path]) -> SweepRow:
    member = build_family(config, parameter, base)
    d = member.law
    companion = dc.gaussian_companion(d)
    sigma = companion.std
    tau_stat = cu.statulevicius_tau(d, config.cumulant_order).tau_estimate
    tau_bern = cu.bernstein_tau_1d(d, config.cumulant_order).tau_estimate
    tau = member.tau_as if member.tau_as is not None else tau_stat
    values: Dict[str, Optional[float]] = {}

    if "rho" in config.distances:
        values["rho"] = tr.kolmogorov_distance(d, companion).value
        if tau > 0:
            values["smoothing_bound"] = bounds.smoothing_rho_bound(d, 1.0 / tau)
    if "levy" in config.distances:
        values["levy"] = tr.levy_distance(d, companion).value
    if "w1" in config.distances:
        w1 = tr.w1_distance(d, companion)
        values["w1"] = w1.value
        values["w1_quantile"] = w1.diagnostics["quantile_form"]
    if "wp" in config.distances:
        values["wp"] = tr.wp_distance(d, companion, config.wp_order).value
    if "wpsi" in config.distances:
        target = member.tails if member.tails is not None else d
        values["wpsi"] = tr.orlicz_wasserstein(target, companion, _orlicz_cost(config)).value

    bands = bounds.coupling_band_report(d, tau, config.band_c10) if tau > 0 else None
    c11 = None
    if bands is not None:
        present = [bands.c11[f"{c:g}"] for c in config.band_c10 if bands.c11[f"{c:g}"] is not None]
        c11 = present[-1] if present else None

    levy_scale = None
    if 0 < tau < 1:
        levy_scale = math.sqrt(tau) * math.log(1.0 / tau) ** 0.25

    row = SweepRow(
        family=config.family,
        parameter=parameter,
        n=member.n,
        sigma=sigma,
        tau=tau,
        tau_as=member.tau_as,
        tau_stat=tau_stat,
        tau_bern=tau_bern,
        w1_over_tau=_safe_ratio(values.get("w1"), tau),
        wpsi_over_tau=_safe_ratio(values.get("wpsi"), tau),
        rho_sigma_over_tau=_safe_ratio(values["rho"] * sigma, tau) if "rho" in values else None,
        wpsi_sqrt_n=values["wpsi"] * math.sqrt(member.n) if "wpsi" in values and member.n else None,
        levy_kolmogorov_ratio=_safe_ratio(values.get("levy"), levy_scale),
        tail_multiplier=(bounds.tail_bound_verify(d, member.tau_as).minimal_constant
                         if member.tau_as is not None else None),
        c7=bands.c7 if bands is not None else None,
        c11=c11,
        **values,
    )
    return row


def compute_row(config: SweepConfig, parameter: float, base: Optional[Path] = None) -> SweepRow:
    """
    All quantities of one family member.

    tau convention: the a.s. bound over the normalization for bounded sums,
    the Statulevicius tau of the full law otherwise.
    """
    row, elapsed = _build_row(config, parameter, base)
    logger.debug(f"{config.name}: row {parameter:g} computed in {elapsed:.2f}s")
    return row.model_copy(update={"runtime_seconds": elapsed})


def _row_or_error(config: SweepConfig, parameter: float, base: Optional[Path]) -> SweepRow:
    try:
        return compute_row(config, parameter, base)
    except (CLTTransportError, ArithmeticError, ValueError) as e:
        logger.error(f"{config.name}: row {parameter:g} failed: {e}", exc_info=True)
        return SweepRow(family=config.family, parameter=parameter, error=f"{type(e).__name__}: {e}")


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    description: str
    func: Callable
    needs_rows: bool = True
    lockable: bool = False


def _column(rows: Sequence[SweepRow], name: str) -> List[float]:
    return [getattr(r, name) for r in rows if r.error is None and getattr(r, name) is not None]


def _missing(name: str, column: str) -> CheckResult:
    return CheckResult(name=name, passed=False, message=f"no rows with {column}")


def _ceiling_check(name: str, rows, column: str, ceiling: float) -> CheckResult:
    values = _column(rows, column)
    if not values:
        return _missing(name, column)
    observed = max(values)
    return CheckResult(name=name, passed=observed <= ceiling, observed=observed, limit=ceiling)


def _locked_ceiling(name: str, observed: float, config: SweepConfig, passed: bool, message: str = "") -> CheckResult:
    locked = config.locked.get(name)
    if locked is None:
        return CheckResult(name=name, passed=passed, observed=observed,
                           message=(message + "; " if message else "") + "constant not locked yet")
    return CheckResult(name=name, passed=passed and observed <= locked * (1 + 1e-9),
                       observed=observed, limit=locked, locked=True, message=message)


def check_w1_forms(rows, config) -> CheckResult:
    settings = get_settings()
    pairs = [(r.w1, r.w1_quantile) for r in rows if r.error is None and r.w1 is not None]
    if not pairs:
        return _missing("w1_forms_agree", "w1")
    gaps = [abs(a - b) / max(settings.w1_cross_check_abs, settings.w1_cross_check_rel * a) for a, b in pairs]
    return CheckResult(name="w1_forms_agree", passed=max(gaps) <= 1.0, observed=max(gaps), limit=1.0,
                       message="largest gap in units of the allowed tolerance")


def check_wpsi_bounded(rows, config) -> CheckResult:
    values = [(r.parameter, r.wpsi) for r in rows if r.error is None and r.wpsi is not None]
    if not values:
        return _missing("wpsi_bounded", "wpsi")
    early = [v for p, v in values if p <= 10]
    overall = max(v for _, v in values)
    if not early:
        return CheckResult(name="wpsi_bounded", passed=False, observed=overall, message="no rows with parameter <= 10")
    limit = 1.25 * max(early)
    return _locked_ceiling("wpsi_bounded", overall, config, overall <= limit,
                           message=f"max {overall:.6g} against 1.25 x early max {max(early):.6g}")


def check_wpsi_rate(rows, config) -> CheckResult:
    values = _column(rows, "wpsi_sqrt_n")
    if not values:
        return _missing("wpsi_sqrt_n_rate", "wpsi_sqrt_n")
    spread = max(values) / min(values)
    return CheckResult(name="wpsi_sqrt_n_rate", passed=spread <= 2.0, observed=spread, limit=2.0)


def check_w1_over_tau(rows, config) -> CheckResult:
    return _ceiling_check("w1_over_tau", rows, "w1_over_tau", 3.0)


def check_rho_sigma_over_tau(rows, config) -> CheckResult:
    return _ceiling_check("rho_sigma_over_tau", rows, "rho_sigma_over_tau", 2.0)


def check_smoothing_valid(rows, config) -> CheckResult:
    pairs = [(r.smoothing_bound, r.rho) for r in rows
             if r.error is None and r.smoothing_bound is not None and r.rho is not None]
    if not pairs:
        return _missing("smoothing_bound_valid", "smoothing_bound")
    worst = min(b - rho for b, rho in pairs)
    return CheckResult(name="smoothing_bound_valid", passed=worst >= 0, observed=worst, limit=0.0,
                       message="smallest bound minus exact Kolmogorov distance")


def check_tail_bound(rows, config) -> CheckResult:
    return _ceiling_check("tail_bound", rows, "tail_multiplier", 1.0)


def check_band_stability(rows, config) -> CheckResult:
    c7 = _column(rows, "c7")
    c11 = _column(rows, "c11")
    if not c7:
        return _missing("band_stability", "c7")
    spreads = [max(c7) / min(c7)] if min(c7) > 0 else [math.inf]
    if c11:
        spreads.append(max(c11) / min(c11) if min(c11) > 0 else math.inf)
    spread = max(spreads)
    result = _locked_ceiling("band_stability", max(c7 + c11), config, spread <= 2.0,
                             message=f"spread {spread:.4g} (limit 2)")
    return result


def check_levy_rate(rows, config) -> CheckResult:
    values = _column(rows, "levy_kolmogorov_ratio")
    if not values:
        return _missing("levy_rate", "levy_kolmogorov_ratio")
    return _locked_ceiling("levy_rate", max(values), config, True)


@time_function
def check_mills_lemma() -> CheckResult:
    report = bounds.mills_lemma_check()
    return CheckResult(name="mills_lemma", passed=report.holds, observed=float(report.violations), limit=0.0)


@time_function
def check_comonotone_oracle(pairs: int = 50, seed: int = 20240607) -> CheckResult:
    """Quantile coupling cost against the LP optimum on random small lattice pairs."""
    rng = np.random.default_rng(seed)
    costs = [tr.OrliczCost.absolute(), tr.OrliczCost.power(2), tr.OrliczCost.exp_minus_one()]
    worst = 0.0
    for _ in range(pairs):
        n, m = rng.integers(2, 13, size=2)
        mu = dc.make_lattice(np.sort(rng.normal(size=n)), rng.dirichlet(np.ones(n)), mass_tolerance=1e-30)
        nu = dc.make_lattice(np.sort(rng.normal(0.2, 1.3, size=m)), rng.dirichlet(np.ones(m)), mass_tolerance=1e-30)
        for cost in costs:
            worst = max(worst, abs(tr.comonotone_cost(mu, nu, cost) - tr.discrete_ot_oracle(mu, nu, cost)))
    return CheckResult(name="comonotone_oracle", passed=worst <= 1e-8, observed=worst, limit=1e-8)


@time_function
def check_cumulant_certificates() -> CheckResult:
    worst = 0.0
    for lam in (1.0, 10.0, 100.0):
        d = dc.center(dc.poisson(lam, mass_tolerance=1e-20))
        worst = max(worst, abs(cu.statulevicius_tau(d, 8).tau_estimate - 1.0 / 3.0))
    worst = max(worst, abs(cu.statulevicius_tau(dc.rademacher(), 4).tau_estimate - 6 ** -0.5))
    return CheckResult(name="cumulant_certificates", passed=worst <= 1e-9, observed=worst, limit=1e-9)


@time_function
def check_tilt_closed_forms() -> CheckResult:
    poisson = dc.center(dc.poisson(4.0, mass_tolerance=1e-30))
    errors = [
        abs(tilt.solve_tilt(poisson, 2.0) - math.log(1.5)),
        abs(tilt.solve_tilt(dc.rademacher(), 0.8) - math.atanh(0.8)),
    ]
    shifted = tilt.esscher_transform(dc.poisson(4.0, mass_tolerance=1e-30), math.log(1.5)).tilted
    tv = dc.total_variation(shifted, dc.poisson(6.0, mass_tolerance=1e-30))
    observed = max(errors)
    return CheckResult(name="tilt_closed_forms", passed=observed <= 1e-9 and tv <= 1e-10, observed=observed,
                       limit=1e-9, message=f"Poisson tilt TV {tv:.2e}")


CHECKS: Dict[str, Check] = {c.name: c for c in [
    Check("w1_forms_agree", "CDF and quantile forms of W1 agree on every row", check_w1_forms),
    Check("wpsi_bounded", "W_psi does not grow along the grid", check_wpsi_bounded, lockable=True),
    Check("wpsi_sqrt_n_rate", "W_psi sqrt(n) stays within a factor 2", check_wpsi_rate),
    Check("w1_over_tau", "W1 / tau <= 3", check_w1_over_tau),
    Check("rho_sigma_over_tau", "Kolmogorov distance sigma / tau <= 2", check_rho_sigma_over_tau),
    Check("smoothing_bound_valid", "smoothing bound at T = 1/tau dominates the Kolmogorov distance",
          check_smoothing_valid),
    Check("tail_bound", "Bernstein-type tail bound holds with multiplier 1", check_tail_bound),
    Check("band_stability", "coupling band constants vary by at most a factor 2", check_band_stability,
          lockable=True),
    Check("levy_rate", "Levy distance / (tau^1/2 log^1/4(1/tau)) below the locked constant", check_levy_rate,
          lockable=True),
    Check("mills_lemma", "Mills-ratio inequalities on the default grid", check_mills_lemma, needs_rows=False),
    Check("comonotone_oracle", "quantile coupling matches the LP optimum on 50 random pairs",
          check_comonotone_oracle, needs_rows=False),
    Check("cumulant_certificates", "Statulevicius tau closed forms", check_cumulant_certificates, needs_rows=False),
    Check("tilt_closed_forms", "Esscher transform and tilt solver closed forms", check_tilt_closed_forms,
          needs_rows=False),
]}


def run_check(name: str, rows: Sequence[SweepRow] = (), config: Optional[SweepConfig] = None) -> CheckResult:
    check = CHECKS.get(name)
    if check is None:
        raise SweepConfigError(f"unknown check {name!r}")
    try:
        return check.func(list(rows), config) if check.needs_rows else check.func()
    except CLTTransportError as e:
        logger.error(f"Check {name} raised: {e}", exc_info=True)
        return CheckResult(name=name, passed=False, message=f"{type(e).__name__}: {e}")


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def summarize(rows: Sequence[SweepRow], config: SweepConfig) -> SweepSummary:
    good = [r for r in rows if r.error is None]
    column_max, column_min = {}, {}
    for column in SUMMARY_COLUMNS:
        values = _column(good, column)
        if values:
            column_max[column] = max(values)
            column_min[column] = min(values)
    checks = [run_check(name, rows, config) for name in config.checks]
    return SweepSummary(
        name=config.name,
        family=config.family,
        rows=len(rows),
        failed_rows=len(rows) - len(good),
        column_max=column_max,
        column_min=column_min,
        checks=checks,
        passed=all(c.passed for c in checks),
    )


def run_sweep(
    config: SweepConfig,
    workers: Optional[int] = None,
    progress: Optional[Callable[[SweepRow], None]] = None,
    base: Optional[Path] = None,
) -> Tuple[List[SweepRow], SweepSummary]:
    """
    Compute every row of the sweep and its summary.

    Rows that raise are recorded with their error and the sweep goes on.
    The returned rows are in grid order whatever the worker count.
    """
    for name in config.checks:
        if name not in CHECKS:
            raise SweepConfigError(f"unknown check {name!r} in {config.name}")
    workers = workers or config.workers or get_settings().workers
    logger.info(f"Starting sweep {config.name}: {config.family} over {len(config.parameters)} parameters")
    start = time.perf_counter()

    rows: Dict[int, SweepRow] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(_row_or_error, config, p, base) for i, p in enumerate(config.parameters)}
            for i, future in futures.items():
                rows[i] = future.result()
                if progress:
                    progress(rows[i])
    else:
        for i, p in enumerate(config.parameters):
            rows[i] = _row_or_error(config, p, base)
            if progress:
                progress(rows[i])

    ordered = [rows[i] for i in range(len(config.parameters))]
    ordered.sort(key=lambda r: r.parameter)
    summary = summarize(ordered, config)
    logger.info(
        f"Sweep {config.name} finished in {time.perf_counter() - start:.1f}s: "
        f"{summary.failed_rows} failed rows, {'passed' if summary.passed else 'FAILED'}"
    )
    return ordered, summary


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

_LIST_FIELDS = {"parameters", "distances", "formats", "checks", "band_c10"}


def _ini_to_dict(path: Path) -> dict:
    parser = configparser.ConfigParser()
    parser.read(path)
    if not parser.has_section("sweep"):
        raise SweepConfigError(f"{path} has no [sweep] section")
    data = {}
    for key, value in parser.items("sweep"):
        data[key] = [v.strip() for v in value.split(",") if v.strip()] if key in _LIST_FIELDS else value
    if parser.has_section("locked"):
        data["locked"] = {k: float(v) for k, v in parser.items("locked")}
    return data


def load_locked_constants(path: Path = LOCK_FILE) -> Dict[str, Dict[str, float]]:
    """Locked constants per sweep name; missing file means nothing is locked."""
    if not path.is_file():
        return {}
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    return {name: {k: float(v) for k, v in (values or {}).items() if v is not None}
            for name, values in data.items()}


def load_sweep_config(path: Union[str, Path], lock_file: Path = LOCK_FILE) -> SweepConfig:
    """
    Read a sweep config from YAML or INI ([sweep] key = value, comma lists).

    Locked constants from the lock file are merged under the ones given in
    the config itself.

    Raises:
        SweepConfigError: for unreadable files or invalid fields
    """
    path = Path(path)
    if not path.is_file() and (SWEEP_DIR / path).is_file():
        path = SWEEP_DIR / path
    try:
        if path.suffix in (".yaml", ".yml"):
            with open(path, "r") as f:
                data = yaml.safe_load(f) or {}
        else:
            data = _ini_to_dict(path)
    except (OSError, yaml.YAMLError, configparser.Error) as e:
        raise SweepConfigError(f"cannot read sweep config {path}: {e}") from e
    data.setdefault("name", path.stem)
    locked = dict(load_locked_constants(lock_file).get(data["name"], {}))
    locked.update(data.get("locked") or {})
    data["locked"] = locked
    try:
        return SweepConfig.model_validate(data)
    except ValidationError as e:
        raise SweepConfigError(f"invalid sweep config {path}:\n{e}") from e


def bundled_sweeps() -> List[Path]:
    return sorted(p for p in SWEEP_DIR.iterdir() if p.suffix in (".yaml", ".yml", ".ini"))


def write_locks(summary: SweepSummary, lock_file: Path = LOCK_FILE) -> Dict[str, float]:
    """Store the observed values of the lockable checks of a sweep."""
    data = {}
    if lock_file.is_file():
        with open(lock_file, "r") as f:
            data = yaml.safe_load(f) or {}
    observed = {c.name: c.observed for c in summary.checks
                if CHECKS[c.name].lockable and c.observed is not None and math.isfinite(c.observed)}
    section = data.get(summary.name) or {}
    section.update(observed)
    data[summary.name] = section
    with open(lock_file, "w") as f:
        yaml.safe_dump(data, f, sort_keys=True)
    logger.info(f"Locked {sorted(observed)} for {summary.name} in {lock_file}")
    return observed


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def rows_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=REPORT_COLUMNS + ["runtime_seconds"])


def emit_report(
    rows: Sequence[SweepRow],
    summary: SweepSummary,
    config: SweepConfig,
    output_dir: Optional[Union[str, Path]] = None,
    formats: Optional[Sequence[str]] = None,
) -> List[Path]:
    """
    Write <name>.csv / <name>.json, the plot-ready <name>.plot.csv and the
    <name>.timings.csv sidecar.

    The CSV columns follow REPORT_COLUMNS with report_digits significant
    digits. The JSON keeps full float precision so it reads back exactly.

    Raises:
        ReportError: on empty rows or I/O failure
    """
    if not rows:
        raise ReportError("no rows to report")
    digits = get_settings().report_digits
    float_format = f"%.{digits}g"
    out = Path(output_dir or config.output_dir)
    formats = list(formats or config.formats)
    frame = rows_frame(rows)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        stem = out / config.name
        if "csv" in formats:
            path = stem.with_suffix(".csv")
            frame[REPORT_COLUMNS].to_csv(path, index=False, float_format=float_format)
            written.append(path)
        if "json" in formats:
            path = stem.with_suffix(".json")
            payload = {
                "config": config.model_dump(mode="json"),
                "rows": [r.model_dump(exclude={"runtime_seconds"}) for r in rows],
                "summary": summary.model_dump(),
            }
            with open(path, "w") as f:
                json.dump(payload, f, indent=2)
            written.append(path)
        plot_path = out / f"{config.name}.plot.csv"
        frame[["parameter"] + RATIO_COLUMNS].to_csv(plot_path, index=False, float_format=float_format)
        written.append(plot_path)
        timings_path = out / f"{config.name}.timings.csv"
        frame[["parameter", "runtime_seconds"]].to_csv(timings_path, index=False, float_format="%.3f")
        written.append(timings_path)
    except OSError as e:
        raise ReportError(f"cannot write report for {config.name}: {e}") from e
    logger.info(f"Wrote {', '.join(str(p) for p in written)}")
    return written


def read_report_json(path: Union[str, Path]) -> Tuple[List[SweepRow], SweepSummary]:
    """Rows and summary of a JSON report written by emit_report."""
    try:
        with open(path, "r") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ReportError(f"cannot read report {path}: {e}") from e
    rows = [SweepRow.model_validate(r) for r in payload["rows"]]
    return rows, SweepSummary.model_validate(payload["summary"])
