"""
Closed-form bounds and their verifiers.

Every verifier returns a BandReport: the inequality lhs <= constant * rhs
evaluated on a grid, the smallest constant that makes it hold there, and
whether the supplied constant is enough. Band reports are reports, not
assertions; a violated bound is a value the caller inspects.
"""

import logging
import math
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special

from . import dist_core as dc
from .cumulants import _check_centered
from .exceptions import CertificateError, DistributionError
from .models import BandReport, CouplingBands
from .transport import coupling_profile
from .utils.numerics import adaptive_gauss_legendre

logger = logging.getLogger(__name__)

# Esseen smoothing constants: (1/pi) int_{-T}^{T} |f - g| / |t| dt + 24 m / (pi T)
ESSEEN_DENSITY_FACTOR = 24.0 / math.pi

DEFAULT_C10 = (0.1, 0.2, 0.5)
_SLACK = 1e-12


def mills_ratio(x):
    """
    Xi(x) = exp(x^2 / 2) int_x^inf exp(-y^2 / 2) dy for x > 0.

    Evaluated as sqrt(pi / 2) erfcx(x / sqrt 2), which neither overflows nor
    cancels for large x.

    Raises:
        DistributionError: if some x <= 0
    """
    xs = np.asarray(x, dtype=float)
    if np.any(~(xs > 0)):
        raise DistributionError("the Mills ratio is defined for x > 0")
    out = math.sqrt(math.pi / 2.0) * special.erfcx(xs / math.sqrt(2.0))
    return float(out) if np.ndim(x) == 0 else out


def _band(name: str, x, lhs, rhs, constant: Optional[float], labels=None, details=None) -> BandReport:
    """Assemble lhs <= C rhs into a report; rhs must be positive where lhs is."""
    x, lhs, rhs = (np.asarray(v, dtype=float) for v in (x, lhs, rhs))
    if x.size == 0:
        return BandReport(name=name, empty=True, constant=constant if constant is not None else 0.0,
                          details=details or {})
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs > 0, lhs / rhs, 0.0)
    minimal = float(np.max(ratio))
    if constant is None:
        constant = minimal
    violations = int(np.sum(ratio > constant * (1 + _SLACK)))
    return BandReport(
        name=name,
        x_grid=x.tolist(),
        lhs=lhs.tolist(),
        rhs=rhs.tolist(),
        labels=list(labels) if labels is not None else [],
        minimal_constant=minimal,
        constant=constant,
        holds=violations == 0,
        violations=violations,
        details=details or {},
    )


def band_report_frame(report: BandReport) -> pd.DataFrame:
    """Per-point table of a band report (for CSV export)."""
    frame = pd.DataFrame({"x": report.x_grid, "lhs": report.lhs, "rhs": report.rhs})
    if report.labels:
        frame["label"] = report.labels
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["ratio"] = np.where(frame["lhs"] > 0, frame["lhs"] / frame["rhs"], 0.0)
    return frame


# ---------------------------------------------------------------------------
# Mills ratio and Gaussian tails
# ---------------------------------------------------------------------------

MILLS_CHECKS = (
    "mills_decreasing",
    "mills_lipschitz",
    "mills_lower",
    "mills_upper",
    "tail_shift_out",
    "tail_shift_in",
)


def mills_lemma_check(
    x_grid: Optional[Sequence[float]] = None,
    eps_grid: Optional[Sequence[float]] = None,
    sigma: float = 1.0,
) -> BandReport:
    """
    Check the Mills-ratio and Gaussian tail-shift inequalities on a grid.

    For x > 0 and eps >= 0:
        0 <= Xi(x) - Xi(x + eps) <= eps / x^2
        (1 / x)(1 - 1 / x^2) <= Xi(x) <= 1 / x
        1 - Phi_s(x + eps) <= (1 - Phi_s(x)) exp(-(2 x eps + eps^2) / 2 s^2)
        1 - Phi_s(x) <= (1 - Phi_s(x - eps)) exp(-(2 x eps - eps^2) / 2 s^2)   (x > eps)
    Tail inequalities are compared in log space. Defaults: 100 x 100
    geometric grids on [0.1, 20] x [0.01, 5].
    """
    xs = np.geomspace(0.1, 20.0, 100) if x_grid is None else np.asarray(x_grid, dtype=float)
    eps = np.geomspace(0.01, 5.0, 100) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if np.any(~(xs > 0)) or np.any(eps < 0):
        raise DistributionError("mills_lemma_check needs x > 0 and eps >= 0")
    if not sigma > 0:
        raise DistributionError(f"sigma must be positive, got {sigma}")
    x, e = np.meshgrid(xs, eps, indexing="ij")
    x, e = x.ravel(), e.ravel()

    xi_x, xi_xe = mills_ratio(x), mills_ratio(x + e)
    drop = xi_x - xi_xe
    log_sf = lambda t: special.log_ndtr(-t / sigma)
    inner = x > e

    # each check as a margin: rhs - lhs >= -slack
    margins: Dict[str, np.ndarray] = {
        "mills_decreasing": drop,
        "mills_lipschitz": e / x ** 2 - drop,
        "mills_lower": xi_x - (1.0 / x) * (1.0 - 1.0 / x ** 2),
        "mills_upper": 1.0 / x - xi_x,
        "tail_shift_out": log_sf(x) - (2 * x * e + e ** 2) / (2 * sigma ** 2) - log_sf(x + e),
        "tail_shift_in": (log_sf(x[inner] - e[inner]) - (2 * x[inner] * e[inner] - e[inner] ** 2) / (2 * sigma ** 2)
                          - log_sf(x[inner])),
    }
    details = {}
    violations = 0
    for label in MILLS_CHECKS:
        margin = margins[label]
        bad = margin < -_SLACK * np.maximum(1.0, np.abs(margin))
        violations += int(np.sum(bad))
        details[label] = {
            "checked": int(margin.size),
            "violations": int(np.sum(bad)),
            "worst_margin": float(np.min(margin)) if margin.size else 0.0,
        }
    if violations:
        logger.warning(f"Mills lemma check: {violations} violations")
    return BandReport(
        name="mills_lemma",
        labels=list(MILLS_CHECKS),
        minimal_constant=0.0,
        constant=0.0,
        holds=violations == 0,
        violations=violations,
        details=details,
    )


def bernstein_tail(sigma: float, tau: float, x):
    """
    max{exp(-x^2 / 4 sigma^2), exp(-x / 4 tau)}.

    The two branches meet at x = sigma^2 / tau; below it the Gaussian branch
    is the larger one.
    """
    if not (sigma > 0 and tau > 0):
        raise DistributionError(f"sigma and tau must be positive, got {sigma}, {tau}")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise DistributionError("bernstein_tail needs x >= 0")
    out = np.exp(np.maximum(-xs ** 2 / (4 * sigma ** 2), -xs / (4 * tau)))
    return float(out) if np.ndim(x) == 0 else out


def tail_bound_verify(d: dc.LatticeDistribution, tau: float, constant: float = 1.0) -> BandReport:
    """
    Exact P(xi >= x) against bernstein_tail(sigma, tau, x) at every atom x >= 0.

    minimal_constant is the smallest multiplier k such that the bound with
    k tau holds at every atom (the Gaussian branch does not depend on tau).
    """
    if not tau > 0:
        raise DistributionError(f"tau must be positive, got {tau}")
    var = _check_centered(d, "tail_bound_verify")
    sigma = math.sqrt(var)
    keep = d.support >= 0
    x = d.support[keep]
    upper = d.tail[:-1][keep]
    log_upper = np.log(upper)
    gaussian_branch = -x ** 2 / (4 * var)

    needed = np.zeros_like(x)
    exceeds = log_upper > gaussian_branch * (1 + _SLACK)
    with np.errstate(divide="ignore"):
        needed[exceeds] = np.where(
            log_upper[exceeds] < 0, x[exceeds] / (4 * tau * -log_upper[exceeds]), np.inf
        )
    minimal = float(np.max(needed)) if needed.size else 0.0
    rhs = bernstein_tail(sigma, tau, x)
    violations = int(np.sum(needed > constant * (1 + _SLACK)))
    return BandReport(
        name="bernstein_tail",
        x_grid=x.tolist(),
        lhs=upper.tolist(),
        rhs=np.atleast_1d(rhs).tolist(),
        minimal_constant=minimal,
        constant=constant,
        holds=violations == 0,
        violations=violations,
        details={"sigma": sigma, "tau": tau, "switch_point": var / tau},
    )


# ---------------------------------------------------------------------------
# Characteristic functions and the smoothing inequality
# ---------------------------------------------------------------------------

def _cf_gap(d: dc.LatticeDistribution, companion: dc.GaussianLaw, t: np.ndarray) -> np.ndarray:
    return np.abs(dc.characteristic_eval(d, t) - dc.characteristic_eval(companion, t))


def cf_bound_report(
    d: dc.LatticeDistribution,
    tau: float,
    t_grid: Optional[Iterable[float]] = None,
) -> BandReport:
    """
    |f(t) - g(t)| against (tau / 6) sigma^2 |t|^3 exp(-sigma^2 t^2 / 3) for |t| tau <= 1.

    g is the characteristic function of the Gaussian companion. The default
    grid has 64 points on [-1/tau, 1/tau]. minimal_constant is the largest
    ratio, which is also the smallest tau multiplier.

    Raises:
        CertificateError: if the grid leaves |t| tau <= 1
    """
    if not tau > 0:
        raise CertificateError(f"tau must be positive, got {tau}")
    t = np.linspace(-1.0 / tau, 1.0 / tau, 64) if t_grid is None else np.asarray(list(t_grid), dtype=float)
    if np.any(np.abs(t) * tau > 1 + _SLACK):
        raise CertificateError("cf_bound_report grid must satisfy |t| tau <= 1")
    companion = dc.gaussian_companion(d)
    var = companion.variance
    lhs = _cf_gap(d, companion, t)
    rhs = tau / 6.0 * var * np.abs(t) ** 3 * np.exp(-var * t ** 2 / 3.0)
    # at t = 0 both sides vanish
    lhs = np.where(t == 0, 0.0, lhs)
    return _band("cf_difference", t, lhs, rhs, constant=1.0, details={"tau": tau, "sigma": math.sqrt(var)})


def smoothing_rho_bound(d: dc.LatticeDistribution, T: float, epsabs: float = 1e-10) -> float:
    """
    Esseen smoothing bound on the Kolmogorov distance to the Gaussian companion:

        (2 / pi) int_0^T |f(t) - g(t)| / t dt + 24 / (pi sqrt(2 pi) sigma T)

    The integral runs over [0, T]. The integrand is even in t, so 2 / pi
    times it equals 1 / pi times the integral over [-T, T]. The 1 / pi
    prefactor applied to the half-line integral gives half of this term;
    the value returned is never below that reading.

    Raises:
        QuadratureError: if the integral does not converge
    """
    if not T > 0:
        raise DistributionError(f"smoothing level must be positive, got {T}")
    companion = dc.gaussian_companion(d)
    integrand = lambda t: _cf_gap(d, companion, t) / t
    integral, err, level = adaptive_gauss_legendre(integrand, 0.0, T, epsabs=epsabs)
    density_term = ESSEEN_DENSITY_FACTOR / (math.sqrt(2 * math.pi) * companion.std * T)
    bound = 2.0 / math.pi * integral + density_term
    logger.debug(f"smoothing bound at T={T:.6g}: integral {integral:.6g} (err {err:.1e}), total {bound:.6g}")
    return bound


# ---------------------------------------------------------------------------
# Coupling bands and moderate-deviation tails
# ---------------------------------------------------------------------------

def coupling_band_report(
    f: dc.LatticeDistribution,
    tau: float,
    c10_values: Sequence[float] = DEFAULT_C10,
    c7: Optional[float] = None,
    c11: Optional[float] = None,
) -> CouplingBands:
    """
    Displacement of the quantile coupling against the Gaussian companion, by region.

    Inner region |x| <= 2 sigma: displacement <= c7 tau.
    Outer region 2 sigma <= |x| <= c10 sigma^2 / tau: displacement <= c11 tau x^2 / sigma^2,
    for each c10 in c10_values. The displacement of an atom is the worst
    case over its Gaussian partner interval. Empty regions are reported,
    with the constant left as None.
    """
    if not tau > 0:
        raise DistributionError(f"tau must be positive, got {tau}")
    var = _check_centered(f, "coupling_band_report")
    sigma = math.sqrt(var)
    cells = coupling_profile(f, dc.gaussian_companion(f))
    atoms = np.array([c.atom for c in cells])
    shift = np.array([c.max_displacement for c in cells])
    clipped = sum(c.clipped_low or c.clipped_high for c in cells)

    inner_mask = np.abs(atoms) <= 2 * sigma
    inner = _band(
        "inner", atoms[inner_mask], shift[inner_mask], np.full(int(inner_mask.sum()), tau), c7,
        details={"clipped_cells": clipped},
    )

    outer, c11_values = {}, {}
    for c10 in c10_values:
        key = f"{c10:g}"
        mask = (np.abs(atoms) >= 2 * sigma) & (np.abs(atoms) <= c10 * var / tau)
        rhs = tau * atoms[mask] ** 2 / var
        report = _band(f"outer[c10={key}]", atoms[mask], shift[mask], rhs, c11, details={"c10": c10})
        outer[key] = report
        c11_values[key] = None if report.empty else report.minimal_constant
        if report.empty:
            logger.info(f"Band 2 sigma <= |x| <= {c10:g} sigma^2 / tau is empty (tau/sigma = {tau / sigma:.4g})")

    return CouplingBands(
        tau=tau,
        sigma=sigma,
        c7=None if inner.empty else inner.minimal_constant,
        c11=c11_values,
        inner=inner,
        outer=outer,
    )


def tail_ratio_report(d: dc.LatticeDistribution, tau: float) -> BandReport:
    """
    Moderate-deviation tail comparison on 2 sigma <= x <= sigma^2 / (5 tau).

    For each atom records c = |log((1 - F(x)) / (1 - Phi(x / sigma)))| sigma^4 / (tau x^3),
    the constant in 1 - F(x) = (1 - Phi(x / sigma)) exp(theta c tau x^3 / sigma^4).
    Stored as lhs = |log ratio|, rhs = tau x^3 / sigma^4.
    """
    if not tau > 0:
        raise DistributionError(f"tau must be positive, got {tau}")
    var = _check_centered(d, "tail_ratio_report")
    sigma = math.sqrt(var)
    mask = (d.support >= 2 * sigma) & (d.support <= var / (5 * tau))
    x = d.support[mask]
    survival = np.asarray(dc.sf_eval(d, x), dtype=float) if x.size else np.empty(0)
    positive = survival > 0
    x, survival = x[positive], survival[positive]
    log_ratio = np.log(survival) - special.log_ndtr(-x / sigma)
    rhs = tau * x ** 3 / var ** 2
    return _band("tail_ratio", x, np.abs(log_ratio), rhs, None,
                 details={"signed_log_ratio": log_ratio.tolist(), "sigma": sigma, "tau": tau})
