"""
Cramer (Esscher) transforms of lattice laws.

The tilted law F(h) reweights each atom by exp(h x - phi(h)); its mean is
phi'(h) and its variance phi''(h).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import special

from . import dist_core as dc
from .cumulants import a1_grid_check, statulevicius_tau
from .exceptions import TiltDomainError
from .models import ClassCertificate, TiltDiagnostics, TiltSolutionReport

logger = logging.getLogger(__name__)

# Constants of the Cramer-transform lemma: the guaranteed domain is
# DOMAIN_FACTOR * tau * |x| / sigma^2 <= 1.
DOMAIN_FACTOR = 4.8
SCALE_FACTOR = 2.4
GAUSSIAN_FACTOR = 2.88
EXPONENT_FACTOR = 10.08


@dataclass(frozen=True)
class TiltedLaw:
    base: dc.LatticeDistribution
    h: float
    log_normalizer: float
    """phi(h) of the base law."""

    tilted: dc.LatticeDistribution


def _tilted_weights(d: dc.LatticeDistribution, h: float) -> Tuple[np.ndarray, float]:
    log_w = np.log(d.mass) + h * d.support
    lse = float(special.logsumexp(log_w))
    return np.exp(log_w - lse), lse


def _tilted_moments(d: dc.LatticeDistribution, h: float) -> Tuple[float, float]:
    w, _ = _tilted_weights(d, h)
    m = math.fsum(w * d.support) / math.fsum(w)
    v = math.fsum(w * (d.support - m) ** 2) / math.fsum(w)
    return m, v


def esscher_transform(d: dc.LatticeDistribution, h: float) -> TiltedLaw:
    """
    Tilt d by exp(h x), keeping the support.

    Atoms whose tilted mass underflows are dropped and the rest renormalized.

    Raises:
        TiltDomainError: if h is not finite
    """
    if not math.isfinite(h):
        raise TiltDomainError(f"tilt parameter must be finite, got {h}")
    if h == 0:
        return TiltedLaw(base=d, h=0.0, log_normalizer=0.0, tilted=d)
    w, _ = _tilted_weights(d, h)
    name = f"{d.name}|h={h:.6g}" if d.name else ""
    keep = w > 0
    if keep.all():
        tilted = dc.LatticeDistribution(d.support, w / math.fsum(w), mass_tolerance=d.mass_tolerance, name=name)
    else:
        logger.debug(f"tilt h={h} underflows {int((~keep).sum())} atoms of {d!r}; dropping them")
        tilted = dc.make_lattice(d.support[keep], w[keep], mass_tolerance=d.mass_tolerance, name=name,
                                 drop_small=False)
    return TiltedLaw(base=d, h=float(h), log_normalizer=float(dc.cgf_eval(d, h)), tilted=tilted)


def _domain_tau(d: dc.LatticeDistribution, tau: Optional[float]) -> float:
    if tau is not None:
        return tau
    return statulevicius_tau(d, 8).tau_estimate


def in_guaranteed_domain(x: float, sigma: float, tau: float) -> bool:
    """DOMAIN_FACTOR * tau * |x| / sigma^2 <= 1."""
    return DOMAIN_FACTOR * tau * abs(x) <= sigma ** 2


def solve_tilt(
    d: dc.LatticeDistribution,
    x: float,
    tau: Optional[float] = None,
    max_iter: int = 200,
) -> float:
    """
    Tilt parameter h with E xi(h) = x.

    Safeguarded Newton on the increasing map h -> phi'(h), started at the
    Gaussian answer x / sigma^2, with a bisection fallback inside a bracket
    grown from [-1/tau, 1/tau]. Outside the guaranteed domain a warning is
    logged and the solve proceeds.

    Args:
        d: Centered lattice law
        x: Target mean, strictly inside the support hull
        tau: Class parameter for the domain check (Statulevicius tau if omitted)

    Returns:
        float: h with |phi'(h) - x| <= 1e-10 sigma

    Raises:
        TiltDomainError: if x is outside the open hull of the support or d is not centered
    """
    var = dc.variance(d)
    sigma = math.sqrt(var)
    if not var > 0:
        raise TiltDomainError("cannot tilt a degenerate law")
    if abs(dc.mean(d)) > 1e-10 * max(1.0, sigma):
        raise TiltDomainError(f"solve_tilt needs a centered law, mean is {dc.mean(d):.3e}")
    if not d.support[0] < x < d.support[-1]:
        raise TiltDomainError(
            f"target mean {x} outside the open hull ({d.support[0]}, {d.support[-1]})"
        )

    tau_hat = _domain_tau(d, tau)
    if not in_guaranteed_domain(x, sigma, tau_hat):
        logger.warning(
            f"Target mean {x:.6g} lies outside the guaranteed tilt domain "
            f"|x| <= {sigma ** 2 / (DOMAIN_FACTOR * tau_hat):.6g}"
        )

    target_tol = 1e-10 * sigma
    h = x / var
    m, v = _tilted_moments(d, h)
    if abs(m - x) <= 1e-12 * sigma:
        return h

    step = 1.0 / tau_hat if tau_hat > 0 else 1.0 / sigma
    lo, hi = -step, step
    while _tilted_moments(d, lo)[0] > x:
        lo *= 2.0
        if lo < -1e300:
            raise TiltDomainError(f"cannot bracket tilt for x={x}")
    while _tilted_moments(d, hi)[0] < x:
        hi *= 2.0
        if hi > 1e300:
            raise TiltDomainError(f"cannot bracket tilt for x={x}")
    if not lo < h < hi:
        h = 0.5 * (lo + hi)
        m, v = _tilted_moments(d, h)

    for iteration in range(max_iter):
        err = m - x
        if abs(err) <= 1e-12 * sigma:
            break
        if err > 0:
            hi = h
        else:
            lo = h
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(h)):
            break
        candidate = h - err / v if v > 0 else math.nan
        h = candidate if lo < candidate < hi else 0.5 * (lo + hi)
        m, v = _tilted_moments(d, h)

    if abs(m - x) > target_tol:
        raise TiltDomainError(f"tilt solve stalled at h={h} with mean error {m - x:.3e}")
    logger.debug(f"solve_tilt x={x:.6g} -> h={h:.12g} after {iteration + 1} iterations")
    return h


def tilt_diagnostics(d: dc.LatticeDistribution, tau: float, h: float) -> TiltDiagnostics:
    """
    Check the cumulant-expansion relations at tilt h.

    Reports the variance ratio against the band [1 - |h| tau, 1 + |h| tau]
    and the theta values of
        phi(h)  =  sigma^2 h^2 / 2 * (1 + theta |h| tau / 3)
        phi(ih) = -sigma^2 h^2 / 2 * (1 + theta |h| tau / 3)
    Nothing is asserted; tau is often a class estimate rather than the A1
    parameter, for which the relations are guaranteed.

    Raises:
        TiltDomainError: if |h| tau >= 1
    """
    if not tau > 0:
        raise TiltDomainError(f"tau must be positive, got {tau}")
    if abs(h) * tau >= 1:
        raise TiltDomainError(f"|h| tau = {abs(h) * tau:.4g} must be below 1")
    var = dc.variance(d)
    band = abs(h) * tau
    notes = []

    if h == 0:
        ratio, theta_real, theta_imag = 1.0, 0.0, 0.0
    else:
        ratio = _tilted_moments(d, h)[1] / var
        quad = var * h * h / 2.0
        theta_real = (dc.cgf_eval(d, h) / quad - 1.0) * 3.0 / band
        theta_imag = abs((dc.cgf_eval(d, 1j * h) / -quad - 1.0) * 3.0 / band)

    in_band = 1.0 - band <= ratio <= 1.0 + band
    if not in_band:
        notes.append(
            f"variance ratio {ratio:.6g} outside [{1 - band:.6g}, {1 + band:.6g}]: "
            "the supplied tau is below the A1 parameter of this law"
        )
    return TiltDiagnostics(
        tau=tau,
        h=h,
        variance_ratio=ratio,
        band_low=1.0 - band,
        band_high=1.0 + band,
        variance_in_band=in_band,
        theta_real=theta_real,
        theta_imag=theta_imag,
        theta_real_ok=abs(theta_real) <= 1.0,
        theta_imag_ok=theta_imag <= 1.0,
        notes=notes,
    )


def tilt_solution_report(d: dc.LatticeDistribution, x: float, tau: Optional[float] = None) -> TiltSolutionReport:
    """
    Solve for h(x) and report the tilt-solution relations:
    |h| tau <= 1/2, sigma |h| <= 2.4 |x| / sigma,
    |sigma h - x / sigma| <= 2.88 tau sigma^-1 (x / sigma)^2 and
    log E exp(h (xi - x)) = -x^2 / (2 sigma^2) + 10.08 theta tau |x|^3 / sigma^4.
    """
    tau_hat = _domain_tau(d, tau)
    h = solve_tilt(d, x, tau_hat)
    sigma = math.sqrt(dc.variance(d))
    z = x / sigma
    if x == 0:
        scale_ratio = gaussian_theta = exponent_theta = 0.0
    else:
        scale_ratio = sigma * abs(h) / (SCALE_FACTOR * abs(x) / sigma)
        gaussian_theta = (sigma * h - z) / (GAUSSIAN_FACTOR * tau_hat / sigma * z * z) if tau_hat > 0 else math.inf
        gap = dc.cgf_eval(d, h) - h * x + z * z / 2.0
        exponent_theta = gap / (EXPONENT_FACTOR * tau_hat * abs(x) ** 3 / sigma ** 4) if tau_hat > 0 else math.inf
    return TiltSolutionReport(
        x=x,
        h=h,
        tau=tau_hat,
        sigma=sigma,
        in_guaranteed_domain=in_guaranteed_domain(x, sigma, tau_hat),
        h_tau=abs(h) * tau_hat,
        h_tau_ok=abs(h) * tau_hat <= 0.5,
        scale_ratio=scale_ratio,
        gaussian_theta=gaussian_theta,
        exponent_theta=exponent_theta,
    )


def tilted_class_check(d: dc.LatticeDistribution, tau: float, h: float, **grid) -> ClassCertificate:
    """
    Grid check that the centered tilted law satisfies the A1 bound at 2 tau.

    Raises:
        TiltDomainError: if |h| tau > 1/2
    """
    if abs(h) * tau > 0.5:
        raise TiltDomainError(f"|h| tau = {abs(h) * tau:.4g} exceeds 1/2")
    tilted = dc.center(esscher_transform(d, h).tilted)
    return a1_grid_check(tilted, 2.0 * tau, **grid)
