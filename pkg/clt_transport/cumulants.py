"""
Cumulants and the cumulant-growth class certifiers.

Each certifier reports its own minimal tau; nothing here converts a
certificate of one class into another.
"""

import logging
import math
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

from . import dist_core as dc
from .exceptions import CertificateError, CumulantOrderError, DegenerateLawError
from .models import ClassCertificate, CumulantSeries, OrderConstraint, SakhanenkoCheck
from .settings import get_settings

logger = logging.getLogger(__name__)

DEFAULT_RADIAL_FRACS = (0.25, 0.5, 0.75, 0.99)


def _check_centered(d: dc.LatticeDistribution, what: str) -> float:
    """Return sigma^2 after checking the mean is zero."""
    mu = dc.mean(d)
    var = dc.variance(d)
    if abs(mu) > 1e-10 * max(1.0, math.sqrt(var)):
        raise CertificateError(f"{what} needs a centered law, mean is {mu:.3e}")
    if not var > 0:
        raise DegenerateLawError(f"{what} needs positive variance")
    return var


def cumulants_upto(
    d: Union[dc.LatticeDistribution, dc.GaussianLaw],
    M: int,
    order_cap: Optional[int] = None,
    cancellation_flag: Optional[float] = None,
) -> CumulantSeries:
    """
    Cumulants gamma_1 ... gamma_M by the moments-to-cumulants recursion.

    The recursion runs on the standardized law; gamma_m is then rescaled by
    sigma^m. Each order carries the ratio of its largest recursion term to the
    result, and orders where that ratio exceeds cancellation_flag are listed
    as unreliable.

    Raises:
        CumulantOrderError: if M < 2 or M exceeds the configured cap
    """
    settings = get_settings()
    cap = settings.cumulant_order_cap if order_cap is None else order_cap
    flag = settings.cancellation_flag if cancellation_flag is None else cancellation_flag
    if M < 2 or M > cap:
        raise CumulantOrderError(f"cumulant order must lie in [2, {cap}], got {M}")

    if isinstance(d, dc.GaussianLaw):
        values = [d.mean, d.variance] + [0.0] * (M - 2)
        return CumulantSeries(values=values, condition=[1.0] * M)

    mu_1 = dc.mean(d)
    var = dc.variance(d)
    if not var > 0:
        return CumulantSeries(values=[mu_1] + [0.0] * (M - 1), condition=[1.0] * M)

    sigma = math.sqrt(var)
    standardized = dc.affine(d, 1.0 / sigma, -mu_1 / sigma)
    mu = [1.0] + dc.moments(standardized, M)

    kappa = [0.0] * (M + 1)
    condition = [1.0] * M
    for m in range(1, M + 1):
        terms = [mu[m]] + [
            -math.comb(m - 1, k - 1) * kappa[k] * mu[m - k] for k in range(1, m)
        ]
        kappa[m] = math.fsum(terms)
        largest = max(abs(t) for t in terms)
        if largest == 0.0:
            condition[m - 1] = 1.0
        elif kappa[m] == 0.0:
            condition[m - 1] = math.inf
        else:
            condition[m - 1] = largest / abs(kappa[m])

    values = [mu_1] + [kappa[m] * sigma ** m for m in range(2, M + 1)]
    # standardized law: kappa_1 = 0, kappa_2 = 1 up to rounding
    values[1] = var
    unreliable = [m + 1 for m, c in enumerate(condition) if m >= 2 and c > flag]
    if unreliable:
        logger.warning(f"Cumulant orders {unreliable} lost too many digits to cancellation")
    return CumulantSeries(values=values, condition=condition, unreliable_orders=unreliable)


def _growth_tau(magnitude: float, m: int, scale: float) -> float:
    """Smallest tau with magnitude <= m!/2 tau^(m-2) scale."""
    if magnitude == 0.0:
        return 0.0
    return (2.0 * magnitude / (math.factorial(m) * scale)) ** (1.0 / (m - 2))


def _certificate(name: str, constraints, M: int, holds_at: Optional[float], diagnostics) -> ClassCertificate:
    tau = max(c.tau for c in constraints)
    binding = max(constraints, key=lambda c: c.tau).order if tau > 0 else None
    return ClassCertificate(
        class_name=name,
        order_constraints=constraints,
        tau_estimate=tau,
        max_order=M,
        binding_order=binding,
        holds_at=holds_at,
        holds=None if holds_at is None else tau <= holds_at,
        diagnostics=diagnostics,
    )


def statulevicius_tau(
    d: Union[dc.LatticeDistribution, dc.GaussianLaw],
    M: int = 8,
    holds_at: Optional[float] = None,
) -> ClassCertificate:
    """
    Minimal tau with |gamma_m| <= m!/2 tau^(m-2) gamma_2 for m = 3..M.

    Args:
        d: Law to certify
        M: Highest order checked
        holds_at: Optional tau to test against the estimate

    Returns:
        ClassCertificate: Per-order constraints, estimate = their maximum

    Raises:
        DegenerateLawError: if d has zero variance
    """
    if M < 3:
        raise CumulantOrderError(f"certificate needs M >= 3, got {M}")
    if dc.variance(d) <= 0:
        raise DegenerateLawError("Statulevicius certificate needs positive variance")
    series = cumulants_upto(d, M)
    gamma_2 = series.values[1]
    constraints = [
        OrderConstraint(
            order=m,
            tau=_growth_tau(abs(series.values[m - 1]), m, gamma_2),
            magnitude=abs(series.values[m - 1]),
            reliable=m not in series.unreliable_orders,
        )
        for m in range(3, M + 1)
    ]
    cert = _certificate("statulevicius", constraints, M, holds_at,
                        {"condition": series.condition[2:]})
    logger.debug(f"Statulevicius tau {cert.tau_estimate:.6g} binding at m={cert.binding_order}")
    return cert


def bernstein_tau_1d(d: dc.LatticeDistribution, M: int = 8, holds_at: Optional[float] = None) -> ClassCertificate:
    """
    Minimal tau with |E xi^m| <= m!/2 tau^(m-2) E xi^2 for m = 3..M.

    Raises:
        CertificateError: if d is not centered
    """
    if M < 3:
        raise CumulantOrderError(f"certificate needs M >= 3, got {M}")
    var = _check_centered(d, "Bernstein certificate")
    raw = dc.moments(d, M)
    constraints = [
        OrderConstraint(order=m, tau=_growth_tau(abs(raw[m - 1]), m, var), magnitude=abs(raw[m - 1]))
        for m in range(3, M + 1)
    ]
    return _certificate("bernstein1d", constraints, M, holds_at, {})


def _sakhanenko_sides(d: dc.LatticeDistribution, tau: float):
    a = np.abs(d.support)
    nz = a > 0
    log_lhs = special.logsumexp(3.0 * np.log(a[nz]) + a[nz] / tau, b=d.mass[nz]) if np.any(nz) else -math.inf
    second = math.fsum(d.mass * d.support ** 2)
    return log_lhs, math.log(tau * second)


def sakhanenko_holds(d: dc.LatticeDistribution, tau: float) -> SakhanenkoCheck:
    """
    Check E|xi|^3 exp(|xi|/tau) <= tau E xi^2 by exact finite sums.

    Raises:
        CertificateError: if tau <= 0 or d is not centered
    """
    if not tau > 0:
        raise CertificateError(f"tau must be positive, got {tau}")
    _check_centered(d, "Sakhanenko check")
    log_lhs, log_rhs = _sakhanenko_sides(d, tau)
    ratio = math.exp(min(log_lhs - log_rhs, 709.0))
    lhs = math.exp(min(log_lhs, 709.0))
    return SakhanenkoCheck(tau=tau, holds=log_lhs <= log_rhs, ratio=ratio, lhs=lhs, rhs=math.exp(log_rhs))


def sakhanenko_tau(d: dc.LatticeDistribution, holds_at: Optional[float] = None) -> ClassCertificate:
    """
    Minimal tau for the Sakhanenko inequality.

    log LHS - log RHS is strictly decreasing in tau and nonnegative at
    tau0 = E|xi|^3 / E xi^2, so the root is bracketed from tau0 upwards.
    """
    var = _check_centered(d, "Sakhanenko certificate")
    tau0 = math.fsum(d.mass * np.abs(d.support) ** 3) / var

    def gap(tau: float) -> float:
        log_lhs, log_rhs = _sakhanenko_sides(d, tau)
        return log_lhs - log_rhs

    hi = 2.0 * tau0
    for _ in range(200):
        if gap(hi) < 0:
            break
        hi *= 2.0
    tau, info = optimize.brentq(gap, tau0, hi, xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps,
                                full_output=True)
    return ClassCertificate(
        class_name="sakhanenko",
        tau_estimate=tau,
        holds_at=holds_at,
        holds=None if holds_at is None else tau <= holds_at,
        diagnostics={"iterations": info.iterations, "bracket": [tau0, hi]},
    )


def complex_third_cumulant(d: dc.LatticeDistribution, z):
    """
    phi'''(z) as the third central moment of the complex-tilted weights.

    Accepts a scalar or an array of complex arguments.
    """
    zs = np.asarray(z, dtype=complex)
    exponents = zs[..., None] * d.support
    top = np.max(exponents.real, axis=-1, keepdims=True)
    weights = d.mass * np.exp(exponents - top)
    weights = weights / np.sum(weights, axis=-1, keepdims=True)
    centre = np.sum(weights * d.support, axis=-1, keepdims=True)
    out = np.sum(weights * (d.support - centre) ** 3, axis=-1)
    if np.ndim(z) == 0:
        return complex(out)
    return out


def _cauchy_third_derivative(d: dc.LatticeDistribution, z: complex, radius: float, nodes: int) -> complex:
    """Trapezoid rule for 3!/(2 pi i) times the contour integral of phi(w)/(w - z)^4."""
    alpha = 2.0 * math.pi * np.arange(nodes) / nodes
    circle = radius * np.exp(1j * alpha)
    exponents = z * d.support
    top = np.max(exponents.real)
    q = d.mass * np.exp(exponents - top)
    q = q / np.sum(q)
    ratio = np.exp(np.outer(circle, d.support)) @ q
    if not np.all(np.isfinite(ratio)) or np.any(ratio == 0):
        raise CertificateError(f"non-finite CGF value near z={z}")
    # phi(w) - phi(z) = log(ratio) up to a constant, which integrates to zero
    phase = np.unwrap(np.angle(ratio))
    closing = phase[-1] - phase[0] + np.angle(ratio[0] / ratio[-1])
    if abs(closing) > math.pi:
        raise CertificateError(f"CGF is not analytic on the evaluation circle around z={z}")
    log_ratio = np.log(np.abs(ratio)) + 1j * phase
    return 6.0 / (nodes * radius ** 3) * np.sum(log_ratio * np.exp(-3j * alpha))


def a1_grid_check(
    d: Union[dc.LatticeDistribution, dc.GaussianLaw],
    tau: float,
    radial_fracs: Sequence[float] = DEFAULT_RADIAL_FRACS,
    angular_count: int = 64,
    nodes: int = 256,
) -> ClassCertificate:
    """
    Sampled check of |phi'''(z)| <= tau sigma^2 on the disk |z| tau <= 1.

    phi''' is obtained from the Cauchy integral formula on a small circle
    around each grid point; the direct complex-tilt value is kept as a
    cross-check in the diagnostics. This is a necessary condition on the
    grid, not a proof of membership.

    Args:
        d: Centered law
        tau: Class parameter to test
        radial_fracs: Radii r with |z| = r / tau, each in (0, 1)
        angular_count: Number of equally spaced arguments per radius
        nodes: Trapezoid nodes on each Cauchy circle (at least 256)

    Returns:
        ClassCertificate: tau_estimate = max |phi'''| / sigma^2, max_ratio = that / tau
    """
    if not tau > 0:
        raise CertificateError(f"tau must be positive, got {tau}")
    if any(not 0 < r < 1 for r in radial_fracs):
        raise CertificateError("radial fractions must lie in (0, 1)")
    nodes = max(int(nodes), 256)
    grid = {
        "radial_fracs": list(map(float, radial_fracs)),
        "angular_count": int(angular_count),
        "nodes": nodes,
    }

    if isinstance(d, dc.GaussianLaw):
        return ClassCertificate(class_name="a1_grid", tau_estimate=0.0, holds_at=tau, holds=True,
                                max_ratio=0.0, grid=grid)

    var = _check_centered(d, "A1 grid check")
    theta = 2.0 * math.pi * np.arange(angular_count) / angular_count
    largest = 0.0
    worst_z = 0j
    discrepancy = 0.0
    radii = []
    for r in radial_fracs:
        radius = min(0.005 / tau, (1.0 - r) / tau / 2.0)
        radii.append(radius)
        points = (r / tau) * np.exp(1j * theta)
        direct = complex_third_cumulant(d, points)
        for z, ref in zip(points, direct):
            value = _cauchy_third_derivative(d, complex(z), radius, nodes)
            size = abs(value)
            discrepancy = max(discrepancy, abs(value - ref) / max(abs(ref), var * tau * 1e-12))
            if size > largest:
                largest, worst_z = size, complex(z)
    grid["cauchy_radii"] = radii

    estimate = largest / var
    ratio = estimate / tau
    logger.debug(f"A1 grid: max |phi'''|/(tau sigma^2) = {ratio:.6g} at z={worst_z:.4g}")
    return ClassCertificate(
        class_name="a1_grid",
        tau_estimate=estimate,
        holds_at=tau,
        holds=ratio <= 1.0,
        max_ratio=ratio,
        grid=grid,
        diagnostics={
            "worst_point": [worst_z.real, worst_z.imag],
            "direct_discrepancy": discrepancy,
        },
    )


def class_ratio_report(d: dc.LatticeDistribution, M: int = 8) -> Dict[str, float]:
    """
    Empirical tau of each class side by side, with ratios to the Statulevicius tau.

    The classes agree only up to unspecified absolute constants, so the
    ratios are reported and never used to convert one certificate into another.
    """
    stat = statulevicius_tau(d, M).tau_estimate
    bern = bernstein_tau_1d(d, M).tau_estimate
    sakh = sakhanenko_tau(d).tau_estimate
    bound = float(np.max(np.abs(d.support)))
    report = {
        "statulevicius": stat,
        "bernstein1d": bern,
        "sakhanenko": sakh,
        "as_bound": bound,
    }
    if stat > 0:
        report.update({
            "bernstein1d_over_statulevicius": bern / stat,
            "sakhanenko_over_statulevicius": sakh / stat,
            "as_bound_over_statulevicius": bound / stat,
        })
    return report
