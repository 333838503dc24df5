"""
Shared numerical helpers: tail-accurate Gaussian pieces and quadrature.
"""

import logging
import math
import warnings
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, special

from ..exceptions import QuadratureError

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)


def log_gauss_interval(lo: float, hi: float) -> float:
    """
    log(Phi(hi) - Phi(lo)) for the standard normal, accurate in both tails.

    Args:
        lo: Lower endpoint (may be -inf)
        hi: Upper endpoint (may be +inf), hi >= lo

    Returns:
        float: The log-probability, -inf for an empty interval
    """
    if not hi > lo:
        return -math.inf
    if lo > 0.0:
        # Upper tail: work with survival functions Phi(-x).
        lo, hi = -hi, -lo
    big = float(special.log_ndtr(hi))
    small = float(special.log_ndtr(lo))
    if small == -math.inf:
        return big
    return big + math.log1p(-math.exp(small - big))


def log_gauss_intervals(lo, hi) -> np.ndarray:
    """Elementwise log_gauss_interval over arrays of endpoints."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    upper = lo > 0.0
    a = np.where(upper, -hi, lo)
    b = np.where(upper, -lo, hi)
    with np.errstate(invalid="ignore", divide="ignore"):
        big = special.log_ndtr(b)
        out = big + np.log1p(-np.exp(special.log_ndtr(a) - big))
    return np.where(hi > lo, out, -np.inf)


def gauss_interval(lo: float, hi: float) -> float:
    """Phi(hi) - Phi(lo) for the standard normal without tail cancellation."""
    return math.exp(log_gauss_interval(lo, hi))


def gauss_partial_mean(lo: float, hi: float) -> float:
    """Integral of z * phi(z) over (lo, hi) for the standard normal."""
    return _std_density(lo) - _std_density(hi)


def compensated_cumsum(values) -> np.ndarray:
    """Running sums with Neumaier compensation; the last entry equals math.fsum up to one rounding."""
    values = np.asarray(values, dtype=float)
    out = np.empty(values.size)
    total = 0.0
    carry = 0.0
    for i, v in enumerate(values.tolist()):
        t = total + v
        if abs(total) >= abs(v):
            carry += (total - t) + v
        else:
            carry += (v - t) + total
        total = t
        out[i] = total + carry
    return out


def _std_density(z: float) -> float:
    if math.isinf(z):
        return 0.0
    return math.exp(-0.5 * z * z) / SQRT_2PI


def quad(
    fn: Callable[[float], float],
    a: float,
    b: float,
    epsabs: float = 1e-13,
    epsrel: float = 1e-11,
    limit: int = 200,
) -> Tuple[float, float]:
    """
    scipy.integrate.quad with integration warnings promoted to QuadratureError.

    Returns:
        tuple: (value, absolute error estimate)
    """
    if a == b:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(fn, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"quadrature on ({a}, {b}) did not converge: {e}") from e
    return float(value), float(err)


_LEGENDRE_CACHE = {}


def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    if order not in _LEGENDRE_CACHE:
        _LEGENDRE_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _LEGENDRE_CACHE[order]


def composite_gauss_legendre(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    panels: int,
    order: int = 20,
) -> float:
    """Composite Gauss-Legendre rule with `panels` equal panels; fn is vectorized."""
    nodes, weights = _legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    vals = np.asarray(fn(pts), dtype=float).reshape(panels, order)
    return math.fsum((half[:, None] * weights[None, :] * vals).ravel())


def adaptive_gauss_legendre(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    epsabs: float = 1e-10,
    order: int = 20,
    start_panels: int = 8,
    max_refinements: int = 10,
) -> Tuple[float, float, int]:
    """
    Double the panel count until two successive composite estimates agree.

    Returns:
        tuple: (value, absolute error estimate, refinements used)

    Raises:
        QuadratureError: if max_refinements is reached without agreement
    """
    panels = start_panels
    previous = composite_gauss_legendre(fn, a, b, panels, order)
    for level in range(1, max_refinements + 1):
        panels *= 2
        current = composite_gauss_legendre(fn, a, b, panels, order)
        err = abs(current - previous)
        if err <= epsabs:
            logger.debug(f"Gauss-Legendre converged with {panels} panels (err {err:.2e})")
            return current, err, level
        previous = current
    raise QuadratureError(
        f"Gauss-Legendre on ({a}, {b}) not converged after {max_refinements} refinements "
        f"(last difference {err:.3e})"
    )
