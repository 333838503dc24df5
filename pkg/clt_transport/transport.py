"""
Distances between one-dimensional laws.

All transport costs are computed through the quantile coupling
(F^-1(U), G^-1(U)), which is optimal on the line for every convex cost of
|x - y|. discrete_ot_oracle solves the transportation linear program
directly and is used to validate that choice.

Conventions: F is right-continuous, F^-1(u) = inf{x : F(x) >= u}. For a
lattice law against a Gaussian the u-interval (F(x_{i-1}), F(x_i)] of atom
x_i is mapped to the Gaussian partner interval of y values, and integrals
over u become Gaussian integrals over y.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import optimize, sparse, special

from . import dist_core as dc
from .exceptions import BracketError, CLTTransportError, CrossCheckError, DistributionError, OracleSizeError
from .models import CouplingCell, TransportResult
from .settings import get_settings
from .utils.numerics import SQRT_2PI, gauss_interval, log_gauss_intervals, quad

logger = logging.getLogger(__name__)

Law = dc.Law
AnyLaw = Union[dc.Law, dc.LogLattice]


# ---------------------------------------------------------------------------
# Orlicz costs
# ---------------------------------------------------------------------------

_KIND_ALIASES = {
    "exp": "exp", "exp_minus_one": "exp",
    "pow": "pow", "power": "pow",
    "abs": "abs", "absolute": "abs",
}


@dataclass(frozen=True)
class OrliczCost:
    """
    Convex nondecreasing cost psi on [0, inf) with psi(0) = 0.

    Attributes:
        kind: "exp" (e^|t| - 1), "pow" (|t|^p) or "abs" (|t|)
        p: Exponent for the power cost, p >= 1
    """

    kind: str = "exp"
    p: float = 1.0

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind)
        if kind is None:
            raise DistributionError(f"unknown Orlicz cost {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "pow" and not self.p >= 1:
            raise DistributionError(f"power cost needs p >= 1, got {self.p}")
        if kind != "pow":
            object.__setattr__(self, "p", 1.0)
        grid = np.linspace(0.0, 20.0, 401)
        values = self(grid)
        if values[0] != 0.0 or np.any(np.diff(values) < 0) or np.any(np.diff(values, 2) < -1e-9 * values[2:]):
            raise DistributionError(f"{self} is not convex and nondecreasing")

    @classmethod
    def exp_minus_one(cls) -> "OrliczCost":
        return cls("exp")

    @classmethod
    def power(cls, p: float) -> "OrliczCost":
        return cls("pow", p)

    @classmethod
    def absolute(cls) -> "OrliczCost":
        return cls("abs")

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == "exp":
            with np.errstate(over="ignore"):
                return np.expm1(t)
        if self.kind == "pow":
            return t ** self.p
        return t

    @property
    def label(self) -> str:
        return f"pow{self.p:g}" if self.kind == "pow" else self.kind


# ---------------------------------------------------------------------------
# Quantile coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileCoupling:
    """The comonotone coupling u -> (F^-1(u), G^-1(u))."""

    left: Law
    right: Law

    def __call__(self, u):
        return dc.quantile_eval(self.left, u), dc.quantile_eval(self.right, u)

    def pairs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Atoms of the coupling of two lattice laws (north-west corner rule).

        Returns:
            tuple: (x, y, weight) arrays; weight sums to one
        """
        if not (isinstance(self.left, dc.LatticeDistribution) and isinstance(self.right, dc.LatticeDistribution)):
            raise DistributionError("pairs() needs two lattice laws")
        breaks = np.union1d(self.left.cum, self.right.cum)
        weight = np.diff(np.concatenate(([0.0], breaks)))
        keep = weight > 0
        breaks, weight = breaks[keep], weight[keep]
        i = np.minimum(np.searchsorted(self.left.cum, breaks, side="left"), len(self.left) - 1)
        j = np.minimum(np.searchsorted(self.right.cum, breaks, side="left"), len(self.right) - 1)
        return self.left.support[i], self.right.support[j], weight


def _gaussian_boundaries(f: dc.LatticeDistribution, g: dc.GaussianLaw, clip: float = 0.0) -> np.ndarray:
    """
    Standardized Gaussian partner boundaries z_0 < ... < z_n of the atoms of f.

    Atom i is coupled with y in (mu + sigma z_i, mu + sigma z_{i+1}]. Lower
    boundaries come from F, upper ones from the survival tail, so both tails
    keep full relative accuracy.
    """
    n = len(f)
    lower = np.concatenate(([0.0], f.cum[:-1], [1.0]))
    upper = np.concatenate(([1.0], f.tail[1:]))
    if clip > 0:
        lower = np.clip(lower, clip, 1.0 - clip)
        upper = np.clip(upper, clip, 1.0 - clip)
    z = np.where(lower <= 0.5, special.ndtri(lower), -special.ndtri(upper))
    if clip == 0:
        z[0], z[n] = -np.inf, np.inf
    return z


def _log_gaussian_boundaries(f: dc.LogLattice) -> np.ndarray:
    """_gaussian_boundaries from log cumulative levels, exact below 1e-308."""
    log_lower = np.concatenate(([-np.inf], f.log_cum[:-1], [0.0]))
    log_upper = np.concatenate(([0.0], f.log_tail[1:]))
    z = np.where(log_lower <= -math.log(2.0), special.ndtri_exp(log_lower), -special.ndtri_exp(log_upper))
    z[0], z[-1] = -np.inf, np.inf
    return z


def _orient(f: AnyLaw, g: AnyLaw) -> Tuple[AnyLaw, AnyLaw]:
    """Put the lattice law first when exactly one side is Gaussian."""
    if isinstance(f, dc.GaussianLaw) and isinstance(g, (dc.LatticeDistribution, dc.LogLattice)):
        return g, f
    return f, g


def _same_law(f: Law, g: Law) -> bool:
    if type(f) is not type(g):
        return False
    return f == g


# ---------------------------------------------------------------------------
# Kolmogorov and Levy
# ---------------------------------------------------------------------------

def _gaussian_cdf_crossings(f: dc.GaussianLaw, g: dc.GaussianLaw) -> List[float]:
    """Points where the densities of f and g cross (extrema of F - G)."""
    a = 0.5 / f.variance - 0.5 / g.variance
    b = -f.mean / f.variance + g.mean / g.variance
    c = 0.5 * f.mean ** 2 / f.variance - 0.5 * g.mean ** 2 / g.variance + 0.5 * math.log(f.variance / g.variance)
    if abs(a) < 1e-300:
        return [] if b == 0 else [-c / b]
    roots = np.roots([a, b, c])
    return [float(r.real) for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r.real))]


def kolmogorov_distance(f: Law, g: Law) -> TransportResult:
    """
    sup_x |F(x) - G(x)|.

    With a lattice law on either side the supremum is attained at a jump
    point or as a left limit there; two Gaussians are compared at the
    crossing points of their densities.
    """
    f, g = _orient(f, g)
    if isinstance(f, dc.GaussianLaw):
        points = _gaussian_cdf_crossings(f, g)
        if not points:
            return TransportResult(value=0.0, method="kolmogorov:gaussian")
        diffs = [abs(dc.cdf_eval(f, x) - dc.cdf_eval(g, x)) for x in points]
        k = int(np.argmax(diffs))
        return TransportResult(value=float(diffs[k]), method="kolmogorov:gaussian",
                               diagnostics={"argmax": points[k]})

    points = f.support if isinstance(g, dc.GaussianLaw) else np.union1d(f.support, g.support)
    right = np.abs(dc.cdf_eval(f, points) - dc.cdf_eval(g, points))
    left = np.abs(dc.left_cdf_eval(f, points) - dc.left_cdf_eval(g, points))
    k_right, k_left = int(np.argmax(right)), int(np.argmax(left))
    if right[k_right] >= left[k_left]:
        value, argmax, side = right[k_right], points[k_right], "right"
    else:
        value, argmax, side = left[k_left], points[k_left], "left"
    return TransportResult(value=float(value), method="kolmogorov:jumps",
                           diagnostics={"argmax": float(argmax), "side": side})


def _jump_points(d: Law) -> np.ndarray:
    return d.support if isinstance(d, dc.LatticeDistribution) else np.empty(0)


def _levy_violation(f: Law, g: Law, eps: float) -> float:
    """
    Largest violation of G(x - eps) - eps <= F(x) <= G(x + eps) + eps.

    Between consecutive candidate points both sides are constant or
    monotone, so right values and left limits at the candidates suffice.
    """
    jf, jg = _jump_points(f), _jump_points(g)
    worst = -math.inf

    lower_pts = np.union1d(jf, jg + eps)
    if lower_pts.size:
        v_right = dc.cdf_eval(g, lower_pts - eps) - eps - dc.cdf_eval(f, lower_pts)
        v_left = dc.left_cdf_eval(g, lower_pts - eps) - eps - dc.left_cdf_eval(f, lower_pts)
        worst = max(worst, float(np.max(v_right)), float(np.max(v_left)))

    upper_pts = np.union1d(jf, jg - eps)
    if upper_pts.size:
        u_right = dc.cdf_eval(f, upper_pts) - dc.cdf_eval(g, upper_pts + eps) - eps
        u_left = dc.left_cdf_eval(f, upper_pts) - dc.left_cdf_eval(g, upper_pts + eps) - eps
        worst = max(worst, float(np.max(u_right)), float(np.max(u_left)))
    return worst


def _gaussian_cdf_excess(a: dc.GaussianLaw, b: dc.GaussianLaw) -> float:
    """sup_x (A(x) - B(x)), attained where the densities cross (both ends tend to 0)."""
    gaps = [dc.cdf_eval(a, x) - dc.cdf_eval(b, x) for x in _gaussian_cdf_crossings(a, b)]
    return max([0.0] + gaps)


def _gaussian_levy_violation(f: dc.GaussianLaw, g: dc.GaussianLaw, eps: float) -> float:
    # G(x - eps) is the CDF of g shifted right by eps
    lower = _gaussian_cdf_excess(dc.GaussianLaw(g.mean + eps, g.variance), f)
    upper = _gaussian_cdf_excess(f, dc.GaussianLaw(g.mean - eps, g.variance))
    return max(lower, upper) - eps


def levy_distance(f: Law, g: Law, tol: Optional[float] = None) -> TransportResult:
    """
    inf{eps > 0 : G(x - eps) - eps <= F(x) <= G(x + eps) + eps for all x}.

    Bisection on eps in [0, 1]; the value returned is the feasible end of
    the final bracket. For two Gaussians the violation is a closed form in
    eps (CDF gaps at density crossings) and its root is found with brentq.
    """
    tol = get_settings().levy_tol if tol is None else tol
    f, g = _orient(f, g)
    if _same_law(f, g):
        return TransportResult(value=0.0, method="levy:bisection")

    if isinstance(f, dc.GaussianLaw):
        violation = lambda eps: _gaussian_levy_violation(f, g, eps)
        if violation(0.0) <= 0:
            return TransportResult(value=0.0, method="levy:gaussian")
        # violation decreases strictly and is <= 0 at eps = 1
        root, info = optimize.brentq(violation, 0.0, 1.0, xtol=tol * 1e-3, full_output=True)
        return TransportResult(value=root, method="levy:gaussian", iterations=info.iterations,
                               diagnostics={"violation_at_value": violation(root)})

    violation = lambda eps: _levy_violation(f, g, eps)
    method = "levy:bisection"

    lo, hi = 0.0, 1.0
    iterations = 0
    if violation(0.0) <= 0:
        return TransportResult(value=0.0, method=method)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if violation(mid) <= 0:
            hi = mid
        else:
            lo = mid
        iterations += 1
    return TransportResult(value=hi, method=method, iterations=iterations,
                           quadrature_error=hi - lo, diagnostics={"lower": lo})


# ---------------------------------------------------------------------------
# W1 and Wp
# ---------------------------------------------------------------------------

def _gauss_integral_cdf(g: dc.GaussianLaw, x: float) -> float:
    """Integral of G over (-inf, x]."""
    if x == -math.inf:
        return 0.0
    z = (x - g.mean) / g.std
    return g.std * (z * special.ndtr(z) + math.exp(-0.5 * z * z) / SQRT_2PI)


def _gauss_integral_sf(g: dc.GaussianLaw, x: float) -> float:
    """Integral of 1 - G over [x, inf)."""
    if x == math.inf:
        return 0.0
    z = (x - g.mean) / g.std
    return g.std * (math.exp(-0.5 * z * z) / SQRT_2PI - z * special.ndtr(-z))


def _segment_abs_gap(g: dc.GaussianLaw, c: float, a: float, b: float) -> float:
    """Integral of |c - G(x)| over (a, b) for a constant c in [0, 1]."""
    if c <= 0.0:
        return _gauss_integral_cdf(g, b) - _gauss_integral_cdf(g, a)
    if c >= 1.0:
        return _gauss_integral_sf(g, a) - _gauss_integral_sf(g, b)
    cross = float(np.clip(dc.quantile_eval(g, c), a, b))

    def below(lo: float, hi: float) -> float:
        # integral of (c - G) over (lo, hi), where G <= c
        if hi <= lo:
            return 0.0
        if 0.5 * (lo + hi) <= g.mean:
            return c * (hi - lo) - (_gauss_integral_cdf(g, hi) - _gauss_integral_cdf(g, lo))
        return (_gauss_integral_sf(g, lo) - _gauss_integral_sf(g, hi)) - (1.0 - c) * (hi - lo)

    def above(lo: float, hi: float) -> float:
        # integral of (G - c) over (lo, hi), where G >= c
        if hi <= lo:
            return 0.0
        if 0.5 * (lo + hi) <= g.mean:
            return (_gauss_integral_cdf(g, hi) - _gauss_integral_cdf(g, lo)) - c * (hi - lo)
        return (1.0 - c) * (hi - lo) - (_gauss_integral_sf(g, lo) - _gauss_integral_sf(g, hi))

    return max(below(a, cross), 0.0) + max(above(cross, b), 0.0)


def _w1_cdf_form(f: Law, g: Law) -> Tuple[float, float]:
    """Integral of |F - G| over the line, with an error estimate."""
    if isinstance(f, dc.LatticeDistribution) and isinstance(g, dc.LatticeDistribution):
        points = np.union1d(f.support, g.support)
        gaps = np.abs(dc.cdf_eval(f, points[:-1]) - dc.cdf_eval(g, points[:-1]))
        return math.fsum(gaps * np.diff(points)), 0.0

    if isinstance(f, dc.LatticeDistribution):
        edges = np.concatenate(([-np.inf], f.support, [np.inf]))
        levels = np.concatenate(([0.0], f.cum))
        pieces = [_segment_abs_gap(g, float(c), float(a), float(b))
                  for c, a, b in zip(levels, edges[:-1], edges[1:])]
        return math.fsum(pieces), 64 * np.finfo(float).eps * max(1.0, g.std) * len(pieces)

    # two Gaussians: the CDFs cross once (or never, for equal spreads)
    gap = lambda x: abs(dc.cdf_eval(f, x) - dc.cdf_eval(g, x))
    if f.std == g.std:
        return abs(f.mean - g.mean), 0.0
    cross = (f.mean * g.std - g.mean * f.std) / (g.std - f.std)
    left, err_l = quad(gap, -np.inf, cross)
    right, err_r = quad(gap, cross, np.inf)
    return left + right, err_l + err_r


def _folded_normal_mean(m: float, s: float) -> float:
    """E|m + s Z| for standard normal Z."""
    s = abs(s)
    if s == 0:
        return abs(m)
    return s * math.sqrt(2.0 / math.pi) * math.exp(-0.5 * (m / s) ** 2) + m * (1.0 - 2.0 * special.ndtr(-m / s))


def _atom_power_integral(x: float, g: dc.GaussianLaw, z_lo: float, z_hi: float, p: float) -> Tuple[float, float]:
    """Integral of |x - y|^p g(y) dy over the partner interval, split at x."""
    density = lambda y: abs(x - y) ** p * math.exp(-0.5 * ((y - g.mean) / g.std) ** 2) / (g.std * SQRT_2PI)
    y_lo = g.mean + g.std * z_lo if math.isfinite(z_lo) else -math.inf
    y_hi = g.mean + g.std * z_hi if math.isfinite(z_hi) else math.inf
    value, err = 0.0, 0.0
    for lo, hi in ((y_lo, min(x, y_hi)), (max(x, y_lo), y_hi)):
        if hi > lo:
            v, e = quad(density, lo, hi)
            value += v
            err += e
    return value, err


def _power_integral(f: Law, g: Law, p: float) -> Tuple[float, float]:
    """Integral over u of |F^-1(u) - G^-1(u)|^p, with an error estimate."""
    if isinstance(f, dc.LatticeDistribution) and isinstance(g, dc.LatticeDistribution):
        x, y, w = QuantileCoupling(f, g).pairs()
        return math.fsum(w * np.abs(x - y) ** p), 0.0
    if isinstance(f, dc.GaussianLaw):
        m, s = f.mean - g.mean, f.std - g.std
        if p == 1:
            return _folded_normal_mean(m, s), 0.0
        if p == 2:
            return m * m + s * s, 0.0
        if s == 0:
            return abs(m) ** p, 0.0
        return _power_integral(dc.dirac(0.0), dc.GaussianLaw(m, s * s), p)

    z = _gaussian_boundaries(f, g)
    values, errors = [], []
    for i, x in enumerate(f.support):
        v, e = _atom_power_integral(float(x), g, float(z[i]), float(z[i + 1]), p)
        values.append(v)
        errors.append(e)
    return math.fsum(values), math.fsum(errors)


def w1_distance(f: Law, g: Law) -> TransportResult:
    """
    W1 as the integral of |F - G|, cross-checked against the quantile form.

    Raises:
        CrossCheckError: if the two computations disagree beyond
            max(abs tolerance, rel tolerance * value)
    """
    f, g = _orient(f, g)
    if _same_law(f, g):
        return TransportResult(value=0.0, method="w1:cdf", diagnostics={"quantile_form": 0.0})
    settings = get_settings()
    cdf_value, cdf_err = _w1_cdf_form(f, g)
    quantile_value, quantile_err = _power_integral(f, g, 1.0)
    allowed = max(settings.w1_cross_check_abs, settings.w1_cross_check_rel * cdf_value)
    if abs(cdf_value - quantile_value) > allowed:
        raise CrossCheckError(
            f"W1 forms disagree: cdf {cdf_value!r} vs quantile {quantile_value!r}"
        )
    return TransportResult(
        value=max(cdf_value, 0.0),
        quadrature_error=cdf_err + quantile_err,
        method="w1:cdf",
        diagnostics={"quantile_form": quantile_value},
    )


def wp_distance(f: Law, g: Law, p: float = 2.0) -> TransportResult:
    """(Integral over u of |F^-1(u) - G^-1(u)|^p)^(1/p) for p >= 1."""
    if not p >= 1:
        raise DistributionError(f"Wasserstein order must be at least 1, got {p}")
    f, g = _orient(f, g)
    if _same_law(f, g):
        return TransportResult(value=0.0, method=f"w{p:g}:quantile")
    integral, err = _power_integral(f, g, p)
    value = max(integral, 0.0) ** (1.0 / p)
    # d(I^(1/p)) = I^(1/p - 1) / p dI
    propagated = err * value / (p * integral) if integral > 0 else err
    return TransportResult(value=value, quadrature_error=propagated, method=f"w{p:g}:quantile",
                           diagnostics={"integral": integral})


# ---------------------------------------------------------------------------
# Orlicz-Wasserstein
# ---------------------------------------------------------------------------

def _atom_abs_integral(x: float, g: dc.GaussianLaw, z_lo: float, z_hi: float) -> float:
    """Integral of |x - y| g(y) dy over the partner interval by partial expectations."""
    mu, sd = g.mean, g.std
    zx = (x - mu) / sd
    density = lambda z: 0.0 if math.isinf(z) else math.exp(-0.5 * z * z) / SQRT_2PI
    total = 0.0
    for sign, lo, hi in ((-1.0, z_lo, min(zx, z_hi)), (1.0, max(zx, z_lo), z_hi)):
        if not hi > lo:
            continue
        # int (y - x) g(y) dy = sd (phi(lo) - phi(hi)) + (mu - x) (Phi(hi) - Phi(lo))
        piece = sd * (density(lo) - density(hi)) + (mu - x) * gauss_interval(lo, hi)
        total += max(sign * piece, 0.0)
    return total


def _exp_objective(support: np.ndarray, z: np.ndarray, g: dc.GaussianLaw, a: float) -> float:
    """
    Sum over atoms x of the integral of (exp(|x - y| / a) - 1) g(y) dy over
    the partner interval (mu + sd z_i, mu + sd z_{i+1}].

    Each side of x is a shifted Gaussian moment:
        int_l^r exp(s (y - x) / a) g(y) dy
            = exp(s (mu - x) / a + sigma^2 / 2a^2) [Phi(r') - Phi(l')]
    with l', r' standardized around mu + s sigma^2 / a.
    """
    mu, sd = g.mean, g.std
    x = np.asarray(support, dtype=float)
    zx = (x - mu) / sd
    z_lo, z_hi = z[:-1], z[1:]
    per_atom = np.zeros(x.size)
    for sign, lo, hi in ((-1.0, z_lo, np.minimum(zx, z_hi)), (1.0, np.maximum(zx, z_lo), z_hi)):
        shift = sign * sd / a
        log_weight = sign * (mu - x) / a + 0.5 * (sd / a) ** 2 + log_gauss_intervals(lo - shift, hi - shift)
        if np.any(log_weight > 709.0):
            return math.inf
        per_atom += np.exp(log_weight) - np.exp(log_gauss_intervals(lo, hi))
    return math.fsum(np.maximum(per_atom, 0.0))


def orlicz_objective(f: AnyLaw, g: AnyLaw, psi: OrliczCost, a: float) -> float:
    """
    Integral over u of psi(|F^-1(u) - G^-1(u)| / a).

    Either side may be a LogLattice; against a Gaussian with the exponential
    cost its atoms are coupled through log cumulative levels, so the
    extreme atoms meet the right part of the Gaussian tail. Returns +inf
    when the exponential cost overflows; that is a value, not an error.
    """
    if not a > 0:
        raise DistributionError(f"Orlicz scale must be positive, got {a}")
    f, g = _orient(f, g)
    if isinstance(f, dc.LogLattice):
        if psi.kind == "exp" and isinstance(g, dc.GaussianLaw):
            return _exp_objective(f.support, _log_gaussian_boundaries(f), g, a)
        f = f.to_lattice()
    if isinstance(g, dc.LogLattice):
        g = g.to_lattice()
    if _same_law(f, g):
        return 0.0

    if isinstance(f, dc.LatticeDistribution) and isinstance(g, dc.LatticeDistribution):
        x, y, w = QuantileCoupling(f, g).pairs()
        with np.errstate(over="ignore"):
            return math.fsum(w * psi(np.abs(x - y) / a))

    if isinstance(f, dc.GaussianLaw):
        m, s = f.mean - g.mean, f.std - g.std
        if s == 0:
            return float(psi(abs(m) / a))
        # F^-1(U) - G^-1(U) = m + s Z
        return orlicz_objective(dc.dirac(0.0), dc.GaussianLaw(-m, s * s), psi, a)

    if psi.kind == "pow":
        integral, _ = _power_integral(f, g, psi.p)
        return integral / a ** psi.p

    z = _gaussian_boundaries(f, g)
    if psi.kind == "exp":
        return _exp_objective(f.support, z, g, a)
    return math.fsum(_atom_abs_integral(float(x), g, float(z[i]), float(z[i + 1])) / a
                     for i, x in enumerate(f.support))


def exponential_coupling_moment(f: Law, g: Law, scale: float) -> float:
    """Integral over u of exp(|F^-1(u) - G^-1(u)| / scale)."""
    return orlicz_objective(f, g, OrliczCost.exp_minus_one(), scale) + 1.0


def orlicz_wasserstein(
    f: AnyLaw,
    g: AnyLaw,
    psi: Optional[OrliczCost] = None,
    rel_tol: Optional[float] = None,
) -> TransportResult:
    """
    Smallest a with orlicz_objective(f, g, psi, a) <= 1.

    The quantile coupling attains the infimum over couplings for convex psi,
    so the inner problem is solved exactly. For psi = |t| and |t|^p the
    answer is W1 and Wp by homogeneity. For the exponential cost the root
    is bracketed from a0 = max(W1, floor) upwards (psi(t) >= t puts the
    objective at or above one at W1) and refined with Brent's method.

    Pass a LogLattice for f when its tails reach below the float range:
    W1 and the bracket come from its float version, the exponential
    objective from the log levels. A float lattice truncated at a mass
    tolerance couples its last atom with the whole Gaussian tail, and the
    exponential cost of that cell grows with the truncation depth.

    Raises:
        BracketError: if the objective stays above one up to the overflow bracket
    """
    psi = psi or OrliczCost.exp_minus_one()
    settings = get_settings()
    rel_tol = settings.orlicz_rel_tol if rel_tol is None else rel_tol
    f, g = _orient(f, g)
    tails = None
    if isinstance(f, dc.LogLattice):
        if psi.kind == "exp" and isinstance(g, dc.GaussianLaw):
            tails = f
        f = f.to_lattice()
    if isinstance(g, dc.LogLattice):
        g = g.to_lattice()
    if _same_law(f, g):
        return TransportResult(value=0.0, objective_at_value=0.0, method=f"wpsi:{psi.label}")

    if psi.kind == "abs":
        w1 = w1_distance(f, g)
        return w1.model_copy(update={"objective_at_value": 1.0 if w1.value > 0 else 0.0,
                                     "method": "wpsi:abs"})
    if psi.kind == "pow":
        wp = wp_distance(f, g, psi.p)
        return wp.model_copy(update={"objective_at_value": 1.0 if wp.value > 0 else 0.0,
                                     "method": f"wpsi:{psi.label}"})

    w1 = w1_distance(f, g).value
    if w1 == 0:
        return TransportResult(value=0.0, objective_at_value=0.0, method="wpsi:exp")
    objective = lambda a: orlicz_objective(f if tails is None else tails, g, psi, a)

    lo = max(w1, settings.orlicz_abs_floor * 1e-3)
    hi = 2.0 * lo
    iterations = 0
    value_hi = objective(hi)
    while not value_hi < 1.0:
        lo, hi = hi, 2.0 * hi
        value_hi = objective(hi)
        iterations += 1
        if hi > 1e300:
            raise BracketError("Orlicz objective never drops below one")

    gap = lambda a: min(objective(a), 1e6) - 1.0
    if gap(lo) <= 0:
        # objective == 1 exactly at the lower end
        root, brent_iter = lo, 0
    else:
        root, info = optimize.brentq(gap, lo, hi, xtol=settings.orlicz_abs_floor * 1e-6,
                                     rtol=max(min(rel_tol, 1e-12), 4 * np.finfo(float).eps),
                                     full_output=True)
        brent_iter = info.iterations
    at_root = objective(root)
    if abs(at_root - 1.0) > 10 * settings.objective_tol:
        logger.warning(f"Orlicz objective at the root is {at_root!r}, expected 1")
    logger.debug(f"W_psi = {root:.12g} ({iterations} bracket steps, {brent_iter} Brent iterations)")
    return TransportResult(
        value=root,
        objective_at_value=at_root,
        iterations=iterations + brent_iter,
        method="wpsi:exp",
        diagnostics={"bracket": [lo, hi], "w1": w1},
    )


# ---------------------------------------------------------------------------
# Discrete oracle and coupling profile
# ---------------------------------------------------------------------------

CostFunction = Callable[[np.ndarray], np.ndarray]


def comonotone_cost(mu: dc.LatticeDistribution, nu: dc.LatticeDistribution, cost: CostFunction) -> float:
    """Cost of the quantile coupling between two lattice laws."""
    x, y, w = QuantileCoupling(mu, nu).pairs()
    return math.fsum(w * np.asarray(cost(np.abs(x - y)), dtype=float))


def discrete_ot_oracle(
    mu: dc.LatticeDistribution,
    nu: dc.LatticeDistribution,
    cost: CostFunction,
    max_atoms: Optional[int] = None,
) -> float:
    """
    Optimal transport cost by solving the transportation linear program.

    Args:
        mu, nu: Lattice laws
        cost: Vectorized function of |x - y|
        max_atoms: Size cap per side (settings default)

    Raises:
        OracleSizeError: if either side has more than max_atoms atoms
    """
    cap = get_settings().oracle_max_atoms if max_atoms is None else max_atoms
    n, m = len(mu), len(nu)
    if n > cap or m > cap:
        raise OracleSizeError(f"oracle limited to {cap} atoms per side, got {n} x {m}")

    c = np.asarray(cost(np.abs(np.subtract.outer(mu.support, nu.support))), dtype=float).ravel()
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    # one column constraint is implied by the others
    a_eq = sparse.vstack([rows, cols.tocsr()[:-1]]).tocsr()
    b_eq = np.concatenate((mu.mass, nu.mass[:-1]))
    res = optimize.linprog(
        c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise CLTTransportError(f"transport linear program failed: {res.message}")
    return float(res.fun)


def coupling_profile(
    f: dc.LatticeDistribution,
    g: dc.GaussianLaw,
    clip: Optional[float] = None,
) -> List[CouplingCell]:
    """
    Gaussian partner range of every atom under the quantile coupling.

    Partner quantile levels are clipped to [clip, 1 - clip]; cells where
    that changed an endpoint are flagged.
    """
    clip = get_settings().quantile_clip if clip is None else clip
    exact = _gaussian_boundaries(f, g)
    clipped = _gaussian_boundaries(f, g, clip=clip)
    eta = g.mean + g.std * clipped
    cells = []
    for i, x in enumerate(f.support):
        lo, hi = float(eta[i]), float(eta[i + 1])
        cells.append(CouplingCell(
            atom=float(x),
            mass=float(f.mass[i]),
            u_low=float(f.cum[i - 1]) if i else 0.0,
            u_high=float(f.cum[i]),
            eta_low=lo,
            eta_high=hi,
            clipped_low=bool(exact[i] != clipped[i]),
            clipped_high=bool(exact[i + 1] != clipped[i + 1]),
            max_displacement=max(abs(x - lo), abs(x - hi)),
        ))
    return cells
