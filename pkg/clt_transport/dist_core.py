"""
One-dimensional laws: finite lattice distributions and Gaussian laws.

A LatticeDistribution is immutable; its cumulative and survival arrays are
computed once at construction (with compensated summation) and reused by
every evaluation. LogLattice keeps log-masses for laws whose tails reach
below the float range.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special, stats

from .exceptions import DegenerateLawError, DistributionError, SupportLimitError
from .settings import get_settings
from .utils.numerics import compensated_cumsum

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


def _default_tolerance(mass_tolerance: Optional[float]) -> float:
    if mass_tolerance is None:
        return get_settings().mass_tolerance
    if mass_tolerance < 0:
        raise DistributionError(f"mass_tolerance must be nonnegative, got {mass_tolerance}")
    return float(mass_tolerance)


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LatticeDistribution:
    """
    Finite law sum_i mass[i] * delta(support[i]).

    Attributes:
        support: Strictly increasing atoms
        mass: Positive probabilities aligned with support
        mass_tolerance: Allowed deviation of the total mass from one
        name: Free-form label used in logs and reports
    """

    support: np.ndarray
    mass: np.ndarray
    mass_tolerance: float = 1e-12
    name: str = ""
    _cum: np.ndarray = field(init=False, repr=False, compare=False)
    _tail: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = _readonly(self.support)
        mass = _readonly(self.mass)
        if support.ndim != 1 or mass.ndim != 1:
            raise DistributionError("support and mass must be one-dimensional")
        if support.size == 0:
            raise DistributionError("a lattice law needs at least one atom")
        if support.size != mass.size:
            raise DistributionError(
                f"support has {support.size} points but mass has {mass.size} entries"
            )
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(mass))):
            raise DistributionError("support and mass must be finite")
        if np.any(np.diff(support) <= 0):
            raise DistributionError("support must be strictly increasing")
        if np.any(mass <= 0):
            raise DistributionError("all masses must be positive")
        total = math.fsum(mass)
        slack = self.mass_tolerance + 4 * mass.size * _EPS
        if abs(total - 1.0) > slack:
            raise DistributionError(f"total mass {total!r} differs from 1 by more than {slack:.3e}")

        cum = np.minimum(compensated_cumsum(mass), 1.0)
        cum[-1] = 1.0
        # tail[i] = P(xi >= support[i]); tail[n] = 0
        tail = np.zeros(mass.size + 1)
        tail[:-1] = compensated_cumsum(mass[::-1])[::-1]
        tail = np.minimum(tail, 1.0)

        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "_cum", _readonly(cum))
        object.__setattr__(self, "_tail", _readonly(tail))

    def __len__(self) -> int:
        return int(self.support.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeDistribution):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(self.mass, other.mass)

    @property
    def cum(self) -> np.ndarray:
        """F at each atom."""
        return self._cum

    @property
    def tail(self) -> np.ndarray:
        """P(xi >= atom) at each atom, with a trailing zero."""
        return self._tail

    @property
    def mean(self) -> float:
        return mean(self)

    @property
    def variance(self) -> float:
        return variance(self)

    @property
    def std(self) -> float:
        return math.sqrt(variance(self))

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return (
            f"LatticeDistribution{label}(atoms={len(self)}, "
            f"range=[{self.support[0]:.6g}, {self.support[-1]:.6g}])"
        )


@dataclass(frozen=True)
class GaussianLaw:
    """Normal law N(mean, variance)."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise DistributionError("Gaussian parameters must be finite")
        if not self.variance > 0:
            raise DegenerateLawError(f"Gaussian variance must be positive, got {self.variance}")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def standardize(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std


@dataclass(frozen=True, eq=False)
class LogLattice:
    """
    Finite law held through natural-log masses.

    Atoms whose masses underflow a float stay in the law, so cumulative
    levels far below 1e-308 are still resolved. The exponential-cost
    transport objective couples the extreme atoms with the Gaussian tail
    and needs those levels; every other computation goes through
    to_lattice().
    """

    support: np.ndarray
    log_mass: np.ndarray
    name: str = ""
    _log_cum: np.ndarray = field(init=False, repr=False, compare=False)
    _log_tail: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = _readonly(self.support)
        log_mass = _readonly(self.log_mass)
        if support.ndim != 1 or support.size == 0 or support.shape != log_mass.shape:
            raise DistributionError("support and log_mass must be nonempty one-dimensional arrays of equal length")
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(log_mass))):
            raise DistributionError("support and log_mass must be finite")
        if np.any(np.diff(support) <= 0):
            raise DistributionError("support must be strictly increasing")
        log_total = float(special.logsumexp(log_mass))
        if abs(log_total) > 4 * log_mass.size * _EPS + 1e-12:
            raise DistributionError(f"log total mass {log_total!r} is not zero")

        log_cum = np.minimum(np.logaddexp.accumulate(log_mass), 0.0)
        log_cum[-1] = 0.0
        log_tail = np.full(log_mass.size + 1, -np.inf)
        log_tail[:-1] = np.minimum(np.logaddexp.accumulate(log_mass[::-1])[::-1], 0.0)

        object.__setattr__(self, "support", support)
        object.__setattr__(self, "log_mass", log_mass)
        object.__setattr__(self, "_log_cum", _readonly(log_cum))
        object.__setattr__(self, "_log_tail", _readonly(log_tail))

    def __len__(self) -> int:
        return int(self.support.size)

    @property
    def log_cum(self) -> np.ndarray:
        """log F at each atom."""
        return self._log_cum

    @property
    def log_tail(self) -> np.ndarray:
        """log P(xi >= atom) at each atom, with a trailing -inf."""
        return self._log_tail

    def to_lattice(self, mass_tolerance: Optional[float] = None) -> "LatticeDistribution":
        """Float-mass version; atoms that underflow are dropped."""
        with np.errstate(under="ignore"):
            mass = np.exp(self.log_mass)
        return make_lattice(self.support, mass, mass_tolerance=mass_tolerance, name=self.name)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return (
            f"LogLattice{label}(atoms={len(self)}, "
            f"range=[{self.support[0]:.6g}, {self.support[-1]:.6g}])"
        )


Law = Union[LatticeDistribution, GaussianLaw]


def _scalar_or_array(values: np.ndarray, like):
    if np.ndim(like) == 0:
        return values.item()
    return values


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def make_lattice(
    support: Sequence[float],
    mass: Sequence[float],
    mass_tolerance: Optional[float] = None,
    name: str = "",
    drop_small: bool = True,
) -> LatticeDistribution:
    """
    Build a lattice law from unsorted, possibly duplicated atoms.

    Duplicates are merged, zero masses removed and the result renormalized.
    With drop_small, the smallest atoms are discarded while their combined
    mass stays within mass_tolerance.

    Args:
        support: Atom locations
        mass: Nonnegative weights (need not sum to one)
        mass_tolerance: Truncation and normalization tolerance (settings default)
        name: Label for the law
        drop_small: Whether to drop negligible atoms

    Returns:
        LatticeDistribution: The normalized law

    Raises:
        DistributionError: On empty input, negative or non-finite mass, zero total mass
    """
    tol = _default_tolerance(mass_tolerance)
    x = np.asarray(support, dtype=float).ravel()
    w = np.asarray(mass, dtype=float).ravel()
    if x.size == 0:
        raise DistributionError("empty support")
    if x.size != w.size:
        raise DistributionError(f"support has {x.size} points but mass has {w.size} entries")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise DistributionError("support and mass must be finite")
    if np.any(w < 0):
        raise DistributionError("negative mass")

    atoms, inverse = np.unique(x, return_inverse=True)
    merged = np.bincount(inverse, weights=w, minlength=atoms.size)
    keep = merged > 0
    atoms, merged = atoms[keep], merged[keep]
    if atoms.size == 0:
        raise DistributionError("total mass is zero")
    merged = merged / math.fsum(merged)

    if drop_small and tol > 0 and atoms.size > 1:
        order = np.argsort(merged, kind="stable")
        dropped = np.cumsum(merged[order])
        n_drop = int(np.searchsorted(dropped, tol, side="right"))
        n_drop = min(n_drop, atoms.size - 1)
        if n_drop:
            keep = np.ones(atoms.size, dtype=bool)
            keep[order[:n_drop]] = False
            logger.debug(f"Dropping {n_drop} atoms with total mass {dropped[n_drop - 1]:.3e}")
            atoms, merged = atoms[keep], merged[keep]
            merged = merged / math.fsum(merged)

    return LatticeDistribution(atoms, merged, mass_tolerance=tol, name=name)


def dirac(c: float = 0.0) -> LatticeDistribution:
    return LatticeDistribution([float(c)], [1.0], name=f"dirac({c:g})")


def bernoulli(p: float) -> LatticeDistribution:
    if not 0 < p < 1:
        raise DistributionError(f"Bernoulli parameter must lie in (0, 1), got {p}")
    return LatticeDistribution([0.0, 1.0], [1.0 - p, p], name=f"bernoulli({p:g})")


def rademacher() -> LatticeDistribution:
    return LatticeDistribution([-1.0, 1.0], [0.5, 0.5], name="rademacher")


def binomial(n: int, p: float, mass_tolerance: Optional[float] = None) -> LatticeDistribution:
    """Binomial(n, p) from the exact pmf."""
    if n < 1 or int(n) != n:
        raise DistributionError(f"binomial n must be a positive integer, got {n}")
    if not 0 < p < 1:
        raise DistributionError(f"binomial p must lie in (0, 1), got {p}")
    k = np.arange(int(n) + 1, dtype=float)
    pmf = stats.binom.pmf(k, int(n), p)
    return make_lattice(k, pmf, mass_tolerance=mass_tolerance, name=f"binomial({int(n)},{p:g})")


def poisson(lam: float, mass_tolerance: Optional[float] = None) -> LatticeDistribution:
    """
    Poisson(lam) truncated symmetrically in probability.

    At most mass_tolerance / 2 is discarded from each tail, so the total
    discarded mass never exceeds mass_tolerance.
    """
    if not lam > 0:
        raise DistributionError(f"Poisson mean must be positive, got {lam}")
    tol = _default_tolerance(mass_tolerance)
    k_max = int(math.ceil(lam + 40.0 * math.sqrt(lam) + 60.0))
    k = np.arange(k_max + 1, dtype=float)
    pmf = stats.poisson.pmf(k, lam)

    lower = np.cumsum(pmf)
    upper = np.cumsum(pmf[::-1])
    lo = int(np.searchsorted(lower, tol / 2, side="right"))
    hi = k_max + 1 - int(np.searchsorted(upper, tol / 2, side="right"))
    if hi <= lo:
        lo, hi = int(np.argmax(pmf)), int(np.argmax(pmf)) + 1
    k, pmf = k[lo:hi], pmf[lo:hi]
    logger.debug(f"Poisson({lam:g}) truncated to [{lo}, {hi - 1}]")
    return make_lattice(k, pmf, mass_tolerance=tol, name=f"poisson({lam:g})", drop_small=False)


def discretized_gaussian(
    variance: float = 1.0,
    step: float = 0.05,
    width: float = 8.0,
    mass_tolerance: Optional[float] = None,
) -> LatticeDistribution:
    """
    N(0, variance) binned on the grid step * Z within width standard deviations.

    Each atom carries the Gaussian mass of its cell; the end cells absorb the tails.
    """
    if not (variance > 0 and step > 0 and width > 0):
        raise DistributionError("variance, step and width must be positive")
    sigma = math.sqrt(variance)
    k_max = int(math.floor(width * sigma / step))
    grid = step * np.arange(-k_max, k_max + 1, dtype=float)
    edges = np.concatenate(([-np.inf], grid[:-1] + step / 2, [np.inf])) / sigma
    pmf = np.empty(grid.size)
    half = grid.size // 2
    # upper cells through survival differences for tail accuracy
    pmf[:half + 1] = special.ndtr(edges[1:half + 2]) - special.ndtr(edges[:half + 1])
    pmf[half + 1:] = special.ndtr(-edges[half + 1:-1]) - special.ndtr(-edges[half + 2:])
    return make_lattice(grid, pmf, mass_tolerance=mass_tolerance,
                        name=f"gaussian_grid({variance:g},{step:g})")


def gaussian_quantile_lattice(n_atoms: int, variance: float = 1.0) -> LatticeDistribution:
    """Equal-mass discretization of N(0, variance) at the cell-midpoint quantiles."""
    if n_atoms < 1:
        raise DistributionError("n_atoms must be positive")
    u = (np.arange(1, n_atoms + 1) - 0.5) / n_atoms
    atoms = math.sqrt(variance) * special.ndtri(u)
    return LatticeDistribution(atoms, np.full(n_atoms, 1.0 / n_atoms),
                               name=f"gaussian_quantiles({n_atoms})")


def load_lattice_file(path: Union[str, Path], mass_tolerance: Optional[float] = None) -> LatticeDistribution:
    """
    Read a lattice law from a text file with one "x mass" pair per line.

    Lines starting with '#' (and trailing '#' comments) are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise DistributionError(f"law file not found: {path}")
    try:
        table = np.loadtxt(path, comments="#", ndmin=2)
    except ValueError as e:
        raise DistributionError(f"cannot parse law file {path}: {e}") from e
    if table.size == 0:
        raise DistributionError(f"law file {path} has no atoms")
    if table.shape[1] != 2:
        raise DistributionError(f"law file {path} must have two columns, found {table.shape[1]}")
    return make_lattice(table[:, 0], table[:, 1], mass_tolerance=mass_tolerance, name=path.stem)


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------

def _common_step(a: LatticeDistribution, b: LatticeDistribution) -> Optional[float]:
    """Shared grid step of both supports, or None when they do not sit on one grid."""
    steps = []
    for d in (a, b):
        if len(d) > 1:
            steps.append(float(np.min(np.diff(d.support))))
    if not steps:
        return None
    h = min(steps)
    for d in (a, b):
        k = (d.support - d.support[0]) / h
        if np.max(np.abs(k - np.round(k))) > 1e-9:
            return None
        if len(d) > 1 and np.round(k[-1]) > 8 * len(d) + 64:
            # too sparse for a dense convolution
            return None
    return h


def convolve(
    a: LatticeDistribution,
    b: LatticeDistribution,
    max_pairs: Optional[int] = None,
) -> LatticeDistribution:
    """
    Law of the sum of independent draws from a and b.

    Raises:
        SupportLimitError: if len(a) * len(b) exceeds max_pairs
    """
    cap = get_settings().max_convolution_pairs if max_pairs is None else max_pairs
    pairs = len(a) * len(b)
    if pairs > cap:
        raise SupportLimitError(f"convolution needs {pairs} pairs, limit is {cap}")
    tol = max(a.mass_tolerance, b.mass_tolerance)

    h = _common_step(a, b)
    if h is not None:
        ka = np.round((a.support - a.support[0]) / h).astype(np.int64)
        kb = np.round((b.support - b.support[0]) / h).astype(np.int64)
        dense_a = np.zeros(ka[-1] + 1)
        dense_b = np.zeros(kb[-1] + 1)
        dense_a[ka] = a.mass
        dense_b[kb] = b.mass
        out = np.convolve(dense_a, dense_b)
        idx = np.nonzero(out > 0)[0]
        atoms = a.support[0] + b.support[0] + h * idx
        return make_lattice(atoms, out[idx], mass_tolerance=tol)

    atoms = np.add.outer(a.support, b.support).ravel()
    weights = np.multiply.outer(a.mass, b.mass).ravel()
    return make_lattice(atoms, weights, mass_tolerance=tol)


def power_convolve(d: LatticeDistribution, n: int, max_pairs: Optional[int] = None) -> LatticeDistribution:
    """n-fold convolution of d with itself by binary powering."""
    if n < 1 or int(n) != n:
        raise DistributionError(f"n must be a positive integer, got {n}")
    result: Optional[LatticeDistribution] = None
    base = d
    n = int(n)
    while n:
        if n & 1:
            result = base if result is None else convolve(result, base, max_pairs)
        n >>= 1
        if n:
            base = convolve(base, base, max_pairs)
    return result


def affine(d: LatticeDistribution, scale: float, shift: float = 0.0) -> LatticeDistribution:
    """Law of scale * xi + shift."""
    if scale == 0 or not math.isfinite(scale) or not math.isfinite(shift):
        raise DistributionError(f"affine map needs a finite nonzero scale, got {scale}")
    atoms = scale * d.support + shift
    mass = d.mass
    if scale < 0:
        atoms, mass = atoms[::-1], mass[::-1]
    if np.all(np.diff(atoms) > 0):
        return LatticeDistribution(atoms, mass, mass_tolerance=d.mass_tolerance, name=d.name)
    # rounding collapsed neighbouring atoms
    return make_lattice(atoms, mass, mass_tolerance=d.mass_tolerance, name=d.name, drop_small=False)


def mean(d: Law) -> float:
    if isinstance(d, GaussianLaw):
        return d.mean
    return math.fsum(d.mass * d.support)


def variance(d: Law) -> float:
    if isinstance(d, GaussianLaw):
        return d.variance
    mu = mean(d)
    return math.fsum(d.mass * (d.support - mu) ** 2)


def center(d: LatticeDistribution) -> LatticeDistribution:
    return affine(d, 1.0, -mean(d))


def normalize(d: LatticeDistribution) -> LatticeDistribution:
    """Center and scale to unit variance."""
    var = variance(d)
    if not var > 0:
        raise DegenerateLawError(f"cannot normalize degenerate law {d!r}")
    sigma = math.sqrt(var)
    return affine(d, 1.0 / sigma, -mean(d) / sigma)


def total_variation(a: LatticeDistribution, b: LatticeDistribution) -> float:
    """Half the l1 distance between the mass vectors over the union support."""
    atoms = np.union1d(a.support, b.support)
    wa = np.zeros(atoms.size)
    wb = np.zeros(atoms.size)
    wa[np.searchsorted(atoms, a.support)] = a.mass
    wb[np.searchsorted(atoms, b.support)] = b.mass
    return 0.5 * math.fsum(np.abs(wa - wb))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def cdf_eval(d: Law, x):
    """Right-continuous F(x) = P(xi <= x); accepts scalars or arrays."""
    xs = np.asarray(x, dtype=float)
    if isinstance(d, GaussianLaw):
        return _scalar_or_array(special.ndtr(d.standardize(xs)), x)
    idx = np.searchsorted(d.support, xs, side="right")
    out = np.where(idx > 0, d.cum[np.maximum(idx - 1, 0)], 0.0)
    return _scalar_or_array(np.asarray(out, dtype=float), x)


def left_cdf_eval(d: Law, x):
    """Left limit F(x-) = P(xi < x)."""
    xs = np.asarray(x, dtype=float)
    if isinstance(d, GaussianLaw):
        return cdf_eval(d, x)
    idx = np.searchsorted(d.support, xs, side="left")
    out = np.where(idx > 0, d.cum[np.maximum(idx - 1, 0)], 0.0)
    return _scalar_or_array(np.asarray(out, dtype=float), x)


def sf_eval(d: Law, x):
    """Survival P(xi > x), computed without 1 - F cancellation."""
    xs = np.asarray(x, dtype=float)
    if isinstance(d, GaussianLaw):
        return _scalar_or_array(special.ndtr(-d.standardize(xs)), x)
    idx = np.searchsorted(d.support, xs, side="right")
    return _scalar_or_array(np.asarray(d.tail[idx], dtype=float), x)


def quantile_eval(d: Law, u):
    """
    Generalized inverse inf{x : F(x) >= u} for u in (0, 1).

    Raises:
        DistributionError: if some u lies outside (0, 1)
    """
    us = np.asarray(u, dtype=float)
    if np.any(~((us > 0) & (us < 1))):
        raise DistributionError("quantile level must lie in the open interval (0, 1)")
    if isinstance(d, GaussianLaw):
        return _scalar_or_array(d.mean + d.std * special.ndtri(us), u)
    idx = np.minimum(np.searchsorted(d.cum, us, side="left"), len(d) - 1)
    return _scalar_or_array(np.asarray(d.support[idx], dtype=float), u)


def moments(d: LatticeDistribution, k_max: int) -> List[float]:
    """Raw moments E xi^k for k = 1..k_max."""
    if k_max < 1:
        raise DistributionError(f"k_max must be at least 1, got {k_max}")
    out = []
    power = np.ones_like(d.support)
    for _ in range(k_max):
        power = power * d.support
        out.append(math.fsum(d.mass * power))
    return out


def central_moments(d: LatticeDistribution, k_max: int) -> List[float]:
    """Central moments E (xi - E xi)^k for k = 1..k_max."""
    return moments(center(d), k_max)


def cgf_eval(d: LatticeDistribution, z, unwrap: bool = False):
    """
    Cumulant generating function log E exp(z xi) by log-sum-exp.

    Real arguments give real values. For complex arguments the principal
    branch is used; with unwrap the imaginary part is made continuous along
    the (last axis of the) argument array.

    Raises:
        DistributionError: on non-finite arguments
    """
    zs = np.asarray(z)
    if not np.all(np.isfinite(zs)):
        raise DistributionError("cgf argument must be finite")
    total = np.sum(d.mass)
    if np.isrealobj(zs):
        exponents = zs.astype(float)[..., None] * d.support
        top = np.max(exponents, axis=-1, keepdims=True)
        s = np.sum(d.mass * np.exp(exponents - top), axis=-1)
        out = top[..., 0] + np.log(s / total)
        return _scalar_or_array(np.asarray(out), z)

    zs = zs.astype(complex)
    exponents = zs[..., None] * d.support
    top = np.max(exponents.real, axis=-1, keepdims=True)
    s = np.sum(d.mass * np.exp(exponents - top), axis=-1)
    out = top[..., 0] + np.log(s / total)
    if unwrap and out.ndim > 0:
        out = out.real + 1j * np.unwrap(out.imag, axis=-1)
    return _scalar_or_array(np.asarray(out), z)


def characteristic_eval(d: Law, t):
    """E exp(i t xi); closed form for Gaussian laws."""
    ts = np.asarray(t, dtype=float)
    if isinstance(d, GaussianLaw):
        out = np.exp(1j * d.mean * ts - 0.5 * d.variance * ts ** 2)
        return _scalar_or_array(out, t)
    out = np.sum(d.mass * np.exp(1j * ts[..., None] * d.support), axis=-1)
    return _scalar_or_array(out, t)


def gaussian_companion(d: Law) -> GaussianLaw:
    """
    Normal law with the mean and variance of d.

    Raises:
        DegenerateLawError: if d has zero variance
    """
    if isinstance(d, GaussianLaw):
        return d
    var = variance(d)
    if not var > 0:
        raise DegenerateLawError(f"{d!r} has zero variance")
    return GaussianLaw(mean(d), var)


# ---------------------------------------------------------------------------
# Log-mass laws
# ---------------------------------------------------------------------------

def make_log_lattice(
    support: Sequence[float],
    log_mass: Sequence[float],
    name: str = "",
    log_floor: Optional[float] = None,
) -> LogLattice:
    """
    Build a LogLattice from unsorted atoms and unnormalized log-weights.

    Duplicates are merged in log space; atoms whose normalized log-mass
    falls below log_floor (settings default) are dropped.
    """
    floor = get_settings().tail_log_floor if log_floor is None else log_floor
    x = np.asarray(support, dtype=float).ravel()
    w = np.asarray(log_mass, dtype=float).ravel()
    if x.size == 0 or x.size != w.size:
        raise DistributionError(f"support has {x.size} points but log_mass has {w.size} entries")
    if not np.all(np.isfinite(x)) or np.any(np.isnan(w)) or np.any(w == np.inf):
        raise DistributionError("support must be finite and log_mass below +inf")

    atoms, inverse = np.unique(x, return_inverse=True)
    merged = np.full(atoms.size, -np.inf)
    np.logaddexp.at(merged, inverse, w)
    log_total = special.logsumexp(merged)
    if not np.isfinite(log_total):
        raise DistributionError("total mass is zero")
    merged = merged - log_total
    keep = merged > floor
    atoms, merged = atoms[keep], merged[keep]
    return LogLattice(atoms, merged - special.logsumexp(merged), name=name)


def log_lattice(d: LatticeDistribution) -> LogLattice:
    return make_log_lattice(d.support, np.log(d.mass), name=d.name)


def log_binomial(n: int, p: float, log_floor: Optional[float] = None) -> LogLattice:
    """Binomial(n, p) with every atom, from the log-pmf."""
    if n < 1 or int(n) != n:
        raise DistributionError(f"binomial n must be a positive integer, got {n}")
    if not 0 < p < 1:
        raise DistributionError(f"binomial p must lie in (0, 1), got {p}")
    k = np.arange(int(n) + 1, dtype=float)
    return make_log_lattice(k, stats.binom.logpmf(k, int(n), p), name=f"binomial({int(n)},{p:g})",
                            log_floor=log_floor)


def log_poisson(lam: float, log_floor: Optional[float] = None) -> LogLattice:
    """Poisson(lam) from 0 up to the first atom whose log-pmf is below log_floor."""
    if not lam > 0:
        raise DistributionError(f"Poisson mean must be positive, got {lam}")
    floor = get_settings().tail_log_floor if log_floor is None else log_floor
    k_max = int(math.ceil(lam + 10.0 * math.sqrt(lam) + 10.0))
    while stats.poisson.logpmf(k_max, lam) > floor:
        k_max *= 2
    k = np.arange(k_max + 1, dtype=float)
    return make_log_lattice(k, stats.poisson.logpmf(k, lam), name=f"poisson({lam:g})", log_floor=floor)


def log_mean_variance(d: LogLattice) -> Tuple[float, float]:
    with np.errstate(under="ignore"):
        w = np.exp(d.log_mass)
    mu = math.fsum(w * d.support)
    return mu, math.fsum(w * (d.support - mu) ** 2)


def log_affine(d: LogLattice, scale: float, shift: float = 0.0) -> LogLattice:
    """Law of scale * xi + shift."""
    if scale == 0 or not math.isfinite(scale) or not math.isfinite(shift):
        raise DistributionError(f"affine map needs a finite nonzero scale, got {scale}")
    atoms = scale * d.support + shift
    log_mass = d.log_mass
    if scale < 0:
        atoms, log_mass = atoms[::-1], log_mass[::-1]
    if np.all(np.diff(atoms) > 0):
        return LogLattice(atoms, log_mass, name=d.name)
    return make_log_lattice(atoms, log_mass, name=d.name, log_floor=-np.inf)


def log_center(d: LogLattice) -> LogLattice:
    mu, _ = log_mean_variance(d)
    return log_affine(d, 1.0, -mu)


def log_normalize(d: LogLattice) -> LogLattice:
    mu, var = log_mean_variance(d)
    if not var > 0:
        raise DegenerateLawError(f"cannot normalize degenerate law {d!r}")
    sigma = math.sqrt(var)
    return log_affine(d, 1.0 / sigma, -mu / sigma)


def log_convolve(a: LogLattice, b: LogLattice, max_pairs: Optional[int] = None) -> LogLattice:
    """
    Law of the sum of independent draws, in log space.

    Raises:
        SupportLimitError: if len(a) * len(b) exceeds max_pairs
    """
    cap = get_settings().max_convolution_pairs if max_pairs is None else max_pairs
    pairs = len(a) * len(b)
    if pairs > cap:
        raise SupportLimitError(f"convolution needs {pairs} pairs, limit is {cap}")
    weights = np.add.outer(a.log_mass, b.log_mass).ravel()

    h = _common_step(a, b)
    if h is not None:
        ka = np.round((a.support - a.support[0]) / h).astype(np.int64)
        kb = np.round((b.support - b.support[0]) / h).astype(np.int64)
        idx = np.add.outer(ka, kb).ravel()
        out = np.full(int(idx.max()) + 1, -np.inf)
        np.logaddexp.at(out, idx, weights)
        hit = np.isfinite(out)
        atoms = a.support[0] + b.support[0] + h * np.nonzero(hit)[0]
        return make_log_lattice(atoms, out[hit])
    return make_log_lattice(np.add.outer(a.support, b.support).ravel(), weights)


def log_power_convolve(d: LogLattice, n: int, max_pairs: Optional[int] = None) -> LogLattice:
    """n-fold convolution of d with itself by binary powering."""
    if n < 1 or int(n) != n:
        raise DistributionError(f"n must be a positive integer, got {n}")
    result: Optional[LogLattice] = None
    base = d
    n = int(n)
    while n:
        if n & 1:
            result = base if result is None else log_convolve(result, base, max_pairs)
        n >>= 1
        if n:
            base = log_convolve(base, base, max_pairs)
    return result
