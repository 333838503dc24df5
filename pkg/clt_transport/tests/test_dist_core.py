import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from clt_transport import dist_core as dc
from clt_transport.exceptions import (
    DegenerateLawError,
    DistributionError,
    SupportLimitError,
)


def lattice_laws(max_atoms=8):
    """Hypothesis strategy for small lattice laws on integer points."""
    return st.lists(
        st.tuples(st.integers(-20, 20), st.floats(0.01, 1.0)),
        min_size=1,
        max_size=max_atoms,
        unique_by=lambda t: t[0],
    ).map(lambda pairs: dc.make_lattice([p[0] for p in pairs], [p[1] for p in pairs]))


# --- construction -----------------------------------------------------------

def test_make_lattice_rademacher():
    d = dc.make_lattice([1, -1], [0.5, 0.5])
    assert list(d.support) == [-1.0, 1.0]
    assert dc.mean(d) == 0.0
    assert dc.variance(d) == 1.0


def test_make_lattice_merges_duplicates_and_normalizes():
    d = dc.make_lattice([2, 0, 2, 1], [1, 1, 1, 1])
    assert list(d.support) == [0.0, 1.0, 2.0]
    assert np.allclose(d.mass, [0.25, 0.25, 0.5])


def test_make_lattice_drops_negligible_atoms():
    d = dc.make_lattice([0, 1, 2], [0.5, 0.5, 1e-14], mass_tolerance=1e-12)
    assert list(d.support) == [0.0, 1.0]
    assert math.fsum(d.mass) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("support,mass", [
    ([], []),
    ([0, 1], [0.5, -0.1]),
    ([0, 1], [0.0, 0.0]),
    ([0, 1], [1.0]),
    ([0, float("nan")], [0.5, 0.5]),
])
def test_make_lattice_rejects_bad_input(support, mass):
    with pytest.raises(DistributionError):
        dc.make_lattice(support, mass)


def test_lattice_validation():
    with pytest.raises(DistributionError, match="strictly increasing"):
        dc.LatticeDistribution([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(DistributionError, match="total mass"):
        dc.LatticeDistribution([0.0, 1.0], [0.5, 0.6])
    d = dc.rademacher()
    with pytest.raises(ValueError):
        d.mass[0] = 1.0


def test_centered_bernoulli():
    d = dc.affine(dc.make_lattice([0, 1], [0.5, 0.5]), 1.0, -0.5)
    assert dc.mean(d) == 0.0
    assert dc.variance(d) == pytest.approx(0.25)


def test_poisson_truncation():
    d = dc.poisson(3.0, mass_tolerance=1e-12)
    assert d.support[0] >= 0
    assert d.support[-1] <= 35
    k = np.arange(0, 200)
    kept = stats.poisson.pmf(k, 3.0)[np.isin(k, d.support)]
    assert 1.0 - math.fsum(kept) <= 1e-12
    assert abs(math.fsum(d.mass) - 1.0) <= 1e-12


def test_binomial_and_gaussian_grid():
    d = dc.binomial(10, 0.5)
    assert dc.mean(d) == pytest.approx(5.0, abs=1e-12)
    assert dc.variance(d) == pytest.approx(2.5, abs=1e-12)
    g = dc.discretized_gaussian(variance=1.0, step=0.01)
    assert dc.mean(g) == pytest.approx(0.0, abs=1e-10)
    # binning adds step^2 / 12 of variance
    assert dc.variance(g) == pytest.approx(1.0 + 0.01 ** 2 / 12, abs=1e-6)


def test_load_lattice_file(tmp_path):
    path = tmp_path / "law.txt"
    path.write_text("# two-point law\n-1 0.25\n3 0.75  # heavy atom\n")
    d = dc.load_lattice_file(path)
    assert list(d.support) == [-1.0, 3.0]
    assert list(d.mass) == [0.25, 0.75]
    assert d.name == "law"

    with pytest.raises(DistributionError):
        dc.load_lattice_file(tmp_path / "missing.txt")


# --- convolution and affine maps ------------------------------------------

def test_convolve_rademacher(rademacher):
    d = dc.convolve(rademacher, rademacher)
    assert list(d.support) == [-2.0, 0.0, 2.0]
    assert np.allclose(d.mass, [0.25, 0.5, 0.25])


def test_convolve_identity(rademacher):
    assert dc.convolve(dc.dirac(0.0), rademacher) == rademacher


def test_convolve_centered_bernoulli_matches_binomial():
    centered = dc.affine(dc.bernoulli(0.5), 1.0, -0.5)
    d = dc.power_convolve(centered, 10)
    expected = dc.affine(dc.binomial(10, 0.5), 1.0, -5.0)
    assert dc.total_variation(d, expected) < 1e-12


def test_convolve_irregular_supports():
    a = dc.make_lattice([0.0, 0.3, 1.7], [0.2, 0.5, 0.3])
    b = dc.make_lattice([-1.0, math.pi], [0.6, 0.4])
    d = dc.convolve(a, b)
    assert len(d) == 6
    assert dc.mean(d) == pytest.approx(dc.mean(a) + dc.mean(b), rel=1e-12)
    assert dc.variance(d) == pytest.approx(dc.variance(a) + dc.variance(b), rel=1e-10)


def test_convolve_pair_limit(rademacher):
    with pytest.raises(SupportLimitError):
        dc.convolve(dc.binomial(100, 0.5), dc.binomial(100, 0.5), max_pairs=1000)
    with pytest.raises(SupportLimitError):
        dc.power_convolve(rademacher, 64, max_pairs=4)


def test_power_convolve(rademacher):
    d = dc.power_convolve(rademacher, 4)
    assert list(d.support) == [-4.0, -2.0, 0.0, 2.0, 4.0]
    assert np.allclose(d.mass, np.array([1, 4, 6, 4, 1]) / 16)
    assert dc.power_convolve(rademacher, 1) == rademacher


def test_power_convolve_matches_repeated_convolution():
    base = dc.make_lattice([-1.0, 0.0, 2.0], [0.3, 0.5, 0.2])
    repeated = base
    for _ in range(6):
        repeated = dc.convolve(repeated, base)
    assert dc.total_variation(dc.power_convolve(base, 7), repeated) < 1e-9


def test_affine(rademacher):
    half = dc.affine(rademacher, 0.5, 0.0)
    assert list(half.support) == [-0.5, 0.5]
    d = dc.make_lattice([0, 1, 5], [0.2, 0.3, 0.5])
    assert dc.affine(dc.affine(d, -1.0, 0.0), -1.0, 0.0) == d
    with pytest.raises(DistributionError):
        dc.affine(d, 0.0, 1.0)


@pytest.mark.parametrize("n", [1, 4, 16, 64])
def test_normalized_sum_has_unit_variance(rademacher, n):
    d = dc.affine(dc.power_convolve(rademacher, n), 1 / math.sqrt(n), 0.0)
    assert dc.variance(d) == pytest.approx(1.0, rel=1e-9)


# --- evaluation -------------------------------------------------------------

def test_cdf_values(rademacher, std_normal):
    assert dc.cdf_eval(rademacher, 0.0) == 0.5
    assert dc.cdf_eval(rademacher, -1.0) == 0.5
    assert dc.cdf_eval(rademacher, -1.5) == 0.0
    assert dc.cdf_eval(rademacher, 1.0) == 1.0
    assert dc.left_cdf_eval(rademacher, -1.0) == 0.0
    assert dc.left_cdf_eval(rademacher, 1.0) == 0.5
    assert dc.cdf_eval(std_normal, 0.0) == 0.5
    assert dc.cdf_eval(std_normal, 1.0) == pytest.approx(0.8413447460685429, rel=1e-15)


def test_sf_is_tail_accurate(std_normal):
    assert dc.sf_eval(std_normal, 10.0) == pytest.approx(7.619853024160527e-24, rel=1e-12)
    d = dc.poisson(5.0, mass_tolerance=1e-30)
    top = d.support[-2]
    assert dc.sf_eval(d, top) == pytest.approx(d.mass[-1], rel=1e-14)
    assert dc.sf_eval(d, d.support[-1]) == 0.0


def test_quantiles(rademacher, std_normal):
    assert dc.quantile_eval(rademacher, 0.5) == -1.0
    assert dc.quantile_eval(rademacher, 0.5000001) == 1.0
    assert dc.quantile_eval(std_normal, 0.5) == 0.0
    assert dc.quantile_eval(dc.GaussianLaw(2.0, 9.0), 0.8413447460685429) == pytest.approx(5.0, abs=1e-9)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(DistributionError):
            dc.quantile_eval(rademacher, bad)


def test_vectorized_evaluation(rademacher):
    xs = np.array([-2.0, -1.0, 0.0, 1.0])
    assert list(dc.cdf_eval(rademacher, xs)) == [0.0, 0.5, 0.5, 1.0]
    assert list(dc.quantile_eval(rademacher, np.array([0.25, 0.75]))) == [-1.0, 1.0]


@settings(max_examples=60, deadline=None)
@given(lattice_laws(), st.floats(0.001, 0.999), st.floats(-25, 25))
def test_galois_property(d, u, x):
    assert (dc.quantile_eval(d, u) <= x) == (u <= dc.cdf_eval(d, x))


@settings(max_examples=40, deadline=None)
@given(lattice_laws())
def test_cdf_shape(d):
    xs = np.linspace(d.support[0] - 1, d.support[-1] + 1, 200)
    values = dc.cdf_eval(d, xs)
    assert np.all(np.diff(values) >= 0)
    assert dc.cdf_eval(d, d.support[0] - 1e-9) == 0.0
    assert dc.cdf_eval(d, d.support[-1]) == 1.0
    assert np.array_equal(dc.cdf_eval(d, d.support), d.cum)


def test_moments():
    assert dc.moments(dc.rademacher(), 4) == [0.0, 1.0, 0.0, 1.0]
    assert dc.moments(dc.dirac(3.0), 3) == [3.0, 9.0, 27.0]
    p = 0.3
    centered = dc.affine(dc.bernoulli(p), 1.0, -p)
    assert dc.moments(centered, 3)[2] == pytest.approx(p * (1 - p) * (1 - 2 * p), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(lattice_laws(5), lattice_laws(5), st.floats(-3, 3).filter(lambda a: abs(a) > 0.1), st.floats(-3, 3))
def test_moment_identities(a, b, scale, shift):
    ma, mb = dc.moments(a, 4), dc.moments(b, 4)
    conv = dc.moments(dc.convolve(a, b), 4)
    expected = [
        ma[0] + mb[0],
        ma[1] + 2 * ma[0] * mb[0] + mb[1],
        ma[2] + 3 * ma[1] * mb[0] + 3 * ma[0] * mb[1] + mb[2],
        ma[3] + 4 * ma[2] * mb[0] + 6 * ma[1] * mb[1] + 4 * ma[0] * mb[2] + mb[3],
    ]
    assert np.allclose(conv, expected, rtol=1e-9, atol=1e-7)
    moved = dc.affine(a, scale, shift)
    assert dc.mean(moved) == pytest.approx(scale * ma[0] + shift, rel=1e-9, abs=1e-9)
    assert dc.variance(moved) == pytest.approx(scale ** 2 * dc.variance(a), rel=1e-9, abs=1e-9)


def test_cgf_closed_forms(rademacher, centered_poisson):
    assert dc.cgf_eval(rademacher, 0.0) == 0.0
    for z in (-2.0, -0.3, 0.7, 3.0):
        assert dc.cgf_eval(rademacher, z) == pytest.approx(math.log(math.cosh(z)), rel=1e-13)
    d = centered_poisson(6.0, mass_tolerance=1e-30)
    for z in (-1.0, 0.25, 1.0):
        assert dc.cgf_eval(d, z) == pytest.approx(6.0 * (math.exp(z) - 1 - z), rel=1e-10)


def test_cgf_on_imaginary_axis(rademacher):
    ts = np.linspace(-4, 4, 41)
    values = dc.cgf_eval(rademacher, 1j * ts)
    cf = dc.characteristic_eval(rademacher, ts)
    assert np.allclose(np.exp(values), cf, atol=1e-14)
    assert np.all(np.abs(np.exp(values)) <= 1 + 1e-15)


def test_cgf_unwrap_is_continuous():
    d = dc.make_lattice([0.0, 5.0], [0.3, 0.7])
    path = 1j * np.linspace(0, 3, 301)
    wrapped = dc.cgf_eval(d, path)
    unwrapped = dc.cgf_eval(d, path, unwrap=True)
    assert np.max(np.abs(np.diff(unwrapped.imag))) < 0.2
    assert np.allclose(np.exp(wrapped), np.exp(unwrapped))


def test_cgf_large_argument_does_not_overflow(rademacher):
    assert dc.cgf_eval(rademacher, 1000.0) == pytest.approx(1000.0 - math.log(2.0), rel=1e-14)
    with pytest.raises(DistributionError):
        dc.cgf_eval(rademacher, float("inf"))


def test_gaussian_companion(rademacher, centered_poisson):
    assert dc.gaussian_companion(rademacher) == dc.GaussianLaw(0.0, 1.0)
    binom = dc.center(dc.binomial(10, 0.5))
    assert dc.gaussian_companion(binom).variance == pytest.approx(2.5, rel=1e-12)
    assert dc.gaussian_companion(centered_poisson(7.0)).variance == pytest.approx(7.0, rel=1e-10)
    with pytest.raises(DegenerateLawError):
        dc.gaussian_companion(dc.dirac(1.0))
    with pytest.raises(DegenerateLawError):
        dc.GaussianLaw(0.0, 0.0)


def test_total_variation(rademacher):
    assert dc.total_variation(rademacher, rademacher) == 0.0
    assert dc.total_variation(dc.dirac(0.0), dc.dirac(1.0)) == 1.0
    assert dc.total_variation(rademacher, dc.dirac(1.0)) == 0.5


# --- compensated cumulative sums -------------------------------------------

def test_cumulative_array_is_compensated():
    rng = np.random.default_rng(3)
    mass = rng.dirichlet(np.full(5000, 0.05))
    mass = mass[mass > 0]
    d = dc.LatticeDistribution(np.arange(mass.size, dtype=float), mass / math.fsum(mass))
    for i in (0, 10, mass.size // 2, mass.size - 2):
        assert d.cum[i] == pytest.approx(math.fsum(d.mass[:i + 1]), abs=4e-16)
        assert d.tail[i] == pytest.approx(math.fsum(d.mass[i:]), abs=4e-16)
    assert d.cum[-1] == 1.0 and d.tail[-1] == 0.0


# --- log-mass laws ----------------------------------------------------------

def test_log_binomial_keeps_underflowing_atoms():
    d = dc.log_binomial(4096, 0.5)
    assert len(d) == 4097
    assert d.log_mass[0] == pytest.approx(4096 * math.log(0.5), rel=1e-12)
    assert d.log_cum[0] == d.log_mass[0]
    assert d.log_cum[-1] == 0.0 and d.log_tail[0] == 0.0 and d.log_tail[-1] == -math.inf
    # the float version loses the atoms below the smallest double
    assert len(d.to_lattice(mass_tolerance=0.0)) < 4097


def test_log_binomial_matches_pmf():
    d = dc.log_binomial(30, 0.3)
    assert np.allclose(np.exp(d.log_mass), stats.binom.pmf(np.arange(31), 30, 0.3), rtol=1e-12, atol=0)


def test_log_poisson_reaches_zero_and_the_floor():
    d = dc.log_poisson(1000.0)
    assert d.support[0] == 0.0
    assert d.log_mass[0] == pytest.approx(-1000.0, rel=1e-12)
    assert d.log_mass[-1] < -9000.0
    mu, var = dc.log_mean_variance(d)
    assert mu == pytest.approx(1000.0, rel=1e-12)
    assert var == pytest.approx(1000.0, rel=1e-9)


def test_log_center_and_normalize():
    d = dc.log_normalize(dc.log_poisson(7.0))
    mu, var = dc.log_mean_variance(d)
    assert mu == pytest.approx(0.0, abs=1e-12)
    assert var == pytest.approx(1.0, rel=1e-12)
    flipped = dc.log_affine(dc.log_binomial(3, 0.2), -1.0)
    assert list(flipped.support) == [-3.0, -2.0, -1.0, 0.0]
    assert flipped.log_mass[-1] == pytest.approx(3 * math.log(0.8), rel=1e-12)


def test_log_power_convolve_matches_float_convolution():
    summand = dc.make_lattice([-1.0, 0.0, 2.0], [0.4, 0.4, 0.2])
    exact = dc.power_convolve(summand, 6)
    logged = dc.log_power_convolve(dc.log_lattice(summand), 6)
    assert np.array_equal(logged.support, exact.support)
    assert np.allclose(np.exp(logged.log_mass), exact.mass, rtol=1e-12, atol=0)


def test_log_lattice_errors():
    with pytest.raises(DistributionError):
        dc.LogLattice([0.0, 1.0], [math.log(0.5), math.log(0.6)])
    with pytest.raises(DistributionError):
        dc.make_log_lattice([0.0], [-math.inf])
    with pytest.raises(DistributionError):
        dc.log_poisson(0.0)
    with pytest.raises(SupportLimitError):
        dc.log_convolve(dc.log_binomial(10, 0.5), dc.log_binomial(10, 0.5), max_pairs=100)
