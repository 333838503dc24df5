import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, special

from clt_transport import dist_core as dc
from clt_transport import transport as tr
from clt_transport.exceptions import DistributionError, OracleSizeError
from clt_transport.utils.numerics import log_gauss_interval, log_gauss_intervals

W1_RADEMACHER_GAUSSIAN = 0.5353773215478797


@pytest.fixture
def random_pair():
    """Two small irregular lattice laws."""

    def build(seed, n=6, m=7):
        rng = np.random.default_rng(seed)
        mu = dc.make_lattice(np.sort(rng.normal(size=n)), rng.dirichlet(np.ones(n)), mass_tolerance=1e-30)
        nu = dc.make_lattice(np.sort(rng.normal(0.3, 1.5, size=m)), rng.dirichlet(np.ones(m)), mass_tolerance=1e-30)
        return mu, nu

    return build


# --- costs and coupling -----------------------------------------------------

def test_orlicz_cost_kinds():
    assert tr.OrliczCost.exp_minus_one()(1.0) == pytest.approx(math.e - 1)
    assert tr.OrliczCost.power(3)(-2.0) == pytest.approx(8.0)
    assert tr.OrliczCost.absolute()(-0.25) == 0.25
    assert tr.OrliczCost("absolute").kind == "abs"
    with pytest.raises(DistributionError):
        tr.OrliczCost.power(0.5)
    with pytest.raises(DistributionError):
        tr.OrliczCost("log")


def test_quantile_coupling_pairs_have_the_marginals(random_pair):
    mu, nu = random_pair(7)
    x, y, w = tr.QuantileCoupling(mu, nu).pairs()
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.diff(x) >= 0) and np.all(np.diff(y) >= 0)
    for atom, mass in zip(mu.support, mu.mass):
        assert math.fsum(w[x == atom]) == pytest.approx(mass, abs=1e-14)
    for atom, mass in zip(nu.support, nu.mass):
        assert math.fsum(w[y == atom]) == pytest.approx(mass, abs=1e-14)


def test_quantile_coupling_evaluates_both_sides(rademacher, std_normal):
    left, right = tr.QuantileCoupling(rademacher, std_normal)([0.25, 0.75])
    assert list(left) == [-1.0, 1.0]
    assert right == pytest.approx([special.ndtri(0.25), special.ndtri(0.75)])


# --- Kolmogorov and Levy ----------------------------------------------------

def test_kolmogorov_rademacher_gaussian(rademacher, std_normal):
    result = tr.kolmogorov_distance(rademacher, std_normal)
    assert result.value == pytest.approx(special.ndtr(1.0) - 0.5, rel=1e-14)
    assert tr.kolmogorov_distance(std_normal, rademacher).value == result.value


def test_kolmogorov_lattice_pair():
    result = tr.kolmogorov_distance(dc.bernoulli(0.3), dc.bernoulli(0.6))
    assert result.value == pytest.approx(0.3, abs=1e-15)


def test_kolmogorov_gaussian_pair():
    shifted = tr.kolmogorov_distance(dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(1.0, 1.0))
    assert shifted.value == pytest.approx(special.ndtr(0.5) - special.ndtr(-0.5), rel=1e-12)
    assert shifted.diagnostics["argmax"] == pytest.approx(0.5)
    same = tr.kolmogorov_distance(dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.0, 1.0))
    assert same.value == 0.0
    spread = tr.kolmogorov_distance(dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.0, 4.0))
    # densities cross at +-sqrt(8 ln 2 / 3)
    c = math.sqrt(8 * math.log(2) / 3)
    assert spread.value == pytest.approx(special.ndtr(c) - special.ndtr(c / 2), rel=1e-10)


def test_levy_two_diracs():
    result = tr.levy_distance(dc.dirac(0.0), dc.dirac(0.5))
    assert result.value == pytest.approx(0.5, abs=2e-9)
    assert tr.levy_distance(dc.dirac(0.0), dc.dirac(0.0)).value == 0.0


def test_levy_is_below_kolmogorov(rademacher, std_normal):
    levy = tr.levy_distance(rademacher, std_normal).value
    kolmogorov = tr.kolmogorov_distance(rademacher, std_normal).value
    assert 0.0 < levy <= kolmogorov + 1e-9
    assert tr.levy_distance(std_normal, rademacher).value == pytest.approx(levy, abs=2e-9)


def test_levy_lattice_pair_is_symmetric():
    a, b = dc.bernoulli(0.3), dc.binomial(3, 0.5)
    assert tr.levy_distance(a, b).value == pytest.approx(tr.levy_distance(b, a).value, abs=2e-9)


def test_levy_gaussian_pair():
    f, g = dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.1, 1.0)
    levy = tr.levy_distance(f, g).value
    assert 0.0 < levy <= tr.kolmogorov_distance(f, g).value + 1e-9


# --- W1 and Wp --------------------------------------------------------------

def test_w1_rademacher_gaussian(rademacher, std_normal):
    result = tr.w1_distance(rademacher, std_normal)
    assert result.value == pytest.approx(W1_RADEMACHER_GAUSSIAN, rel=1e-9)
    assert result.diagnostics["quantile_form"] == pytest.approx(W1_RADEMACHER_GAUSSIAN, rel=1e-8)
    assert tr.w1_distance(std_normal, rademacher).value == pytest.approx(result.value, rel=1e-14)


def test_w1_lattice_pairs():
    assert tr.w1_distance(dc.dirac(0.0), dc.dirac(0.5)).value == pytest.approx(0.5)
    assert tr.w1_distance(dc.bernoulli(0.3), dc.bernoulli(0.6)).value == pytest.approx(0.3, abs=1e-15)
    assert tr.w1_distance(dc.rademacher(), dc.rademacher()).value == 0.0


def test_w1_gaussian_pair():
    m, s = 1.0, 1.0
    expected = s * math.sqrt(2 / math.pi) * math.exp(-0.5) + m * (1 - 2 * special.ndtr(-m / s))
    result = tr.w1_distance(dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(1.0, 4.0))
    assert result.value == pytest.approx(expected, rel=1e-8)


def test_w1_binomial_sum(normalized_binomial, std_normal):
    result = tr.w1_distance(normalized_binomial(64), std_normal)
    assert 0.0 < result.value < 0.1
    assert abs(result.value - result.diagnostics["quantile_form"]) <= 1e-8


def test_w1_lattice_is_translation_sensitive(std_normal):
    assert tr.w1_distance(dc.dirac(2.0), dc.GaussianLaw(2.0, 1.0)).value == pytest.approx(
        math.sqrt(2 / math.pi), rel=1e-9)
    assert tr.w1_distance(dc.dirac(0.0), dc.dirac(-3.0)).value == pytest.approx(3.0)


def test_w2_rademacher_gaussian(rademacher, std_normal):
    result = tr.wp_distance(rademacher, std_normal, 2.0)
    assert result.value == pytest.approx(math.sqrt(2 - 2 * math.sqrt(2 / math.pi)), rel=1e-9)


def test_wp_order_one_matches_w1(rademacher, std_normal):
    assert tr.wp_distance(rademacher, std_normal, 1.0).value == pytest.approx(W1_RADEMACHER_GAUSSIAN, rel=1e-9)


def test_wp_gaussian_pair():
    f, g = dc.GaussianLaw(0.5, 1.0), dc.GaussianLaw(0.0, 9.0)
    assert tr.wp_distance(f, g, 2.0).value == pytest.approx(math.sqrt(0.25 + 4.0), rel=1e-12)
    w3 = tr.wp_distance(f, g, 3.0).value
    assert tr.wp_distance(f, g, 2.0).value <= w3 + 1e-12


def test_wp_is_monotone_in_order(random_pair):
    mu, nu = random_pair(3)
    values = [tr.wp_distance(mu, nu, p).value for p in (1.0, 1.5, 2.0, 4.0)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_wp_rejects_small_order(rademacher, std_normal):
    with pytest.raises(DistributionError):
        tr.wp_distance(rademacher, std_normal, 0.5)


# --- Orlicz-Wasserstein -----------------------------------------------------

def test_orlicz_objective_matches_quadrature(rademacher, std_normal):
    a = 1.0
    density = lambda z: (math.exp(abs(1 - z) / a) - 1) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    near, _ = integrate.quad(density, 0, 1, epsabs=1e-13)
    far, _ = integrate.quad(density, 1, np.inf, epsabs=1e-13)
    half = near + far
    psi = tr.OrliczCost.exp_minus_one()
    assert tr.orlicz_objective(rademacher, std_normal, psi, a) == pytest.approx(2 * half, rel=1e-9)


def test_orlicz_objective_abs_cost_is_scaled_w1(rademacher, std_normal):
    psi = tr.OrliczCost.absolute()
    assert tr.orlicz_objective(rademacher, std_normal, psi, 2.0) == pytest.approx(
        W1_RADEMACHER_GAUSSIAN / 2, rel=1e-9)


def test_orlicz_objective_overflow_is_infinite(std_normal):
    psi = tr.OrliczCost.exp_minus_one()
    assert tr.orlicz_objective(dc.dirac(0.0), std_normal, psi, 0.01) == math.inf
    assert tr.orlicz_objective(dc.dirac(0.0), dc.dirac(1000.0), psi, 1.0) == math.inf
    with pytest.raises(DistributionError):
        tr.orlicz_objective(dc.dirac(0.0), std_normal, psi, 0.0)


def test_orlicz_two_diracs():
    result = tr.orlicz_wasserstein(dc.dirac(0.0), dc.dirac(0.5))
    assert result.value == pytest.approx(0.5 / math.log(2), rel=1e-9)
    assert result.objective_at_value == pytest.approx(1.0, abs=1e-8)


def test_orlicz_gaussian_pair():
    result = tr.orlicz_wasserstein(dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.0, 4.0))
    a = result.value
    # the displacement is -Z: E exp(|Z| / a) = 2 exp(1 / 2a^2) Phi(1 / a)
    assert 2 * math.exp(0.5 / a ** 2) * special.ndtr(1 / a) == pytest.approx(2.0, rel=1e-8)
    assert a >= tr.w1_distance(dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.0, 4.0)).value


def test_orlicz_rademacher_gaussian(rademacher, std_normal):
    result = tr.orlicz_wasserstein(rademacher, std_normal)
    assert result.value >= W1_RADEMACHER_GAUSSIAN
    assert result.objective_at_value == pytest.approx(1.0, abs=1e-8)
    assert tr.exponential_coupling_moment(rademacher, std_normal, result.value) == pytest.approx(2.0, abs=1e-8)


def test_orlicz_abs_and_power_reduce_to_wasserstein(rademacher, std_normal):
    w1 = tr.orlicz_wasserstein(rademacher, std_normal, tr.OrliczCost.absolute())
    assert w1.value == pytest.approx(W1_RADEMACHER_GAUSSIAN, rel=1e-9)
    w2 = tr.orlicz_wasserstein(rademacher, std_normal, tr.OrliczCost.power(2))
    assert w2.value == pytest.approx(tr.wp_distance(rademacher, std_normal, 2).value, rel=1e-12)


def test_orlicz_identical_laws(rademacher):
    result = tr.orlicz_wasserstein(rademacher, rademacher)
    assert result.value == 0.0


def test_orlicz_scale_equivariance(random_pair):
    mu, nu = random_pair(11)
    base = tr.orlicz_wasserstein(mu, nu).value
    scaled = tr.orlicz_wasserstein(dc.affine(mu, 3.0), dc.affine(nu, 3.0)).value
    assert scaled == pytest.approx(3.0 * base, rel=1e-8)


# --- oracle and comonotone cost ---------------------------------------------

@pytest.mark.parametrize("seed", [1, 2, 3, 4])
@pytest.mark.parametrize(
    "cost",
    [tr.OrliczCost.absolute(), tr.OrliczCost.power(2), tr.OrliczCost.exp_minus_one()],
    ids=["abs", "square", "exp"],
)
def test_comonotone_coupling_is_optimal(random_pair, seed, cost):
    mu, nu = random_pair(seed)
    assert tr.comonotone_cost(mu, nu, cost) == pytest.approx(tr.discrete_ot_oracle(mu, nu, cost), abs=1e-8)


def test_concave_cost_can_beat_comonotone():
    mu = dc.make_lattice([0.0, 1.0], [0.5, 0.5])
    nu = dc.make_lattice([1.0, 2.0], [0.5, 0.5])
    concave = np.sqrt
    # moving 0 -> 2 and leaving 1 in place costs sqrt(2) / 2 < 1
    assert tr.discrete_ot_oracle(mu, nu, concave) == pytest.approx(math.sqrt(2) / 2, abs=1e-9)
    assert tr.comonotone_cost(mu, nu, concave) == pytest.approx(1.0)


def test_oracle_size_limit(random_pair):
    mu, nu = random_pair(5)
    with pytest.raises(OracleSizeError):
        tr.discrete_ot_oracle(mu, nu, np.abs, max_atoms=3)


# --- coupling profile -------------------------------------------------------

def test_coupling_profile_rademacher(rademacher, std_normal):
    low, high = tr.coupling_profile(rademacher, std_normal)
    assert low.u_low == 0.0 and low.u_high == 0.5
    assert low.eta_high == pytest.approx(0.0, abs=1e-15)
    assert low.eta_low == pytest.approx(special.ndtri(1e-14), rel=1e-12)
    assert low.clipped_low and not low.clipped_high
    assert high.clipped_high and not high.clipped_low
    assert high.eta_high == pytest.approx(-low.eta_low, rel=1e-14)
    assert low.max_displacement == pytest.approx(-1.0 - low.eta_low, rel=1e-12)


def test_coupling_profile_covers_the_mass(normalized_binomial, std_normal):
    cells = tr.coupling_profile(normalized_binomial(20), std_normal)
    assert math.fsum(c.mass for c in cells) == pytest.approx(1.0, abs=1e-12)
    etas = [c.eta_low for c in cells] + [cells[-1].eta_high]
    assert all(b >= a for a, b in zip(etas, etas[1:]))
    inner = [c for c in cells if not (c.clipped_low or c.clipped_high)]
    for c in inner:
        assert c.max_displacement == max(abs(c.atom - c.eta_low), abs(c.atom - c.eta_high))


def small_lattices(max_atoms=6):
    return st.lists(
        st.tuples(st.integers(-6, 6), st.floats(0.05, 1.0)),
        min_size=1,
        max_size=max_atoms,
        unique_by=lambda t: t[0],
    ).map(lambda pairs: dc.make_lattice([p[0] / 2 for p in pairs], [p[1] for p in pairs]))


@settings(max_examples=30, deadline=None)
@given(small_lattices(), small_lattices())
def test_comonotone_cost_is_optimal_property(mu, nu):
    cost = tr.OrliczCost.power(2)
    assert tr.comonotone_cost(mu, nu, cost) == pytest.approx(tr.discrete_ot_oracle(mu, nu, cost), abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(small_lattices(), small_lattices())
def test_w1_is_symmetric_property(mu, nu):
    assert tr.w1_distance(mu, nu).value == pytest.approx(tr.w1_distance(nu, mu).value, abs=1e-12)


# --- full-tail laws and the exponential cost --------------------------------

def test_log_gauss_intervals_match_scalar():
    lo = np.array([-np.inf, -40.0, -1.0, 0.5, 30.0, 2.0])
    hi = np.array([-38.0, -39.0, 1.0, np.inf, 31.0, 1.0])
    expected = [log_gauss_interval(a, b) for a, b in zip(lo, hi)]
    assert np.allclose(log_gauss_intervals(lo, hi)[:-1], expected[:-1], rtol=1e-13, atol=0)
    assert log_gauss_intervals(lo, hi)[-1] == -np.inf


def test_tail_law_matches_float_law_when_nothing_underflows():
    g = dc.GaussianLaw(0.0, 3.0)
    float_law = dc.center(dc.poisson(3.0, mass_tolerance=1e-30))
    tail_law = dc.log_center(dc.log_poisson(3.0))
    expected = tr.orlicz_wasserstein(float_law, g).value
    assert tr.orlicz_wasserstein(tail_law, g).value == pytest.approx(expected, rel=1e-9)
    assert tr.orlicz_wasserstein(g, tail_law).value == pytest.approx(expected, rel=1e-9)


def test_tail_law_objective_uses_the_deep_tail(std_normal):
    n = 4096
    tails = dc.log_affine(dc.log_binomial(n, 0.5), 2.0 / math.sqrt(n), -math.sqrt(n))
    truncated = tails.to_lattice()
    psi = tr.OrliczCost.exp_minus_one()
    a = 1.0 / math.sqrt(n)
    # a truncated lattice pairs its last atoms with the whole Gaussian tail
    assert tr.orlicz_objective(truncated, std_normal, psi, a) == math.inf
    assert tr.orlicz_objective(tails, std_normal, psi, a) < 1.0


def test_tail_law_falls_back_for_other_costs(std_normal):
    tails = dc.log_binomial(8, 0.5)
    law = tails.to_lattice()
    g = dc.gaussian_companion(law)
    w2 = tr.orlicz_wasserstein(tails, g, tr.OrliczCost.power(2)).value
    assert w2 == pytest.approx(tr.wp_distance(law, g, 2).value, rel=1e-12)


def test_levy_gaussian_closed_form():
    f, g = dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.1, 1.0)
    # only F(x) <= G(x + L) + L binds; its worst point is the midpoint of the shift
    expected = optimize.brentq(lambda e: 2 * special.ndtr((0.1 - e) / 2) - 1 - e, 0.0, 0.1, xtol=1e-15)
    assert tr.levy_distance(f, g).value == pytest.approx(expected, abs=1e-10)
    assert tr.levy_distance(g, f).value == pytest.approx(expected, abs=1e-10)


def test_levy_gaussian_scale_pair_on_grid():
    f, g = dc.GaussianLaw(0.0, 1.0), dc.GaussianLaw(0.0, 4.0)
    levy = tr.levy_distance(f, g).value
    x = np.linspace(-15.0, 15.0, 200_001)

    def worst(eps):
        lower = dc.cdf_eval(g, x - eps) - eps - dc.cdf_eval(f, x)
        upper = dc.cdf_eval(f, x) - dc.cdf_eval(g, x + eps) - eps
        return max(lower.max(), upper.max())

    assert worst(levy + 1e-7) <= 0.0
    assert worst(levy - 1e-7) > 0.0


def test_orlicz_matches_lp_oracle_on_fine_gaussian_grid(centered_poisson):
    mu = centered_poisson(1.0, mass_tolerance=1e-8)
    nu = dc.gaussian_quantile_lattice(400)
    exact = tr.orlicz_wasserstein(mu, dc.GaussianLaw(0.0, 1.0)).value
    discrete = tr.orlicz_wasserstein(mu, nu).value
    cost = lambda t: np.expm1(t / discrete)
    assert tr.comonotone_cost(mu, nu, cost) == pytest.approx(1.0, abs=1e-8)
    assert tr.discrete_ot_oracle(mu, nu, cost, max_atoms=400) == pytest.approx(1.0, abs=1e-6)
    assert discrete == pytest.approx(exact, rel=0.1)
