"""Divergences, coordinate conversions, geodesics and KL estimators."""

import numpy as np
import pytest
from scipy.integrate import quad

import bregmc as bm
from bregmc.errors import DomainError, NoSolutionError
from bregmc.geometry import BoundaryClampWarning

from conftest import random_natural_gaussian, rel_err


@pytest.fixture(scope="module")
def mc_exp_space(gauss_ef):
    prop = bm.uniform_interval_proposal(-8.0, 8.0)
    ss = bm.draw_sample_set(prop, 1_000, 3, gauss_ef)
    return bm.DuallyFlatSpace(bm.build_mc_exponential_generator(gauss_ef, ss))


@pytest.fixture(scope="module")
def mix_space(fig2_family):
    prop = bm.uniform_mixture_proposal(fig2_family)
    ss = bm.draw_sample_set(prop, 2_000, 6, fig2_family)
    return bm.DuallyFlatSpace(bm.build_mc_mixture_generator(fig2_family, ss))


# ---------------------------------------------------------------------------
# Bregman divergence
# ---------------------------------------------------------------------------

def test_divergence_reflexive(gauss_oracle_space):
    t = np.array([0.7, -1.1])
    assert gauss_oracle_space.bregman_divergence(t, t) == 0.0


def test_divergence_recovers_gaussian_kl(gauss_oracle_space):
    # KL(N(2,1) : N(0,1)) = 2 by the closed-form Gaussian KL; it equals
    # the divergence on swapped natural parameters
    t1 = np.array([0.0, -0.5])
    t2 = np.array([2.0, -0.5])
    assert gauss_oracle_space.bregman_divergence(t2, t1) == pytest.approx(
        2.0, abs=1e-10)


def test_divergence_strictly_positive_off_diagonal(gauss_oracle_space):
    rng = np.random.default_rng(0)
    pts = random_natural_gaussian(rng, 20)
    for t1, t2 in zip(pts, np.roll(pts, 1, axis=0)):
        assert gauss_oracle_space.bregman_divergence(t1, t2) > 0


def test_divergence_domain_violation(gauss_oracle_space):
    with pytest.raises(DomainError):
        gauss_oracle_space.bregman_divergence([0.0, 1.0], [0.0, -1.0])


# ---------------------------------------------------------------------------
# dual <-> primal conversions
# ---------------------------------------------------------------------------

def test_round_trip_on_gaussian_oracle(gauss_oracle_space):
    rng = np.random.default_rng(1)
    worst = 0.0
    for theta in random_natural_gaussian(rng, 100):
        eta = gauss_oracle_space.dual_coordinates(theta)
        back = gauss_oracle_space.primal_coordinates(eta)
        worst = max(worst, np.linalg.norm(back - theta)
                    / (1.0 + np.linalg.norm(theta)))
    assert worst <= 1e-8


def test_binomial_inversion_midpoint():
    space = bm.DuallyFlatSpace(bm.binomial_ef_oracle())
    theta = space.primal_coordinates(np.array([0.5]))
    assert theta[0] == pytest.approx(0.0, abs=1e-9)


def test_binomial_inversion_outside_image_fails():
    space = bm.DuallyFlatSpace(bm.binomial_ef_oracle())
    for bad in (1.2, -0.1):
        with pytest.raises(NoSolutionError) as err:
            space.primal_coordinates(np.array([bad]))
        assert err.value.residual is not None


def test_round_trip_on_mc_exponential(mc_exp_space):
    rng = np.random.default_rng(2)
    for theta in random_natural_gaussian(rng, 25):
        eta = mc_exp_space.dual_coordinates(theta)
        back = mc_exp_space.primal_coordinates(eta)
        assert np.linalg.norm(back - theta) <= 1e-8 * (1 + np.linalg.norm(theta))


def test_round_trip_on_mixture_space(mix_space):
    for eta in ([0.2], [0.5], [0.85]):
        theta = mix_space.dual_coordinates(np.array(eta))
        back = mix_space.primal_coordinates(theta)
        assert np.linalg.norm(back - eta) <= 1e-8


def test_near_boundary_conversion_clamps_and_warns(mix_space):
    with pytest.warns(BoundaryClampWarning):
        mix_space.dual_coordinates(np.array([1e-11]))


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

def test_geodesic_endpoint_reproduction(gauss_oracle_space):
    p = np.array([0.3, -0.6])
    q = np.array([-0.8, -1.4])
    for kind in ("primal", "dual"):
        g0 = gauss_oracle_space.geodesic(p, q, 0.0, kind)
        g1 = gauss_oracle_space.geodesic(p, q, 1.0, kind)
        np.testing.assert_array_equal(g0.primal, p)
        np.testing.assert_array_equal(g1.primal, q)
        np.testing.assert_array_equal(
            g0.dual, gauss_oracle_space.dual_coordinates(p))
        np.testing.assert_array_equal(
            g1.dual, gauss_oracle_space.dual_coordinates(q))


def test_primal_geodesic_midpoint_is_mean(gauss_oracle_space):
    p = np.array([0.3, -0.6])
    q = np.array([-0.8, -1.4])
    mid = gauss_oracle_space.geodesic(p, q, 0.5, "primal")
    np.testing.assert_allclose(mid.primal, 0.5 * (p + q), rtol=1e-15)


def test_dual_geodesic_midpoint_dual_mean_forward_verified(gauss_oracle_space):
    p = np.array([0.3, -0.6])
    q = np.array([-0.8, -1.4])
    mid = gauss_oracle_space.geodesic(p, q, 0.5, "dual")
    want = 0.5 * (gauss_oracle_space.dual_coordinates(p)
                  + gauss_oracle_space.dual_coordinates(q))
    np.testing.assert_allclose(mid.dual, want, rtol=1e-15)
    resid = gauss_oracle_space.dual_coordinates(mid.primal) - mid.dual
    assert np.linalg.norm(resid) <= 1e-8


def test_geodesic_validates_lambda(gauss_oracle_space):
    with pytest.raises(ValueError):
        gauss_oracle_space.geodesic([0, -1], [1, -1], 1.5)


# ---------------------------------------------------------------------------
# skew Jensen and Jeffreys
# ---------------------------------------------------------------------------

def test_skew_jensen_vanishes_on_diagonal(gauss_oracle_space):
    p = np.array([0.4, -0.9])
    for alpha in (1e-3, 0.25, 0.75):
        assert gauss_oracle_space.skew_jensen(p, p, alpha) == pytest.approx(
            0.0, abs=1e-15)


def test_skew_jensen_symmetric_at_half(gauss_oracle_space):
    p = np.array([0.4, -0.9])
    q = np.array([-0.6, -0.5])
    assert gauss_oracle_space.skew_jensen(p, q, 0.5) == pytest.approx(
        gauss_oracle_space.skew_jensen(q, p, 0.5), rel=1e-12)


def test_skew_jensen_limit_error_decreases_linearly(gauss_oracle_space):
    p = np.array([0.0, -0.5])
    q = np.array([1.0, -1.0])
    b = gauss_oracle_space.bregman_divergence(q, p)
    errs = [abs(gauss_oracle_space.skew_jensen(p, q, a) / a - b)
            for a in (1e-2, 1e-3, 1e-4)]
    for big, small in zip(errs, errs[1:]):
        assert 5.0 <= big / small <= 20.0


def test_jeffreys_exact_matches_inner_product_form(gauss_oracle_space):
    rng = np.random.default_rng(3)
    pts = random_natural_gaussian(rng, 10)
    for p, q in zip(pts, np.roll(pts, 1, axis=0)):
        j = gauss_oracle_space.jeffreys(p, q, mode="exact")
        inner = float((p - q) @ (gauss_oracle_space.dual_coordinates(p)
                                 - gauss_oracle_space.dual_coordinates(q)))
        assert rel_err(j, inner) <= 1e-10
    assert gauss_oracle_space.jeffreys(pts[0], pts[0]) == 0.0


def test_jeffreys_skew_mode_close_to_exact(gauss_oracle_space):
    rng = np.random.default_rng(4)
    pts = random_natural_gaussian(rng, 20)
    checked = 0
    for p, q in zip(pts, np.roll(pts, 1, axis=0)):
        exact = gauss_oracle_space.jeffreys(p, q, mode="exact")
        if exact < 0.1:
            continue
        checked += 1
        approx = gauss_oracle_space.jeffreys(p, q, mode="skew", alpha=1e-3)
        assert rel_err(approx, exact) <= 0.01
    assert checked >= 5


# ---------------------------------------------------------------------------
# Monte Carlo KL estimators
# ---------------------------------------------------------------------------

def test_mc_kl_identical_densities_exactly_zero():
    p = bm.gaussian(0.3, 1.2)
    assert bm.mc_kl_estimate(p, p, 500, 0, "naive") == 0.0
    assert bm.mc_kl_estimate(p, p, 500, 0, "extended") == 0.0


def test_mc_kl_close_to_gaussian_kl():
    # KL(N(1,1) : N(0,1)) = 1/2
    p, q = bm.gaussian(1.0, 1.0), bm.gaussian(0.0, 1.0)
    for variant in ("naive", "extended"):
        got = bm.mc_kl_estimate(p, q, 100_000, 12, variant)
        assert rel_err(got, 0.5) <= 0.03


def test_extended_variant_nonnegative_on_random_pairs():
    rng = np.random.default_rng(5)
    for seed in range(200):
        mus = rng.uniform(-2, 2, 2)
        sds = rng.uniform(0.5, 2.0, 2)
        p, q = bm.gaussian(mus[0], sds[0]), bm.gaussian(mus[1], sds[1])
        assert bm.mc_kl_estimate(p, q, 128, seed, "extended") >= 0.0


def test_naive_variant_can_go_negative_on_near_identical_pair():
    p, q = bm.gaussian(0.0, 1.0), bm.gaussian(0.01, 1.0)
    est = bm.mc_kl_estimate(p, q, 1_000, 0, "naive")
    assert est < 0.0


def test_mc_kl_disjoint_support_names_variate():
    def halfline_logpdf(x):
        x = np.asarray(x, float)
        return np.where(x > 0, -x, -np.inf)

    q = bm.ComponentDensity(halfline_logpdf, lambda u: -np.log1p(-u), "expo")
    p = bm.gaussian(0.0, 1.0)
    with pytest.raises(ValueError, match="variate"):
        bm.mc_kl_estimate(p, q, 100, 1)


def test_mc_kl_between_mixtures(hetero_family):
    p = bm.MixtureDensity(hetero_family, [0.7])
    q = bm.MixtureDensity(hetero_family, [0.2])
    est = bm.mc_kl_estimate(p, q, 50_000, 3, "extended")
    assert est > 0
    # cross-check against quadrature KL between the two mixtures
    def integrand(x):
        lp = hetero_family.log_density([0.7], np.array([x]))[0]
        lq = hetero_family.log_density([0.2], np.array([x]))[0]
        return np.exp(lp) * (lp - lq)
    want, _ = quad(integrand, -np.inf, np.inf, limit=400)
    assert rel_err(est, want) <= 0.05


# ---------------------------------------------------------------------------
# Crouzeix diagnostic
# ---------------------------------------------------------------------------

def test_crouzeix_on_gaussian_oracle():
    # tight inversion tolerance: the deviation measures the whole dual
    # round trip, so it tracks the Newton residual
    space = bm.DuallyFlatSpace(bm.gaussian_ef_oracle(), tol=1e-12)
    rng = np.random.default_rng(6)
    for theta in random_natural_gaussian(rng, 20):
        assert space.crouzeix_deviation(theta) <= 1e-10


def test_crouzeix_binomial_at_zero():
    space = bm.DuallyFlatSpace(bm.binomial_ef_oracle())
    # F''(0) = 1/4, dual Hessian 4, product exactly 1
    assert space.crouzeix_deviation(np.array([0.0])) <= 1e-14


def test_crouzeix_on_mc_exponential(mc_exp_space):
    rng = np.random.default_rng(7)
    for theta in random_natural_gaussian(rng, 10):
        assert mc_exp_space.crouzeix_deviation(theta) <= 1e-8


# ---------------------------------------------------------------------------
# generator equivalence properties
# ---------------------------------------------------------------------------

def test_affine_shift_preserves_divergences(gauss_oracle_space, mix_space):
    rng = np.random.default_rng(8)
    base = gauss_oracle_space.generator
    shifted = bm.DuallyFlatSpace(bm.AffineShiftedGenerator(
        base, rng.normal(size=2), rng.normal()))
    pts = random_natural_gaussian(rng, 10)
    for p, q in zip(pts, np.roll(pts, 1, axis=0)):
        assert rel_err(shifted.bregman_divergence(p, q),
                       gauss_oracle_space.bregman_divergence(p, q)) <= 1e-12
    mix_shift = bm.DuallyFlatSpace(bm.AffineShiftedGenerator(
        mix_space.generator, rng.normal(size=1), rng.normal()))
    for e1, e2 in (([0.2], [0.7]), ([0.4], [0.5])):
        assert rel_err(mix_shift.bregman_divergence(e1, e2),
                       mix_space.bregman_divergence(e1, e2)) <= 1e-12


def test_positive_combinations_add_divergences(fig2_family):
    prop = bm.uniform_mixture_proposal(fig2_family)
    g1 = bm.build_mc_mixture_generator(
        fig2_family, bm.draw_sample_set(prop, 300, 1, fig2_family))
    g2 = bm.build_mc_mixture_generator(
        fig2_family, bm.draw_sample_set(prop, 300, 2, fig2_family))
    lam1, lam2 = 0.3, 1.7
    combo = bm.DuallyFlatSpace(
        bm.LinearCombinationGenerator([(g1, lam1), (g2, lam2)]))
    s1, s2 = bm.DuallyFlatSpace(g1), bm.DuallyFlatSpace(g2)
    for e1, e2 in (([0.2], [0.8]), ([0.45], [0.5]), ([0.9], [0.1])):
        want = (lam1 * s1.bregman_divergence(e1, e2)
                + lam2 * s2.bregman_divergence(e1, e2))
        assert rel_err(combo.bregman_divergence(e1, e2), want) <= 1e-12


# ---------------------------------------------------------------------------
# KL <-> divergence identity on the mixture manifold
# ---------------------------------------------------------------------------

def test_quadrature_kl_equals_negentropy_divergence(fig2_family):
    e1, e2 = np.array([0.3]), np.array([0.7])

    def integrand(x):
        lp = fig2_family.log_density(e1, np.array([x]))[0]
        lq = fig2_family.log_density(e2, np.array([x]))[0]
        return np.exp(lp) * (lp - lq)

    kl, _ = quad(integrand, -np.inf, np.inf, limit=400)
    oracle_space = bm.DuallyFlatSpace(bm.mixture_negentropy_oracle(fig2_family))
    assert abs(oracle_space.bregman_divergence(e1, e2) - kl) <= 1e-6

    # the Monte Carlo divergence approaches the quadrature value
    # (in distribution: compare medians over a few seeds)
    prop = bm.uniform_mixture_proposal(fig2_family)
    medians = []
    for m in (1_000, 100_000):
        errs = []
        for seed in range(5):
            gen = bm.build_mc_mixture_generator(
                fig2_family, bm.draw_sample_set(prop, m, seed, fig2_family))
            errs.append(abs(bm.DuallyFlatSpace(gen).bregman_divergence(e1, e2)
                            - kl))
        medians.append(np.median(errs))
    assert medians[1] < medians[0]
    assert medians[1] <= 0.05 * kl


# ---------------------------------------------------------------------------
# dual potential
# ---------------------------------------------------------------------------

def test_dual_potential_divergence_identity(gauss_oracle_space):
    dual = bm.DuallyFlatSpace(gauss_oracle_space.legendre_dual())
    rng = np.random.default_rng(9)
    pts = random_natural_gaussian(rng, 10)
    for t1, t2 in zip(pts, np.roll(pts, 1, axis=0)):
        e1 = gauss_oracle_space.dual_coordinates(t1)
        e2 = gauss_oracle_space.dual_coordinates(t2)
        want = gauss_oracle_space.bregman_divergence(t2, t1)
        assert rel_err(dual.bregman_divergence(e1, e2), want) <= 1e-8


def test_dual_potential_binomial_identity():
    space = bm.DuallyFlatSpace(bm.binomial_ef_oracle())
    dual = bm.DuallyFlatSpace(space.legendre_dual())
    t1, t2 = np.array([0.8]), np.array([-1.1])
    e1, e2 = space.dual_coordinates(t1), space.dual_coordinates(t2)
    assert rel_err(dual.bregman_divergence(e1, e2),
                   space.bregman_divergence(t2, t1)) <= 1e-8
