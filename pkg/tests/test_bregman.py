import math

import numpy as np
import pytest

from inspag.bregman import (Preconditioner, bregman_div, relative_constants,
                            triangle_scaling_check)
from inspag.errors import InputError
from inspag.problem import LogRegProblem, generate_synthetic

from conftest import empty_problem


@pytest.fixture(scope="module")
def logistic_precond():
    ds = generate_synthetic(31, 40, 5, 1.0)
    return Preconditioner(LogRegProblem(ds, 0.05, 0.05), sigma=0.1)


def quadratic_precond(d, sigma=1.0):
    return Preconditioner(empty_problem(d), sigma=sigma)


class TestPhiOracles:
    def test_sigma_zero_matches_local_problem(self):
        ds = generate_synthetic(32, 20, 4, 1.0)
        prob = LogRegProblem(ds, 0.02, 0.02)
        p = Preconditioner(prob, sigma=0.0)
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.standard_normal(4)
            v = rng.standard_normal(4)
            assert p.value(x) == prob.value(x)
            np.testing.assert_array_equal(p.gradient(x), prob.gradient(x))
            np.testing.assert_array_equal(p.hessian_vec(x, v),
                                          prob.hessian_vec(x, v))
            np.testing.assert_array_equal(p.third_deriv_bilinear(x, v),
                                          prob.third_deriv_bilinear(x, v))

    def test_value_and_gradient_at_zero(self):
        ds = generate_synthetic(33, 15, 3, 1.0)
        p = Preconditioner(LogRegProblem(ds, 0.0, 0.0), sigma=0.7)
        x0 = np.zeros(3)
        assert p.value(x0) == pytest.approx(math.log(2), rel=1e-15)
        np.testing.assert_array_equal(p.gradient(x0) - p.local_problem.gradient(x0),
                                      np.zeros(3))

    def test_ridge_delta(self):
        # sigma=1 vs sigma=0 at x=(3,4): value gap 12.5, gradient gap (3,4)
        base = quadratic_precond(2, sigma=0.0)
        ridged = quadratic_precond(2, sigma=1.0)
        x = np.array([3.0, 4.0])
        assert ridged.value(x) - base.value(x) == pytest.approx(12.5)
        np.testing.assert_allclose(ridged.gradient(x) - base.gradient(x), x)

    def test_constants_include_ridge(self, logistic_precond):
        p = logistic_precond
        local = p.local_problem.smoothness_constants()
        assert p.l_phi == pytest.approx(local.l_smooth + 0.1)
        assert p.mu_phi == pytest.approx(local.mu_strong + 0.1)
        assert p.l3_phi == pytest.approx(local.l3)
        assert p.kappa_phi == pytest.approx(p.l_phi / p.mu_phi)


class TestBregmanDivergence:
    def test_zero_at_anchor(self, logistic_precond):
        x = np.ones(5)
        assert bregman_div(logistic_precond, x, x) == 0.0

    def test_pure_quadratic_is_half_squared_distance(self):
        p = quadratic_precond(2, sigma=1.0)
        assert bregman_div(p, np.zeros(2), np.array([3.0, 4.0])) == \
            pytest.approx(12.5)

    def test_two_sided_sandwich(self, logistic_precond):
        p = logistic_precond
        rng = np.random.default_rng(1)
        for _ in range(20):
            u = rng.standard_normal(5)
            x = rng.standard_normal(5)
            div = bregman_div(p, u, x)
            sq = 0.5 * float((x - u) @ (x - u))
            assert p.mu_phi * sq - 1e-12 <= div <= p.l_phi * sq + 1e-12
            assert div >= 0.0

    def test_exact_construction_sandwich(self):
        # phi built from the FULL dataset plus ridge sigma, so
        # D_phi = D_F + (sigma/2)||x-y||^2 identically and
        # mu_F/(mu_F+sigma) D_phi <= D_F <= D_phi must hold on every pair
        ds = generate_synthetic(34, 30, 4, 1.0)
        lam, sigma = 0.02, 0.3
        full = LogRegProblem(ds, lam, lam)
        p = Preconditioner(full, sigma=sigma)
        mu_F = lam
        rng = np.random.default_rng(2)

        def d_F(u, x):
            return (full.value(x) - full.value(u)
                    - float(full.gradient(u) @ (x - u)))

        for _ in range(20):
            u = rng.standard_normal(4)
            x = rng.standard_normal(4)
            dphi = bregman_div(p, u, x)
            df = d_F(u, x)
            assert np.isclose(dphi, df + 0.5 * sigma * float((x - u) @ (x - u)),
                              rtol=1e-9, atol=1e-12)
            assert mu_F / (mu_F + sigma) * dphi <= df + 1e-12
            assert df <= dphi + 1e-12


class TestRelativeConstants:
    def test_sigma_zero(self):
        rc = relative_constants(0.5, 0.0)
        assert rc.l_rel == 1.0 and rc.mu_rel == 1.0 and rc.kappa_rel == 1.0

    def test_reported_experiment_setting(self):
        # lambda = 1e-5 with sigma = 2e-5 gives mu_rel = 0.2
        rc = relative_constants(1e-5, 2e-5)
        assert rc.mu_rel == pytest.approx(0.2)

    def test_unit_values(self):
        rc = relative_constants(1.0, 1.0)
        assert rc.mu_rel == pytest.approx(1.0 / 3.0)
        assert rc.kappa_rel == pytest.approx(3.0)

    def test_product_identity(self):
        for mu, sig in ((0.3, 0.0), (1e-4, 3e-3), (2.0, 0.5)):
            rc = relative_constants(mu, sig)
            assert rc.kappa_rel * rc.mu_rel == pytest.approx(rc.l_rel, rel=1e-12)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(InputError):
            relative_constants(0.0, 1.0)


class TestTriangleScaling:
    def test_quadratic_ratio_is_one(self):
        p = quadratic_precond(3, sigma=2.0)
        rep = triangle_scaling_check(p, G=1.0, samples=100, seed=4)
        assert rep.passed
        assert rep.max_ratio == pytest.approx(1.0, rel=1e-9)

    def test_kappa_bound_holds(self, logistic_precond):
        p = logistic_precond
        rep = triangle_scaling_check(p, G=p.kappa_phi, samples=300, seed=5)
        assert rep.passed

    def test_too_small_g_fails(self):
        p = quadratic_precond(3, sigma=1.0)
        rep = triangle_scaling_check(p, G=0.5, samples=50, seed=6)
        assert not rep.passed

    def test_degenerate_draws_counted(self):
        p = quadratic_precond(2, sigma=1.0)
        rep = triangle_scaling_check(p, G=1.0, samples=30, seed=7, scale=0.0)
        assert rep.skipped == 30
