import math

import mpmath
import numpy as np
import pytest

from inspag.errors import InputError
from inspag.problem import (LogRegProblem, SparseDataset, generate_synthetic,
                            read_libsvm, write_libsvm)

from conftest import (empty_problem, fd_gradient, newton_reference, rel_err,
                      single_sample_problem)


class TestDatasetValidation:
    def test_rejects_out_of_range_index(self):
        with pytest.raises(InputError):
            SparseDataset.from_rows([(np.array([3]), np.array([1.0]))],
                                    np.array([1.0]), d=3)

    def test_rejects_duplicate_indices(self):
        with pytest.raises(InputError):
            SparseDataset.from_rows([(np.array([1, 1]), np.array([1.0, 2.0]))],
                                    np.array([1.0]), d=3)

    def test_rejects_zero_and_nonfinite_values(self):
        with pytest.raises(InputError):
            SparseDataset.from_rows([(np.array([0]), np.array([0.0]))],
                                    np.array([1.0]), d=2)
        with pytest.raises(InputError):
            SparseDataset.from_rows([(np.array([0]), np.array([np.inf]))],
                                    np.array([1.0]), d=2)

    def test_rejects_bad_labels(self):
        with pytest.raises(InputError):
            SparseDataset.from_rows([(np.array([0]), np.array([1.0]))],
                                    np.array([2.0]), d=2)

    def test_index_sets_must_partition(self):
        ds = generate_synthetic(0, 5, 4, 1.0)
        with pytest.raises(InputError):
            LogRegProblem(ds, 0.1, 0.1, sparse_idx=np.array([0, 1]),
                          dense_idx=np.array([1, 2, 3]))


class TestLossValue:
    def test_zero_point_gives_log_two(self, random_problems):
        for prob in random_problems:
            p0 = LogRegProblem(prob.data, 0.0, 0.0)
            assert p0.value(np.zeros(p0.d)) == pytest.approx(math.log(2), rel=1e-15)

    def test_saturated_margin(self):
        prob = single_sample_problem()
        assert prob.value(np.array([100.0])) <= 1e-43

    def test_matches_high_precision_summation(self):
        # straight summation oracle in 50-digit arithmetic
        ds = generate_synthetic(21, 20, 5, 1.0)
        prob = LogRegProblem(ds, 0.003, 0.001,
                             sparse_idx=np.arange(2), dense_idx=np.arange(2, 5))
        rng = np.random.default_rng(5)
        x = rng.standard_normal(5) * 3
        with mpmath.workdps(50):
            total = mpmath.mpf(0)
            X = ds.matrix.toarray()
            for i in range(ds.N):
                t = mpmath.mpf(0)
                for j in range(5):
                    t += mpmath.mpf(X[i, j]) * mpmath.mpf(x[j])
                t *= mpmath.mpf(ds.labels[i])
                total += mpmath.log(1 + mpmath.exp(-t))
            total /= ds.N
            for j in range(5):
                lam = 0.003 if j < 2 else 0.001
                total += mpmath.mpf(lam) * mpmath.mpf(x[j]) ** 2
            expected = float(total)
        assert abs(prob.value(x) - expected) <= 1e-12 * abs(expected)

    def test_dimension_mismatch(self):
        prob = single_sample_problem()
        with pytest.raises(InputError):
            prob.value(np.zeros(3))


class TestGradient:
    def test_single_sample_at_zero(self):
        prob = single_sample_problem()
        np.testing.assert_allclose(prob.gradient(np.array([0.0])), [-0.5])

    def test_matches_finite_differences(self, random_problems):
        rng = np.random.default_rng(17)
        for prob in random_problems:
            for _ in range(10):
                x = rng.standard_normal(prob.d)
                assert rel_err(prob.gradient(x),
                               fd_gradient(prob.value, x)) <= 1e-6

    def test_gradient_vanishes_at_reference_minimizer(self, random_problems):
        prob = random_problems[0]
        x_star = newton_reference(prob, tol=1e-13)
        assert float(np.linalg.norm(prob.gradient(x_star))) <= 1e-13


class TestHessianVec:
    def test_single_sample_at_zero(self):
        prob = single_sample_problem()
        np.testing.assert_allclose(
            prob.hessian_vec(np.array([0.0]), np.array([1.0])), [0.25])

    def test_linearity_in_v(self, random_problems):
        prob = random_problems[1]
        rng = np.random.default_rng(2)
        x = rng.standard_normal(prob.d)
        assert np.all(prob.hessian_vec(x, np.zeros(prob.d)) == 0.0)
        u, v = rng.standard_normal(prob.d), rng.standard_normal(prob.d)
        np.testing.assert_allclose(
            prob.hessian_vec(x, 2.0 * u + v),
            2.0 * prob.hessian_vec(x, u) + prob.hessian_vec(x, v), atol=1e-14)

    def test_matches_fd_of_gradient(self, random_problems):
        rng = np.random.default_rng(18)
        for prob in random_problems:
            for _ in range(10):
                x = rng.standard_normal(prob.d)
                v = rng.standard_normal(prob.d)
                fd = (prob.gradient(x + 1e-6 * v)
                      - prob.gradient(x - 1e-6 * v)) / 2e-6
                assert rel_err(prob.hessian_vec(x, v), fd) <= 1e-5

    def test_symmetry(self, random_problems):
        rng = np.random.default_rng(19)
        for prob in random_problems:
            for _ in range(10):
                x = rng.standard_normal(prob.d)
                u, v = rng.standard_normal(prob.d), rng.standard_normal(prob.d)
                a = float(u @ prob.hessian_vec(x, v))
                b = float(v @ prob.hessian_vec(x, u))
                assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_convexity_certificate(self, random_problems):
        rng = np.random.default_rng(20)
        for prob in random_problems:
            mu = min(prob.lambda_sparse, prob.lambda_dense)
            for _ in range(10):
                x = rng.standard_normal(prob.d)
                v = rng.standard_normal(prob.d)
                quad = float(v @ prob.hessian_vec(x, v))
                assert quad >= mu * float(v @ v) - 1e-12


class TestThirdDerivative:
    def test_zero_point_is_odd_symmetric(self, random_problems):
        # sigma'' vanishes at zero margins
        for prob in random_problems:
            h = np.ones(prob.d)
            np.testing.assert_allclose(
                prob.third_deriv_bilinear(np.zeros(prob.d), h),
                np.zeros(prob.d), atol=1e-15)

    def test_zero_direction(self, random_problems):
        prob = random_problems[0]
        x = np.ones(prob.d)
        assert np.all(prob.third_deriv_bilinear(x, np.zeros(prob.d)) == 0.0)

    def test_matches_fd_of_hessian_vec(self, random_problems):
        rng = np.random.default_rng(21)
        for prob in random_problems:
            for _ in range(10):
                x = rng.standard_normal(prob.d)
                h = rng.standard_normal(prob.d)
                step = 1e-5
                fd = (prob.hessian_vec(x + step * h, h)
                      - prob.hessian_vec(x - step * h, h)) / (2 * step)
                assert rel_err(prob.third_deriv_bilinear(x, h), fd,
                               floor=1e-12) <= 1e-4

    def test_quadratic_scaling_in_h(self, random_problems):
        prob = random_problems[2]
        rng = np.random.default_rng(22)
        x = rng.standard_normal(prob.d)
        h = rng.standard_normal(prob.d)
        np.testing.assert_allclose(prob.third_deriv_bilinear(x, 3.0 * h),
                                   9.0 * prob.third_deriv_bilinear(x, h),
                                   rtol=1e-12)

    def test_empirical_lipschitz_bound(self, random_problems):
        rng = np.random.default_rng(23)
        for prob in random_problems:
            l3 = prob.smoothness_constants().l3
            for _ in range(10):
                x = rng.standard_normal(prob.d)
                y = rng.standard_normal(prob.d)
                h = rng.standard_normal(prob.d)
                diff = float(np.linalg.norm(
                    prob.third_deriv_bilinear(x, h)
                    - prob.third_deriv_bilinear(y, h)))
                bound = l3 * float(np.linalg.norm(x - y)) * float(h @ h)
                assert diff <= bound * (1 + 1e-9)


class TestSmoothnessConstants:
    def test_single_sample_with_ridge(self):
        prob = single_sample_problem(0.1, 0.1)
        c = prob.smoothness_constants()
        assert c.l_smooth == pytest.approx(1.1)
        assert c.mu_strong == pytest.approx(0.1)

    def test_single_unit_sample_l3(self):
        c = single_sample_problem().smoothness_constants()
        assert c.l3 == pytest.approx(15.0, rel=1e-6)

    def test_orthonormal_rows_l3(self):
        # Gram matrix is an orthogonal projector: spectral norm exactly 1
        rows = [(np.array([j]), np.array([1.0])) for j in range(3)]
        ds = SparseDataset.from_rows(rows, np.array([1.0, -1.0, 1.0]), d=4)
        prob = LogRegProblem(ds, 0.0, 0.0)
        gram = (ds.matrix.T @ ds.matrix).toarray()
        assert np.linalg.norm(gram, 2) == pytest.approx(1.0)
        assert prob.smoothness_constants().l3 == pytest.approx(15.0, rel=1e-6)

    def test_power_iteration_matches_dense_eig(self, random_problems):
        for prob in random_problems:
            gram = (prob.data.matrix.T @ prob.data.matrix).toarray()
            expected = 15.0 * np.linalg.norm(gram, 2) ** 2
            assert prob.smoothness_constants().l3 == pytest.approx(
                expected, rel=1e-5)

    def test_empty_dataset_rejected(self):
        with pytest.raises(InputError):
            empty_problem(3).smoothness_constants()


class TestSynthetic:
    def test_determinism(self):
        a = generate_synthetic(1, 10, 4, 1.0)
        b = generate_synthetic(1, 10, 4, 1.0)
        assert (a.matrix != b.matrix).nnz == 0
        assert np.array_equal(a.labels, b.labels)

    def test_full_density(self):
        ds = generate_synthetic(2, 10, 4, 1.0)
        assert ds.matrix.nnz == 40

    def test_both_classes_present(self):
        ds = generate_synthetic(7, 50, 8, 0.8)
        assert set(np.unique(ds.labels)) == {-1.0, 1.0}

    def test_bad_arguments(self):
        with pytest.raises(InputError):
            generate_synthetic(0, 0, 4, 1.0)
        with pytest.raises(InputError):
            generate_synthetic(0, 5, 0, 1.0)
        with pytest.raises(InputError):
            generate_synthetic(0, 5, 4, 0.0)


class TestLibsvmIO:
    def test_roundtrip(self, tmp_path):
        ds = generate_synthetic(9, 12, 5, 0.6)
        path = tmp_path / "data.libsvm"
        write_libsvm(ds, path)
        back = read_libsvm(path, d=5)
        assert np.allclose(ds.matrix.toarray(), back.matrix.toarray())
        assert np.array_equal(ds.labels, back.labels)

    def test_parses_comments_and_zero_one_labels(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("# header\n1 1:2.0 3:1.5\n0 2:-1.0\n\n")
        ds = read_libsvm(path)
        assert ds.N == 2 and ds.d == 3
        assert list(ds.labels) == [1.0, -1.0]
        assert ds.matrix[0, 0] == 2.0 and ds.matrix[0, 2] == 1.5
        assert ds.matrix[1, 1] == -1.0

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 1:2.0\n1 nonsense\n")
        with pytest.raises(InputError, match="line 2"):
            read_libsvm(path)

    def test_zero_based_index_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 0:2.0\n")
        with pytest.raises(InputError, match="line 1"):
            read_libsvm(path)
