"""Sparse binary-classification datasets and the regularized logistic objective.

The objective is

    F(x) = (1/N) sum_i log(1 + exp(-eta_i <x, xi_i>))
           + lambda_1 sum_{j in I_S} x_j^2 + lambda_2 sum_{j in I_D} x_j^2,

with labels eta_i in {-1, +1} and a feature-index partition I_S / I_D
(sparse vs dense coordinates, each with its own ridge weight).  All
derivative oracles are analytic and cost O(nnz).
"""

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import InputError

# Iteration budget / tolerance for the spectral-norm power iteration.
_POWER_TOL = 1e-6
_POWER_CAP = 10_000


class SparseDataset:
    """Row-sparse feature matrix with +/-1 labels.

    Rows are stored CSR so that partitioning (row slicing) and the
    matrix-vector products behind every oracle stay O(nnz).
    """

    def __init__(self, matrix, labels, validate=True):
        if not sp.issparse(matrix):
            raise InputError("matrix must be a scipy sparse matrix")
        self.matrix = matrix.tocsr()
        self.labels = np.asarray(labels, dtype=np.float64)
        if validate:
            self._validate()

    def _validate(self):
        n, _ = self.matrix.shape
        if self.labels.shape != (n,):
            raise InputError(
                f"labels shape {self.labels.shape} does not match {n} rows")
        if n and not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise InputError("labels must be drawn from {-1, +1}")
        if self.matrix.nnz:
            if not np.all(np.isfinite(self.matrix.data)):
                raise InputError("feature values must be finite")
            if np.any(self.matrix.data == 0.0):
                raise InputError("stored feature values must be nonzero")
            # CSR from from_rows is canonical; duplicates are rejected there.

    @classmethod
    def from_rows(cls, rows, labels, d):
        """Build from a list of (indices, values) pairs.

        Rejects duplicate or out-of-range indices and non-finite or zero
        values before scipy gets a chance to silently merge them.
        """
        if d <= 0:
            raise InputError("feature dimension must be positive")
        indptr = [0]
        indices = []
        data = []
        for i, (idx, val) in enumerate(rows):
            idx = np.asarray(idx, dtype=np.int64)
            val = np.asarray(val, dtype=np.float64)
            if idx.shape != val.shape:
                raise InputError(f"row {i}: index/value length mismatch")
            if idx.size:
                if idx.min() < 0 or idx.max() >= d:
                    raise InputError(f"row {i}: index outside [0, {d})")
                if np.unique(idx).size != idx.size:
                    raise InputError(f"row {i}: duplicate indices")
                if not np.all(np.isfinite(val)) or np.any(val == 0.0):
                    raise InputError(f"row {i}: values must be finite and nonzero")
            order = np.argsort(idx)
            indices.extend(idx[order])
            data.extend(val[order])
            indptr.append(len(indices))
        mat = sp.csr_matrix(
            (np.asarray(data, dtype=np.float64),
             np.asarray(indices, dtype=np.int64),
             np.asarray(indptr, dtype=np.int64)),
            shape=(len(rows), d))
        return cls(mat, labels)

    @property
    def N(self):
        return self.matrix.shape[0]

    @property
    def d(self):
        return self.matrix.shape[1]

    def subset(self, row_indices):
        """Dataset restricted to the given rows (shares no mutable state)."""
        row_indices = np.asarray(row_indices)
        return SparseDataset(self.matrix[row_indices], self.labels[row_indices],
                             validate=False)

    def row_norms_sq(self):
        return np.asarray(self.matrix.multiply(self.matrix).sum(axis=1)).ravel()


class SmoothnessConstants:
    """L_F, mu_F and the third-derivative Lipschitz constant of the loss."""

    def __init__(self, l_smooth, mu_strong, l3):
        if not (0 <= mu_strong <= l_smooth):
            raise InputError("need 0 <= mu <= L")
        if l3 < 0:
            raise InputError("l3 must be nonnegative")
        self.l_smooth = float(l_smooth)
        self.mu_strong = float(mu_strong)
        self.l3 = float(l3)

    @property
    def kappa(self):
        return self.l_smooth / self.mu_strong


class LogRegProblem:
    """Regularized logistic objective with analytic oracles up to third order.

    ``sparse_idx`` / ``dense_idx`` must partition {0, ..., d-1}; the two
    ridge weights apply per coordinate set.  An empty dataset is allowed
    (the objective degenerates to the pure ridge), which is how quadratic
    reference functions are built elsewhere.
    """

    def __init__(self, data, lambda_sparse=0.0, lambda_dense=0.0,
                 sparse_idx=None, dense_idx=None):
        if lambda_sparse < 0 or lambda_dense < 0:
            raise InputError("ridge weights must be nonnegative")
        self.data = data
        self.lambda_sparse = float(lambda_sparse)
        self.lambda_dense = float(lambda_dense)
        d = data.d
        if sparse_idx is None and dense_idx is None:
            sparse_idx = np.arange(d)
            dense_idx = np.arange(0)
        elif sparse_idx is None or dense_idx is None:
            raise InputError("give both index sets or neither")
        self.sparse_idx = np.asarray(sparse_idx, dtype=np.int64)
        self.dense_idx = np.asarray(dense_idx, dtype=np.int64)
        union = np.concatenate([self.sparse_idx, self.dense_idx])
        if np.unique(union).size != union.size or union.size != d:
            raise InputError("index sets must partition {0, ..., d-1}")
        if union.size and (union.min() < 0 or union.max() >= d):
            raise InputError("index sets must partition {0, ..., d-1}")
        # Per-coordinate ridge weight; the regularizer is sum_j w_j x_j^2.
        self._reg = np.zeros(d)
        self._reg[self.sparse_idx] = self.lambda_sparse
        self._reg[self.dense_idx] = self.lambda_dense

    @property
    def d(self):
        return self.data.d

    @property
    def N(self):
        return self.data.N

    def _check_x(self, x, name="x"):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise InputError(f"{name} has shape {x.shape}, expected ({self.d},)")
        if not np.all(np.isfinite(x)):
            raise InputError(f"{name} must be finite")
        return x

    def _margins(self, x):
        return self.data.labels * (self.data.matrix @ x)

    def value(self, x):
        x = self._check_x(x)
        reg = np.dot(self._reg, x * x)
        if self.N == 0:
            return reg
        t = self._margins(x)
        # log(1 + exp(-t)) without overflow at large |t|
        return float(np.mean(np.logaddexp(0.0, -t)) + reg)

    def gradient(self, x):
        x = self._check_x(x)
        g = 2.0 * self._reg * x
        if self.N == 0:
            return g
        t = self._margins(x)
        w = -self.data.labels * expit(-t)
        return self.data.matrix.T @ w / self.N + g

    def hessian_vec(self, x, v):
        x = self._check_x(x)
        v = self._check_x(v, "v")
        hv = 2.0 * self._reg * v
        if self.N == 0:
            return hv
        t = self._margins(x)
        w = expit(t) * expit(-t)          # sigma'(t), stable on both tails
        return self.data.matrix.T @ (w * (self.data.matrix @ v)) / self.N + hv

    def third_deriv_bilinear(self, x, h):
        """D^3 F(x)[h, h] as a vector (the regularizer drops out)."""
        x = self._check_x(x)
        h = self._check_x(h, "h")
        if self.N == 0:
            return np.zeros(self.d)
        t = self._margins(x)
        s = expit(t)
        w = s * expit(-t) * (1.0 - 2.0 * s)   # sigma''(t)
        xh = self.data.matrix @ h
        return self.data.matrix.T @ (self.data.labels * w * xh * xh) / self.N

    def smoothness_constants(self):
        """(L_F, mu_F, L_3) with L_3 = 15 * ||A^T A||_2^2, A the signed rows."""
        if self.N == 0:
            raise InputError("smoothness constants need a nonempty dataset")
        lam_max = max(self.lambda_sparse, self.lambda_dense)
        lam_min = min(self.lambda_sparse, self.lambda_dense)
        l_smooth = lam_max + float(np.mean(self.data.row_norms_sq()))
        gram_norm = _gram_spectral_norm(self.data.matrix)
        return SmoothnessConstants(l_smooth, lam_min, 15.0 * gram_norm ** 2)


def _gram_spectral_norm(X):
    """||X^T X||_2 by power iteration on v -> X^T (X v).

    Fixed-seed start vector, relative tolerance 1e-6, hard cap 1e4
    iterations; never forms the Gram matrix.
    """
    d = X.shape[1]
    if X.nnz == 0:
        return 0.0
    v = np.random.default_rng(0).standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(_POWER_CAP):
        w = X.T @ (X @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= _POWER_TOL * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def generate_synthetic(seed, N, d, density=1.0):
    """Reproducible sparse logistic dataset with a planted separator.

    Feature values are standard normal at ``round(density * d)`` coordinates
    sampled per row (at least one); labels are drawn from the logistic model
    of a hidden weight vector, so both classes appear with noise.  The same
    seed gives a bit-identical dataset.
    """
    if N <= 0 or d <= 0:
        raise InputError("N and d must be positive")
    if not (0.0 < density <= 1.0):
        raise InputError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    k = max(1, int(round(density * d)))
    w_star = rng.standard_normal(d) * (2.0 / np.sqrt(k))
    rows = []
    labels = np.empty(N)
    for i in range(N):
        idx = np.sort(rng.choice(d, size=k, replace=False))
        val = rng.standard_normal(k)
        val[val == 0.0] = 1e-12  # measure-zero guard, keeps values nonzero
        margin = float(val @ w_star[idx])
        labels[i] = 1.0 if rng.random() < expit(margin) else -1.0
        rows.append((idx, val))
    return SparseDataset.from_rows(rows, labels, d)


def read_libsvm(path, d=None):
    """Read `label idx:val ...` lines; 1-based indices, `#` lines ignored.

    Labels in {0, 1} are remapped to {-1, +1} (anything <= 0 becomes -1).
    A malformed line raises InputError naming the line number (1-based).
    """
    rows = []
    labels = []
    max_idx = -1
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: bad label {parts[0]!r}")
            idx = []
            val = []
            for tok in parts[1:]:
                try:
                    i_str, v_str = tok.split(":", 1)
                    i = int(i_str)
                    v = float(v_str)
                except ValueError:
                    raise InputError(f"{path}: line {lineno}: bad pair {tok!r}")
                if i < 1:
                    raise InputError(
                        f"{path}: line {lineno}: index {i} not 1-based")
                idx.append(i - 1)
                val.append(v)
            if idx:
                max_idx = max(max_idx, max(idx))
            labels.append(1.0 if label > 0 else -1.0)
            rows.append((np.asarray(idx, dtype=np.int64),
                         np.asarray(val, dtype=np.float64)))
    if d is None:
        d = max_idx + 1
    if d <= 0:
        raise InputError(f"{path}: no features found")
    return SparseDataset.from_rows(rows, np.asarray(labels), d)


def write_libsvm(dataset, path):
    """Inverse of read_libsvm (1-based indices, +1/-1 labels)."""
    X = dataset.matrix
    with open(path, "w") as fh:
        for i in range(dataset.N):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            pairs = " ".join(f"{j + 1}:{v:.17g}"
                             for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
            label = int(dataset.labels[i])
            fh.write(f"{label:+d} {pairs}\n".rstrip() + "\n")
