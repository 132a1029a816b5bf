import numpy as np
import pytest

from inspag.agm import ModelOracle
from inspag.problem import LogRegProblem, SparseDataset, generate_synthetic


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def newton_reference(problem, tol=1e-14, iters=100):
    """Dense Newton solve; independent of every iterative path under test."""
    x = np.zeros(problem.d)
    eye = np.eye(problem.d)
    for _ in range(iters):
        g = problem.gradient(x)
        if float(np.linalg.norm(g)) <= tol:
            break
        H = np.column_stack([problem.hessian_vec(x, e) for e in eye])
        x = x - np.linalg.solve(H, g)
    assert float(np.linalg.norm(problem.gradient(x))) <= tol
    return x


def rel_err(a, b, floor=1e-30):
    return float(np.linalg.norm(a - b)) / max(floor, float(np.linalg.norm(b)))


def single_sample_problem(lam1=0.0, lam2=0.0):
    """One sample with xi = [1], label +1."""
    ds = SparseDataset.from_rows([(np.array([0]), np.array([1.0]))],
                                 np.array([1.0]), d=1)
    return LogRegProblem(ds, lam1, lam2)


def empty_problem(d, lam1=0.0, lam2=0.0):
    """No samples: the objective degenerates to the ridge."""
    ds = SparseDataset.from_rows([], np.array([]), d=d)
    return LogRegProblem(ds, lam1, lam2)


def quadratic(seed=7, d=20, shift=0.5):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d, d))
    Q = B @ B.T / d + shift * np.eye(d)
    a = rng.standard_normal(d)
    return Q, a


def self_model(Q, a):
    """Model of f(x) = (x-a)' Q (x-a) / 2 with phi = f itself.

    Relative constants are exactly 1; the proximal subproblem is solved in
    closed form, so the projection slack is zero.
    """
    def grad(x):
        return Q @ (x - a)

    def project(sub, tol):
        rhs = Q @ (sub.beta * sub.u + sub.gamma * sub.y) - sub.alpha * grad(sub.y)
        return np.linalg.solve((sub.beta + sub.gamma) * Q, rhs)

    return ModelOracle(
        f_delta=lambda x: 0.5 * float((x - a) @ Q @ (x - a)),
        psi=lambda x, y: float(grad(y) @ (x - y)),
        bregman=lambda u, x: 0.5 * float((x - u) @ Q @ (x - u)),
        project=project, mu=1.0, m=0.0)


def euclidean_quadratic_model(Q, a, mu=None, noise=None, radius=None):
    """Model of the same f with phi = ||x||^2/2 (exact radial projection).

    noise, if given, is a fixed vector added to every model gradient; with
    ||noise|| <= delta/(4 R) and f_delta = f - delta/2 this is a valid
    delta-model on the ball of radius R.
    """
    w = np.linalg.eigvalsh(Q)
    mu = w[0] if mu is None else mu
    shift = 0.0 if noise is None else noise

    def f(x):
        return 0.5 * float((x - a) @ Q @ (x - a))

    def grad(x):
        return Q @ (x - a) + shift

    def project(sub, tol):
        x = (sub.beta * sub.u + sub.gamma * sub.y
             - sub.alpha * grad(sub.y)) / (sub.beta + sub.gamma)
        if radius is not None:
            nx = float(np.linalg.norm(x))
            if nx > radius:
                x *= radius / nx
        return x

    offset = 0.0 if noise is None else -2.0 * radius * float(np.linalg.norm(noise))
    oracle = ModelOracle(
        f_delta=lambda x: f(x) + offset,
        psi=lambda x, y: float(grad(y) @ (x - y)),
        bregman=lambda u, x: 0.5 * float((x - u) @ (x - u)),
        project=project, mu=mu, m=0.0)
    return oracle, f


@pytest.fixture(scope="session")
def small_logreg():
    """10-sample, d=3 instance used by the high-order solver tests."""
    ds = generate_synthetic(3, 10, 3, 1.0)
    return LogRegProblem(ds, 0.05, 0.05)


@pytest.fixture(scope="session")
def random_problems():
    """Three dense-ish random instances for derivative cross-checks."""
    out = []
    for seed, (N, d) in zip((11, 12, 13), ((20, 5), (40, 8), (30, 6))):
        ds = generate_synthetic(seed, N, d, 0.9)
        out.append(LogRegProblem(ds, 0.01, 0.002,
                                 sparse_idx=np.arange(d // 2),
                                 dense_idx=np.arange(d // 2, d)))
    return out
