"""Adaptive accelerated Bregman proximal gradient method with inexact model.

The method minimizes f given a (delta, L, mu, m, phi)-model: a surrogate
pair (f_delta, psi_delta) sandwiching f between mu*D_phi and L*D_phi + delta,
plus a generalized projection solved to slack delta_tilde.  The step-size
denominator M is searched by halving/doubling each iteration and plays the
role of the product of L with the divergence's triangle-scaling constant,
so neither needs to be known.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InputError

# Relative slack added to the acceptance inequality so exact-equality
# instances (quadratics) are not rejected by rounding noise.
_CRIT_SLACK = 1e-12


@dataclass
class ProxSubproblem:
    """Description of Phi(x) = alpha*psi(x, y) + beta*D[u](x) + gamma*D[y](x)."""
    alpha: float
    y: np.ndarray
    beta: float
    u: np.ndarray
    gamma: float


class ModelOracle:
    """Callable bundle describing the model of f and its projection.

    f_delta(y)        -- surrogate value at y
    psi(x, y)         -- model linearization, psi(x, x) = 0
    bregman(u, x)     -- D_phi[u](x)
    project(sub, tol) -- approximate argmin of Phi per the subproblem
                         description, accurate to generalized-projection
                         slack tol
    mu, m             -- relative strong convexity of f and of psi
    """

    def __init__(self, f_delta, psi, bregman, project, mu=0.0, m=0.0):
        if mu < 0 or m < 0:
            raise InputError("mu and m must be nonnegative")
        self.f_delta = f_delta
        self.psi = psi
        self.bregman = bregman
        self.project = project
        self.mu = mu
        self.m = m


@dataclass
class InexactnessSchedule:
    """Per-iteration model slack delta_k and projection slack delta_tilde_k."""
    delta: object
    delta_tilde: object

    @classmethod
    def exact(cls):
        return cls(delta=lambda k: 0.0, delta_tilde=lambda k: 0.0)

    @classmethod
    def constant(cls, delta=0.0, delta_tilde=0.0):
        return cls(delta=lambda k: delta, delta_tilde=lambda k: delta_tilde)


@dataclass
class AgmRecord:
    k: int
    A: float
    M: float
    alpha: float
    f_value: float


@dataclass
class AgmState:
    k: int
    A: float
    M: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    m0: float
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, x0, M0, f_value=math.nan):
        x0 = np.asarray(x0, dtype=np.float64)
        if M0 <= 0:
            raise InputError("M0 must be positive")
        state = cls(k=0, A=0.0, M=float(M0), x=x0.copy(), y=x0.copy(),
                    u=x0.copy(), m0=float(M0))
        state.history.append(AgmRecord(0, 0.0, float(M0), 0.0, f_value))
        return state


def solve_alpha(A_k, mu, m, M_next):
    """Largest root of M*a^2 - (1 + A_k(mu+m'))*a - A_k*(1 + A_k(mu+m')) = 0.

    Equivalently A_{k+1}(1 + A_k mu + A_k m) = M alpha^2 with
    A_{k+1} = A_k + alpha.  The '+' branch of the quadratic formula is
    taken; b = 1 + A_k(mu+m) >= 1 so there is no cancellation, but the
    conjugate form is used defensively if b were ever negative.
    """
    if M_next <= 0:
        raise InputError("M must be positive")
    if A_k < 0 or mu < 0 or m < 0:
        raise InputError("A_k, mu, m must be nonnegative")
    b = 1.0 + A_k * (mu + m)
    disc = b * b + 4.0 * M_next * b * A_k
    if disc < 0:  # impossible for valid inputs
        raise DivergenceError("negative discriminant in alpha equation")
    sq = math.sqrt(disc)
    if b >= 0:
        alpha = (b + sq) / (2.0 * M_next)
    else:
        # largest root via the conjugate form, stable when b < 0
        alpha = -2.0 * b * A_k / (b - sq)
    if alpha <= 0:
        raise DivergenceError("alpha solver produced a nonpositive root")
    return alpha


def agm_step(state, oracle, schedule, max_doublings=None):
    """One accepted iteration: the smallest i_k >= 0 with M_{k+1}=2^{i_k-1}M_k
    satisfying the descent criterion, starting from half the previous M."""
    k = state.k
    dk = float(schedule.delta(k))
    dtk = float(schedule.delta_tilde(k))
    mu, m = oracle.mu, oracle.m
    cap = state.m0 * 2.0 ** 60
    M_next = state.M / 2.0
    while True:
        if M_next > cap:
            raise DivergenceError(
                f"M search exceeded cap {cap:g} at iteration {k}; "
                "the model constants are inconsistent with the oracle")
        alpha = solve_alpha(state.A, mu, m, M_next)
        A_next = state.A + alpha
        y_next = (alpha * state.u + state.A * state.x) / A_next
        sub = ProxSubproblem(alpha=alpha, y=y_next,
                             beta=1.0 + state.A * (mu + m),
                             u=state.u, gamma=alpha * mu)
        u_next = oracle.project(sub, dtk)
        x_next = (alpha * u_next + state.A * state.x) / A_next
        f_y = oracle.f_delta(y_next)
        psi_val = oracle.psi(x_next, y_next)
        div_term = (M_next * alpha ** 2 / A_next ** 2) * oracle.bregman(state.u, u_next)
        lhs = oracle.f_delta(x_next)
        rhs = f_y + psi_val + div_term + dk
        # rounding slack scaled by the terms themselves, so accepted
        # violations stay negligible even after multiplication by A_k
        slack = _CRIT_SLACK * (abs(f_y) + abs(psi_val) + abs(div_term) + dk)
        if lhs <= rhs + slack:
            break
        M_next *= 2.0
    new = AgmState(k=k + 1, A=A_next, M=M_next, x=x_next, y=y_next,
                   u=u_next, m0=state.m0, history=state.history)
    new.history.append(AgmRecord(k + 1, A_next, M_next, alpha, lhs))
    return new


def run_agm(x0, oracle, schedule, K, M0=1.0):
    """K accepted iterations from x0; returns (final state, trajectory).

    The trajectory holds every state including the initial one, so bounds
    like the aggregate estimate of the convergence theorem can be checked
    at each index afterwards.
    """
    if K < 1:
        raise InputError("K must be at least 1")
    x0 = np.asarray(x0, dtype=np.float64)
    state = AgmState.initial(x0, M0, f_value=oracle.f_delta(x0))
    trajectory = [state]
    for _ in range(K):
        state = agm_step(state, oracle, schedule)
        trajectory.append(state)
    return state, trajectory


def a_lower_bound(M_seq, mu, m, N):
    """Guaranteed growth of A_N from the accepted M sequence.

    max{ N^2/(4 Mtilde_N), (1/M_1) exp(N sqrt((mu+m)/(4 Mtilde_N))) }
    with Mtilde_N^{-1/2} the average of the M_{k+1}^{-1/2}.
    """
    if N < 1:
        raise InputError("N must be at least 1")
    M_seq = list(M_seq)
    if len(M_seq) < N:
        raise InputError(f"need {N} M values, got {len(M_seq)}")
    if not M_seq or min(M_seq[:N]) <= 0:
        raise InputError("all M values must be positive")
    inv_sqrt_mean = sum(1.0 / math.sqrt(Mv) for Mv in M_seq[:N]) / N
    mtilde = inv_sqrt_mean ** -2
    poly = N * N / (4.0 * mtilde)
    geo = (1.0 / M_seq[0]) * math.exp(N * math.sqrt((mu + m) / (4.0 * mtilde)))
    return max(poly, geo)


def a_lower_bound_product(M_seq, mu, m, N):
    """Sharp product form of the growth bound (what runs actually satisfy).

    max{ (1/4)(sum_{k<N} M_{k+1}^{-1/2})^2,
         (1/M_1) prod_{k=1}^{N-1} (1 + sqrt((mu+m)/(4 M_{k+1})))^2 }

    The closed form in a_lower_bound replaces the (N-1)-factor product by
    an N-exponent exponential, which overshoots the product at small N, so
    invariant checks against realized runs use this form.
    """
    if N < 1:
        raise InputError("N must be at least 1")
    M_seq = list(M_seq)
    if len(M_seq) < N:
        raise InputError(f"need {N} M values, got {len(M_seq)}")
    if min(M_seq[:N]) <= 0:
        raise InputError("all M values must be positive")
    poly = 0.25 * sum(1.0 / math.sqrt(Mv) for Mv in M_seq[:N]) ** 2
    prod = 1.0 / M_seq[0]
    for Mv in M_seq[1:N]:
        prod *= (1.0 + math.sqrt((mu + m) / (4.0 * Mv))) ** 2
    return max(poly, prod)


def rate_bound(trajectory, schedule, d0):
    """Right-hand side of the aggregate rate bound at every N >= 1.

    Returns the list [(d0 + 2 sum A_{k+1} delta_k + sum delta_tilde_k)/A_N]
    for N = 1 .. len(trajectory)-1.  d0 is D_phi[u_0](x*), which the caller
    supplies (tests use problems with known minimizers).
    """
    bounds = []
    acc_delta = 0.0
    acc_dt = 0.0
    for N in range(1, len(trajectory)):
        A_next = trajectory[N].A
        acc_delta += A_next * float(schedule.delta(N - 1))
        acc_dt += float(schedule.delta_tilde(N - 1))
        bounds.append((d0 + 2.0 * acc_delta + acc_dt) / A_next)
    return bounds


def per_iter_certificate(prev, new, oracle, f, x_star, delta_k, delta_tilde_k):
    """(lhs, rhs) of the per-iteration descent certificate at x = x_star.

    lhs = A_{k+1} f(x_{k+1}) - A_k f(x_k)
          + (1 + A_{k+1}(mu+m)) D[u_{k+1}](x*) - (1 + A_k(mu+m)) D[u_k](x*)
    rhs = alpha_{k+1} f(x*) + 2 delta_k A_{k+1} + delta_tilde_k
    """
    mu_m = oracle.mu + oracle.m
    alpha = new.A - prev.A
    lhs = (new.A * f(new.x) - prev.A * f(prev.x)
           + (1.0 + new.A * mu_m) * oracle.bregman(new.u, x_star)
           - (1.0 + prev.A * mu_m) * oracle.bregman(prev.u, x_star))
    rhs = alpha * f(x_star) + 2.0 * delta_k * new.A + delta_tilde_k
    return lhs, rhs


def euclidean_model_oracle(problem, radius=None):
    """Classical accelerated-gradient model: phi = ||x||^2/2.

    The proximal subproblem is an isotropic quadratic, so its exact
    minimizer (radially clipped to the ball when a radius is given) is
    closed form and the projection slack is zero.
    """
    consts = problem.smoothness_constants()

    def project(sub, tol):
        x = (sub.beta * sub.u + sub.gamma * sub.y
             - sub.alpha * problem.gradient(sub.y)) / (sub.beta + sub.gamma)
        if radius is not None:
            nx = float(np.linalg.norm(x))
            if nx > radius:
                x = x * (radius / nx)
        return x

    return ModelOracle(
        f_delta=problem.value,
        psi=lambda x, y: float(problem.gradient(y) @ (x - y)),
        bregman=lambda u, x: 0.5 * float((x - u) @ (x - u)),
        project=project,
        mu=consts.mu_strong, m=0.0)


def ball_certificate(grad, point, radius):
    """min over the ball B(0, radius) of <grad, x - point>, in closed form.

    The generalized-projection condition at slack tol holds iff the
    returned value is >= -tol; this is the verifiable side of the
    projection contract for ball-constrained subproblems.
    """
    grad = np.asarray(grad, dtype=np.float64)
    point = np.asarray(point, dtype=np.float64)
    return -radius * float(np.linalg.norm(grad)) - float(grad @ point)
