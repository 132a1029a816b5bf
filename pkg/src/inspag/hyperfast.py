"""Third-order tensor steps and the accelerated second-order scheme built on them.

One tensor step minimizes the regularized third-order Taylor model

    Omega(y) = <g, y-x> + 1/2 H[y-x]^2 + 1/6 T[y-x]^3 + (l3/8) ||y-x||^4

by Bregman proximal gradient steps relative to
a(y) = 1/2 H[y-x]^2 + (l3/8)||y-x||^4, whose relative condition number is
the absolute constant (1 + 1/sqrt(2)) / (1 - 1/sqrt(2)).  Each such step
reduces to a quartic-regularized quadratic subproblem solved through
Hessian-vector products only.

The accelerated scheme wraps tensor steps in a proximal-extragradient
outer loop with a step-size line search, and two restart drivers convert
the resulting O(l3 R^4 / k^5) decay into linear convergence for strongly
(or uniformly) convex objectives.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, cg

from .errors import (DivergenceError, InputError, NonconvergenceError,
                     ToleranceNotMet)

MU_REL = 1.0 - 1.0 / math.sqrt(2.0)   # model vs a(y): relative strong convexity
L_REL = 1.0 + 1.0 / math.sqrt(2.0)    # and relative smoothness


@dataclass
class SmoothOracle:
    """Derivative oracles of a thrice-differentiable convex function.

    hvp(x, v) must be linear and symmetric in v; d3_bilinear(x, h) returns
    the vector D^3 f(x)[h, h] and is quadratic in h; l3 bounds the
    third-derivative Lipschitz constant.
    """
    value: object
    grad: object
    hvp: object
    d3_bilinear: object
    l3: float


@dataclass
class InnerConfig:
    """Tolerances for one tensor step and its quartic subproblems."""
    tol: float = 1e-9            # model-gradient target, relative to max(1, ||g||)
    max_iters: int = 200
    quartic_tol: float = 1e-12
    quartic_max_iter: int = 200_000
    dense_cutoff: int = 400      # materialize the Hessian at or below this dim


@dataclass
class BasicConfig:
    """Knobs of the accelerated scheme."""
    l3: float = None             # starting step regularizer; None -> oracle.l3
    inner: InnerConfig = field(default_factory=InnerConfig)
    ms_low: float = 0.5          # prox step-size window (lam * M/2 * ||r||^2)
    ms_high: float = 0.75
    ms_cap: int = 60             # step-size trials per iteration
    ls_cap: int = 20             # l3 doublings per tensor step
    sigma_max: float = 0.9       # prox-validity bound on ||s + lam grad|| / ||s||
    step_floor: float = 1e-14    # relative step length treated as converged


@dataclass
class BasicStats:
    accepted: int = 0
    tensor_solves: int = 0
    grad_evals: int = 0


def _secular_root(w, b, L, hint=None):
    """Root of sum b_i^2/(w_i + L r)^2 = r for eigenvalues w >= 0, L > 0.

    The left side is strictly decreasing in r, so the root is unique; the
    bracket [lo, hi] always exists with hi = (||b||^2/L^2)^(1/3).
    """
    bb = b * b

    def g(r):
        return float(np.sum(bb / (w + L * r) ** 2) - r)

    hi = (float(bb.sum()) / L ** 2) ** (1.0 / 3.0)
    if hi == 0.0:
        return 0.0
    if g(hi) >= 0.0:
        return hi
    lo = hi
    for _ in range(2000):
        lo *= 0.5
        val = g(lo)
        if val > 0.0:
            break
        if not math.isfinite(val) or lo < 1e-280:
            # denominator vanished: root is numerically zero
            return lo
        hi = lo
    else:
        return 0.0
    if hint is not None and lo < hint < hi:
        # shrink the bracket around the caller's guess when consistent
        if g(hint) > 0.0:
            lo = hint
        else:
            hi = hint
    r = brentq(g, lo, hi, rtol=8.9e-16, maxiter=200)
    # Newton polish: brentq bounds the root location, not the residual,
    # and the residual scales with g'(r) which can be large
    for _ in range(3):
        val = g(r)
        slope = -2.0 * L * float(np.sum(bb / (w + L * r) ** 3)) - 1.0
        step = val / slope
        if not math.isfinite(step) or r - step <= 0.0:
            break
        r -= step
        if abs(val) <= 1e-15 * max(r, 1.0):
            break
    return r


class _DenseQuartic:
    """Eigen-factored solver for min <c,s> + 1/2 <Hs,s> + (L/4)||s||^4."""

    def __init__(self, H):
        self.H = H
        self.w, self.Q = np.linalg.eigh(H)
        self.w = np.maximum(self.w, 0.0)  # clip PSD rounding noise

    def solve(self, c, L_reg):
        b = -(self.Q.T @ c)
        if L_reg == 0.0:
            wmax = max(float(self.w[-1]), 1.0)
            safe = np.where(self.w > 1e-14 * wmax, self.w, np.inf)
            return self.Q @ (b / safe)
        rho = _secular_root(self.w, b, L_reg)
        return self.Q @ (b / (self.w + L_reg * rho))


def _quartic_residual(c, hs, s, L_reg):
    return float(np.linalg.norm(c + hs + L_reg * float(s @ s) * s))


def quartic_subproblem(c_vec, hvp_at_x, L_reg, tol=1e-12, max_iter=200_000,
                       dense_cutoff=400):
    """Approximate minimizer of <c,s> + 1/2 <Hs,s> + (L/4)||s||^4.

    H is accessed only through hvp_at_x and must be positive semidefinite.
    Returns s with ||c + Hs + L||s||^2 s|| <= tol * max(1, ||c||).  Small
    dimensions are solved via the first-order optimality condition
    (H + L||s||^2 I) s = -c reduced to a scalar secular equation on an
    eigenbasis; larger ones use the same reduction with conjugate-gradient
    solves of the shifted systems.
    """
    c = np.asarray(c_vec, dtype=np.float64)
    if L_reg < 0:
        raise InputError("L_reg must be nonnegative")
    d = c.size
    target = tol * max(1.0, float(np.linalg.norm(c)))
    if not np.any(c):
        return np.zeros(d)
    if d <= dense_cutoff:
        H = _materialize(hvp_at_x, d)
        solver = _DenseQuartic(H)
        s = solver.solve(c, L_reg)
        res = _quartic_residual(c, H @ s, s, L_reg)
        if res > target:
            raise ToleranceNotMet(
                f"quartic subproblem residual {res:.3e} > {target:.3e}", res)
        return s
    return _quartic_krylov(c, hvp_at_x, L_reg, target, max_iter)


def _materialize(hvp, d):
    H = np.empty((d, d))
    e = np.zeros(d)
    for j in range(d):
        e[j] = 1.0
        H[:, j] = hvp(e)
        e[j] = 0.0
    return 0.5 * (H + H.T)


def _quartic_krylov(c, hvp, L_reg, target, max_iter):
    d = c.size
    used = 0

    def solve_shifted(rho, x0):
        nonlocal used

        def matvec(v):
            nonlocal used
            used += 1
            if used > max_iter:
                raise _BudgetExceeded()
            return hvp(v) + L_reg * rho * v

        op = LinearOperator((d, d), matvec=matvec, dtype=np.float64)
        s, info = cg(op, -c, x0=x0, rtol=1e-14, atol=1e-300,
                     maxiter=10 * d + 100)
        return s

    class _BudgetExceeded(Exception):
        pass

    warm = {"s": None}

    def norm_sq(rho):
        s = solve_shifted(rho, warm["s"])
        warm["s"] = s
        return float(s @ s), s

    try:
        if L_reg == 0.0:
            s = solve_shifted(0.0, None)
        else:
            hi = (float(c @ c) / L_reg ** 2) ** (1.0 / 3.0)
            if norm_sq(hi)[0] >= hi:
                rho = hi
            else:
                lo = hi
                while lo > 1e-280:
                    lo *= 0.5
                    if norm_sq(lo)[0] > lo:
                        break
                rho = brentq(lambda r: norm_sq(r)[0] - r, lo, hi,
                             rtol=8.9e-16, maxiter=200)
            s = norm_sq(rho)[1]
    except _BudgetExceeded:
        s = warm["s"] if warm["s"] is not None else np.zeros(d)
        res = _quartic_residual(c, hvp(s), s, L_reg)
        raise ToleranceNotMet(
            f"quartic subproblem hit the {max_iter}-product budget at "
            f"residual {res:.3e}", res)
    res = _quartic_residual(c, hvp(s), s, L_reg)
    if res > target:
        raise ToleranceNotMet(
            f"quartic subproblem residual {res:.3e} > {target:.3e}", res)
    return s


class _ModelWorkspace:
    """Per-anchor state shared by every solve at the same expansion point."""

    def __init__(self, oracle, x, inner):
        self.oracle = oracle
        self.x = np.asarray(x, dtype=np.float64)
        self.inner = inner
        self.g0 = oracle.grad(self.x)
        self.g0_norm = float(np.linalg.norm(self.g0))
        d = self.x.size
        self.dense = d <= inner.dense_cutoff
        if self.dense:
            self.solver = _DenseQuartic(
                _materialize(lambda v: oracle.hvp(self.x, v), d))

    def hs(self, s):
        if self.dense:
            return self.solver.H @ s
        return self.oracle.hvp(self.x, s)

    def model_grad_parts(self, s, l3):
        """(model gradient, gradient of the reference function a) at x+s."""
        hs = self.hs(s)
        quart = 0.5 * l3 * float(s @ s) * s
        if np.any(s):
            d3s = self.oracle.d3_bilinear(self.x, s)
        else:
            d3s = np.zeros_like(s)
        grad_model = self.g0 + hs + 0.5 * d3s + quart
        grad_a = hs + quart
        return grad_model, grad_a

    def model_value(self, s, l3):
        hs = self.hs(s)
        ss = float(s @ s)
        cubic = float(self.oracle.d3_bilinear(self.x, s) @ s) if np.any(s) else 0.0
        return (float(self.g0 @ s) + 0.5 * float(hs @ s) + cubic / 6.0
                + 0.125 * l3 * ss * ss)

    def prox_step(self, grad_model, grad_a, l3):
        c = (grad_model - L_REL * grad_a) / L_REL
        if self.dense:
            return self.solver.solve(c, 0.5 * l3)
        return _quartic_krylov(c, lambda v: self.oracle.hvp(self.x, v),
                               0.5 * l3,
                               self.inner.quartic_tol * max(1.0, float(np.linalg.norm(c))),
                               self.inner.quartic_max_iter)

    def minimize_model(self, l3):
        """Bregman proximal gradient on the model; returns (s, grad_norm, iters)."""
        inner = self.inner
        tol = inner.tol * max(1.0, self.g0_norm)
        s = np.zeros_like(self.x)
        gnorm_prev = math.inf
        stall = 0
        for it in range(inner.max_iters):
            grad_model, grad_a = self.model_grad_parts(s, l3)
            gnorm = float(np.linalg.norm(grad_model))
            if gnorm <= tol:
                return s, gnorm, it
            if gnorm >= 0.9999 * gnorm_prev:
                stall += 1
                if stall >= 5:   # fp floor reached; gradient no longer shrinks
                    return s, gnorm, it
            else:
                stall = 0
            gnorm_prev = gnorm
            s = self.prox_step(grad_model, grad_a, l3)
        grad_model, _ = self.model_grad_parts(s, l3)
        return s, float(np.linalg.norm(grad_model)), inner.max_iters


def tensor_step(oracle, x, l3_step, inner_cfg=None):
    """Approximate minimizer of the regularized third-order model at x."""
    if l3_step <= 0:
        raise InputError("l3_step must be positive")
    inner = inner_cfg or InnerConfig()
    ws = _ModelWorkspace(oracle, x, inner)
    if ws.g0_norm == 0.0:
        return ws.x.copy()
    s, _, _ = ws.minimize_model(l3_step)
    return ws.x + s


def _adaptive_tensor_step(ws, l3_start, cfg, stats):
    """Tensor step with the l3 upper-bound line search.

    Doubles l3 until the true function value at the step target is bounded
    by the model value there (the defining property of a valid step
    regularizer), up to ls_cap trials.
    """
    l3 = l3_start
    f_x = None
    for _ in range(cfg.ls_cap):
        s, gnorm, _ = ws.minimize_model(l3)
        stats.tensor_solves += 1
        if not np.any(s):
            return s, l3
        omega = ws.model_value(s, l3)
        f_new = ws.oracle.value(ws.x + s)
        if f_x is None:
            f_x = ws.oracle.value(ws.x)
        slack = 1e-10 * (1.0 + abs(f_x))
        if f_new - f_x <= omega + slack:
            return s, l3
        l3 *= 2.0
    raise DivergenceError(
        f"l3 line search rejected {cfg.ls_cap} doublings from {l3_start:g}")


def _basic_hyperfast_ex(oracle, z0, N, cfg):
    """Accelerated proximal-extragradient loop over adaptive tensor steps.

    Each iteration searches the prox parameter lam so that the induced
    step lands in the window ms_low <= lam*(l3/2)*||s||^2 <= ms_high and
    satisfies the inexact-prox inequality ||s + lam grad f(y+)|| <=
    sigma_max ||s||; the second test also polices l3 underestimates (it
    fails when the regularized model stops being a trustworthy upper
    bound, in which case l3 is doubled and the search restarts).
    """
    z0 = np.asarray(z0, dtype=np.float64)
    if N < 1:
        raise InputError("N must be at least 1")
    stats = BasicStats()
    y = z0.copy()
    z = z0.copy()
    A = 0.0
    l3 = cfg.l3 if cfg.l3 is not None else oracle.l3
    if l3 <= 0:
        raise InputError("need a positive l3 estimate")
    lam = None
    scale = 1.0 + float(np.linalg.norm(z0))
    mid = 0.5 * (cfg.ms_low + cfg.ms_high)
    for _ in range(N):
        l3 = max(l3 / 2.0, 1e-300)  # halve once per iteration, double on demand
        accepted = None
        lam_lo = lam_hi = None
        best = None
        for _ in range(cfg.ms_cap):
            if lam is None:
                # calibrate from a probe step at the current dual point
                ws = _ModelWorkspace(oracle, z, cfg.inner)
                stats.grad_evals += 1
                s, l3 = _adaptive_tensor_step(ws, l3, cfg, stats)
                r2 = float(s @ s)
                if math.sqrt(r2) <= cfg.step_floor * scale:
                    return y if A > 0 else z, stats
                lam = 2.0 * mid / (l3 * r2)
            a = 0.5 * (lam + math.sqrt(lam * lam + 4.0 * lam * A))
            x_tilde = (A * y + a * z) / (A + a)
            ws = _ModelWorkspace(oracle, x_tilde, cfg.inner)
            stats.grad_evals += 1
            s, l3_new = _adaptive_tensor_step(ws, l3, cfg, stats)
            if l3_new > l3:
                # the value check forced a looser model: rescale and research
                lam *= l3 / l3_new
                l3 = l3_new
                lam_lo = lam_hi = None
                continue
            r2 = float(s @ s)
            if math.sqrt(r2) <= cfg.step_floor * scale:
                return x_tilde, stats
            m_val = 0.5 * lam * l3 * r2
            mdist = abs(math.log(max(m_val, 1e-300) / mid))
            if best is None or mdist < best[0]:
                best = (mdist, a, x_tilde + s)
            if m_val < cfg.ms_low:
                lam_lo = lam
                lam = math.sqrt(lam * lam_hi) if lam_hi is not None else 2.0 * lam
                continue
            if m_val > cfg.ms_high:
                lam_hi = lam
                lam = math.sqrt(lam * lam_lo) if lam_lo is not None else 0.5 * lam
                continue
            y_new = x_tilde + s
            g_new = oracle.grad(y_new)
            stats.grad_evals += 1
            hpe = float(np.linalg.norm(s + lam * g_new)) / math.sqrt(r2)
            if hpe <= cfg.sigma_max:
                accepted = (a, y_new, g_new)
                break
            # in-window but invalid prox step: the model lied, tighten it
            l3 *= 2.0
            lam *= 0.5
            lam_lo = lam_hi = None
        if accepted is None:
            if best is None:
                raise DivergenceError(
                    "step-size search exhausted its trials while the model "
                    "regularizer kept growing; the derivative oracles are "
                    "inconsistent")
            # window missed: fall back to the trial closest to it
            _, a, y_new = best
            g_new = oracle.grad(y_new)
            stats.grad_evals += 1
            accepted = (a, y_new, g_new)
        a, y, g_new = accepted
        A += a
        z = z - a * g_new
        stats.accepted += 1
    return y, stats


def basic_hyperfast(oracle, z0, N, cfg=None):
    """N accelerated steps from z0; decays like cfg-rate l3 R0^4 / N^5."""
    y, _ = _basic_hyperfast_ex(oracle, z0, N, cfg or BasicConfig())
    return y


@dataclass
class RestartScheduleStrong:
    """Restart schedule under strong convexity; R0 bounds ||z0 - x*||."""
    R0: float
    mu: float
    c: float = 48.0
    t_max: int = 200


@dataclass
class RestartScheduleUniform:
    """Restart schedule under uniform convexity of degree q in [2, 4]."""
    q: float
    sigma_q: float
    Delta0: float
    c_hat: float = 48.0
    k_max: int = 200


def restart_strongly_convex(oracle, z0, sched, target, cfg=None, stats=None,
                            trace=None):
    """Halve the distance bound per restart until the certified gap <= target.

    The certificate after t restarts is 2 mu R^2 2^(-2t) with R = R0/2, so
    the restart count is fixed by the schedule alone; the basic method runs
    N_t = max(ceil((8 c l3 R_t^2 / mu)^(1/5)), 1) steps per leg.  Returns
    (point, total accepted basic steps).  trace, if given, collects one
    (t, R_t, N_t, z_{t+1}) tuple per executed leg.
    """
    if sched.R0 <= 0 or sched.mu <= 0:
        raise InputError("R0 and mu must be positive")
    cfg = cfg or BasicConfig()
    z = np.asarray(z0, dtype=np.float64).copy()
    R = 0.5 * sched.R0
    total = 0
    t = 0
    while 2.0 * sched.mu * R * R * 4.0 ** (-t) > target:
        if t >= sched.t_max:
            raise NonconvergenceError(
                f"restart budget {sched.t_max} exhausted",
                2.0 * sched.mu * R * R * 4.0 ** (-t))
        R_t = sched.R0 * 2.0 ** (-t)
        N_t = max(math.ceil((8.0 * sched.c * oracle.l3 * R_t * R_t
                             / sched.mu) ** 0.2), 1)
        z, leg = _basic_hyperfast_ex(oracle, z, N_t, cfg)
        total += leg.accepted
        if stats is not None:
            stats.tensor_solves += leg.tensor_solves
            stats.grad_evals += leg.grad_evals
        if trace is not None:
            trace.append((t, R_t, N_t, z.copy()))
        t += 1
    if stats is not None:
        stats.accepted += total
    return z, total


def restart_uniformly_convex(oracle, sched, z0, eps, cfg=None, trace=None):
    """Halve the gap bound Delta_k per restart until it reaches eps.

    trace, if given, collects one (k, Delta_{k+1}, N_k, z_{k+1}) per leg.
    """
    if not (2.0 <= sched.q <= 4.0):
        raise InputError("q must lie in [2, 4]")
    if sched.sigma_q <= 0 or sched.Delta0 <= 0:
        raise InputError("sigma_q and Delta0 must be positive")
    if eps <= 0:
        raise InputError("eps must be positive")
    cfg = cfg or BasicConfig()
    z = np.asarray(z0, dtype=np.float64).copy()
    delta = sched.Delta0
    k = 0
    q = sched.q
    while delta > eps:
        if k >= sched.k_max:
            raise NonconvergenceError(
                f"restart budget {sched.k_max} exhausted", delta)
        N_k = max(math.ceil((2.0 * sched.c_hat * oracle.l3 * q ** (4.0 / q)
                             * sched.sigma_q ** (-4.0 / q)
                             * delta ** ((4.0 - q) / q)) ** 0.2), 1)
        z, _ = _basic_hyperfast_ex(oracle, z, N_k, cfg)
        delta *= 0.5
        if trace is not None:
            trace.append((k, delta, N_k, z.copy()))
        k += 1
    return z


def delta_tolerance(k, mu_phi, R_phi_sq, L_phi, R, theta, A_next, mu_rel):
    """Subproblem gap making the k-th hand-off a valid generalized projection.

    Delta_k = mu_phi (R_phi^2)^2
              / (2 k^2 (2 L_phi R + 3 theta)^2 (1 + A_next mu_rel)).
    """
    if k < 1:
        raise InputError("k must be at least 1 (caller substitutes max(k, 1))")
    if min(mu_phi, R_phi_sq, L_phi, R, theta) <= 0:
        raise InputError("mu_phi, R_phi_sq, L_phi, R, theta must be positive")
    if A_next < 0 or mu_rel < 0:
        raise InputError("A_next and mu_rel must be nonnegative")
    return (mu_phi * R_phi_sq ** 2
            / (2.0 * k * k * (2.0 * L_phi * R + 3.0 * theta) ** 2
               * (1.0 + A_next * mu_rel)))
