"""Distributed driver: statistically preconditioned accelerated rounds.

Each outer round broadcasts the extrapolated point, aggregates the global
gradient, builds the preconditioned proximal subproblem

    Psi(x) = <alpha grad F(y) - (1 + A mu_rel) grad phi(u)
              - alpha mu_rel grad phi(y), x> + (1 + A' mu_rel) phi(x),

solves it on the central node with the restarted high-order method to the
tolerance that keeps the hand-off a valid generalized projection, and
accepts or rejects the step by the relative-smoothness descent criterion,
doubling M on rejection.  Function-value aggregations needed by that
criterion are charged to the communication ledger like any other round.
"""

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import hyperfast
from .agm import AgmState, ball_certificate, solve_alpha
from .bregman import Preconditioner, relative_constants
from .distsim import CommLedger, broadcast_reduce, partition
from .errors import DivergenceError, InputError
from .hyperfast import (BasicConfig, InnerConfig, RestartScheduleStrong,
                        SmoothOracle, delta_tolerance,
                        restart_strongly_convex)
from .problem import LogRegProblem

CSV_COLUMNS = ("round", "trial", "k", "A_k", "M_k", "alpha_k", "f_value",
               "grad_norm", "inner_iters", "delta_k_tol", "bytes", "wall_ms")


class CertificateUnattainable(DivergenceError):
    """The projection certificate needs accuracy below the fp floor.

    Raised mid-round; the driver stops the run cleanly since every
    previously emitted round was verified.
    """


@dataclass
class InspagConfig:
    lambda1: float = 1e-3
    lambda2: float = 1e-3
    sigma: float = 1e-3
    n_precond: int = 100
    R: float = None              # None -> 10x warm-start norm
    R_phi_sq: float = None       # None -> 2 L_phi R^2
    mu_rel: float = None         # None -> mu_F / (mu_F + 2 sigma)
    M0: float = 1.0
    K_max: int = 100
    target_gap: float = 0.0
    theta_mode: object = "online"  # "online" or a user-supplied float
    c_rate: float = 48.0
    l3: float = None             # None -> 15 ||A^T A||^2 of the local shard
    x0_mode: str = "warm"        # "warm" or "zeros"
    seed: int = 0
    inner: InnerConfig = field(default_factory=InnerConfig)
    t_max: int = 200

    def validate(self):
        problems = []
        if min(self.lambda1, self.lambda2) <= 0:
            problems.append("need min(lambda1, lambda2) > 0 for strong convexity")
        if self.sigma < 0:
            problems.append("sigma must be nonnegative")
        if self.n_precond < 1:
            problems.append("n_precond must be at least 1")
        if self.R is not None and self.R <= 0:
            problems.append("R must be positive")
        if self.mu_rel is not None and not (0 < self.mu_rel <= 1):
            problems.append("mu_rel must lie in (0, 1]")
        if self.M0 <= 0:
            problems.append("M0 must be positive")
        if self.K_max < 0:
            problems.append("K_max must be nonnegative")
        if self.x0_mode not in ("warm", "zeros"):
            problems.append(f"unknown x0_mode {self.x0_mode!r}")
        if not (self.theta_mode == "online"
                or isinstance(self.theta_mode, (int, float))):
            problems.append("theta_mode must be 'online' or a number")
        if problems:
            raise InputError("; ".join(problems))


@dataclass
class PsiProblem:
    """The central-node subobjective: <linear_term, x> + phi_scale * phi(x)."""
    linear_term: np.ndarray
    phi_scale: float
    precond: Preconditioner

    def value(self, x):
        return float(self.linear_term @ x) + self.phi_scale * self.precond.value(x)

    def grad(self, x):
        return self.linear_term + self.phi_scale * self.precond.gradient(x)

    def hvp(self, x, v):
        return self.phi_scale * self.precond.hessian_vec(x, v)

    def d3_bilinear(self, x, h):
        return self.phi_scale * self.precond.third_deriv_bilinear(x, h)

    @property
    def mu(self):
        return self.phi_scale * self.precond.mu_phi

    @property
    def l_smooth(self):
        return self.phi_scale * self.precond.l_phi

    def oracle(self, l3_phi=None):
        l3 = self.phi_scale * (self.precond.l3_phi if l3_phi is None else l3_phi)
        return SmoothOracle(value=self.value, grad=self.grad, hvp=self.hvp,
                            d3_bilinear=self.d3_bilinear, l3=l3)

    def scaled_oracle(self, l3_phi=None):
        """Oracles of Psi / phi_scale.

        Same minimizer and relative geometry, but values, strong convexity
        and the third-derivative constant stay O(phi) no matter how large
        the driver's A grows, which keeps the subsolver in the
        numerically meaningful range.
        """
        lin = self.linear_term / self.phi_scale
        p = self.precond
        return SmoothOracle(
            value=lambda x: float(lin @ x) + p.value(x),
            grad=lambda x: lin + p.gradient(x),
            hvp=lambda x, v: p.hessian_vec(x, v),
            d3_bilinear=lambda x, h: p.third_deriv_bilinear(x, h),
            l3=p.l3_phi if l3_phi is None else l3_phi)


def build_psi(alpha_next, grad_F_y, A_k, mu_rel, p, u_k, y_next):
    """Assemble Psi for one round; its gradient equals the proximal
    objective's gradient identically (the two differ by a constant)."""
    grad_F_y = np.asarray(grad_F_y, dtype=np.float64)
    if grad_F_y.shape != (p.d,):
        raise InputError("gradient dimension mismatch")
    linear = (alpha_next * grad_F_y
              - (1.0 + A_k * mu_rel) * p.gradient(u_k)
              - alpha_next * mu_rel * p.gradient(y_next))
    return PsiProblem(linear_term=linear,
                      phi_scale=1.0 + (A_k + alpha_next) * mu_rel,
                      precond=p)


class WorkerSet:
    """Worker-side problems over a pool partition, with weighted reduction.

    Workers hold shards of possibly unequal size; results are scaled by
    n_j m / N before the pool's plain averaging so the reduce equals the
    serial full-data quantity exactly.
    """

    def __init__(self, pool, lambda1, lambda2, sparse_idx=None, dense_idx=None):
        self.pool = pool
        self.problems = []
        self.weights = []
        N = pool.data.N
        for j in range(pool.m):
            idx = pool.shard(j)
            self.problems.append(LogRegProblem(
                pool.data.subset(idx), lambda1, lambda2, sparse_idx, dense_idx))
            self.weights.append(len(idx) * pool.m / N)

    @property
    def d(self):
        return self.pool.data.d

    def gradient(self, y, ledger=None):
        def task(j, _idx, point):
            return self.weights[j] * self.problems[j].gradient(point)
        return broadcast_reduce(self.pool, y, task, ledger)

    def value(self, x, ledger=None):
        def task(j, _idx, point):
            return np.array([self.weights[j] * self.problems[j].value(point)])
        return float(broadcast_reduce(self.pool, x, task, ledger)[0])

    def value_and_gradient(self, y, ledger=None):
        """Fused round: one broadcast, one reduce carrying value + gradient."""
        def task(j, _idx, point):
            w = self.weights[j]
            return np.concatenate(([w * self.problems[j].value(point)],
                                   w * self.problems[j].gradient(point)))
        out = broadcast_reduce(self.pool, y, task, ledger)
        return float(out[0]), out[1:]


def aggregate_gradient(workers, y, ledger=None):
    """Full-data gradient via one simulated round (ascending-id reduce)."""
    return workers.gradient(y, ledger)


class ThetaEstimator:
    """Upper bound on max(||grad F|| / mu_rel, ||grad phi||) over iterates.

    Online mode keeps a running max over everything observed, times a
    safety factor of 2 (overestimating only tightens the subproblem
    tolerance); user mode returns the supplied constant.
    """

    def __init__(self, mode, mu_rel, safety=2.0):
        self.mode = mode
        self.mu_rel = mu_rel
        self.safety = safety
        self._running = None

    def observe(self, grad_F_norm, grad_phi_norm):
        cand = max(grad_F_norm / self.mu_rel, grad_phi_norm)
        if self._running is None or cand > self._running:
            self._running = cand

    def estimate(self):
        if self.mode != "online":
            return float(self.mode)
        if self._running is None:
            raise InputError("online theta estimate needs an observation")
        # stationary starts observe zero gradients; any positive bound works
        return max(self.safety * self._running, 1e-12)


def theta_estimate(mode, observed_grads, mu_rel):
    """Functional form: observed_grads is (||grad F||, ||grad phi||) pairs."""
    est = ThetaEstimator(mode, mu_rel)
    for gF, gphi in observed_grads:
        est.observe(gF, gphi)
    return est.estimate()


@dataclass
class RoundRecord:
    round: int
    trial: int
    k: int
    A_k: float
    M_k: float
    alpha_k: float
    f_value: float
    grad_norm: float
    inner_iters: int
    delta_k_tol: float
    bytes: int
    wall_ms: float
    # not serialized: acceptance and the verified projection certificate
    accepted: bool = True
    cert_value: float = 0.0
    delta_tilde: float = 0.0

    def csv_row(self):
        vals = (self.round, self.trial, self.k, self.A_k, self.M_k,
                self.alpha_k, self.f_value, self.grad_norm, self.inner_iters,
                self.delta_k_tol, self.bytes, self.wall_ms)
        return ",".join(_fmt(v) for v in vals)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_records_csv(records, path):
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in records:
            fh.write(r.csv_row() + "\n")


def write_records_jsonl(records, path):
    with open(path, "w") as fh:
        for r in records:
            row = {c: getattr(r, c) for c in CSV_COLUMNS}
            fh.write(json.dumps(row) + "\n")


@dataclass
class RunResult:
    trajectory: list
    records: list
    ledger: CommLedger
    certificate_met: bool
    certificate: float
    problem: LogRegProblem
    precond: Preconditioner
    constants: dict
    stop_reason: str = "k_max"


def warm_start(p, iters=100):
    """100 plain gradient steps on phi from zero (local, communication-free)."""
    x = np.zeros(p.d)
    step = 1.0 / p.l_phi
    for _ in range(iters):
        x -= step * p.gradient(x)
    return x


def _resolve(cfg, data):
    """Derived quantities shared by the driver and the CLI."""
    cfg.validate()
    if cfg.n_precond > data.N:
        raise InputError(f"n_precond {cfg.n_precond} exceeds N {data.N}")
    pool_probe = np.random.default_rng(cfg.seed).permutation(data.N)
    precond_idx = pool_probe[:cfg.n_precond]
    local = LogRegProblem(data.subset(precond_idx), cfg.lambda1, cfg.lambda2)
    p = Preconditioner(local, cfg.sigma)
    mu_F = min(cfg.lambda1, cfg.lambda2)
    mu_rel = (cfg.mu_rel if cfg.mu_rel is not None
              else relative_constants(mu_F, cfg.sigma).mu_rel)
    w = warm_start(p)
    R = cfg.R if cfg.R is not None else 10.0 * max(float(np.linalg.norm(w)), 1e-3)
    R_phi_sq = cfg.R_phi_sq if cfg.R_phi_sq is not None else 2.0 * p.l_phi * R * R
    x0 = w if cfg.x0_mode == "warm" else np.zeros(p.d)
    return p, mu_rel, R, R_phi_sq, x0


def _polish(oracle, u, inner, steps=5):
    """Plain tensor steps to local superlinear convergence.

    The restart schedule certifies a value gap but leaves the exit point
    path-dependent at its tolerance; a few unaccelerated steps contract any
    such exit onto the subproblem minimizer to near machine precision, so
    the hand-off does not depend on worker count or iteration-count noise.
    """
    tight = replace(inner, tol=1e-13, max_iters=300)
    gnorm = float(np.linalg.norm(oracle.grad(u)))
    for _ in range(steps):
        if gnorm == 0.0:
            break
        u_new = hyperfast.tensor_step(oracle, u, oracle.l3, tight)
        gnorm_new = float(np.linalg.norm(oracle.grad(u_new)))
        if gnorm_new >= gnorm:  # fp floor reached
            break
        u, gnorm = u_new, gnorm_new
    return u


def inspag_round(state, cfg, p, workers, ledger, theta, records,
                 R, R_phi_sq, mu_rel):
    """One accepted outer iteration (possibly several rejected trials)."""
    k = state.k
    cap = state.m0 * 2.0 ** 60
    M_next = state.M / 2.0
    trial = 0
    while True:
        t0 = time.perf_counter()
        if M_next > cap:
            raise DivergenceError(f"M search exceeded cap at round {k}")
        alpha = solve_alpha(state.A, mu_rel, 0.0, M_next)
        A_next = state.A + alpha
        y_next = (alpha * state.u + state.A * state.x) / A_next
        f_y, grad_y = workers.value_and_gradient(y_next, ledger)
        theta.observe(float(np.linalg.norm(grad_y)),
                      float(np.linalg.norm(p.gradient(y_next))))
        psi = build_psi(alpha, grad_y, state.A, mu_rel, p, state.u, y_next)
        k_eff = max(k, 1)
        delta_k = delta_tolerance(k_eff, p.mu_phi, R_phi_sq, p.l_phi, R,
                                  theta.estimate(), A_next, mu_rel)
        delta_tilde = R_phi_sq / k_eff
        oracle = psi.scaled_oracle(cfg.l3)
        # the subproblem is solved in Psi/phi_scale units
        target = delta_k / psi.phi_scale
        # the ball certificate needs the scaled gradient below roughly
        # delta_tilde / (phi_scale * 2R); aim a factor 8 under that, but not
        # past what double precision can resolve
        needed_grad = delta_tilde / (psi.phi_scale * 2.0 * R * 8.0)
        inner = replace(cfg.inner,
                        tol=max(min(cfg.inner.tol, needed_grad), 5e-14))
        bcfg = BasicConfig(inner=inner)
        u_next = state.u
        inner_iters = 0
        cert = ball_certificate(psi.grad(u_next), u_next, R)
        for attempt in range(4):
            # strong convexity gives a certified radius bound at the warm
            # start, usually far tighter than the worst case 2R
            r0 = min(2.0 * R,
                     float(np.linalg.norm(oracle.grad(u_next))) / p.mu_phi)
            if r0 > 0:
                sched = RestartScheduleStrong(R0=r0, mu=p.mu_phi,
                                              c=cfg.c_rate, t_max=cfg.t_max)
                u_next, extra = restart_strongly_convex(
                    oracle, u_next, sched, target, cfg=bcfg)
                inner_iters += extra
            u_next = _polish(oracle, u_next, cfg.inner)
            cert = ball_certificate(psi.grad(u_next), u_next, R)
            if cert >= -delta_tilde:
                break
            target /= 16.0  # verified hand-off contract failed: tighten
        if cert < -delta_tilde:
            raise CertificateUnattainable(
                f"round {k}: hand-off cannot meet the projection certificate "
                "(floating-point floor); earlier rounds remain valid")
        norm_u = float(np.linalg.norm(u_next))
        if norm_u > R * (1.0 + 1e-9):
            raise InputError(
                f"round {k}: subproblem solution norm {norm_u:.3g} left the "
                f"ball of radius {R:.3g}; increase R")
        x_next = (alpha * u_next + state.A * state.x) / A_next
        f_x = workers.value(x_next, ledger)
        rhs = (f_y + float(grad_y @ (x_next - y_next))
               + (M_next * alpha ** 2 / A_next ** 2) * p.divergence(state.u, u_next)
               + 1e-12 * abs(f_y))
        accepted = f_x <= rhs
        records.append(RoundRecord(
            round=ledger.rounds, trial=trial, k=k, A_k=A_next, M_k=M_next,
            alpha_k=alpha, f_value=f_x,
            grad_norm=float(np.linalg.norm(grad_y)), inner_iters=inner_iters,
            delta_k_tol=delta_k, bytes=ledger.total_bytes,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            accepted=accepted, cert_value=cert, delta_tilde=delta_tilde))
        if accepted:
            break
        M_next *= 2.0
        trial += 1
    new = AgmState(k=k + 1, A=A_next, M=M_next, x=x_next, y=y_next,
                   u=u_next, m0=state.m0, history=state.history)
    return new, records[-1]


def run_inspag(cfg, data, m_workers):
    """Drive rounds until K_max or the aggregate certificate meets target_gap."""
    p, mu_rel, R, R_phi_sq, x0 = _resolve(cfg, data)
    pool = partition(data, m_workers, cfg.seed)
    workers = WorkerSet(pool, cfg.lambda1, cfg.lambda2)
    ledger = CommLedger()
    theta = ThetaEstimator(cfg.theta_mode, mu_rel)
    state = AgmState.initial(x0, cfg.M0)
    trajectory = [state]
    records = []
    certificate = math.inf
    certificate_met = False
    stop_reason = "k_max"
    for _ in range(cfg.K_max):
        try:
            state, _rec = inspag_round(state, cfg, p, workers, ledger, theta,
                                       records, R, R_phi_sq, mu_rel)
        except CertificateUnattainable as exc:
            stop_reason = str(exc)
            break
        trajectory.append(state)
        K = state.k
        certificate = 2.0 * p.l_phi * R * R * (1.0 + math.log(K)) / state.A
        if cfg.target_gap > 0 and certificate <= cfg.target_gap:
            certificate_met = True
            stop_reason = "certificate"
            break
    problem = LogRegProblem(data, cfg.lambda1, cfg.lambda2)
    constants = {"mu_rel": mu_rel, "R": R, "R_phi_sq": R_phi_sq,
                 "L_phi": p.l_phi, "mu_phi": p.mu_phi,
                 "kappa_phi": p.kappa_phi}
    return RunResult(trajectory=trajectory, records=records, ledger=ledger,
                     certificate_met=certificate_met, certificate=certificate,
                     problem=problem, precond=p, constants=constants,
                     stop_reason=stop_reason)
