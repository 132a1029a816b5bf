"""Reference function phi = local empirical loss + ridge, and its divergence.

phi(x) = (1/n) sum_i loss(x; local sample i) + (sigma/2) ||x||^2

generates the Bregman divergence D_phi[u](x) used everywhere else.  The
local samples come from the node acting as the central one; sigma is the
user-supplied similarity ridge.  phi inherits the logistic oracles and is
(min{lambda_1, lambda_2} + sigma)-strongly convex.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError


class Preconditioner:
    """phi and its oracles: local problem plus (sigma/2)||x||^2.

    The ridge shifts value/gradient/Hessian by the obvious quadratic terms
    and leaves the third derivative (hence its Lipschitz constant) alone.
    """

    def __init__(self, local_problem, sigma):
        if sigma < 0:
            raise InputError("sigma must be nonnegative")
        self.local_problem = local_problem
        self.sigma = float(sigma)
        self._constants = None

    @property
    def n(self):
        return self.local_problem.N

    @property
    def d(self):
        return self.local_problem.d

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.local_problem.value(x) + 0.5 * self.sigma * float(x @ x)

    def gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.local_problem.gradient(x) + self.sigma * x

    def hessian_vec(self, x, v):
        v = np.asarray(v, dtype=np.float64)
        return self.local_problem.hessian_vec(x, v) + self.sigma * v

    def third_deriv_bilinear(self, x, h):
        return self.local_problem.third_deriv_bilinear(x, h)

    def _smoothness(self):
        if self._constants is None:
            p = self.local_problem
            lam_max = max(p.lambda_sparse, p.lambda_dense)
            lam_min = min(p.lambda_sparse, p.lambda_dense)
            if p.N == 0:
                loss_smooth, l3 = 0.0, 0.0
            else:
                c = p.smoothness_constants()
                loss_smooth = c.l_smooth - lam_max
                l3 = c.l3
            self._constants = (lam_max + loss_smooth + self.sigma,
                               lam_min + self.sigma, l3)
        return self._constants

    @property
    def l_phi(self):
        return self._smoothness()[0]

    @property
    def mu_phi(self):
        return self._smoothness()[1]

    @property
    def kappa_phi(self):
        return self.l_phi / self.mu_phi

    @property
    def l3_phi(self):
        """Third-derivative Lipschitz constant; the ridge contributes nothing."""
        return self._smoothness()[2]

    def divergence(self, u, x):
        """D_phi[u](x) = phi(x) - phi(u) - <grad phi(u), x - u>."""
        u = np.asarray(u, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if u.shape != x.shape:
            raise InputError("u and x must have the same shape")
        return self.value(x) - self.value(u) - float(self.gradient(u) @ (x - u))


def bregman_div(p, u, x):
    """Functional form of Preconditioner.divergence."""
    return p.divergence(u, x)


@dataclass
class RelativeConstants:
    """Relative smoothness/strong-convexity of the full loss w.r.t. phi."""
    l_rel: float
    mu_rel: float
    kappa_rel: float


def relative_constants(mu_F, sigma):
    """(1, mu_F/(mu_F + 2 sigma), 1 + 2 sigma/mu_F).

    The upper constant is exactly 1 because phi contains the central node's
    own loss terms; only the ridge degrades the lower constant.
    """
    if mu_F <= 0:
        raise InputError("mu_F must be positive")
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    mu_rel = mu_F / (mu_F + 2.0 * sigma)
    return RelativeConstants(1.0, mu_rel, 1.0 + 2.0 * sigma / mu_F)


@dataclass
class TriangleScalingReport:
    G: float
    max_ratio: float
    passed: bool
    samples: int
    skipped: int


def triangle_scaling_check(p, G, samples=200, seed=0, scale=1.0):
    """Sample the divergence scaling property along convex-combination moves.

    Draws (u, u_plus, y, tau) with x = y + tau (u_plus - u) and reports the
    largest observed D_phi[y](x) / (tau^2 D_phi[u](u_plus)).  Degenerate
    draws with a zero denominator are skipped and counted.  Diagnostic
    only: the adaptive M search does not need G at runtime.
    """
    if G < 0:
        raise InputError("G must be nonnegative")
    rng = np.random.default_rng(seed)
    d = p.d
    max_ratio = 0.0
    skipped = 0
    for _ in range(samples):
        u = rng.standard_normal(d) * scale
        u_plus = rng.standard_normal(d) * scale
        y = rng.standard_normal(d) * scale
        tau = rng.uniform(0.0, 1.0)
        denom = p.divergence(u, u_plus)
        if denom <= 0.0 or tau == 0.0:
            skipped += 1
            continue
        x = y + tau * (u_plus - u)
        ratio = p.divergence(y, x) / (tau * tau * denom)
        max_ratio = max(max_ratio, ratio)
    return TriangleScalingReport(G=float(G), max_ratio=float(max_ratio),
                                 passed=bool(max_ratio <= G * (1.0 + 1e-9)),
                                 samples=samples, skipped=skipped)
