"""Statistically preconditioned accelerated gradient descent, desk scale.

Layout:
    problem   -- sparse datasets and the regularized logistic oracles
    bregman   -- the reference function phi and its divergence
    agm       -- adaptive accelerated method under an inexact model
    hyperfast -- tensor steps, the accelerated scheme, restart drivers
    distsim   -- simulated parameter-server rounds and the ledger
    driver    -- the distributed preconditioned driver
    cli       -- experiment runner
"""

from .bregman import (Preconditioner, RelativeConstants, bregman_div,
                      relative_constants, triangle_scaling_check)
from .driver import (InspagConfig, PsiProblem, RoundRecord, RunResult,
                     WorkerSet, aggregate_gradient, build_psi, inspag_round,
                     run_inspag, theta_estimate)
from .errors import (DivergenceError, InputError, NonconvergenceError,
                     ToleranceNotMet, WorkerFailure)
from .hyperfast import (BasicConfig, InnerConfig, RestartScheduleStrong,
                        RestartScheduleUniform, SmoothOracle, basic_hyperfast,
                        delta_tolerance, quartic_subproblem,
                        restart_strongly_convex, restart_uniformly_convex,
                        tensor_step)
from .problem import (LogRegProblem, SmoothnessConstants, SparseDataset,
                      generate_synthetic, read_libsvm, write_libsvm)

__version__ = "0.1.0"
