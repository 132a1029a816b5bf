"""Experiment runner.

Subcommands: run-inspag, run-hyperfast, run-agm, check-oracles,
gen-synthetic.  Options come from flags, optionally seeded by a plain
key=value config file (flags win).  Verbosity via the INSPAG_LOG
environment variable (quiet|info|debug).

Exit codes: 0 success / certificate met, 1 input or I/O error,
2 round budget exhausted before the certificate, 3 oracle check failure.
"""

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from .agm import AgmState, InexactnessSchedule, agm_step, euclidean_model_oracle
from .driver import InspagConfig, run_inspag, write_records_csv
from .errors import InputError
from .hyperfast import (RestartScheduleStrong, RestartScheduleUniform,
                        SmoothOracle, restart_strongly_convex,
                        restart_uniformly_convex)
from .problem import LogRegProblem, generate_synthetic, read_libsvm, write_libsvm

log = logging.getLogger("inspag")

_FLAGS = [
    # (flag, config key, type)
    ("--data", "data", str),
    ("--synthetic", "synthetic", str),
    ("--workers", "workers", int),
    ("--n-precond", "n_precond", int),
    ("--lambda1", "lambda1", float),
    ("--lambda2", "lambda2", float),
    ("--sigma", "sigma", float),
    ("--radius", "radius", float),
    ("--m0", "m0", float),
    ("--c-rate", "c_rate", float),
    ("--rounds", "rounds", int),
    ("--target", "target", float),
    ("--seed", "seed", int),
    ("--out", "out", str),
    ("--l3", "l3", float),
    ("--x0", "x0", str),
    ("--objective", "objective", str),
    ("--q", "q", float),
    ("--ref-value", "ref_value", float),
]

_DEFAULTS = {
    "workers": 1, "n_precond": 100, "lambda1": 1e-3, "lambda2": 1e-3,
    "sigma": 1e-3, "m0": 1.0, "c_rate": 48.0, "rounds": 50, "target": 0.0,
    "seed": 0, "x0": "warm", "objective": "logistic", "q": 4.0,
}


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("INSPAG_LOG", "info"),
                                         logging.INFO)
    logging.basicConfig(level=level, format="%(message)s")


def _build_parser():
    parser = argparse.ArgumentParser(prog="inspag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run-inspag", "run-hyperfast", "run-agm", "check-oracles",
                 "gen-synthetic"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="key=value file; flags override its entries")
        for flag, key, typ in _FLAGS:
            p.add_argument(flag, dest=key, type=typ, default=None)
        p.add_argument("--corrupt-oracle", action="store_true",
                       help=argparse.SUPPRESS)  # negative-test hook
    return parser


def _read_config_file(path):
    values = {}
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}: line {lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _collect_options(args):
    """File values under flag values under defaults; report all problems."""
    opts = dict(_DEFAULTS)
    errors = []
    if args.config:
        raw = _read_config_file(args.config)
        types = {key: typ for _, key, typ in _FLAGS}
        for key, val in raw.items():
            if key not in types:
                errors.append(f"unknown config key {key!r}")
                continue
            try:
                opts[key] = types[key](val)
            except ValueError:
                errors.append(f"config key {key}={val!r} is not {types[key].__name__}")
    for _, key, _typ in _FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if errors:
        raise InputError("; ".join(errors))
    return opts


def _load_dataset(opts):
    if opts.get("data"):
        if not os.path.exists(opts["data"]):
            raise InputError(f"dataset not found: {opts['data']}")
        return read_libsvm(opts["data"])
    spec = opts.get("synthetic") or "2000,20,1.0"
    try:
        parts = spec.split(",")
        N, d = int(parts[0]), int(parts[1])
        density = float(parts[2]) if len(parts) > 2 else 1.0
    except (ValueError, IndexError):
        raise InputError(f"--synthetic expects N,d[,density], got {spec!r}")
    return generate_synthetic(opts["seed"], N, d, density)


def _summary_path(out_csv):
    root, _ = os.path.splitext(out_csv)
    return root + ".json"


def _write_summary(out_csv, payload):
    with open(_summary_path(out_csv), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_run_inspag(opts):
    data = _load_dataset(opts)
    cfg = InspagConfig(lambda1=opts["lambda1"], lambda2=opts["lambda2"],
                       sigma=opts["sigma"], n_precond=opts["n_precond"],
                       R=opts.get("radius"), M0=opts["m0"],
                       K_max=opts["rounds"], target_gap=opts["target"],
                       c_rate=opts["c_rate"], l3=opts.get("l3"),
                       x0_mode=opts["x0"], seed=opts["seed"])
    out = opts.get("out")
    if not out:
        raise InputError("run-inspag needs --out for the metrics CSV")
    t0 = time.time()
    res = run_inspag(cfg, data, opts["workers"])
    wall = time.time() - t0
    write_records_csv(res.records, out)
    accepted = [r for r in res.records if r.accepted]
    final_f = accepted[-1].f_value if accepted else None
    ref = opts.get("ref_value")
    summary = {
        "command": "run-inspag",
        "N": data.N, "d": data.d, "m": opts["workers"],
        "n_precond": opts["n_precond"], "lambda1": opts["lambda1"],
        "lambda2": opts["lambda2"], "sigma": opts["sigma"],
        "seed": opts["seed"], "rounds": res.ledger.rounds,
        "outer_iterations": len(res.trajectory) - 1,
        "bytes": res.ledger.total_bytes,
        "certificate": None if math.isinf(res.certificate) else res.certificate,
        "certificate_met": res.certificate_met,
        "target_gap": opts["target"],
        "final_f": final_f,
        "final_gap": None if (ref is None or final_f is None) else final_f - ref,
        "total_inner_iters": sum(r.inner_iters for r in res.records),
        "stop_reason": res.stop_reason,
        "wall_time_s": wall,
        "out_csv": out,
    }
    _write_summary(out, summary)
    log.info("run-inspag: %d rounds, certificate %s (met=%s), %.1fs",
             res.ledger.rounds, summary["certificate"], res.certificate_met,
             wall)
    return 0 if res.certificate_met else 2


def _newton_reference(problem, iters=100):
    x = np.zeros(problem.d)
    eye = np.eye(problem.d)
    for _ in range(iters):
        g = problem.gradient(x)
        if float(np.linalg.norm(g)) < 1e-15:
            break
        H = np.column_stack([problem.hessian_vec(x, e) for e in eye])
        x = x - np.linalg.solve(H, g)
    return x


def _cmd_run_hyperfast(opts):
    out = opts.get("out")
    if not out:
        raise InputError("run-hyperfast needs --out for the metrics CSV")
    trace = []
    t0 = time.time()
    if opts["objective"] == "quartic":
        # built-in ||x||^4/4 smoke objective; sigma_q pinned to l3 gives the
        # constant-leg schedule
        d = 1
        orc = SmoothOracle(
            value=lambda x: 0.25 * float(x @ x) ** 2,
            grad=lambda x: float(x @ x) * x,
            hvp=lambda x, v: float(x @ x) * v + 2.0 * float(x @ v) * x,
            d3_bilinear=lambda x, h: 2.0 * (float(h @ h) * x
                                            + 2.0 * float(x @ h) * h),
            l3=6.0)
        z0 = np.full(d, 2.0)
        delta0 = orc.value(z0)
        eps = opts["target"] if opts["target"] > 0 else delta0 * 2.0 ** -10
        sched = RestartScheduleUniform(q=opts["q"], sigma_q=orc.l3,
                                       Delta0=delta0, c_hat=opts["c_rate"])
        z = restart_uniformly_convex(orc, sched, z0, eps, trace=trace)
        ref = 0.0
        rows = [(t, delta, N_t, orc.value(zt) - ref)
                for t, delta, N_t, zt in trace]
        header = "t,delta_t,N_t,gap"
        gap = orc.value(z)
    elif opts["objective"] == "logistic":
        data = _load_dataset(opts)
        problem = LogRegProblem(data, opts["lambda1"], opts["lambda2"])
        consts = problem.smoothness_constants()
        orc = SmoothOracle(value=problem.value, grad=problem.gradient,
                           hvp=problem.hessian_vec,
                           d3_bilinear=problem.third_deriv_bilinear,
                           l3=opts["l3"] if opts.get("l3") else consts.l3)
        ref_x = _newton_reference(problem) if data.d <= 200 else None
        fstar = problem.value(ref_x) if ref_x is not None else None
        z0 = np.zeros(data.d)
        R = opts.get("radius")
        if R is None:
            R = 2.0 * max(float(np.linalg.norm(
                ref_x if ref_x is not None else z0)), 1.0)
        target = opts["target"] if opts["target"] > 0 else 1e-10
        sched = RestartScheduleStrong(R0=2.0 * R, mu=consts.mu_strong,
                                      c=opts["c_rate"])
        z, _ = restart_strongly_convex(orc, z0, sched, target, trace=trace)
        rows = [(t, R_t, N_t,
                 problem.value(zt) - fstar if fstar is not None else "")
                for t, R_t, N_t, zt in trace]
        header = "t,R_t,N_t,gap"
        gap = problem.value(z) - fstar if fstar is not None else None
    else:
        raise InputError(f"unknown objective {opts['objective']!r}")
    wall = time.time() - t0
    with open(out, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") if isinstance(v, float)
                              else str(v) for v in row) + "\n")
    _write_summary(out, {"command": "run-hyperfast",
                         "objective": opts["objective"],
                         "restarts": len(rows), "final_gap": gap,
                         "wall_time_s": wall, "out_csv": out})
    log.info("run-hyperfast: %d restarts, final gap %s, %.1fs",
             len(rows), gap, wall)
    return 0


def _cmd_run_agm(opts):
    out = opts.get("out")
    if not out:
        raise InputError("run-agm needs --out for the metrics CSV")
    data = _load_dataset(opts)
    problem = LogRegProblem(data, opts["lambda1"], opts["lambda2"])
    oracle = euclidean_model_oracle(problem, radius=opts.get("radius"))
    schedule = InexactnessSchedule.exact()
    state = AgmState.initial(np.zeros(data.d), opts["m0"],
                             f_value=problem.value(np.zeros(data.d)))
    t0 = time.time()
    rows = []
    for _ in range(opts["rounds"]):
        state = agm_step(state, oracle, schedule)
        rec = state.history[-1]
        rows.append((rec.k, rec.A, rec.M, rec.alpha, rec.f_value,
                     float(np.linalg.norm(problem.gradient(state.x)))))
    wall = time.time() - t0
    with open(out, "w") as fh:
        fh.write("k,A_k,M_k,alpha_k,f_value,grad_norm\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") if isinstance(v, float)
                              else str(v) for v in row) + "\n")
    final_f = rows[-1][4] if rows else None
    _write_summary(out, {"command": "run-agm", "iterations": len(rows),
                         "final_f": final_f, "wall_time_s": wall,
                         "out_csv": out})
    log.info("run-agm: %d iterations, final value %s, %.1fs",
             len(rows), final_f, wall)
    return 0


def _cmd_check_oracles(opts):
    data = _load_dataset(opts)
    problem = LogRegProblem(data, opts["lambda1"], opts["lambda2"])
    corrupt = opts.get("corrupt_oracle", False)

    def grad(x):
        g = problem.gradient(x)
        if corrupt:
            g = g.copy()
            g[0] += 1e-3
        return g

    rng = np.random.default_rng(opts["seed"])
    d = problem.d
    worst = {"gradient": 0.0, "hessian_vec": 0.0, "third_deriv": 0.0}
    for _ in range(10):
        x = rng.standard_normal(d)
        v = rng.standard_normal(d)
        h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
        fd_g = np.array([(problem.value(x + h * e) - problem.value(x - h * e))
                         / (2 * h) for e in np.eye(d)])
        g = grad(x)
        worst["gradient"] = max(worst["gradient"],
                                float(np.linalg.norm(g - fd_g))
                                / max(1e-30, float(np.linalg.norm(fd_g))))
        hv = problem.hessian_vec(x, v)
        fd_hv = (problem.gradient(x + h * v) - problem.gradient(x - h * v)) / (2 * h)
        worst["hessian_vec"] = max(worst["hessian_vec"],
                                   float(np.linalg.norm(hv - fd_hv))
                                   / max(1e-30, float(np.linalg.norm(fd_hv))))
        h3 = 1e-5 * max(1.0, float(np.linalg.norm(x)))
        d3 = problem.third_deriv_bilinear(x, v)
        fd_d3 = (problem.hessian_vec(x + h3 * v, v)
                 - problem.hessian_vec(x - h3 * v, v)) / (2 * h3)
        denom = max(1e-12, float(np.linalg.norm(fd_d3)))
        worst["third_deriv"] = max(worst["third_deriv"],
                                   float(np.linalg.norm(d3 - fd_d3)) / denom)
    tolerances = {"gradient": 1e-6, "hessian_vec": 1e-5, "third_deriv": 1e-4}
    failed = []
    for name, err in worst.items():
        status = "ok" if err <= tolerances[name] else "FAIL"
        print(f"{name}: max rel err {err:.3e} (tol {tolerances[name]:.0e}) {status}")
        if err > tolerances[name]:
            failed.append(name)
    if failed:
        print("failing oracles: " + ", ".join(failed))
        return 3
    return 0


def _cmd_gen_synthetic(opts):
    out = opts.get("out")
    if not out:
        raise InputError("gen-synthetic needs --out")
    data = _load_dataset(opts)
    write_libsvm(data, out)
    log.info("wrote %d samples, d=%d to %s", data.N, data.d, out)
    return 0


_COMMANDS = {
    "run-inspag": _cmd_run_inspag,
    "run-hyperfast": _cmd_run_hyperfast,
    "run-agm": _cmd_run_agm,
    "check-oracles": _cmd_check_oracles,
    "gen-synthetic": _cmd_gen_synthetic,
}


def main(argv=None):
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        opts = _collect_options(args)
        opts["corrupt_oracle"] = getattr(args, "corrupt_oracle", False)
        return _COMMANDS[args.command](opts)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
