"""
Command-line entry point.

    python cli.py coeffs   --m 4 --h 0.75
    python cli.py estimate --fn rosenbrock --x -1.2,1 --scheme nmxfd --sigma 1e-2 --m 4
    python cli.py bounds   --fn rosenbrock --x -1.2,1 --sigma 1e-2 --m 4 --h 0.75
    python cli.py buckets  --fn wood --seed 7
    python cli.py bench    --sigma 1e-5 --schemes cfd,nmxfd --suite all --format markdown
    python cli.py variance --scheme nmxfd --fn sphere --x 1 --sigma 1e-2 --h 1 --m 2
    python cli.py fns list

Flags may also come from a flat `key = value` file given with --config
(keys are the long flag names); the command line wins over the file.
"""

import os
import sys
import json
import shlex
import logging
import argparse
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

import config
from coefficients import mixing_coefficients
from errors import GradmixError
from estimators import EstimatorConfig, Scheme, estimate
from experiment import (
    BenchmarkConfig,
    build_buckets,
    emit_table,
    log_to_mlflow,
    relative_error,
    run_benchmark,
    run_noisy_benchmark,
    variance_experiment,
)
from noise import NoiseSpec, noisy_wrap
from oracles import bound_table
from testfns import get as get_function, registry
from utils import create_directory, derive_seed, parse_csv_floats, parse_csv_names, setup_logging

SUBCOMMANDS = ("coeffs", "estimate", "bounds", "buckets", "bench", "variance", "fns")
BOOLEAN_FLAGS = {"strict", "mlflow"}
# scheduling and destination flags never change results
NOT_ECHOED = {"func", "out", "jobs", "log_level", "mlflow", "config"}


class RunConfig(BaseModel):
    subcommand: str
    flags: Dict
    config_file: Optional[str] = None
    seed: int

    def echo(self) -> Dict:
        return {"subcommand": self.subcommand, "seed": self.seed,
                "flags": {k: v for k, v in sorted(self.flags.items()) if k not in NOT_ECHOED}}


# ============================================================================
# ARGUMENT TYPES
# ============================================================================

def _reals(text: str) -> List[float]:
    try:
        return parse_csv_floats(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _names(text: str) -> List[str]:
    try:
        return parse_csv_names(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _positive_real(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a real number")
    if not (value > 0 and np.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive real, got {text}")
    return value


def _nonnegative_real(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a real number")
    if not (value >= 0 and np.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative real, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not an integer seed")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


SCHEME_CHOICES = [s.value.lower() for s in Scheme]


def _scheme(text: str) -> str:
    key = text.strip().lower().replace("-", "_")
    if key not in SCHEME_CHOICES:
        raise argparse.ArgumentTypeError(f"unknown scheme '{text}'. Available: {SCHEME_CHOICES}")
    return key


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value file; keys are long flag names")
    common.add_argument("--log-level", default=config.LOG_LEVEL, help="logging level (default: %(default)s)")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")

    parser = argparse.ArgumentParser(
        prog="gradmix",
        description="Gradient estimators (FFD, CFD, GSG, cGSG, NMXFD) and their bucket benchmark.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_sigma(p, required=True):
        p.add_argument("--sigma", type=_positive_real, required=required, default=None if required else config.DEFAULT_SIGMA,
                       help="smoothing scale σ (FFD/CFD step is σ·h)")

    def add_mixing(p):
        p.add_argument("--m", type=_positive_int, help="number of mixed central differences m")
        p.add_argument("--h", type=_positive_real, help="quadrature step h (dimensionless, S = m·h)")
        p.add_argument("--S", type=_positive_real, help=f"truncation half-width S (default {config.DEFAULT_S}, h = S/m)")

    def add_format(p, choices=("json", "csv")):
        p.add_argument("--format", choices=list(choices), default="json", help="output format (default: json)")

    p = sub.add_parser("coeffs", parents=[common], help="mixing coefficients a'_j, C, a_j",
                       description="Mixing coefficients a'_j, their sum C and the normalized a_j for m, h.")
    p.add_argument("--m", type=_positive_int, required=True, help="number of mixed central differences m")
    p.add_argument("--h", type=_positive_real, required=True, help="quadrature step h")
    add_format(p)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("estimate", parents=[common], help="one gradient estimate")
    p.add_argument("--fn", required=True, help="test function name (see `fns list`)")
    p.add_argument("--x", type=_reals, help="point as comma-separated reals (default: function start x0)")
    p.add_argument("--scheme", type=_scheme, required=True, help=f"one of {SCHEME_CHOICES}")
    add_sigma(p)
    add_mixing(p)
    p.add_argument("--M", type=_positive_int, default=config.DEFAULT_DIRECTIONS,
                   help="sampled directions M for GSG/cGSG (default: %(default)s)")
    p.add_argument("--seed", type=_seed, help="base seed (default: $GRADMIX_SEED)")
    p.add_argument("--lambda", dest="lam", type=_nonnegative_real, default=0.0,
                   help="observation noise standard deviation λ (default: 0)")
    p.add_argument("--noise-seed", type=_seed, help="seed of the noise stream ε")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bounds", parents=[common], help="error, bias and variance bounds vs observed values")
    p.add_argument("--fn", required=True, help="test function name")
    p.add_argument("--x", type=_reals, help="point (default: function start x0)")
    add_sigma(p)
    p.add_argument("--m", type=_positive_int, required=True, help="number of mixed central differences m")
    p.add_argument("--h", type=_positive_real, required=True, help="quadrature step h")
    p.add_argument("--lambda", dest="lam", type=_nonnegative_real, default=config.DEFAULT_LAMBDA,
                   help="noise standard deviation λ for the variance rows (default: %(default)s)")
    p.add_argument("--seed", type=_seed, help="seed for sampling L/H when not declared")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("buckets", parents=[common], help="BFGS bucket points for one function")
    p.add_argument("--fn", required=True, help="test function name")
    p.add_argument("--seed", type=_seed, help="base seed for the start perturbation")
    p.add_argument("--jitter", type=_nonnegative_real, default=0.0,
                   help="std of the seeded perturbation of x0 (default: 0)")
    p.add_argument("--grad-tol", type=_positive_real, default=config.BFGS_GRAD_TOL,
                   help="BFGS stops at ‖∇f‖ <= tol·(1+‖∇f(x0)‖) (default: %(default)s)")
    p.add_argument("--max-iter", type=_positive_int, default=config.BFGS_MAX_ITER, help="BFGS iteration cap")
    p.set_defaults(func=cmd_buckets)

    p = sub.add_parser("bench", parents=[common], help="median log10 relative error per scheme, N and bucket α",
                       description="Median over functions of log10 η per scheme, budget N and bucket α.")
    add_sigma(p)
    p.add_argument("--lambda", dest="lam", type=_nonnegative_real, default=0.0,
                   help="noise standard deviation λ; > 0 switches to the noisy ladders (default: 0)")
    p.add_argument("--realizations", type=_positive_int, default=None,
                   help=f"noise realizations R per point (default: {config.DEFAULT_REALIZATIONS} when λ > 0, else 1)")
    p.add_argument("--schemes", type=_names, default=["ffd", "cfd", "gsg", "cgsg", "nmxfd"],
                   help="comma-separated schemes")
    p.add_argument("--suite", type=_names, default=["all"], help="comma-separated function names or 'all'")
    p.add_argument("--seed", type=_seed, help="base seed (default: $GRADMIX_SEED)")
    p.add_argument("--noise-seed", type=_seed,
                   help="base seed of the noise streams ε (default: derived from --seed)")
    p.add_argument("--S", type=_positive_real, default=config.DEFAULT_S,
                   help="truncation half-width S of the mixed schemes (default: %(default)s)")
    p.add_argument("--fd-h", type=_positive_real, default=config.DEFAULT_FD_H,
                   help="FFD/CFD step multiplier h (default: %(default)s)")
    p.add_argument("--jitter", type=_nonnegative_real, default=0.0, help="seeded perturbation of every x0")
    p.add_argument("--grad-tol", type=_positive_real, default=config.BFGS_GRAD_TOL, help="BFGS tolerance")
    p.add_argument("--max-iter", type=_positive_int, default=config.BFGS_MAX_ITER, help="BFGS iteration cap")
    p.add_argument("--jobs", type=_positive_int, default=None, help="worker threads (default: available CPUs)")
    p.add_argument("--strict", action="store_true", help="exit 1 when any cell recorded a failure")
    p.add_argument("--mlflow", action="store_true", default=config.MLFLOW_ENABLED, help="log the run to MLflow")
    add_format(p, ("json", "csv", "markdown"))
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("variance", parents=[common], help="Monte Carlo noise variance vs closed form")
    p.add_argument("--scheme", type=_scheme, required=True, help=f"one of {SCHEME_CHOICES}")
    p.add_argument("--fn", required=True, help="test function name")
    p.add_argument("--x", type=_reals, help="point (default: function start x0)")
    add_sigma(p)
    p.add_argument("--h", type=_positive_real, default=1.0, help="step multiplier h (default: %(default)s)")
    p.add_argument("--m", type=_positive_int, default=1, help="mixed differences m (default: %(default)s)")
    p.add_argument("--lambda", dest="lam", type=_nonnegative_real, default=config.DEFAULT_LAMBDA,
                   help="noise standard deviation λ (default: %(default)s)")
    p.add_argument("--trials", type=_positive_int, default=config.MIN_VARIANCE_TRIALS,
                   help="noisy trials (>= %(default)s)")
    p.add_argument("--noise-seed", type=_seed, help="seed of the noise stream")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("fns", parents=[common], help="built-in test functions")
    p.add_argument("action", choices=["list"], help="list names, dimensions and known L/H")
    add_format(p)
    p.set_defaults(func=cmd_fns)
    return parser


# ============================================================================
# CONFIG FILE OVERLAY
# ============================================================================

def read_config_file(path: str) -> List[str]:
    """Turns `key = value` lines into argv tokens placed before the real ones."""
    tokens = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lstrip("-")
            if key in BOOLEAN_FLAGS:
                if value.lower() in ("1", "true", "yes", "on"):
                    tokens.append(f"--{key}")
                continue
            tokens.extend([f"--{key}", value])
    return tokens


def _find_config(argv: List[str]) -> Optional[str]:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


VECTOR_FLAGS = ("--x",)


def attach_vector_values(argv: List[str]) -> List[str]:
    """`--x -1.2,1` becomes `--x=-1.2,1`; argparse would read the value as an option."""
    out, i = [], 0
    while i < len(argv):
        token = argv[i]
        if token in VECTOR_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        out.append(token)
        i += 1
    return out


def apply_config_file(argv: List[str]) -> List[str]:
    path = _find_config(argv)
    if path is None:
        return argv
    tokens = read_config_file(path)
    idx = next((i for i, t in enumerate(argv) if t in SUBCOMMANDS), None)
    if idx is None:
        return argv
    logging.debug(f"config overlay from {path}: {shlex.join(tokens)}")
    return argv[: idx + 1] + tokens + argv[idx + 1:]


# ============================================================================
# OUTPUT
# ============================================================================

def _dump(payload) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def write_output(text: str, out: Optional[str]):
    if out:
        # relative paths land under GRADMIX_OUTPUT_DIR (empty: working directory)
        out = os.path.join(config.OUTPUT_DIR, out)
        create_directory(os.path.dirname(out))
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        logging.info(f"✓ Output saved to: {out}")
    else:
        sys.stdout.write(text)


def _run_config(args, seed: int) -> RunConfig:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "subcommand")}
    return RunConfig(subcommand=args.subcommand, flags=flags, config_file=args.config, seed=seed)


def _resolve_seed(args) -> int:
    seed = getattr(args, "seed", None)
    return config.get_default_seed() if seed is None else seed


def _point(objective, x: Optional[List[float]]) -> np.ndarray:
    if x is None:
        return objective.x0
    return objective.check_point(x)


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_coeffs(args) -> int:
    table = mixing_coefficients(args.m, args.h)
    if args.format == "csv":
        df = pd.DataFrame({
            "j": list(range(1, table.m + 1)),
            "raw": list(table.raw),
            "normalized": list(table.normalized),
            "total": [table.total] * table.m,
        })
        write_output(df.to_csv(index=False, lineterminator="\n"), args.out)
    else:
        payload = table.model_dump(mode="json")
        payload["S"] = table.S
        payload["config"] = _run_config(args, _resolve_seed(args)).echo()
        write_output(_dump(payload), args.out)
    return 0


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args)
    objective = get_function(args.fn)
    x = _point(objective, args.x)
    est_cfg = EstimatorConfig(scheme=args.scheme, sigma=args.sigma, h=args.h, S=args.S,
                              M=args.M, seed=seed, **({"m": args.m} if args.m else {}))
    f = objective
    if args.lam > 0:
        noise_seed = args.noise_seed if args.noise_seed is not None else derive_seed(seed, "noise")
        f = noisy_wrap(objective, NoiseSpec(lam=args.lam, seed=noise_seed))
    result = estimate(f, x, est_cfg)

    true_grad = objective.gradient(x) if objective.grad is not None else None
    eta = None
    if true_grad is not None and np.linalg.norm(true_grad) > 0:
        eta = relative_error(result.vector, true_grad)
    payload = {
        "function": objective.name,
        "x": [float(v) for v in x],
        "scheme": result.scheme,
        "vector": [float(v) for v in result.vector],
        "true_gradient": None if true_grad is None else [float(v) for v in true_grad],
        "eta": eta,
        "evals": result.evals,
        "estimator": est_cfg.model_dump(mode="json"),
        "config": _run_config(args, seed).echo(),
    }
    write_output(_dump(payload), args.out)
    return 0


def cmd_bounds(args) -> int:
    seed = _resolve_seed(args)
    objective = get_function(args.fn)
    x = _point(objective, args.x)
    payload = bound_table(objective, x, args.sigma, args.m, args.h, args.lam, seed=seed)
    payload["config"] = _run_config(args, seed).echo()
    write_output(_dump(payload), args.out)
    return 0


def cmd_buckets(args) -> int:
    seed = _resolve_seed(args)
    objective = get_function(args.fn)
    buckets = build_buckets(objective, seed, args.jitter, args.grad_tol, args.max_iter)
    payload = buckets.model_dump(mode="json")
    payload["config"] = _run_config(args, seed).echo()
    write_output(_dump(payload), args.out)
    return 0


def cmd_bench(args) -> int:
    seed = _resolve_seed(args)
    realizations = args.realizations
    if realizations is None:
        realizations = config.DEFAULT_REALIZATIONS if args.lam > 0 else 1
    cfg = BenchmarkConfig(
        schemes=args.schemes,
        sigma=args.sigma,
        lam=args.lam,
        realizations=realizations,
        suite=args.suite,
        seed=seed,
        noise_seed=args.noise_seed,
        S=args.S,
        fd_h=args.fd_h,
        jitter=args.jitter,
        grad_tol=args.grad_tol,
        max_iter=args.max_iter,
        jobs=args.jobs or config.get_default_jobs(),
    )
    report = run_noisy_benchmark(cfg) if cfg.noisy else run_benchmark(cfg)
    report.config["cli"] = _run_config(args, seed).echo()
    write_output(emit_table(report, args.format), args.out)

    if args.mlflow:
        log_to_mlflow(report, run_name=f"bench_sigma{cfg.sigma:g}_lam{cfg.lam:g}_seed{cfg.seed}")

    failures = report.total_failures()
    if args.strict and failures:
        first = report.failures[0]
        print(f"error: {failures} cell failure(s); first: {first['function']} {first['scheme']} "
              f"N={first['budget']} B{first['bucket']}: {first['error']}", file=sys.stderr)
        return 1
    return 0


def cmd_variance(args) -> int:
    seed = args.noise_seed if args.noise_seed is not None else config.get_default_seed()
    objective = get_function(args.fn)
    x = _point(objective, args.x)
    result = variance_experiment(args.scheme, objective, x, args.sigma, args.h, args.m, args.lam,
                                 args.trials, seed=seed)
    payload = result.model_dump(mode="json")
    payload["function"] = objective.name
    payload["x"] = [float(v) for v in x]
    payload["config"] = _run_config(args, seed).echo()
    write_output(_dump(payload), args.out)
    return 0


def cmd_fns(args) -> int:
    rows = [obj.summary() for obj in registry()]
    if args.format == "csv":
        df = pd.DataFrame(rows)
        write_output(df.to_csv(index=False, lineterminator="\n"), args.out)
    else:
        write_output(_dump(rows), args.out)
    return 0


# ============================================================================
# MAIN
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = attach_vector_values(apply_config_file(argv))
    except (OSError, ValueError) as e:
        parser.print_usage(sys.stderr)
        print(f"gradmix: error: config file: {e}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    setup_logging(args.log_level)
    try:
        return args.func(args)
    except (GradmixError, ValueError) as e:
        logging.error(f"❌ Failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
