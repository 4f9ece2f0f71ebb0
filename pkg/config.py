import os

from dotenv import load_dotenv

load_dotenv()

# Relative --out paths are written under this directory (empty: working directory)
OUTPUT_DIR = os.getenv("GRADMIX_OUTPUT_DIR", "")

# Logging verbosity for every entry point
LOG_LEVEL = os.getenv("GRADMIX_LOG_LEVEL", "INFO")

# MLflow experiment used by `bench --mlflow`
MLFLOW_EXPERIMENT_NAME = os.getenv("MLFLOW_EXPERIMENT_NAME", "Gradient Estimator Benchmark")
MLFLOW_ENABLED = os.getenv("GRADMIX_MLFLOW", "0") == "1"

FALLBACK_SEED = 20211


def get_default_seed() -> int:
    """Base seed from GRADMIX_SEED, read at call time."""
    raw = os.getenv("GRADMIX_SEED")
    if raw is None or raw.strip() == "":
        return FALLBACK_SEED
    seed = int(raw)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"GRADMIX_SEED must be a 64-bit unsigned integer, got {raw}")
    return seed


def get_default_jobs() -> int:
    raw = os.getenv("GRADMIX_JOBS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


# Smoothing / quadrature defaults (σ-relative, dimensionless)
DEFAULT_S = 3.0
DEFAULT_FD_H = 1.0
DEFAULT_SIGMA = 1e-2
DEFAULT_M = 4
DEFAULT_DIRECTIONS = 10

# Noise model
DEFAULT_LAMBDA = 1e-3
DEFAULT_REALIZATIONS = 100
MIN_VARIANCE_TRIALS = 10_000

# Bucket thresholds α = 10^0 ... 10^-6
ALPHAS = tuple(10.0 ** -k for k in range(7))

# BFGS used to generate buckets
BFGS_GRAD_TOL = 1e-9
BFGS_MAX_ITER = 5000

# Relative errors are clamped here before log10
ETA_FLOOR = 1e-16

# Oracles
ORACLE_TRUNCATION = 8.0
ORACLE_TOL = 1e-10
QUAD_EVAL_BUDGET = 10**6
SAFETY_FACTOR = 1.5
MONTE_CARLO_SAMPLES = 200_000

# N ladders as (k, c) rungs with N = k*n + c.
# Noise-free runs (bucket tables at σ = 1e-2, 1e-5, 1e-8)
NOISE_FREE_LADDERS = {
    "FFD": [(1, 1)],
    "CFD": [(2, 0)],
    "GSG": [(2, 1), (4, 1), (8, 1)],
    "CGSG": [(2, 0), (4, 0), (8, 0)],
    "NMXFD": [(2, 0), (4, 0), (8, 0)],
    "MXFD_RAW": [(2, 0), (4, 0), (8, 0)],
    "AVG_CFD": [(2, 0), (4, 0), (8, 0)],
}

# Noisy runs (λ > 0, averaged over realizations)
NOISY_LADDERS = {
    "FFD": [(1, 1)],
    "CFD": [(2, 0)],
    "GSG": [(4, 1), (8, 1), (12, 1)],
    "CGSG": [(4, 0), (8, 0), (12, 0)],
    "NMXFD": [(4, 0), (8, 0), (12, 0)],
    "MXFD_RAW": [(4, 0), (8, 0), (12, 0)],
    "AVG_CFD": [(4, 0), (8, 0), (12, 0)],
}
