"""
Bucket benchmark for gradient estimators.

1. Run BFGS (analytic gradients) on every test function from its start x0.
2. For α = 10^0 ... 10^-6 pick the first iterate with ‖∇f(x_k)‖/‖∇f(x0)‖ <= α.
3. At each bucket point estimate the gradient with every scheme and budget N
   and record η = ‖g - ∇f‖/‖∇f‖ (averaged over noise realizations when λ > 0).
4. Report the median of log10 η over functions per (scheme, N, bucket).
"""

import io
import math
import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

import config
from errors import ExclusionError, GradmixError, LineSearchError
from estimators import (
    MIXED_SCHEMES,
    Scheme,
    config_for_budget,
    estimate,
    EstimatorConfig,
    parse_scheme,
)
from noise import NoiseSpec, noisy_wrap
from oracles import variance_cfd, variance_ffd, variance_nmxfd, variance_weighted
from coefficients import mixing_coefficients, uniform_weights
from testfns import Objective, random_start, resolve_suite
from utils import derive_seed

# MLflow tracking
try:
    import mlflow
    HAS_MLFLOW = True
except ImportError:
    HAS_MLFLOW = False
    logging.warning("MLflow not available. Tracking will be skipped.")


# ============================================================================
# BFGS TRAJECTORIES
# ============================================================================

@dataclass
class BfgsResult:
    trajectory: List[np.ndarray]
    grad_norms: List[float]
    truncated: bool = False
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.trajectory) - 1

    @property
    def x(self) -> np.ndarray:
        return self.trajectory[-1]


def armijo_search(f, xk: np.ndarray, fk: float, pk: np.ndarray, slope: float,
                  c1: float = 1e-4, shrink: float = 0.5, max_halvings: int = 60) -> float:
    """
    Backtracking from α = 1 until f(x + αp) <= f(x) + c1·α·∇fᵀp and f(x + αp) < f(x).
    The strict decrease matters once c1·α·∇fᵀp is below the rounding of f.
    """
    alpha = 1.0
    for _ in range(max_halvings):
        trial = f(xk + alpha * pk)
        if math.isfinite(trial) and trial <= fk + c1 * alpha * slope and trial < fk:
            return alpha
        alpha *= shrink
    raise LineSearchError(f"no sufficient decrease after {max_halvings} halvings")


def bfgs_minimize(f: Objective, x0, grad_tol: float = config.BFGS_GRAD_TOL,
                  max_iter: int = config.BFGS_MAX_ITER) -> BfgsResult:
    """
    BFGS with the inverse-Hessian update and Armijo backtracking. Stops when
    ‖∇f(x)‖ <= grad_tol·(1 + ‖∇f(x0)‖); a failed line search ends the run
    with truncated=True.
    """
    if grad_tol <= 0:
        raise ValueError(f"grad_tol must be positive, got {grad_tol}")
    x = np.array(x0, dtype=float).reshape(-1)
    g = f.gradient(x)
    fx = f(x)
    n = x.size
    identity = np.eye(n)
    Hk = identity.copy()

    threshold = grad_tol * (1.0 + float(np.linalg.norm(g)))
    result = BfgsResult(trajectory=[x.copy()], grad_norms=[float(np.linalg.norm(g))])
    if result.grad_norms[0] <= threshold:
        result.reason = "converged"
        return result

    for k in range(max_iter):
        pk = -Hk @ g
        slope = float(g @ pk)
        if slope >= 0:
            # lost descent: restart from steepest descent
            Hk = identity.copy()
            pk = -g
            slope = -float(g @ g)
        try:
            alpha = armijo_search(f, x, fx, pk, slope)
        except LineSearchError as e:
            result.truncated = True
            result.reason = str(e)
            logging.debug(f"{getattr(f, 'name', 'f')}: line search failed at iteration {k}")
            return result

        x_new = x + alpha * pk
        if np.array_equal(x_new, x):
            result.truncated = True
            result.reason = "step below the resolution of x"
            return result
        g_new = f.gradient(x_new)
        sk = x_new - x
        yk = g_new - g
        sy = float(sk @ yk)
        if k == 0 and sy > 0:
            Hk = (sy / float(yk @ yk)) * identity
        if sy > 1e-12 * float(np.linalg.norm(sk)) * float(np.linalg.norm(yk)):
            rho = 1.0 / sy
            A1 = identity - rho * np.outer(sk, yk)
            A2 = identity - rho * np.outer(yk, sk)
            Hk = A1 @ Hk @ A2 + rho * np.outer(sk, sk)

        x, g, fx = x_new, g_new, f(x_new)
        result.trajectory.append(x.copy())
        result.grad_norms.append(float(np.linalg.norm(g)))
        if result.grad_norms[-1] <= threshold:
            result.reason = "converged"
            return result

    result.reason = "max_iter"
    return result


# ============================================================================
# BUCKETS
# ============================================================================

class BucketSet(BaseModel):
    function: str
    alphas: List[float]
    points: List[Optional[List[float]]]
    indices: List[Optional[int]]
    ratios: List[Optional[float]]
    truncated: bool = False

    def present(self) -> List[bool]:
        return [p is not None for p in self.points]


def extract_buckets(trajectory: Sequence, f: Objective, alphas: Sequence[float] = config.ALPHAS,
                    truncated: bool = False) -> BucketSet:
    if isinstance(trajectory, BfgsResult):
        truncated = truncated or trajectory.truncated
        trajectory = trajectory.trajectory
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    norms = [float(np.linalg.norm(f.gradient(x))) for x in trajectory]
    if norms[0] == 0.0:
        raise ExclusionError(f"{f.name}: gradient vanishes at x0; function excluded")

    ratios = [v / norms[0] for v in norms]
    points, indices, hit_ratios = [], [], []
    for alpha in alphas:
        # an exact stationary point has no relative error to measure
        idx = next((k for k, r in enumerate(ratios) if 0.0 < r <= alpha), None)
        indices.append(idx)
        points.append(None if idx is None else [float(v) for v in trajectory[idx]])
        hit_ratios.append(None if idx is None else ratios[idx])
    return BucketSet(function=f.name, alphas=list(alphas), points=points, indices=indices,
                     ratios=hit_ratios, truncated=truncated)


def build_buckets(objective: Objective, seed: int, jitter: float = 0.0,
                  grad_tol: float = config.BFGS_GRAD_TOL, max_iter: int = config.BFGS_MAX_ITER,
                  alphas: Sequence[float] = config.ALPHAS) -> BucketSet:
    x0 = random_start(objective, derive_seed(seed, "start", objective.name), jitter)
    run = bfgs_minimize(objective, x0, grad_tol, max_iter)
    logging.info(f"  {objective.name}: BFGS {run.iterations} iterations ({run.reason})")
    return extract_buckets(run, objective, alphas)


def relative_error(g, grad_true) -> float:
    grad_true = np.asarray(grad_true, dtype=float)
    denom = float(np.linalg.norm(grad_true))
    if denom == 0.0:
        raise ValueError("relative error is undefined for a zero true gradient")
    return float(np.linalg.norm(np.asarray(g, dtype=float) - grad_true)) / denom


# ============================================================================
# BENCHMARK CONFIG AND REPORT
# ============================================================================

def ladder_label(k: int, c: int) -> str:
    head = "n" if k == 1 else f"{k}n"
    return head if c == 0 else f"{head}+{c}"


class BenchmarkConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    schemes: List[Scheme] = [Scheme.FFD, Scheme.CFD, Scheme.GSG, Scheme.CGSG, Scheme.NMXFD]
    sigma: float = Field(default=config.DEFAULT_SIGMA, gt=0)
    lam: float = Field(default=0.0, ge=0)
    realizations: int = Field(default=1, ge=1)
    suite: List[str] = ["all"]
    seed: int = Field(default=config.FALLBACK_SEED, ge=0, lt=2**64)
    # base of the noise streams; None derives them from `seed`
    noise_seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    S: float = Field(default=config.DEFAULT_S, gt=0)
    fd_h: float = Field(default=config.DEFAULT_FD_H, gt=0)
    ladders: Optional[Dict[str, List[Tuple[int, int]]]] = None
    alphas: List[float] = list(config.ALPHAS)
    grad_tol: float = Field(default=config.BFGS_GRAD_TOL, gt=0)
    max_iter: int = Field(default=config.BFGS_MAX_ITER, ge=1)
    jitter: float = Field(default=0.0, ge=0)
    jobs: int = Field(default=1, ge=1)

    @field_validator("schemes", mode="before")
    @classmethod
    def _schemes(cls, value):
        if isinstance(value, str):
            value = value.split(",")
        return [parse_scheme(v) for v in value]

    @field_validator("suite", mode="before")
    @classmethod
    def _suite(cls, value):
        if isinstance(value, str):
            value = [part.strip() for part in value.split(",")]
        return list(value)

    @model_validator(mode="after")
    def _check_ladders(self):
        for scheme in self.schemes:
            for k, c in self.ladder_for(scheme):
                if k < 1 or c < 0:
                    raise ValueError(f"invalid rung ({k}, {c}) for {scheme.value}")
                if scheme in MIXED_SCHEMES + (Scheme.CGSG,) and (k % 2 or c):
                    raise ValueError(f"{scheme.value} needs rungs N = k·n with even k, got ({k}, {c})")
                if scheme == Scheme.GSG and c != 1:
                    raise ValueError(f"GSG rungs are N = k·n + 1, got ({k}, {c})")
        return self

    @property
    def noisy(self) -> bool:
        return self.lam > 0 or self.realizations > 1

    def ladder_for(self, scheme: Scheme) -> List[Tuple[int, int]]:
        if self.ladders and scheme.value in self.ladders:
            return [tuple(r) for r in self.ladders[scheme.value]]
        defaults = config.NOISY_LADDERS if self.noisy else config.NOISE_FREE_LADDERS
        return list(defaults[scheme.value])

    def echo(self) -> Dict:
        """Config as recorded in reports; scheduling knobs are left out."""
        data = self.model_dump(mode="json", exclude={"jobs", "ladders"})
        data["ladders"] = {
            s.value: [ladder_label(k, c) for k, c in self.ladder_for(s)] for s in self.schemes
        }
        return data


class CellResult(BaseModel):
    scheme: str
    budget: str
    bucket: int
    alpha: float
    median_log10_eta: Optional[float] = None
    count: int = 0
    failures: int = 0


class BenchmarkReport(BaseModel):
    config: Dict = {}
    cells: List[CellResult] = []
    functions: List[Dict] = []
    failures: List[Dict] = []
    notes: List[str] = []

    def cell(self, scheme, budget: str, bucket: int) -> Optional[CellResult]:
        scheme = parse_scheme(scheme).value
        for c in self.cells:
            if c.scheme == scheme and c.budget == budget and c.bucket == bucket:
                return c
        return None

    def total_failures(self) -> int:
        return sum(c.failures for c in self.cells)


# ============================================================================
# BENCHMARK ENGINE
# ============================================================================

@dataclass
class FunctionOutcome:
    name: str
    dim: int
    present: List[bool] = field(default_factory=list)
    truncated: bool = False
    excluded: Optional[str] = None
    values: Dict[Tuple[str, str, int], float] = field(default_factory=dict)
    failures: List[Dict] = field(default_factory=list)


def _eta_at_point(objective: Objective, point: np.ndarray, grad_true: np.ndarray, est_cfg: EstimatorConfig,
                  cfg: BenchmarkConfig, cell_seed: int, noise_cell_seed: int) -> float:
    etas = []
    for r in range(cfg.realizations):
        trial_seed = derive_seed(cell_seed, r)
        f = objective
        if cfg.lam > 0:
            noise_seed = derive_seed(derive_seed(noise_cell_seed, r), "noise")
            f = noisy_wrap(objective, NoiseSpec(lam=cfg.lam, seed=noise_seed))
        result = estimate(f, point, est_cfg, seed=derive_seed(trial_seed, "directions"))
        etas.append(relative_error(result.vector, grad_true))
    return float(np.mean(etas))


def _run_function(objective: Objective, cfg: BenchmarkConfig) -> FunctionOutcome:
    outcome = FunctionOutcome(name=objective.name, dim=objective.dim)
    try:
        buckets = build_buckets(objective, cfg.seed, cfg.jitter, cfg.grad_tol, cfg.max_iter, cfg.alphas)
    except ExclusionError as e:
        outcome.excluded = str(e)
        outcome.present = [False] * len(cfg.alphas)
        return outcome
    outcome.present = buckets.present()
    outcome.truncated = buckets.truncated
    n = objective.dim

    for b, point in enumerate(buckets.points):
        if point is None:
            continue
        point = np.array(point)
        grad_true = objective.gradient(point)
        for scheme in cfg.schemes:
            for k, c in cfg.ladder_for(scheme):
                label = ladder_label(k, c)
                key = (scheme.value, label, b)
                cell_seed = derive_seed(cfg.seed, objective.name, b, scheme.value, label)
                noise_cell_seed = cell_seed if cfg.noise_seed is None else derive_seed(
                    cfg.noise_seed, objective.name, b, scheme.value, label)
                try:
                    est_cfg = config_for_budget(scheme, n, k, c, cfg.sigma, cfg.S, cfg.fd_h)
                    eta = _eta_at_point(objective, point, grad_true, est_cfg, cfg, cell_seed, noise_cell_seed)
                    outcome.values[key] = math.log10(max(eta, config.ETA_FLOOR))
                except (GradmixError, ValueError) as e:
                    logging.warning(f"  {objective.name} B{b} {scheme.value} N={label}: {e}")
                    outcome.failures.append({
                        "function": objective.name, "scheme": scheme.value, "budget": label,
                        "bucket": b, "error": str(e),
                    })
    return outcome


def _aggregate(cfg: BenchmarkConfig, outcomes: List[FunctionOutcome]) -> BenchmarkReport:
    report = BenchmarkReport(config=cfg.echo())
    failure_keys = {}
    for outcome in outcomes:
        report.functions.append({
            "name": outcome.name,
            "dim": outcome.dim,
            "buckets_present": outcome.present,
            "truncated": outcome.truncated,
            "excluded": outcome.excluded is not None,
        })
        if outcome.excluded:
            report.notes.append(outcome.excluded)
        if outcome.truncated:
            report.notes.append(f"{outcome.name}: BFGS line search stopped early; later buckets may be absent")
        for failure in outcome.failures:
            key = (failure["scheme"], failure["budget"], failure["bucket"])
            failure_keys[key] = failure_keys.get(key, 0) + 1
            report.failures.append(failure)

    for scheme in cfg.schemes:
        for k, c in cfg.ladder_for(scheme):
            label = ladder_label(k, c)
            for b, alpha in enumerate(cfg.alphas):
                key = (scheme.value, label, b)
                values = [o.values[key] for o in outcomes if key in o.values]
                count = sum(1 for o in outcomes if o.present and o.present[b])
                report.cells.append(CellResult(
                    scheme=scheme.value,
                    budget=label,
                    bucket=b,
                    alpha=alpha,
                    median_log10_eta=float(np.median(values)) if values else None,
                    count=count,
                    failures=failure_keys.get(key, 0),
                ))
    return report


def _run(cfg: BenchmarkConfig) -> BenchmarkReport:
    objectives = resolve_suite(cfg.suite)
    logging.info("=" * 80)
    logging.info(f"BENCHMARK: σ={cfg.sigma:g}, λ={cfg.lam:g}, R={cfg.realizations}, "
                 f"{len(objectives)} functions, schemes {[s.value for s in cfg.schemes]}")
    logging.info("=" * 80)

    outcomes: List[Optional[FunctionOutcome]] = [None] * len(objectives)
    if cfg.jobs == 1:
        for idx, objective in enumerate(objectives):
            outcomes[idx] = _run_function(objective, cfg)
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as executor:
            futures = {executor.submit(_run_function, obj, cfg): idx for idx, obj in enumerate(objectives)}
            for future in as_completed(futures):
                outcomes[futures[future]] = future.result()

    report = _aggregate(cfg, outcomes)
    logging.info(f"✓ {len(report.cells)} cells, {report.total_failures()} failures")
    return report


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    """Noise-free benchmark: one estimate per (function, bucket, scheme, N)."""
    if cfg.lam != 0 or cfg.realizations != 1:
        cfg = cfg.model_copy(update={"lam": 0.0, "realizations": 1})
    return _run(cfg)


def run_noisy_benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    """η per point is the mean over `realizations` independently seeded noise draws."""
    return _run(cfg)


# ============================================================================
# VARIANCE EXPERIMENT
# ============================================================================

class VarianceResult(BaseModel):
    scheme: str
    trials: int
    lam: float
    sigma: float
    h: float
    m: int
    empirical: float
    theoretical: Optional[float] = None


def theoretical_variance(est_cfg: EstimatorConfig, n: int, lam: float) -> Optional[float]:
    scheme, sigma, h, m = est_cfg.scheme, est_cfg.sigma, est_cfg.h, est_cfg.m
    if scheme == Scheme.CFD:
        return variance_cfd(n, lam, sigma, h)
    if scheme == Scheme.FFD:
        return variance_ffd(n, lam, sigma, h)
    if scheme == Scheme.NMXFD:
        return variance_nmxfd(n, lam, sigma, h, m)
    if scheme == Scheme.MXFD_RAW:
        return variance_weighted(n, lam, sigma, h, mixing_coefficients(m, h).raw)
    if scheme == Scheme.AVG_CFD:
        return variance_weighted(n, lam, sigma, h, uniform_weights(m))
    return None


def variance_experiment(scheme, f, x, sigma: float, h: float, m: int = 1, lam: float = config.DEFAULT_LAMBDA,
                        trials: int = config.MIN_VARIANCE_TRIALS, seed: int = 0,
                        M: int = config.DEFAULT_DIRECTIONS) -> VarianceResult:
    """
    Sample trace of the noise covariance: mean of ‖ĝ_noisy - ĝ_clean‖² over
    `trials` estimates drawing from one seeded noise stream.
    """
    if trials < config.MIN_VARIANCE_TRIALS:
        raise ValueError(f"trials must be >= {config.MIN_VARIANCE_TRIALS}, got {trials}")
    est_cfg = EstimatorConfig(scheme=scheme, sigma=sigma, h=h, m=m, M=M, seed=seed)
    x = np.array(x, dtype=float).reshape(-1)
    clean = estimate(f, x, est_cfg).vector
    noisy = noisy_wrap(f, NoiseSpec(lam=lam, seed=derive_seed(seed, "variance")))
    total = 0.0
    for _ in range(trials):
        diff = estimate(noisy, x, est_cfg).vector - clean
        total += float(diff @ diff)
    result = VarianceResult(
        scheme=est_cfg.scheme.value, trials=trials, lam=lam, sigma=sigma, h=est_cfg.h, m=est_cfg.m,
        empirical=total / trials, theoretical=theoretical_variance(est_cfg, x.size, lam),
    )
    logging.info(f"{result.scheme}: empirical variance {result.empirical:.6e}, theory {result.theoretical}")
    return result


# ============================================================================
# TABLE EMISSION
# ============================================================================

CSV_COLUMNS = ["scheme", "budget", "bucket", "alpha", "median_log10_eta", "count", "failures",
               "seed", "sigma", "lambda", "fd_h", "S", "realizations"]


def _rows(report: BenchmarkReport) -> List[Tuple[str, str]]:
    rows = []
    for c in report.cells:
        if (c.scheme, c.budget) not in rows:
            rows.append((c.scheme, c.budget))
    return rows


def _markdown(report: BenchmarkReport) -> str:
    n_buckets = max([c.bucket for c in report.cells], default=len(config.ALPHAS) - 1) + 1
    lines = [
        "| Scheme | N | " + " | ".join(f"B{b}" for b in range(n_buckets)) + " |",
        "|---|---|" + "---|" * n_buckets,
    ]
    # best (bold) and second best (underlined) per bucket column
    ranks = {}
    for b in range(n_buckets):
        values = sorted({c.median_log10_eta for c in report.cells
                         if c.bucket == b and c.median_log10_eta is not None})
        for rank, value in enumerate(values[:2]):
            ranks[(b, value)] = rank

    for scheme, budget in _rows(report):
        cells = []
        for b in range(n_buckets):
            cell = report.cell(scheme, budget, b)
            if cell is None or cell.median_log10_eta is None:
                cells.append("n/a")
                continue
            text = f"{cell.median_log10_eta:.2f}"
            rank = ranks.get((b, cell.median_log10_eta))
            if rank == 0:
                text = f"**{text}**"
            elif rank == 1:
                text = f"<u>{text}</u>"
            cells.append(text)
        lines.append(f"| {scheme} | {budget} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _csv(report: BenchmarkReport) -> str:
    meta = report.config
    records = [{
        "scheme": c.scheme,
        "budget": c.budget,
        "bucket": c.bucket,
        "alpha": c.alpha,
        "median_log10_eta": c.median_log10_eta,
        "count": c.count,
        "failures": c.failures,
        "seed": meta.get("seed"),
        "sigma": meta.get("sigma"),
        "lambda": meta.get("lam"),
        "fd_h": meta.get("fd_h"),
        "S": meta.get("S"),
        "realizations": meta.get("realizations"),
    } for c in report.cells]
    df = pd.DataFrame(records, columns=CSV_COLUMNS)
    buffer = io.StringIO()
    df.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def emit_table(report: BenchmarkReport, fmt: str = "json") -> str:
    fmt = fmt.lower()
    if fmt == "json":
        return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"
    if fmt == "csv":
        return _csv(report)
    if fmt in ("markdown", "md"):
        return _markdown(report)
    raise ValueError(f"Unknown format '{fmt}'. Available: ['csv', 'json', 'markdown']")


def log_to_mlflow(report: BenchmarkReport, run_name: str):
    """Params, one metric per cell and the JSON report as an artifact."""
    if not HAS_MLFLOW:
        logging.warning("MLflow not available; skipping tracking")
        return
    mlflow.set_experiment(config.MLFLOW_EXPERIMENT_NAME)
    with mlflow.start_run(run_name=run_name):
        for key, value in report.config.items():
            mlflow.log_param(key, json.dumps(value) if isinstance(value, (list, dict)) else value)
        for c in report.cells:
            if c.median_log10_eta is not None:
                mlflow.log_metric(f"{c.scheme}_{c.budget}_B{c.bucket}".replace("+", "p"), c.median_log10_eta)
        mlflow.log_metric("failures", report.total_failures())
        mlflow.log_dict(report.model_dump(mode="json"), "benchmark_report.json")
    logging.info(f"   MLflow run logged: {run_name}")


if __name__ == "__main__":
    try:
        report = run_benchmark(BenchmarkConfig(sigma=1e-5))
        print(emit_table(report, "markdown"))
    except Exception as e:
        logging.error(f"\n❌ Failed: {e}")
        raise
