"""
Reference computations used to validate the estimators:

- filtered_derivative_oracle: (1/σ)∫_{-S}^{S} f(x + σ s e_i)·s·φ(s) ds by adaptive quadrature
- smoothed_gradient_oracle: the full n-dimensional smoothed gradient
  (tensor quadrature for n <= 3, Monte Carlo above)
- closed-form error, bias and variance bounds
- certified local estimates of L and H for objectives that do not declare them
"""

import math
import logging
import warnings
from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate

import config
from coefficients import mixing_coefficients, trapezoid_squared_derivative
from errors import DimensionError, QuadratureError
from estimators import cfd, nmxfd
from kernels import gaussian_pdf, phi_capital

EPS = np.finfo(float).eps
TENSOR_MAX_DIM = 3
# nested quadrature cost grows like (21k)^n; the bound table only pays it up to n = 2
GAP_TABLE_MAX_DIM = 2


class BoundReport(BaseModel):
    """
    `formula` is the theoretical right-hand side, `rounding` an explicit
    floating-point allowance (zero for pure formulas); `bound` is their sum.
    """

    model_config = ConfigDict(frozen=True)

    name: str = ""
    formula: float
    rounding: float = 0.0
    bound: float
    observed: float
    satisfied: bool


def check_bound(observed: float, formula: float, rounding: float = 0.0, name: str = "") -> BoundReport:
    bound = formula + rounding
    return BoundReport(
        name=name,
        formula=formula,
        rounding=rounding,
        bound=bound,
        observed=observed,
        satisfied=bool(observed <= bound * (1.0 + 1e-9)),
    )


# ============================================================================
# QUADRATURE ORACLES
# ============================================================================

def _check_positive(**values):
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{name} must be a positive real, got {value}")


def filtered_derivative_oracle(f, x, i: int, sigma: float, S: float = config.ORACLE_TRUNCATION,
                               tol: float = config.ORACLE_TOL) -> float:
    _check_positive(sigma=sigma, S=S, tol=tol)
    x = np.array(x, dtype=float).reshape(-1)
    f0 = float(f(x))

    def integrand(s):
        y = x.copy()
        y[i] = x[i] + sigma * s
        # subtracting f(x) leaves the integral unchanged (odd weight)
        return (float(f(y)) - f0) * s * gaussian_pdf(s) / sigma

    limit = config.QUAD_EVAL_BUDGET // 42
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr, info = integrate.quad(
            integrand, -S, S, epsabs=tol, epsrel=0.0, limit=limit, points=[0.0], full_output=1
        )[:3]
    if info.get("neval", 0) > config.QUAD_EVAL_BUDGET:
        raise QuadratureError(f"filtered derivative exceeded {config.QUAD_EVAL_BUDGET} evaluations", abserr)
    if not math.isfinite(value) or abserr > tol:
        raise QuadratureError(f"filtered derivative along axis {i} did not reach tol={tol:g}", abserr)
    return float(value)


def filtered_gradient_oracle(f, x, sigma: float, S: float = config.ORACLE_TRUNCATION,
                             tol: float = config.ORACLE_TOL) -> np.ndarray:
    x = np.array(x, dtype=float).reshape(-1)
    return np.array([filtered_derivative_oracle(f, x, i, sigma, S, tol) for i in range(x.size)])


class OracleAccuracy(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: str = Field(default="auto", pattern="^(auto|tensor|monte_carlo)$")
    tol: float = Field(default=1e-9, gt=0)
    samples: int = Field(default=config.MONTE_CARLO_SAMPLES, ge=100)
    seed: int = Field(default=0, ge=0)
    truncation: float = Field(default=config.ORACLE_TRUNCATION, gt=0)


class OracleResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    vector: np.ndarray
    std_error: Optional[np.ndarray] = None
    mode: str


def smoothed_gradient_oracle(f, x, sigma: float, accuracy: Optional[OracleAccuracy] = None) -> OracleResult:
    accuracy = accuracy or OracleAccuracy()
    _check_positive(sigma=sigma)
    x = np.array(x, dtype=float).reshape(-1)
    n = x.size
    mode = accuracy.mode
    if mode == "auto":
        mode = "tensor" if n <= TENSOR_MAX_DIM else "monte_carlo"
    if mode == "tensor":
        if n > TENSOR_MAX_DIM:
            raise DimensionError(
                f"tensor quadrature supports n <= {TENSOR_MAX_DIM}, got n={n}; use mode='monte_carlo'"
            )
        return OracleResult(vector=_smoothed_gradient_tensor(f, x, sigma, accuracy), mode="tensor")
    return _smoothed_gradient_monte_carlo(f, x, sigma, accuracy)


def _smoothed_gradient_tensor(f, x, sigma, accuracy: OracleAccuracy) -> np.ndarray:
    n = x.size
    T = accuracy.truncation
    f0 = float(f(x))
    opts = {"epsabs": accuracy.tol, "epsrel": 1e-12, "limit": 200, "points": [0.0]}
    g = np.empty(n)
    for i in range(n):
        def integrand(*s, i=i):
            s = np.asarray(s)
            weight = math.prod(gaussian_pdf(v) for v in s)
            return (float(f(x + sigma * s)) - f0) * s[i] * weight / sigma

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, abserr = integrate.nquad(integrand, [(-T, T)] * n, opts=[opts] * n)
        if not math.isfinite(value) or abserr > max(accuracy.tol, 1e-12 * abs(value)):
            raise QuadratureError(f"smoothed gradient component {i} did not converge", abserr)
        g[i] = value
    return g


def _smoothed_gradient_monte_carlo(f, x, sigma, accuracy: OracleAccuracy) -> OracleResult:
    rng = np.random.default_rng(accuracy.seed)
    s = rng.standard_normal((accuracy.samples, x.size))
    s = s[np.all(np.abs(s) <= accuracy.truncation, axis=1)]
    f0 = float(f(x))
    diffs = np.array([float(f(x + sigma * row)) - f0 for row in s]) / sigma
    samples = diffs[:, None] * s
    vector = samples.mean(axis=0)
    std_error = samples.std(axis=0, ddof=1) / math.sqrt(len(samples))
    logging.debug(f"Monte Carlo smoothed gradient: {len(samples)} samples, max std error {std_error.max():.3e}")
    return OracleResult(vector=vector, std_error=std_error, mode="monte_carlo")


# ============================================================================
# ERROR AND BIAS BOUNDS
# ============================================================================

def smoothing_gap_bound(L: float, sigma: float, n: int) -> float:
    """‖G_σ - Ḡ_σ‖ <= L σ √(n(15 + 7(n-1)))."""
    if L < 0 or sigma <= 0 or n < 1:
        raise ValueError(f"need L >= 0, sigma > 0, n >= 1 (got L={L}, sigma={sigma}, n={n})")
    return L * sigma * math.sqrt(n * (15 + 7 * (n - 1)))


def nmxfd_error_bound(H: float, sigma: float, S: float, n: int) -> float:
    if H < 0 or sigma < 0 or S <= 0 or n < 1:
        raise ValueError(f"need H >= 0, sigma >= 0, S > 0, n >= 1 (got H={H}, sigma={sigma}, S={S}, n={n})")
    return math.sqrt(n) * H * sigma**2 * S**2 / 6.0


def cfd_error_bound(H: float, sigma: float, h: float, j: int = 1) -> float:
    """Per-component bound for one central difference at step σ·j·h."""
    if j < 1:
        raise ValueError(f"j must be >= 1, got {j}")
    return H * sigma**2 * (j * h) ** 2 / 6.0


def bias_bound_nmxfd(H: float, sigma: float, m: int, h: float, n: int) -> float:
    return nmxfd_error_bound(H, sigma, m * h, n)


def bias_bound_cfd(H: float, sigma: float, h: float, n: int) -> float:
    return math.sqrt(n) * cfd_error_bound(H, sigma, h, 1)


def smoothing_bound_lipschitz_grad(c_phi: float, L: float, sigma: float) -> float:
    """‖G_σ - ∇f‖ <= C_φ L σ for an L-Lipschitz gradient; C_φ depends on the kernel."""
    return c_phi * L * sigma


def smoothing_bound_lipschitz_hess(c_phi: float, H: float, sigma: float) -> float:
    """‖G_σ - ∇f‖ <= C_φ H σ² for an H-Lipschitz Hessian."""
    return c_phi * H * sigma**2


# ============================================================================
# NOISE VARIANCE
# ============================================================================

def _variance_base(n: int, lam: float, sigma: float, h: float) -> float:
    if sigma * h <= 0:
        raise ValueError(f"sigma*h must be positive, got sigma={sigma}, h={h}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return n * lam**2 / (2.0 * sigma**2 * h**2)


def variance_cfd(n: int, lam: float, sigma: float, h: float) -> float:
    return _variance_base(n, lam, sigma, h)


def variance_weighted(n: int, lam: float, sigma: float, h: float, weights: Sequence[float]) -> float:
    """Trace of the noise covariance of Σ w_j·(central difference at σjh)."""
    factor = math.fsum((w / j) ** 2 for j, w in enumerate(weights, start=1))
    return _variance_base(n, lam, sigma, h) * factor


def variance_nmxfd(n: int, lam: float, sigma: float, h: float, m: int) -> float:
    table = mixing_coefficients(m, h)
    return _variance_base(n, lam, sigma, h) * table.variance_factor()


def variance_ffd(n: int, lam: float, sigma: float, h: float) -> float:
    # independent ε at x + t e_i and at the shared baseline x
    return 4.0 * _variance_base(n, lam, sigma, h)


def variance_nmxfd_upper_bound(n: int, lam: float, sigma: float, S: float, m: int) -> float:
    """
    n λ² h (|I₂ - Φ(S)| + Φ(S)) / (σ² C²), with I₂ the trapezoid value of
    2∫₀ˢ|φ'|². Vanishes like 1/m for fixed S.
    """
    h = S / m
    table = mixing_coefficients(m, h)
    i2 = trapezoid_squared_derivative(m, h)
    phi = phi_capital(S)
    return n * lam**2 * h * (abs(i2 - phi) + phi) / (sigma**2 * table.total**2)


# ============================================================================
# SMOOTHNESS CONSTANTS
# ============================================================================

def _hessian(objective, u: np.ndarray, delta: float) -> np.ndarray:
    n = u.size
    hess = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = delta
        hess[:, j] = (objective.gradient(u + e) - objective.gradient(u - e)) / (2.0 * delta)
    return 0.5 * (hess + hess.T)


def estimate_constants(objective, center, radius: float, seed: int = 0, samples: int = 32,
                       safety: float = config.SAFETY_FACTOR) -> Dict[str, float]:
    """
    Local (L, H) overestimates on the cube center ± radius: the largest
    sampled spectral norm of the Hessian, and the largest sampled Hessian
    difference quotient, each multiplied by `safety`.
    """
    center = np.array(center, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    delta = 1e-5 * max(1.0, float(np.max(np.abs(center))))
    points = [center] + [center + rng.uniform(-radius, radius, size=center.size) for _ in range(samples)]
    hessians = [_hessian(objective, u, delta) for u in points]
    L = max(float(np.linalg.norm(hs, 2)) for hs in hessians)

    H = 0.0
    for k in range(1, len(points)):
        for u, hu, v, hv in ((points[0], hessians[0], points[k], hessians[k]),
                             (points[k - 1], hessians[k - 1], points[k], hessians[k])):
            dist = float(np.linalg.norm(u - v))
            if dist > 0:
                H = max(H, float(np.linalg.norm(hu - hv, 2)) / dist)
    logging.debug(f"{objective.name}: sampled L={L:.4g}, H={H:.4g} on radius {radius:g}")
    return {"L": safety * L, "H": safety * H}


def difference_rounding(objective, x: np.ndarray, t_min: float, t_max: float) -> float:
    """
    Norm-wise rounding allowance for central-difference estimators whose
    smallest step is t_min: errors in f values and in x + t, each a few ulps.
    """
    n = x.size
    f_scale = abs(objective(x))
    for i in range(n):
        for t in (t_max, -t_max):
            y = x.copy()
            y[i] += t
            f_scale = max(f_scale, abs(objective(y)))
    g_scale = float(np.max(np.abs(objective.gradient(x)))) if objective.grad is not None else 0.0
    x_scale = float(np.max(np.abs(x))) + t_max
    per_component = (8.0 * EPS * f_scale + 4.0 * EPS * x_scale * g_scale) / t_min
    return math.sqrt(n) * per_component


# ============================================================================
# BOUND TABLE
# ============================================================================

def bound_table(objective, x, sigma: float, m: int, h: float, lam: float = config.DEFAULT_LAMBDA,
                seed: int = 0) -> Dict:
    """All applicable bounds for one (objective, x, σ, m, h) as BoundReports."""
    x = objective.check_point(x).copy()
    n = x.size
    S = m * h
    L, H = objective.lipschitz_grad, objective.lipschitz_hess
    source = "declared"
    if L is None or H is None:
        estimated = estimate_constants(objective, x, radius=sigma * max(S, config.ORACLE_TRUNCATION), seed=seed)
        L = estimated["L"] if L is None else L
        H = estimated["H"] if H is None else H
        source = "estimated"

    true_grad = objective.gradient(x)
    reports = {}

    if n <= GAP_TABLE_MAX_DIM:
        G = smoothed_gradient_oracle(objective, x, sigma).vector
        G_bar = filtered_gradient_oracle(objective, x, sigma)
        reports["smoothing_gap"] = check_bound(float(np.linalg.norm(G - G_bar)),
                                               smoothing_gap_bound(L, sigma, n), 2e-9 * math.sqrt(n),
                                               name="smoothing_gap")

    mixed = nmxfd(objective, x, sigma, m, h).vector
    rounding = difference_rounding(objective, x, sigma * h, sigma * S)
    mixed_error = float(np.linalg.norm(mixed - true_grad))
    reports["nmxfd_error"] = check_bound(mixed_error, nmxfd_error_bound(H, sigma, S, n), rounding,
                                         name="nmxfd_error")
    reports["bias_nmxfd"] = check_bound(mixed_error, bias_bound_nmxfd(H, sigma, m, h, n), rounding,
                                        name="bias_nmxfd")

    central = cfd(objective, x, sigma, h).vector
    reports["cfd_error"] = check_bound(float(np.max(np.abs(central - true_grad))),
                                       cfd_error_bound(H, sigma, h, 1),
                                       difference_rounding(objective, x, sigma * h, sigma * h) / math.sqrt(n),
                                       name="cfd_error")

    if lam > 0:
        reports["variance_nmxfd_vs_cfd"] = check_bound(variance_nmxfd(n, lam, sigma, h, m),
                                                       variance_cfd(n, lam, sigma, h),
                                                       name="variance_nmxfd_vs_cfd")

    return {
        "function": objective.name,
        "x": [float(v) for v in x],
        "sigma": sigma,
        "m": m,
        "h": h,
        "S": S,
        "lambda": lam,
        "L": L,
        "H": H,
        "constants_source": source,
        "variance_cfd": variance_cfd(n, lam, sigma, h) if lam > 0 else 0.0,
        "variance_nmxfd": variance_nmxfd(n, lam, sigma, h, m) if lam > 0 else 0.0,
        "reports": {name: report.model_dump() for name, report in reports.items()},
    }
