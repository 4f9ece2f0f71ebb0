"""
Gradient estimation schemes.

Every scheme takes a callable objective f(x) -> float and a point x and
returns a GradientEstimate carrying the vector and the number of objective
calls it consumed:

    FFD       forward differences, step σh                      N = n+1
    CFD       central differences, step σh                      N = 2n
    GSG       Gaussian smoothed gradient, M random directions   N = M+1
    CGSG      central Gaussian smoothed gradient                N = 2M
    NMXFD     normalized mixed central differences              N = 2mn
    MXFD_RAW  same combination with the raw weights a'_j        N = 2mn
    AVG_CFD   plain average of the m central differences        N = 2mn
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

import config
from coefficients import mixing_coefficients, uniform_weights
from errors import EstimationError, UnknownNameError
from kernels import gaussian_pdf

Objective = Callable[[np.ndarray], float]


class Scheme(str, Enum):
    FFD = "FFD"
    CFD = "CFD"
    GSG = "GSG"
    CGSG = "CGSG"
    MXFD_RAW = "MXFD_RAW"
    NMXFD = "NMXFD"
    AVG_CFD = "AVG_CFD"


MIXED_SCHEMES = (Scheme.NMXFD, Scheme.MXFD_RAW, Scheme.AVG_CFD)
SAMPLING_SCHEMES = (Scheme.GSG, Scheme.CGSG)


def parse_scheme(name) -> Scheme:
    if isinstance(name, Scheme):
        return name
    key = str(name).strip().upper().replace("-", "_")
    try:
        return Scheme(key)
    except ValueError:
        raise UnknownNameError("scheme", str(name), [s.value for s in Scheme])


# ============================================================================
# CONFIG AND RESULT TYPES
# ============================================================================

class EstimatorConfig(BaseModel):
    """
    Scheme plus its parameters. σ is the smoothing scale; h, m and S = m·h
    shape the mixed schemes (for FFD/CFD the step is σ·h); M is the number
    of random directions for GSG/CGSG.
    """

    model_config = ConfigDict(frozen=True)

    scheme: Scheme
    sigma: float = Field(gt=0)
    h: Optional[float] = Field(default=None, gt=0)
    m: int = Field(default=config.DEFAULT_M, ge=1)
    S: Optional[float] = Field(default=None, gt=0)
    M: int = Field(default=config.DEFAULT_DIRECTIONS, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator("scheme", mode="before")
    @classmethod
    def _scheme(cls, value):
        return parse_scheme(value)

    @model_validator(mode="after")
    def _resolve_step(self):
        h, S, m = self.h, self.S, self.m
        if self.scheme in (Scheme.FFD, Scheme.CFD):
            if h is None:
                h = S if S is not None else config.DEFAULT_FD_H
            m, S = 1, h
        elif h is not None and S is not None:
            if abs(S - m * h) > 1e-15 * max(1.0, abs(S)):
                raise ValueError(f"S={S} is not m·h={m * h} (m={m}, h={h})")
        elif h is not None:
            S = m * h
        else:
            S = S if S is not None else config.DEFAULT_S
            h = S / m
        object.__setattr__(self, "h", float(h))
        object.__setattr__(self, "S", float(S))
        object.__setattr__(self, "m", int(m))
        return self

    def expected_evals(self, n: int) -> int:
        return expected_evals(self.scheme, n, m=self.m, M=self.M)


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    evals: int
    scheme: str = ""

    def to_dict(self) -> Dict:
        return {"scheme": self.scheme, "vector": [float(v) for v in self.vector], "evals": self.evals}


def expected_evals(scheme, n: int, m: int = 1, M: int = 1) -> int:
    scheme = parse_scheme(scheme)
    if scheme == Scheme.FFD:
        return n + 1
    if scheme == Scheme.CFD:
        return 2 * n
    if scheme == Scheme.GSG:
        return M + 1
    if scheme == Scheme.CGSG:
        return 2 * M
    return 2 * m * n


class _EvalCounter:
    """Per-call accumulator: counts objective calls and rejects non-finite values."""

    def __init__(self, f: Objective, scheme: str):
        self.f = f
        self.scheme = scheme
        self.count = 0

    def __call__(self, x: np.ndarray) -> float:
        self.count += 1
        value = float(self.f(x))
        if not math.isfinite(value):
            raise EstimationError(self.scheme, self.count, x, value)
        return value


def _as_point(x: Sequence[float]) -> np.ndarray:
    point = np.array(x, dtype=float).reshape(-1)
    if point.size == 0:
        raise ValueError("x must have at least one coordinate")
    if not np.all(np.isfinite(point)):
        raise ValueError(f"x must be finite, got {point}")
    return point


def _shifted(x: np.ndarray, i: int, t: float) -> np.ndarray:
    y = x.copy()
    y[i] = x[i] + t
    return y


def _check_positive(**values):
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{name} must be a positive real, got {value}")


# ============================================================================
# FINITE DIFFERENCES
# ============================================================================

def ffd(f: Objective, x, step: float) -> GradientEstimate:
    _check_positive(step=step)
    x = _as_point(x)
    counted = _EvalCounter(f, Scheme.FFD.value)
    f0 = counted(x)
    g = np.empty(x.size)
    for i in range(x.size):
        g[i] = (counted(_shifted(x, i, step)) - f0) / step
    return GradientEstimate(g, counted.count, Scheme.FFD.value)


def cfd(f: Objective, x, sigma: float, h: float) -> GradientEstimate:
    _check_positive(sigma=sigma, h=h)
    x = _as_point(x)
    counted = _EvalCounter(f, Scheme.CFD.value)
    t = sigma * h
    g = np.empty(x.size)
    for i in range(x.size):
        g[i] = (counted(_shifted(x, i, t)) - counted(_shifted(x, i, -t))) / (2.0 * t)
    return GradientEstimate(g, counted.count, Scheme.CFD.value)


def _mixed_central(f: Objective, x, sigma: float, h: float, weights: Sequence[float],
                   scheme: Scheme) -> GradientEstimate:
    _check_positive(sigma=sigma, h=h)
    x = _as_point(x)
    counted = _EvalCounter(f, scheme.value)
    g = np.empty(x.size)
    for i in range(x.size):
        acc = 0.0
        for j, w in enumerate(weights, start=1):
            t = sigma * (j * h)
            acc += w * ((counted(_shifted(x, i, t)) - counted(_shifted(x, i, -t))) / (2.0 * t))
        g[i] = acc
    return GradientEstimate(g, counted.count, scheme.value)


def nmxfd(f: Objective, x, sigma: float, m: int, h: float) -> GradientEstimate:
    table = mixing_coefficients(m, h)
    return _mixed_central(f, x, sigma, h, table.normalized, Scheme.NMXFD)


def mxfd_unnormalized(f: Objective, x, sigma: float, m: int, h: float) -> GradientEstimate:
    table = mixing_coefficients(m, h)
    return _mixed_central(f, x, sigma, h, table.raw, Scheme.MXFD_RAW)


def raw_average_cfd(f: Objective, x, sigma: float, m: int, h: float) -> GradientEstimate:
    return _mixed_central(f, x, sigma, h, uniform_weights(m), Scheme.AVG_CFD)


def trapezoid_filtered_derivative(f: Objective, x, i: int, sigma: float, m: int, h: float) -> float:
    """
    Trapezoid rule, nodes s = k·h for k = -m..m, applied to
    (1/σ)∫_{-S}^{S} f(x + σ s e_i)·s·φ(s) ds. The s = 0 node has zero weight.
    Equals component i of mxfd_unnormalized up to rounding.
    """
    _check_positive(sigma=sigma, h=h)
    x = _as_point(x)
    counted = _EvalCounter(f, "TRAPEZOID")
    terms = []
    for k in range(1, m + 1):
        s = k * h
        w = 0.5 * h if k == m else h
        diff = counted(_shifted(x, i, sigma * s)) - counted(_shifted(x, i, -sigma * s))
        terms.append(w * s * gaussian_pdf(s) * diff / sigma)
    return math.fsum(terms)


# ============================================================================
# GAUSSIAN SMOOTHED GRADIENTS
# ============================================================================

def sample_directions(n: int, M: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((M, n))


def gsg(f: Objective, x, sigma: float, M: int, seed: int) -> GradientEstimate:
    _check_positive(sigma=sigma)
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    x = _as_point(x)
    counted = _EvalCounter(f, Scheme.GSG.value)
    directions = sample_directions(x.size, M, seed)
    f0 = counted(x)
    diffs = np.array([counted(x + sigma * s) - f0 for s in directions])
    g = np.mean((diffs / sigma)[:, None] * directions, axis=0)
    return GradientEstimate(g, counted.count, Scheme.GSG.value)


def cgsg(f: Objective, x, sigma: float, M: int, seed: int) -> GradientEstimate:
    _check_positive(sigma=sigma)
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    x = _as_point(x)
    counted = _EvalCounter(f, Scheme.CGSG.value)
    directions = sample_directions(x.size, M, seed)
    diffs = np.array([counted(x + sigma * s) - counted(x - sigma * s) for s in directions])
    g = np.mean((diffs / (2.0 * sigma))[:, None] * directions, axis=0)
    return GradientEstimate(g, counted.count, Scheme.CGSG.value)


# ============================================================================
# DISPATCH
# ============================================================================

def estimate(f: Objective, x, cfg: EstimatorConfig, seed: Optional[int] = None) -> GradientEstimate:
    """Routes an EstimatorConfig to its scheme. `seed` overrides cfg.seed."""
    seed = cfg.seed if seed is None else seed
    if cfg.scheme == Scheme.FFD:
        return ffd(f, x, cfg.sigma * cfg.h)
    elif cfg.scheme == Scheme.CFD:
        return cfd(f, x, cfg.sigma, cfg.h)
    elif cfg.scheme == Scheme.GSG:
        return gsg(f, x, cfg.sigma, cfg.M, seed)
    elif cfg.scheme == Scheme.CGSG:
        return cgsg(f, x, cfg.sigma, cfg.M, seed)
    elif cfg.scheme == Scheme.NMXFD:
        return nmxfd(f, x, cfg.sigma, cfg.m, cfg.h)
    elif cfg.scheme == Scheme.MXFD_RAW:
        return mxfd_unnormalized(f, x, cfg.sigma, cfg.m, cfg.h)
    elif cfg.scheme == Scheme.AVG_CFD:
        return raw_average_cfd(f, x, cfg.sigma, cfg.m, cfg.h)
    raise UnknownNameError("scheme", str(cfg.scheme), [s.value for s in Scheme])


def config_for_budget(scheme, n: int, k: int, c: int, sigma: float, S: float = config.DEFAULT_S,
                      fd_h: float = config.DEFAULT_FD_H, seed: int = 0) -> EstimatorConfig:
    """
    EstimatorConfig whose evaluation count is N = k·n + c.

    GSG takes M = k·n (c must be 1), CGSG takes M = k·n/2, mixed schemes take
    m = k/2; FFD and CFD have a single rung.
    """
    scheme = parse_scheme(scheme)
    N = k * n + c
    if scheme == Scheme.FFD:
        cfg = EstimatorConfig(scheme=scheme, sigma=sigma, h=fd_h, seed=seed)
    elif scheme == Scheme.CFD:
        cfg = EstimatorConfig(scheme=scheme, sigma=sigma, h=fd_h, seed=seed)
    elif scheme == Scheme.GSG:
        cfg = EstimatorConfig(scheme=scheme, sigma=sigma, M=N - 1, seed=seed)
    elif scheme == Scheme.CGSG:
        if N % 2:
            raise ValueError(f"CGSG needs an even budget, got N={N}")
        cfg = EstimatorConfig(scheme=scheme, sigma=sigma, M=N // 2, seed=seed)
    else:
        if N % (2 * n):
            raise ValueError(f"{scheme.value} needs N to be a multiple of 2n, got N={N}, n={n}")
        cfg = EstimatorConfig(scheme=scheme, sigma=sigma, m=N // (2 * n), S=S, seed=seed)
    if cfg.expected_evals(n) != N:
        raise ValueError(f"{scheme.value} cannot spend exactly N={N} evaluations at n={n}")
    logging.debug(f"{scheme.value} budget N={N} -> {cfg}")
    return cfg
