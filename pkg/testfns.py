"""
Built-in differentiable test objectives.

Each entry carries its analytic gradient, the smoothness constants that are
known in closed form (L for the gradient, H for the Hessian), a documented
starting point x0 and an evaluation box on which f and ∇f stay finite.

Further objectives can be added at runtime with `register`.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from errors import DimensionError, UnknownNameError


@dataclass(frozen=True)
class Objective:
    name: str
    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_grad: Optional[float] = None
    lipschitz_hess: Optional[float] = None
    start: Tuple[float, ...] = ()
    box: Tuple[float, float] = (-1.0, 1.0)
    description: str = ""
    any_dim: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"{self.name}: dim must be >= 1, got {self.dim}")
        if len(self.start) != self.dim:
            raise ValueError(f"{self.name}: start has {len(self.start)} coordinates, expected {self.dim}")

    def __call__(self, x) -> float:
        return float(self.eval(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        if self.grad is None:
            raise ValueError(f"{self.name} has no analytic gradient")
        return np.asarray(self.grad(np.asarray(x, dtype=float)), dtype=float)

    def check_point(self, x) -> np.ndarray:
        point = np.asarray(x, dtype=float).reshape(-1)
        if not self.any_dim and point.size != self.dim:
            raise DimensionError(f"{self.name} expects {self.dim} coordinates, got {point.size}")
        return point

    @property
    def x0(self) -> np.ndarray:
        return np.array(self.start, dtype=float)

    def summary(self) -> Dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "L": self.lipschitz_grad,
            "H": self.lipschitz_hess,
            "start": list(self.start),
            "box": list(self.box),
            "description": self.description,
            "any_dim": self.any_dim,
        }


# ============================================================================
# QUADRATICS
# ============================================================================

def sphere(x):
    return float(np.sum(x**2))


def sphere_grad(x):
    return 2.0 * x


ILL_DIAG = 10.0 ** (3.0 * np.arange(5) / 4.0)  # condition number 1e3


def ill_quadratic(x):
    return float(0.5 * np.sum(ILL_DIAG * x**2))


def ill_quadratic_grad(x):
    return ILL_DIAG * x


SCALED_Q = 5.0 * (2.0 * np.eye(6) - np.eye(6, k=1) - np.eye(6, k=-1))
SCALED_B = np.array([1.0, -2.0, 0.5, 1.5, -1.0, 0.25])
SCALED_L = float(np.max(np.linalg.eigvalsh(SCALED_Q)))


def scaled_quadratic(x):
    return float(0.5 * x @ SCALED_Q @ x + SCALED_B @ x)


def scaled_quadratic_grad(x):
    return SCALED_Q @ x + SCALED_B


# ============================================================================
# POLYNOMIAL VALLEYS
# ============================================================================

def cubic_valley(x):
    return float(np.sum(np.abs(x) ** 3 + 3.0 * x**2))


def cubic_valley_grad(x):
    return 3.0 * x * np.abs(x) + 6.0 * x


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def rosenbrock_grad(x):
    g = np.zeros_like(x)
    inner = x[1:] - x[:-1] ** 2
    g[:-1] = -400.0 * x[:-1] * inner - 2.0 * (1.0 - x[:-1])
    g[1:] += 200.0 * inner
    return g


def powell_singular(x):
    x1, x2, x3, x4 = x
    return float((x1 + 10 * x2) ** 2 + 5 * (x3 - x4) ** 2 + (x2 - 2 * x3) ** 4 + 10 * (x1 - x4) ** 4)


def powell_singular_grad(x):
    x1, x2, x3, x4 = x
    a = x1 + 10 * x2
    b = x3 - x4
    c = (x2 - 2 * x3) ** 3
    d = (x1 - x4) ** 3
    return np.array([
        2 * a + 40 * d,
        20 * a + 4 * c,
        10 * b - 8 * c,
        -10 * b - 40 * d,
    ])


def wood(x):
    x1, x2, x3, x4 = x
    return float(
        100 * (x2 - x1**2) ** 2 + (1 - x1) ** 2
        + 90 * (x4 - x3**2) ** 2 + (1 - x3) ** 2
        + 10.1 * ((x2 - 1) ** 2 + (x4 - 1) ** 2)
        + 19.8 * (x2 - 1) * (x4 - 1)
    )


def wood_grad(x):
    x1, x2, x3, x4 = x
    return np.array([
        -400 * x1 * (x2 - x1**2) - 2 * (1 - x1),
        200 * (x2 - x1**2) + 20.2 * (x2 - 1) + 19.8 * (x4 - 1),
        -360 * x3 * (x4 - x3**2) - 2 * (1 - x3),
        180 * (x4 - x3**2) + 20.2 * (x4 - 1) + 19.8 * (x2 - 1),
    ])


def beale(x):
    x1, x2 = x
    a1 = 1.5 - x1 + x1 * x2
    a2 = 2.25 - x1 + x1 * x2**2
    a3 = 2.625 - x1 + x1 * x2**3
    return float(a1**2 + a2**2 + a3**2)


def beale_grad(x):
    x1, x2 = x
    a1 = 1.5 - x1 + x1 * x2
    a2 = 2.25 - x1 + x1 * x2**2
    a3 = 2.625 - x1 + x1 * x2**3
    return np.array([
        2 * a1 * (x2 - 1) + 2 * a2 * (x2**2 - 1) + 2 * a3 * (x2**3 - 1),
        2 * a1 * x1 + 4 * a2 * x1 * x2 + 6 * a3 * x1 * x2**2,
    ])


def himmelblau(x):
    x1, x2 = x
    return float((x1**2 + x2 - 11) ** 2 + (x1 + x2**2 - 7) ** 2)


def himmelblau_grad(x):
    x1, x2 = x
    a = x1**2 + x2 - 11
    b = x1 + x2**2 - 7
    return np.array([4 * x1 * a + 2 * b, 2 * a + 4 * x2 * b])


# ============================================================================
# TRANSCENDENTAL
# ============================================================================

def trig_sum(x):
    return float(np.sum(1.0 - np.cos(x)) + 0.1 * np.sum(x**2))


def trig_sum_grad(x):
    return np.sin(x) + 0.2 * x


EXP_A = np.array([0.5, -0.3, 0.2])


def exp_quadratic(x):
    return float(np.exp(EXP_A @ x) + 0.5 * np.sum(x**2))


def exp_quadratic_grad(x):
    return np.exp(EXP_A @ x) * EXP_A + x


LSE_A = np.array([
    [1.0, 0.5, -0.2],
    [-0.7, 1.2, 0.3],
    [0.2, -0.4, 1.1],
    [-1.0, -0.3, 0.6],
    [0.4, 0.9, -0.8],
])
LSE_B = np.array([0.1, -0.2, 0.3, 0.0, -0.1])


def log_sum_exp(x):
    return float(logsumexp(LSE_A @ x + LSE_B) + 0.05 * np.sum(x**2))


def log_sum_exp_grad(x):
    return LSE_A.T @ softmax(LSE_A @ x + LSE_B) + 0.1 * x


# ============================================================================
# REGISTRY
# ============================================================================

BUILTIN_OBJECTIVES = [
    Objective("sphere", 4, sphere, sphere_grad, lipschitz_grad=2.0, lipschitz_hess=0.0,
              start=(1.0, 2.0, -1.0, 0.5), box=(-5.0, 5.0), description="‖x‖²", any_dim=True),
    Objective("ill_quadratic", 5, ill_quadratic, ill_quadratic_grad, lipschitz_grad=float(ILL_DIAG[-1]),
              lipschitz_hess=0.0, start=(1.0, 1.0, 1.0, 1.0, 1.0), box=(-5.0, 5.0),
              description="½Σ d_i x_i², condition number 1e3"),
    Objective("scaled_quadratic", 6, scaled_quadratic, scaled_quadratic_grad, lipschitz_grad=SCALED_L,
              lipschitz_hess=0.0, start=(0.0,) * 6, box=(-5.0, 5.0),
              description="½xᵀQx + bᵀx with tridiagonal Q"),
    Objective("cubic_valley", 3, cubic_valley, cubic_valley_grad, lipschitz_hess=6.0,
              start=(0.8, 0.8, 0.8), box=(-3.0, 3.0), description="Σ |x_i|³ + 3x_i², Hessian 6-Lipschitz"),
    Objective("rosenbrock", 2, rosenbrock, rosenbrock_grad, start=(-1.2, 1.0), box=(-2.0, 2.0)),
    Objective("rosenbrock10", 10, rosenbrock, rosenbrock_grad, start=(-1.2, 1.0) * 5, box=(-2.0, 2.0),
              description="chained Rosenbrock"),
    Objective("powell_singular", 4, powell_singular, powell_singular_grad, start=(3.0, -1.0, 0.0, 1.0),
              box=(-4.0, 4.0)),
    Objective("wood", 4, wood, wood_grad, start=(-3.0, -1.0, -3.0, -1.0), box=(-4.0, 4.0)),
    Objective("beale", 2, beale, beale_grad, start=(1.0, 1.0), box=(-2.0, 2.0)),
    Objective("trig_sum", 5, trig_sum, trig_sum_grad, lipschitz_grad=1.2, lipschitz_hess=1.0,
              start=(1.5, -1.0, 0.5, 2.0, -2.0), box=(-3.0, 3.0), description="Σ(1 - cos x_i) + 0.1‖x‖²"),
    Objective("exp_quadratic", 3, exp_quadratic, exp_quadratic_grad, start=(1.0, 1.0, 1.0), box=(-2.0, 2.0),
              description="exp(aᵀx) + ½‖x‖²"),
    Objective("log_sum_exp", 3, log_sum_exp, log_sum_exp_grad, start=(1.0, -1.0, 0.5), box=(-3.0, 3.0),
              description="log Σ exp(Ax + b) + 0.05‖x‖²"),
    Objective("himmelblau", 2, himmelblau, himmelblau_grad, start=(0.0, 0.0), box=(-5.0, 5.0)),
]

_PLUGINS: Dict[str, Objective] = {}


def register(objective: Objective) -> Objective:
    """Adds a user objective; names must be unique across built-ins and plug-ins."""
    if any(obj.name == objective.name for obj in registry()):
        raise ValueError(f"objective '{objective.name}' is already registered")
    _PLUGINS[objective.name] = objective
    logging.info(f"Registered objective: {objective.name} (n={objective.dim})")
    return objective


def unregister(name: str):
    _PLUGINS.pop(name, None)


def registry() -> List[Objective]:
    return list(BUILTIN_OBJECTIVES) + [_PLUGINS[name] for name in sorted(_PLUGINS)]


def names() -> List[str]:
    return [obj.name for obj in registry()]


def get(name: str) -> Objective:
    for obj in registry():
        if obj.name == name:
            return obj
    raise UnknownNameError("function", name, names())


def resolve_suite(spec) -> List[Objective]:
    """'all', a comma-separated string, or a list of names."""
    if spec is None or spec == "all" or spec == ["all"]:
        return registry()
    if isinstance(spec, str):
        spec = [part.strip() for part in spec.split(",")]
    return [get(name) for name in spec]


def random_start(objective: Objective, seed: int, jitter: float) -> np.ndarray:
    """x0 plus a seeded N(0, jitter²) perturbation, clipped to the box."""
    x0 = objective.x0
    if jitter <= 0:
        return x0
    rng = np.random.default_rng(seed)
    lo, hi = objective.box
    return np.clip(x0 + jitter * rng.standard_normal(objective.dim), lo, hi)


def probe_gradient(objective: Objective, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference probe of ∇f, used by the suite self-test."""
    g = np.empty(objective.dim)
    for i in range(objective.dim):
        e = np.zeros(objective.dim)
        e[i] = step
        g[i] = (objective(x + e) - objective(x - e)) / (2.0 * step)
    return g


def self_test(objective: Objective, n_points: int = 20, seed: int = 0, step: float = 1e-5) -> float:
    """
    Largest ‖probe - grad‖∞ / (1 + ‖grad‖∞) over seeded points in the box
    (shrunk by one step so probes stay inside).
    """
    rng = np.random.default_rng(seed)
    lo, hi = objective.box
    worst = 0.0
    for _ in range(n_points):
        x = rng.uniform(lo + step, hi - step, size=objective.dim)
        g = objective.gradient(x)
        deviation = np.max(np.abs(probe_gradient(objective, x, step) - g)) / (1.0 + np.max(np.abs(g)))
        worst = max(worst, float(deviation))
    return worst


if __name__ == "__main__":
    for obj in registry():
        print(f"{obj.name:<18} n={obj.dim:<3} self-test deviation {self_test(obj):.2e}")
