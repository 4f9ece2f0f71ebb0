"""
Exception types raised across the gradmix modules.

All of them derive from ValueError so callers that only care about
"bad input or bad numerics" can keep catching ValueError.
"""

from typing import Iterable, Optional, Sequence


class GradmixError(ValueError):
    """Base class for domain errors; the CLI maps these to exit code 1."""


class UnknownNameError(GradmixError):
    def __init__(self, kind: str, name: str, valid: Iterable[str]):
        self.kind = kind
        self.name = name
        self.valid = sorted(valid)
        super().__init__(f"Unknown {kind} '{name}'. Available: {self.valid}")


class EstimationError(GradmixError):
    """An objective returned a non-finite value while building an estimate."""

    def __init__(self, scheme: str, eval_index: int, point: Optional[Sequence[float]], value: float):
        self.scheme = scheme
        self.eval_index = eval_index
        self.point = None if point is None else [float(v) for v in point]
        self.value = value
        super().__init__(
            f"{scheme}: objective returned {value} at evaluation #{eval_index} (x={self.point})"
        )


class QuadratureError(GradmixError):
    def __init__(self, message: str, achieved_error: float):
        self.achieved_error = achieved_error
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")


class DimensionError(GradmixError):
    pass


class ExclusionError(GradmixError):
    """Function cannot take part in a benchmark (e.g. zero gradient at x0)."""


class LineSearchError(GradmixError):
    pass
