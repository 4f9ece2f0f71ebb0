"""
Trapezoidal mixing coefficients for NMXFD.

For a step h and m central differences:

    a'_j = 2 j h² |φ'(j h)|      j = 1..m-1
    a'_m =   m h² |φ'(m h)|      (half weight at the truncation point)
    C    = Σ a'_j
    a_j  = a'_j / C
"""

import math
import logging
from functools import lru_cache
from typing import Tuple

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from kernels import SQRT_2PI, gaussian_pdf_deriv

NORMALIZATION_TOL = 1e-12


class CoefficientTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int
    h: float
    raw: Tuple[float, ...]
    total: float
    normalized: Tuple[float, ...]

    @property
    def S(self) -> float:
        return self.m * self.h

    @field_validator("raw")
    @classmethod
    def _positive(cls, raw):
        # trailing weights may underflow to zero, the first one never
        if not raw or not (raw[0] > 0.0) or any(not (a >= 0.0) for a in raw):
            raise ValueError("raw coefficients must be nonnegative with a positive first weight")
        return raw

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.raw) != self.m or len(self.normalized) != self.m:
            raise ValueError(f"expected {self.m} coefficients, got {len(self.raw)}/{len(self.normalized)}")
        if abs(math.fsum(self.normalized) - 1.0) > NORMALIZATION_TOL:
            raise ValueError("normalized coefficients do not sum to one")
        return self

    def sum_of_squares(self) -> float:
        return math.fsum(a * a for a in self.normalized)

    def variance_factor(self) -> float:
        """Σ a_j² / j²; scales the CFD noise variance down to the NMXFD one."""
        return math.fsum((a / j) ** 2 for j, a in enumerate(self.normalized, start=1))


def raw_coefficient(j: int, m: int, h: float) -> float:
    weight = float(j) if j == m else 2.0 * j
    return weight * h * h * abs(gaussian_pdf_deriv(j * h))


@lru_cache(maxsize=1024)
def mixing_coefficients(m: int, h: float) -> CoefficientTable:
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    m = int(m)
    h = float(h)
    if not math.isfinite(h) or h <= 0.0:
        raise ValueError(f"h must be a positive real, got {h}")

    raw = tuple(raw_coefficient(j, m, h) for j in range(1, m + 1))
    if raw[0] <= 0.0:
        # φ' underflows to zero once j·h is beyond ~38
        raise ValueError(f"coefficient underflow for m={m}, h={h}: first weight is zero")
    # ascending j, compensated
    total = math.fsum(raw)
    normalized = tuple(a / total for a in raw)
    logging.debug(f"mixing coefficients m={m} h={h}: C={total:.12g}")
    return CoefficientTable(m=m, h=h, raw=raw, total=total, normalized=normalized)


def uniform_weights(m: int) -> Tuple[float, ...]:
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    return tuple(1.0 / m for _ in range(m))


def coefficient_sum_limit(S: float) -> float:
    """(2S/√(2π))(1 - e^{-S²/2}): upper envelope of C for fixed S = m·h."""
    if S <= 0:
        raise ValueError(f"S must be positive, got {S}")
    return 2.0 * S / SQRT_2PI * (1.0 - math.exp(-0.5 * S * S))


def trapezoid_first_moment(m: int, h: float) -> float:
    """Trapezoid value I₁ of ∫₀ˢ t|φ'(t)| dt on the nodes j·h; C = 2·I₁."""
    inner = math.fsum(j * h * abs(gaussian_pdf_deriv(j * h)) for j in range(1, m))
    return h * (inner + 0.5 * m * h * abs(gaussian_pdf_deriv(m * h)))


def trapezoid_squared_derivative(m: int, h: float) -> float:
    """Trapezoid value I₂ of 2∫₀ˢ |φ'(t)|² dt on the nodes j·h."""
    inner = math.fsum(gaussian_pdf_deriv(j * h) ** 2 for j in range(1, m))
    return h * (2.0 * inner + gaussian_pdf_deriv(m * h) ** 2)


if __name__ == "__main__":
    table = mixing_coefficients(4, 0.75)
    print(table.model_dump_json(indent=2))
