"""
Standard Gaussian kernel helpers.

φ(t) = exp(-t²/2)/√(2π), its derivatives, the Gaussian moments, erf and
Φ(S) = 2∫₀ˢ |φ'(t)|² dt, which shows up in the NMXFD variance asymptotics.
"""

import math

from numpy.polynomial import hermite_e
from scipy import special

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_finite(t: float, name: str = "t") -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"{name} must be finite, got {t}")
    return t


def gaussian_pdf(t: float) -> float:
    t = _check_finite(t)
    return math.exp(-0.5 * t * t) / SQRT_2PI


def gaussian_pdf_deriv(t: float) -> float:
    """φ'(t) = -t·φ(t)."""
    t = _check_finite(t)
    return -t * gaussian_pdf(t)


def gaussian_pdf_derivative(t: float, order: int) -> float:
    """
    k-th derivative of φ: (-1)^k He_k(t) φ(t), with He_k the probabilists'
    Hermite polynomial.
    """
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    t = _check_finite(t)
    coeffs = [0.0] * order + [1.0]
    sign = -1.0 if order % 2 else 1.0
    return sign * float(hermite_e.hermeval(t, coeffs)) * gaussian_pdf(t)


def gaussian_moment(d: int) -> float:
    """E[s^d] for s ~ N(0, 1): (d-1)!! for even d, 0 for odd d."""
    if d < 0:
        raise ValueError(f"moment order must be nonnegative, got {d}")
    if d % 2:
        return 0.0
    return float(math.prod(range(d - 1, 0, -2)))


def erf(z: float) -> float:
    # Cephes erf in double precision
    return float(special.erf(_check_finite(z, "z")))


def phi_capital(S: float) -> float:
    """
    Φ(S) = 2∫₀ˢ |φ'(t)|² dt = (√π·erf(S) - 2S·e^{-S²}) / (4π).
    """
    S = _check_finite(S, "S")
    if S < 0:
        raise ValueError(f"S must be nonnegative, got {S}")
    if S == 0.0:
        return 0.0
    return (math.sqrt(math.pi) * erf(S) - 2.0 * S * math.exp(-S * S)) / (4.0 * math.pi)


if __name__ == "__main__":
    for S in (1.0, 2.0, 3.0, 8.0):
        print(f"Φ({S}) = {phi_capital(S):.15f}")
