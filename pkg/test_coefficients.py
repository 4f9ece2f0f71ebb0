import math

import pytest

from coefficients import (
    CoefficientTable,
    coefficient_sum_limit,
    mixing_coefficients,
    raw_coefficient,
    trapezoid_first_moment,
    trapezoid_squared_derivative,
    uniform_weights,
)
from kernels import phi_capital

H_GRID = [0.05, 0.1, 0.5, 1.0, 3.0]


def test_single_weight_normalizes_to_one():
    table = mixing_coefficients(1, 0.5)
    assert table.normalized == (1.0,)
    assert table.S == 0.5


def test_two_term_table():
    table = mixing_coefficients(2, 1.0)
    assert table.raw == pytest.approx((0.48394145, 0.21596387), abs=1e-8)
    assert table.total == pytest.approx(0.69990532, abs=1e-8)
    assert table.normalized == pytest.approx((0.691438, 0.308562), abs=1e-6)


def test_raw_formula_with_half_weight_at_truncation():
    m, h = 6, 0.5
    table = mixing_coefficients(m, h)
    for j in range(1, m):
        assert table.raw[j - 1] == raw_coefficient(j, m, h)
        assert raw_coefficient(j, m, h) == pytest.approx(2 * j * h * h * (j * h) * math.exp(-0.5 * (j * h) ** 2)
                                                         / math.sqrt(2 * math.pi), rel=1e-14)
    assert table.raw[-1] == pytest.approx(m * h * h * (m * h) * math.exp(-0.5 * (m * h) ** 2)
                                          / math.sqrt(2 * math.pi), rel=1e-14)
    assert all(a == r / table.total for a, r in zip(table.normalized, table.raw))


def test_sum_to_one_for_m5():
    table = mixing_coefficients(5, 0.6)
    assert abs(math.fsum(table.normalized) - 1.0) <= 1e-12


@pytest.mark.parametrize("h", H_GRID)
def test_normalization_grid(h):
    for m in range(1, 65):
        table = mixing_coefficients(m, h)
        assert abs(math.fsum(table.normalized) - 1.0) <= 1e-12
        assert table.raw[0] > 0.0
        assert all(a >= 0.0 for a in table.raw)


@pytest.mark.parametrize("h", [0.05, 0.1, 0.5, 1.0])
def test_raw_strictly_positive_before_underflow(h):
    for m in (1, 2, 8, 32):
        assert all(a > 0.0 for a in mixing_coefficients(m, h).raw)


@pytest.mark.parametrize("h", [0.05, 0.1, 0.5, 1.0])
def test_sum_of_squares_below_one(h):
    assert mixing_coefficients(1, h).sum_of_squares() == 1.0
    for m in range(2, 65):
        table = mixing_coefficients(m, h)
        assert table.sum_of_squares() < 1.0
        assert table.variance_factor() < 1.0


def test_variance_factor_equals_one_only_for_single_term():
    assert mixing_coefficients(1, 1.0).variance_factor() == 1.0
    assert mixing_coefficients(2, 1.0).variance_factor() == pytest.approx(0.501891, abs=5e-6)


@pytest.mark.parametrize("m,h", [(0, 1.0), (-2, 1.0), (2, 0.0), (2, -1.0), (2, math.inf), (2.5, 1.0)])
def test_invalid_arguments_rejected(m, h):
    with pytest.raises(ValueError):
        mixing_coefficients(m, h)


def test_first_weight_underflow_rejected():
    with pytest.raises(ValueError):
        mixing_coefficients(2, 60.0)


def test_tables_are_cached_and_frozen():
    assert mixing_coefficients(4, 0.75) is mixing_coefficients(4, 0.75)
    with pytest.raises(Exception):
        mixing_coefficients(4, 0.75).total = 1.0


def test_table_validation():
    with pytest.raises(ValueError):
        CoefficientTable(m=2, h=1.0, raw=(0.5, 0.5), total=1.0, normalized=(0.7, 0.7))
    with pytest.raises(ValueError):
        CoefficientTable(m=1, h=1.0, raw=(0.0,), total=0.0, normalized=(1.0,))


def test_uniform_weights():
    assert uniform_weights(4) == (0.25, 0.25, 0.25, 0.25)
    with pytest.raises(ValueError):
        uniform_weights(0)


class TestCoefficientSumBoundedness:
    S = 3.0
    MS = [4, 8, 16, 32, 64]

    def test_total_is_twice_first_moment(self):
        for m in self.MS:
            h = self.S / m
            assert mixing_coefficients(m, h).total == pytest.approx(2.0 * trapezoid_first_moment(m, h), rel=1e-13)

    def test_total_below_envelope(self):
        envelope = coefficient_sum_limit(self.S)
        for m in self.MS:
            assert mixing_coefficients(m, self.S / m).total <= envelope * 1.01

    def test_factor_two_band_over_m(self):
        totals = [mixing_coefficients(m, self.S / m).total for m in self.MS]
        assert max(totals) / min(totals) < 2.0
        assert totals[-1] == pytest.approx(0.9707, abs=1e-3)

    def test_envelope_value(self):
        assert coefficient_sum_limit(3.0) == pytest.approx(6.0 / math.sqrt(2 * math.pi) * (1 - math.exp(-4.5)))

    def test_envelope_rejects_nonpositive_width(self):
        with pytest.raises(ValueError):
            coefficient_sum_limit(0.0)


def test_trapezoid_squared_derivative_converges_to_phi_capital():
    S = 3.0
    gaps = [abs(trapezoid_squared_derivative(m, S / m) - phi_capital(S)) for m in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-4
