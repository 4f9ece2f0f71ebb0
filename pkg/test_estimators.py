import math

import numpy as np
import pytest

from coefficients import mixing_coefficients
from errors import EstimationError, UnknownNameError
from estimators import (
    EstimatorConfig,
    Scheme,
    cfd,
    cgsg,
    config_for_budget,
    estimate,
    expected_evals,
    ffd,
    gsg,
    mxfd_unnormalized,
    nmxfd,
    parse_scheme,
    raw_average_cfd,
    trapezoid_filtered_derivative,
)
from oracles import cfd_error_bound, check_bound, difference_rounding, nmxfd_error_bound
from testfns import Objective, get


def square(x):
    return float(x[0] ** 2)


def cube(x):
    return float(x[0] ** 3)


def linear(x):
    return float(3.0 * x[0])


def constant(x):
    return 7.0


def cubic_sum(x):
    return float(np.sum(x**3))


PURE_CUBIC = Objective("pure_cubic", 3, cubic_sum, lambda x: 3.0 * x**2, lipschitz_hess=6.0,
                       start=(0.0, 0.0, 0.0), box=(-1.0, 1.0))


# ============================================================================
# FINITE DIFFERENCES
# ============================================================================

class TestFiniteDifferences:
    def test_ffd_examples(self):
        assert np.all(ffd(constant, [0.3, -1.0], 0.1).vector == 0.0)
        assert ffd(square, [1.0], 0.1).vector[0] == pytest.approx(2.1, abs=1e-12)
        for x, step in ((0.0, 0.1), (2.5, 1e-3), (-4.0, 0.5)):
            assert ffd(linear, [x], step).vector[0] == pytest.approx(3.0, rel=1e-11)

    def test_cfd_examples(self):
        assert cfd(square, [1.0], 0.1, 1.0).vector[0] == pytest.approx(2.0, abs=1e-14)
        assert cfd(cube, [0.0], 0.1, 1.0).vector[0] == pytest.approx(0.01, abs=1e-15)
        result = cfd(lambda x: math.sin(x[0]), [0.0], 0.5, 1.0)
        assert result.vector[0] == pytest.approx(math.sin(0.5) / 0.5, abs=1e-15)
        assert result.vector[0] == pytest.approx(0.958851, abs=1e-6)

    def test_evaluation_counts(self):
        x = np.zeros(5)
        assert ffd(constant, x, 0.1).evals == 6
        assert cfd(constant, x, 0.1, 1.0).evals == 10

    def test_non_finite_value_reported_with_context(self):
        def bad(x):
            return math.nan if x[1] > 0 else 0.0

        with pytest.raises(EstimationError) as info:
            cfd(bad, [0.0, 0.0], 0.1, 1.0)
        assert info.value.scheme == "CFD"
        assert info.value.eval_index == 3
        assert info.value.point == pytest.approx([0.0, 0.1])

    @pytest.mark.parametrize("step", [0.0, -1.0, math.nan])
    def test_bad_step_rejected(self, step):
        with pytest.raises(ValueError):
            ffd(square, [1.0], step)


# ============================================================================
# MIXED CENTRAL DIFFERENCES
# ============================================================================

class TestMixedDifferences:
    def test_single_term_is_cfd_bitwise(self):
        f = get("rosenbrock")
        x = np.array([-1.2, 1.0])
        assert np.array_equal(nmxfd(f, x, 1e-3, 1, 0.7).vector, cfd(f, x, 1e-3, 0.7).vector)
        assert np.array_equal(raw_average_cfd(f, x, 1e-3, 1, 0.7).vector, cfd(f, x, 1e-3, 0.7).vector)

    def test_single_term_matches_cfd_on_seeded_tuples(self):
        rng = np.random.default_rng(2)
        names = ["rosenbrock", "beale", "trig_sum", "exp_quadratic", "log_sum_exp"]
        for k in range(10):
            f = get(names[k % len(names)])
            lo, hi = f.box
            x = rng.uniform(lo / 2, hi / 2, size=f.dim)
            sigma = 10.0 ** rng.uniform(-6, -1)
            h = rng.uniform(0.2, 3.0)
            mixed = nmxfd(f, x, sigma, 1, h).vector
            central = cfd(f, x, sigma, h).vector
            assert np.all(np.abs(mixed - central) <= 1e-15 * np.abs(central))

    def test_quadratic_examples(self):
        assert nmxfd(square, [1.0], 0.1, 4, 0.75).vector[0] == pytest.approx(2.0, abs=1e-12)
        assert nmxfd(cube, [0.0], 0.1, 2, 1.0).vector[0] == pytest.approx(0.0192569, abs=1e-6)

    def test_quadratic_exactness(self):
        f = get("ill_quadratic")
        rng = np.random.default_rng(5)
        for _ in range(5):
            x = rng.uniform(-1, 1, size=f.dim)
            g = f.gradient(x)
            for sigma in (1e-2, 1.0):
                for m in (1, 2, 4, 8):
                    err = np.abs(nmxfd(f, x, sigma, m, 3.0 / m).vector - g)
                    assert np.all(err <= 1e-10 * (1.0 + np.linalg.norm(g)))

    def test_unnormalized_exposes_coefficient_sum(self):
        value = mxfd_unnormalized(lambda x: float(x[0]), [0.4], 0.1, 2, 1.0).vector[0]
        assert value == pytest.approx(0.69990532, abs=1e-8)

    def test_unnormalized_is_total_times_normalized(self):
        f = get("rosenbrock")
        x = [-1.2, 1.0]
        table = mixing_coefficients(8, 0.375)
        raw = mxfd_unnormalized(f, x, 1e-3, 8, 0.375).vector
        normalized = nmxfd(f, x, 1e-3, 8, 0.375).vector
        assert raw == pytest.approx(table.total * normalized, rel=1e-14)

    def test_average_examples(self):
        assert raw_average_cfd(linear, [2.0], 0.1, 5, 0.4).vector[0] == pytest.approx(3.0, rel=1e-12)
        assert raw_average_cfd(cube, [0.0], 0.1, 3, 1.0).vector[0] == pytest.approx(0.0466667, abs=1e-7)

    def test_constant_gives_zero(self):
        for fn in (nmxfd, mxfd_unnormalized, raw_average_cfd):
            assert np.all(fn(constant, [1.0, 2.0], 0.1, 3, 0.5).vector == 0.0)

    def test_trapezoid_reading_matches_unnormalized(self):
        f = get("trig_sum")
        x = f.x0
        raw = mxfd_unnormalized(f, x, 0.05, 6, 0.5).vector
        for i in range(f.dim):
            value = trapezoid_filtered_derivative(f, x, i, 0.05, 6, 0.5)
            assert value == pytest.approx(raw[i], rel=1e-12)


class TestCubicErrorBounds:
    """Error bounds on Σx³, whose Hessian is 6-Lipschitz."""

    @pytest.fixture
    def points(self):
        rng = np.random.default_rng(11)
        return [np.zeros(3)] + [rng.uniform(0.1, 1.0, size=3) for _ in range(10)]

    def test_mixed_error_never_exceeds_bound(self, points):
        violations = []
        for sigma in (1e-1, 1e-2, 1e-3):
            for m in (1, 2, 4, 8):
                for S in (1.0, 2.0, 3.0):
                    h = S / m
                    for x in points:
                        err = float(np.linalg.norm(nmxfd(PURE_CUBIC, x, sigma, m, h).vector - PURE_CUBIC.gradient(x)))
                        report = check_bound(err, nmxfd_error_bound(6.0, sigma, S, 3),
                                             difference_rounding(PURE_CUBIC, x, sigma * h, sigma * S))
                        if not report.satisfied:
                            violations.append((sigma, m, S, list(x), err, report.bound))
        assert violations == []

    def test_each_central_difference_obeys_single_term_bound(self, points):
        for sigma in (1e-1, 1e-2):
            for j in (1, 2, 3):
                for x in points:
                    h = 0.5
                    err = np.abs(cfd(PURE_CUBIC, x, sigma, j * h).vector - PURE_CUBIC.gradient(x))
                    allowance = difference_rounding(PURE_CUBIC, x, sigma * j * h, sigma * j * h)
                    assert np.all(err <= cfd_error_bound(6.0, sigma, h, j) * (1 + 1e-9) + allowance)

    def test_error_at_origin_is_closed_form(self):
        x = np.zeros(3)
        value = nmxfd(PURE_CUBIC, x, 0.1, 2, 1.0).vector
        assert value == pytest.approx([0.0192569] * 3, abs=1e-6)
        assert cfd(PURE_CUBIC, x, 0.1, 1.0).vector == pytest.approx([cfd_error_bound(6.0, 0.1, 1.0, 1)] * 3, rel=1e-12)


# ============================================================================
# GAUSSIAN SMOOTHED GRADIENTS
# ============================================================================

class TestSmoothedGradients:
    def test_constant_gives_exact_zero(self):
        assert np.all(gsg(constant, [1.0, 2.0], 0.1, 50, seed=3).vector == 0.0)
        assert np.all(cgsg(constant, [1.0, 2.0], 0.1, 50, seed=3).vector == 0.0)

    def test_same_seed_is_bit_identical(self):
        f = get("rosenbrock")
        for fn in (gsg, cgsg):
            a = fn(f, [-1.2, 1.0], 1e-2, 20, seed=42).vector
            b = fn(f, [-1.2, 1.0], 1e-2, 20, seed=42).vector
            c = fn(f, [-1.2, 1.0], 1e-2, 20, seed=43).vector
            assert np.array_equal(a, b)
            assert not np.array_equal(a, c)

    def test_gsg_linear_unbiased(self):
        M = 100_000
        a = np.array([1.0, 2.0])
        result = gsg(lambda x: float(a @ x), np.zeros(2), 0.01, M, seed=2024)
        stds = np.array([math.sqrt(6.0), math.sqrt(9.0)]) / math.sqrt(M)
        assert np.all(np.abs(result.vector - a) <= 4.0 * stds)
        assert result.evals == M + 1

    def test_cgsg_square_mean_of_twice_s_squared(self):
        M = 100_000
        result = cgsg(square, [1.0], 0.1, M, seed=77)
        assert abs(result.vector[0] - 2.0) <= 4.0 * 2.0 * math.sqrt(2.0) / math.sqrt(M)
        assert result.evals == 2 * M

    def test_bad_direction_count_rejected(self):
        with pytest.raises(ValueError):
            gsg(square, [1.0], 0.1, 0, seed=0)


# ============================================================================
# CONFIG AND DISPATCH
# ============================================================================

class TestEstimatorConfig:
    def test_scheme_names_are_case_insensitive(self):
        assert parse_scheme("nmxfd") == Scheme.NMXFD
        assert parse_scheme("Avg-CFD") == Scheme.AVG_CFD
        with pytest.raises(UnknownNameError) as info:
            parse_scheme("simpson")
        assert "NMXFD" in str(info.value)

    def test_step_resolution(self):
        cfg = EstimatorConfig(scheme="nmxfd", sigma=1e-2, m=4)
        assert (cfg.S, cfg.h) == (3.0, 0.75)
        cfg = EstimatorConfig(scheme="nmxfd", sigma=1e-2, m=4, h=0.5)
        assert cfg.S == 2.0
        cfg = EstimatorConfig(scheme="nmxfd", sigma=1e-2, m=8, S=2.0)
        assert cfg.h == 0.25
        cfg = EstimatorConfig(scheme="cfd", sigma=1e-2)
        assert (cfg.h, cfg.m) == (1.0, 1)

    def test_inconsistent_width_rejected(self):
        with pytest.raises(ValueError):
            EstimatorConfig(scheme="nmxfd", sigma=1e-2, m=4, h=0.5, S=3.0)

    @pytest.mark.parametrize("kwargs", [{"sigma": 0.0}, {"sigma": 1e-2, "m": 0}, {"sigma": 1e-2, "M": 0},
                                        {"sigma": 1e-2, "seed": -1}])
    def test_ranges_enforced(self, kwargs):
        with pytest.raises(ValueError):
            EstimatorConfig(scheme="gsg", **kwargs)

    def test_evaluation_count_contract(self):
        for n in (1, 2, 5, 10):
            x = np.full(n, 0.5)
            for scheme in Scheme:
                for m in (1, 2, 3):
                    for M in (1, 4, 9):
                        cfg = EstimatorConfig(scheme=scheme, sigma=1e-2, m=m, M=M, seed=1)
                        result = estimate(cubic_sum, x, cfg)
                        assert result.evals == expected_evals(scheme, n, m=m, M=M) == cfg.expected_evals(n)
                        assert result.scheme == scheme.value

    def test_dispatch_matches_direct_calls(self):
        f = get("beale")
        x = f.x0
        cfg = EstimatorConfig(scheme="nmxfd", sigma=1e-3, m=4)
        assert np.array_equal(estimate(f, x, cfg).vector, nmxfd(f, x, 1e-3, 4, 0.75).vector)
        cfg = EstimatorConfig(scheme="ffd", sigma=1e-3, h=2.0)
        assert np.array_equal(estimate(f, x, cfg).vector, ffd(f, x, 2e-3).vector)
        cfg = EstimatorConfig(scheme="gsg", sigma=1e-3, M=7, seed=9)
        assert np.array_equal(estimate(f, x, cfg).vector, gsg(f, x, 1e-3, 7, 9).vector)
        assert np.array_equal(estimate(f, x, cfg, seed=10).vector, gsg(f, x, 1e-3, 7, 10).vector)

    @pytest.mark.parametrize("scheme,k,c,n", [("ffd", 1, 1, 4), ("cfd", 2, 0, 4), ("gsg", 8, 1, 3),
                                              ("cgsg", 4, 0, 5), ("nmxfd", 12, 0, 2), ("avg_cfd", 8, 0, 10)])
    def test_budget_configs_spend_exact_budget(self, scheme, k, c, n):
        cfg = config_for_budget(scheme, n, k, c, sigma=1e-2)
        assert cfg.expected_evals(n) == k * n + c

    def test_budget_mismatch_rejected(self):
        with pytest.raises(ValueError):
            config_for_budget("nmxfd", 3, 3, 0, sigma=1e-2)
        with pytest.raises(ValueError):
            config_for_budget("ffd", 3, 2, 0, sigma=1e-2)
