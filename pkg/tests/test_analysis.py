import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmflab.analysis import (
    EventIndicators,
    LambdaParams,
    chebyshev_tail_bound,
    count_sign_changes,
    event_indicators,
    exact_correlation,
    exact_cross_moment,
    exact_s_n_second_moment,
    harper_predictor,
    lambda_asymptotic,
    lambda_exact,
)
from rmflab.errors import ParameterError
from rmflab.rmf import CheckpointGrid
from rmflab.sieve import squarefree_count


def make_grid(y, x=1000.0):
    y = tuple(float(v) for v in y)
    return CheckpointGrid(
        x=x, N=len(y), Y=y, S_N=math.fsum(y), S_N_star=math.fsum(abs(v) for v in y)
    )


class TestLambda:
    def test_q2_gives_n(self):
        for n_terms in (1, 7, 100):
            p = LambdaParams(N=n_terms, q=2.0, x=50.0)
            assert lambda_exact(p) == pytest.approx(n_terms, rel=1e-12)

    def test_single_term_reference_value(self):
        # term at n=1, x=e^e, q=1: (1 + 0.5 sqrt(log(e+1)))^(-1/2)
        want = (1 + 0.5 * math.sqrt(math.log(math.e + 1))) ** -0.5
        got = lambda_exact(LambdaParams(N=1, q=1.0, x=math.exp(math.e)))
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(0.7973, abs=5e-5)

    def test_additivity(self):
        p1 = LambdaParams(N=1, q=1.3, x=100.0)
        p2 = LambdaParams(N=2, q=1.3, x=100.0)
        term2 = (1 + 0.35 * math.sqrt(math.log(2 + math.log(100.0)))) ** -0.65
        assert lambda_exact(p2) == pytest.approx(lambda_exact(p1) + term2, rel=1e-12)

    @given(st.integers(1, 200), st.floats(1.0, 1.9), st.floats(3.0, 1e6))
    def test_increasing_in_n(self, n_terms, q, x):
        a = lambda_exact(LambdaParams(N=n_terms, q=q, x=x))
        b = lambda_exact(LambdaParams(N=n_terms + 1, q=q, x=x))
        assert b > a

    @given(st.integers(1, 50), st.floats(1.0, 1.89))
    def test_decreasing_in_x_for_q_below_2(self, n_terms, q):
        a = lambda_exact(LambdaParams(N=n_terms, q=q, x=100.0))
        b = lambda_exact(LambdaParams(N=n_terms, q=q, x=1e8))
        assert b < a

    def test_asymptotic_reference(self):
        p = LambdaParams(N=100, q=1.0, log_log_x=16.0)
        assert lambda_asymptotic(p) == pytest.approx(100 / (0.5**0.5 * 2), rel=1e-12)

    def test_asymptotic_rejects_large_q(self):
        with pytest.raises(ParameterError):
            lambda_asymptotic(LambdaParams(N=5, q=1.95, x=100.0))

    def test_loglog_parametrization_matches_x(self):
        x = 1e10
        a = lambda_exact(LambdaParams(N=20, q=1.5, x=x))
        b = lambda_exact(LambdaParams(N=20, q=1.5, log_log_x=math.log(math.log(x))))
        assert a == pytest.approx(b, rel=1e-12)

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            LambdaParams(N=0, q=1.0, x=10.0)
        with pytest.raises(ParameterError):
            LambdaParams(N=1, q=0.5, x=10.0)
        with pytest.raises(ParameterError):
            LambdaParams(N=1, q=1.0, x=2.0)  # below e
        with pytest.raises(ParameterError):
            LambdaParams(N=1, q=1.0, x=10.0, log_x=5.0)
        with pytest.raises(ParameterError):
            LambdaParams(N=1, q=1.0)


class TestHarper:
    def test_q2_is_x(self):
        assert harper_predictor(1e6, 2.0) == pytest.approx(1e6, rel=1e-12)

    def test_q1_at_loglog_4(self):
        x = math.exp(math.exp(4.0))
        assert harper_predictor(x, 1.0) == pytest.approx((x / 2) ** 0.5, rel=1e-12)

    def test_decreasing_in_deficit(self):
        # smaller q means a larger deficit term and a smaller scale per power
        x = 1e8
        a = harper_predictor(x, 1.0) ** (1 / 0.5)
        b = harper_predictor(x, 2.0) ** (1 / 1.0)
        assert a < b

    def test_domain(self):
        with pytest.raises(ParameterError):
            harper_predictor(10.0, 1.0)


class TestCountSignChanges:
    def test_examples(self):
        assert count_sign_changes([1, -2, 3]).count == 2
        assert count_sign_changes([1, 0, -1, 0, 1]).count == 2
        assert count_sign_changes([5, 3, 2]).count == 0
        assert count_sign_changes([0, 0, 0]).count == 0

    def test_positions_and_zero_runs(self):
        rep = count_sign_changes([1, 0, -1, 0, 1])
        assert rep.positions == (2, 4)
        assert rep.zero_runs == 2

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            count_sign_changes([])

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
    def test_negation_and_scale_invariance(self, vals):
        base = count_sign_changes(vals).count
        assert count_sign_changes([-v for v in vals]).count == base
        assert count_sign_changes([2.5 * v for v in vals]).count == base


class TestExactMoments:
    def test_cross_moment_examples(self):
        assert exact_cross_moment(10, 10) == 7.0
        assert exact_cross_moment(10, 10**6) == 7.0
        assert exact_cross_moment(1, 987) == 1.0

    def test_correlation_reference_n1_m2_x100(self):
        # direct reimplementation of the defining quantities
        x = 100.0
        u1 = math.floor(math.e * x)
        assert u1 == 271
        q1 = squarefree_count(u1)
        q2 = squarefree_count(math.floor(math.e**2 * x))
        cov = q1 / (math.exp(1.5) * x) - 1.0 / (math.exp(1.5) * x)
        var1 = q1 / (math.e * x) - 1.0 / (math.e * x)
        var2 = q2 / (math.e**2 * x) - 1.0 / (math.e**2 * x)
        want = cov / math.sqrt(var1 * var2)
        assert exact_correlation(x, 1, 2) == pytest.approx(want, rel=1e-12)

    def test_decay_bound_with_constant_two(self):
        for x in (1e3, 1e5):
            for n in range(1, 10):
                for m in range(n + 1, 11):
                    v = abs(exact_correlation(x, n, m)) * math.exp((m - n) / 2)
                    assert v <= 2.0

    def test_limit_ratio_band_at_1e6(self):
        for n in range(1, 10):
            for m in range(n + 1, 11):
                r = exact_correlation(1e6, n, m) * math.exp((m - n) / 2)
                assert 0.3 <= r <= 1.2

    def test_parameter_order(self):
        with pytest.raises(ParameterError):
            exact_correlation(100.0, 2, 2)


class TestChebyshev:
    def test_moment_linear_bound(self):
        for x in (1e3, 1e4):
            for n_grid in (1, 5, 10):
                assert exact_s_n_second_moment(n_grid, x) <= 3 * n_grid

    def test_bound_vanishes_in_lambda(self):
        assert chebyshev_tail_bound(5, 1e9, 1e3) < 1e-15

    def test_single_term_bound(self):
        # E Y_1^2 <= 1 so the bound is at most 1/lambda^2
        lam = 3.0
        assert chebyshev_tail_bound(1, lam, 1e4) <= 1 / lam**2

    def test_lambda_positive_required(self):
        with pytest.raises(ParameterError):
            chebyshev_tail_bound(3, 0.0, 1e3)


class TestEvents:
    def test_constant_positive_grid(self):
        g = make_grid([5.0] * 6)
        rep = event_indicators(g, epsilon=0.1, delta=0.1)
        assert rep.a  # S* is large
        assert not rep.b  # |S| equally large
        assert not rep.sign_change_observed

    def test_epsilon_zero_rejected(self):
        g = make_grid([1.0, -1.0])
        with pytest.raises(ParameterError):
            event_indicators(g, epsilon=0.0, delta=0.1)
        with pytest.raises(ParameterError):
            event_indicators(g, epsilon=0.1, delta=1.0)

    def test_forcing_implication_exhaustive_small(self):
        # over all sign patterns of length <= 4: if the geometry holds and
        # A and B both occur, the Y signs must be mixed
        for n_grid in (2, 3, 4):
            for code in range(3**n_grid):
                digits = []
                c = code
                for _ in range(n_grid):
                    digits.append(c % 3 - 1)
                    c //= 3
                y = [2.0 * d for d in digits]
                g = make_grid(y)
                # pick eps/delta so the forcing threshold holds for this grid
                rep = event_indicators(g, epsilon=0.45, delta=0.9)
                if rep.threshold_ok and rep.a and rep.b:
                    assert rep.sign_change_observed

    @settings(max_examples=200)
    @given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=8))
    def test_forcing_implication_random(self, y):
        g = make_grid(y)
        rep = event_indicators(g, epsilon=0.3, delta=0.95)
        if rep.threshold_ok and rep.a and rep.b:
            assert rep.sign_change_observed
