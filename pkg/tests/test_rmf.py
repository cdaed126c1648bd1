import math

import numpy as np
import pytest

from rmflab.errors import InternalError, ParameterError
from rmflab.montecarlo import ExperimentPlan, bootstrap_estimate
from rmflab.models import ModelSpec, collect_walks
from rmflab.rmf import (
    CheckpointGrid,
    SignOracle,
    checkpoint_grid,
    f_value,
    grid_positions,
    rmf_trace,
    sign_of_prime,
)
from rmflab.sieve import FactorRecord, factor_segment, primes_up_to, squarefree_count


def brute_f(seed, idx, n):
    """f(n) by full trial division, independent of the sieve machinery."""
    if n == 1:
        return 1
    m, sgn, d = n, 1, 2
    while d * d <= m:
        if m % d == 0:
            m //= d
            if m % d == 0:
                return 0
            sgn *= sign_of_prime(SignOracle(seed, idx), d)
        d += 1
    if m > 1:
        sgn *= sign_of_prime(SignOracle(seed, idx), m)
    return sgn


class TestSignOracle:
    def test_deterministic(self):
        o = SignOracle(master_seed=5, sample_index=9)
        assert sign_of_prime(o, 97) == sign_of_prime(o, 97)

    def test_hooks(self):
        plus = SignOracle(1, hook="plus")
        minus = SignOracle(1, hook="minus")
        for p in (2, 3, 5, 101):
            assert sign_of_prime(plus, p) == 1
            assert sign_of_prime(minus, p) == -1

    def test_unknown_hook(self):
        with pytest.raises(ParameterError):
            SignOracle(1, hook="bogus")

    def test_nonprime_rejected_in_debug(self):
        with pytest.raises(ParameterError):
            sign_of_prime(SignOracle(1), 10)

    @pytest.mark.parametrize("seed,idx", [(42, 0), (42, 63), (7, 129)])
    def test_mean_within_five_se_over_primes(self, seed, idx):
        pt = primes_up_to(1_299_709)  # the first 1e5 primes
        ps = pt.primes[:100_000]
        o = SignOracle(seed, idx)
        from rmflab import signs

        key = signs.block_key(seed, idx >> 6, signs.SALT_PRIME)
        words = signs.sign_words_array(key, ps)
        vals = 1 - 2 * ((words >> np.uint64(idx & 63)) & np.uint64(1)).astype(np.int64)
        # spot-check the vectorized signs against the scalar oracle
        for j in (0, 1, 99_999):
            assert vals[j] == sign_of_prime(o, int(ps[j]))
        assert abs(vals.mean()) <= 0.016  # 5 binomial standard errors


class TestFValue:
    def test_one(self):
        seg = factor_segment(1, 2, primes_up_to(2))
        assert f_value(SignOracle(3), seg.record(1)) == 1

    def test_non_squarefree_is_zero(self):
        seg = factor_segment(4, 5, primes_up_to(10))
        assert f_value(SignOracle(3), seg.record(4)) == 0

    def test_multiplicativity(self):
        o = SignOracle(11)
        seg = factor_segment(6, 7, primes_up_to(10))
        assert f_value(o, seg.record(6)) == sign_of_prime(o, 2) * sign_of_prime(o, 3)

    def test_inconsistent_record_rejected(self):
        bad = FactorRecord(n=10, prime_factors=(3,), cofactor=1, squarefree=True)
        with pytest.raises(InternalError):
            f_value(SignOracle(1), bad)


class TestTrace:
    def test_all_plus_counts_squarefree(self):
        tr = rmf_trace(SignOracle(1, hook="plus"), 10)
        assert tr.final_value == squarefree_count(10) == 7
        assert tr.sign_change_count == 0

    def test_x_1(self):
        assert rmf_trace(SignOracle(123), 1).final_value == 1

    def test_against_trial_division_oracle(self):
        seed, idx = 12345, 3
        vals = np.cumsum([brute_f(seed, idx, n) for n in range(1, 1001)])
        tr = rmf_trace(SignOracle(seed, idx), 1000, checkpoints=[1, 10, 500])
        assert tr.final_value == vals[-1]
        assert tr.checkpoint_values == (vals[0], vals[9], vals[499])
        s = np.sign(vals)
        nz = s[s != 0]
        assert tr.sign_change_count == int(np.count_nonzero(nz[1:] != nz[:-1]))

    def test_minus_hook_equals_mertens(self):
        from rmflab.sieve import mertens_trace

        tr = rmf_trace(SignOracle(0, hook="minus"), 10**4, checkpoints=[100, 5000])
        mt = mertens_trace(10**4, checkpoints=[100, 5000])
        assert tr.final_value == mt.final_value
        assert tr.sign_change_count == mt.sign_change_count
        assert tr.checkpoint_values == mt.checkpoint_values

    def test_checkpoint_out_of_range(self):
        with pytest.raises(ParameterError):
            rmf_trace(SignOracle(1), 10, checkpoints=[11])


class TestCheckpointGrid:
    def test_all_plus_matches_q(self):
        g = checkpoint_grid(SignOracle(1, hook="plus"), 50.0, 3)
        for n, y in zip(range(1, 4), g.Y):
            u = math.floor(math.exp(n) * 50.0)
            assert y == pytest.approx(squarefree_count(u) / math.sqrt(math.exp(n) * 50.0))

    def test_definition_n1_x2(self):
        g = checkpoint_grid(SignOracle(7), 2.0, 1)
        assert math.floor(2 * math.e) == 5
        tr = rmf_trace(SignOracle(7), 5)
        assert g.Y[0] == pytest.approx(tr.final_value / math.sqrt(2 * math.e))

    def test_star_dominates(self):
        for seed in range(5):
            g = checkpoint_grid(SignOracle(seed), 100.0, 4)
            assert g.S_N_star >= abs(g.S_N)

    def test_second_moment_of_y_in_band(self):
        # exact E Y_n^2 = Q(floor(e^n x))/(e^n x) must lie in [3/pi^2, 1]
        for x in (40.0, 1000.0):
            for n in range(1, 6):
                u = math.floor(math.exp(n) * x)
                if math.exp(n) * x < 100:
                    continue
                val = squarefree_count(u) / (math.exp(n) * x)
                assert 3 / math.pi**2 <= val <= 1.0

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            checkpoint_grid(SignOracle(1), 1.0, 3)
        with pytest.raises(ParameterError):
            checkpoint_grid(SignOracle(1), 10.0, 0)

    def test_budget_reports_required_size(self):
        from rmflab.errors import ResourceError

        with pytest.raises(ResourceError) as err:
            checkpoint_grid(SignOracle(1), 1e6, 20)
        assert err.value.required == math.floor(math.exp(20) * 1e6)


class TestMoments:
    def test_second_moment_matches_q(self):
        # orthogonality: E M(x)^2 = Q(x); 4 bootstrap SEs at 2000 samples
        x = 1000
        res = collect_walks(
            ModelSpec("rmf"), x, [x], np.arange(2000), 424242, census=False
        )
        sq = res.values[:, 0].astype(np.float64) ** 2
        est = bootstrap_estimate(sq, 424242, "test|m2")
        assert abs(est.point - squarefree_count(x)) <= 4 * est.se

    def test_cross_moment_matches_q_min(self):
        a, b = 300, 3000
        res = collect_walks(
            ModelSpec("rmf"), b, [a, b], np.arange(3000), 3141, census=False
        )
        prod = res.values[:, 0].astype(np.float64) * res.values[:, 1].astype(np.float64)
        est = bootstrap_estimate(prod, 3141, "test|cross")
        assert abs(est.point - squarefree_count(a)) <= 4 * est.se
