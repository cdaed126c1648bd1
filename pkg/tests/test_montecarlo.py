import math

import numpy as np
import pytest
from scipy import stats as sps

from rmflab.analysis import exact_correlation
from rmflab.engine import run_walks
from rmflab.errors import ParameterError, ResourceError
from rmflab.models import ModelSpec
from rmflab.montecarlo import (
    EstimateWithCI,
    ExperimentPlan,
    bootstrap_estimate,
    estimate_correlation,
    estimate_event_probs,
    estimate_expected_V,
    estimate_moment,
    estimate_sign_change_prob,
    expected_v_table,
    moment_table,
    x_ell_grid,
)
from rmflab.rmf import RmfWordSource
from rmflab.sieve import squarefree_count


def plan(seed=101, samples=500, kind="rmf", **kw):
    return ExperimentPlan(master_seed=seed, samples=samples, model=ModelSpec(kind), **kw)


class TestPlan:
    def test_validation(self):
        with pytest.raises(ParameterError):
            ExperimentPlan(master_seed=1, samples=0)
        with pytest.raises(ParameterError):
            ExperimentPlan(master_seed=1, samples=10, x_grid=(10.0, 5.0))

    def test_regime_flags(self):
        p = plan()
        flags = p.regime_flags(math.exp(200.0), 8)
        assert flags.n_small and flags.loglog_ok
        assert not p.regime_flags(100.0, 50).n_small


class TestBootstrap:
    def test_point_is_exact_mean(self):
        vals = np.array([1.0, 2.0, 4.0])
        est = bootstrap_estimate(vals, 5, "t")
        assert est.point == pytest.approx(7.0 / 3.0, rel=1e-15)
        assert est.ci_lo <= est.point <= est.ci_hi

    def test_deterministic_given_purpose(self):
        vals = np.arange(100, dtype=np.float64)
        a = bootstrap_estimate(vals, 5, "same")
        b = bootstrap_estimate(vals, 5, "same")
        c = bootstrap_estimate(vals, 5, "other")
        assert a == b
        assert a.ci_lo != c.ci_lo or a.ci_hi != c.ci_hi

    def test_ci_width_shrinks_like_root_n(self):
        rng = np.random.default_rng(0)
        widths = {}
        for n in (250, 1000, 4000):
            vals = rng.normal(size=n)
            est = bootstrap_estimate(vals, 7, f"w{n}")
            widths[n] = est.ci_hi - est.ci_lo
        for big, small in ((1000, 250), (4000, 1000)):
            ratio = widths[small] / widths[big]
            assert 1.0 <= ratio <= 4.0  # within factor 2 of the sqrt law (=2)


class TestMoments:
    def test_q0_exactly_one(self):
        est = estimate_moment(plan(samples=50), 100.0, 0.0)
        assert est.point == 1.0
        assert est.ci_lo == est.ci_hi == 1.0

    def test_q2_matches_q_of_x(self):
        est = estimate_moment(plan(samples=2000), 1000.0, 2.0)
        assert abs(est.point - squarefree_count(1000)) <= 4 * est.se

    def test_q1_iid_matches_binomial_identity(self):
        # E|S_n| for the simple +-1 walk, computed from the binomial law
        n = 20
        k = np.arange(n + 1)
        exact = float(np.sum(sps.binom.pmf(k, n, 0.5) * np.abs(n - 2 * k)))
        est = estimate_moment(plan(samples=4000, kind="iid_rademacher"), float(n), 1.0)
        assert abs(est.point - exact) <= 4 * est.se

    def test_moment_table_shares_traces(self):
        p = plan(samples=200)
        table = moment_table(p, [100.0, 1000.0], [1.0, 2.0])
        single = estimate_moment(p, 100.0, 1.0)
        assert table[(100.0, 1.0)] == single


class TestExpectedV:
    def test_x1_is_zero(self):
        est = estimate_expected_V(plan(samples=50), 1.0)
        assert est.point == 0.0

    def test_pathwise_monotone_in_x(self):
        p = plan(samples=300, kind="iid_rademacher")
        table = expected_v_table(p, [100.0, 1000.0, 10000.0])
        pts = [table[x].point for x in (100.0, 1000.0, 10000.0)]
        assert pts[0] <= pts[1] <= pts[2]


class TestSignChangeProb:
    def test_empty_interval(self):
        est = estimate_sign_change_prob(plan(samples=20), 100.0, 0)
        assert est.point == 0.0

    def test_all_plus_walk_never_changes(self):
        res = run_walks(RmfWordSource(master_seed=1, hook="plus"), 1000, [100, 1000], range(8))
        assert np.all(res.changes == 0)

    def test_prob_positive_at_moderate_x(self):
        est = estimate_sign_change_prob(plan(samples=300), 1000.0, 4)
        assert est.point > 0.2


class TestXEllGrid:
    def test_reference_value(self):
        g = x_ell_grid(0.01, 3)
        want = math.exp(2 * math.log(2) ** 0.51)
        assert g[0] == pytest.approx(want, rel=1e-12)
        assert g[0] == pytest.approx(5.25, abs=0.01)

    def test_strictly_increasing(self):
        g = x_ell_grid(0.005, 40)
        assert all(b > a for a, b in zip(g, g[1:]))

    def test_log_ratio_tracks_spacing_exponent(self):
        g = x_ell_grid(0.01, 40)
        for ell in range(10, 39):
            logratio = math.log(g[ell - 1] / g[ell - 2])  # x_{ell+1}/x_ell
            target = math.log(ell) ** 0.51
            assert target / 3 <= logratio <= 3 * target

    def test_epsilon_range(self):
        with pytest.raises(ParameterError):
            x_ell_grid(0.5, 10)
        with pytest.raises(ParameterError):
            x_ell_grid(0.01, 1)
        assert x_ell_grid(0.01, 2)  # the boundary value 1/100 is allowed


class TestEvents:
    def test_n1_conditional_undefined(self):
        res = estimate_event_probs(plan(samples=200), 1000.0, 1)
        assert res.p_change_given_ab is None

    def test_b_probability_high_in_regime(self):
        # desk-scale stand-in for the pilot-sized x=1e4, N=10 run (see
        # scripts/run_pilot.py): the clipping event B should dominate
        res = estimate_event_probs(
            plan(samples=400, budget=2 * 10**9), 10**4, 6
        )
        assert res.p_b.point >= 0.85

    def test_parameter_checks(self):
        with pytest.raises(ParameterError):
            estimate_event_probs(plan(samples=10), 100.0, 3, epsilon=0.0)


class TestCorrelation:
    def test_self_correlation_exact_one(self):
        est = estimate_correlation(plan(samples=10), 1000.0, 2, 2)
        assert est.point == 1.0 and est.se == 0.0

    def test_matches_exact_at_small_pair(self):
        est = estimate_correlation(plan(samples=2000, seed=2024), 1000.0, 1, 2)
        rho = exact_correlation(1000.0, 1, 2)
        assert abs(est.point - rho) <= 4 * est.se

    def test_distant_pair_decays(self):
        est = estimate_correlation(plan(samples=1500, seed=7), 1000.0, 1, 6)
        assert abs(est.point) <= 2 * math.exp(-2.5) + 4 * est.se


class TestReproducibility:
    def test_same_plan_same_numbers(self):
        a = estimate_moment(plan(seed=5, samples=300), 2000.0, 1.5)
        b = estimate_moment(plan(seed=5, samples=300), 2000.0, 1.5)
        assert a == b

    def test_worker_invariance(self):
        a = estimate_expected_V(plan(seed=5, samples=130, workers=1), 3000.0)
        b = estimate_expected_V(plan(seed=5, samples=130, workers=2), 3000.0)
        assert a == b


class TestBudget:
    def test_budget_enforced(self):
        p = plan(samples=1000, budget=10**5)
        with pytest.raises(ResourceError) as err:
            estimate_expected_V(p, 10**6)
        assert err.value.required == 10**9

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("RMFLAB_BUDGET", "1e5")
        p = plan(samples=1000)
        with pytest.raises(ResourceError):
            estimate_expected_V(p, 10**6)
