"""Experiment engine: deterministic sampling plans, estimators, bootstrap CIs.

Every estimator follows the same discipline:

* per-sample statistics come from :func:`models.collect_walks`, which is
  bit-reproducible for any worker count;
* point estimates reduce the per-sample vector in sample-index order with
  compensated summation;
* confidence intervals are percentile bootstrap (default 1000 resamples)
  whose RNG is derived from the master seed plus a purpose string, so the
  same plan always yields the same interval.

The step-budget guardrail refuses experiments whose largest trace times
sample count exceeds the budget (default 1e9 steps, overridable per plan
or via the RMFLAB_BUDGET environment variable).
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .analysis import LambdaParams, lambda_exact
from .engine import DEFAULT_BUDGET
from .errors import ParameterError
from .models import ModelSpec, collect_walks
from .rmf import grid_positions

REGIME_EPSILON = 1.0 / 2000.0  # fixed small epsilon for the loglog regime proxy


def resolve_budget(budget: int | None) -> int:
    if budget is not None:
        return int(budget)
    env = os.environ.get("RMFLAB_BUDGET")
    if env:
        return int(float(env))
    return DEFAULT_BUDGET


@dataclass(frozen=True)
class RegimeFlags:
    """Hypothesis-regime proxies; experiments warn, never refuse, on these."""

    n_small: bool  # N = o(log x) proxy: N <= log(x)/10
    loglog_ok: bool  # loglog x << N^{2-eps} proxy: loglog x <= N^{2-eps}

    def as_dict(self) -> dict:
        return {"regime_n_small": self.n_small, "regime_loglog_ok": self.loglog_ok}


@dataclass(frozen=True)
class ExperimentPlan:
    """Reproducible description of one experiment family."""

    master_seed: int
    samples: int
    model: ModelSpec = field(default_factory=lambda: ModelSpec("rmf"))
    x_grid: tuple[float, ...] = ()
    N: int = 8
    epsilon: float = 0.1
    delta: float = 0.1
    q_list: tuple[float, ...] = (1.0, 2.0)
    workers: int = 1
    budget: int | None = None
    n_boot: int = 1000

    def __post_init__(self):
        if self.samples < 1:
            raise ParameterError("samples must be >= 1")
        if any(b <= a for a, b in zip(self.x_grid, self.x_grid[1:])):
            raise ParameterError("x_grid must be strictly ascending")
        if isinstance(self.model, str):
            object.__setattr__(self, "model", ModelSpec(self.model))

    def regime_flags(self, x: float, N: int | None = None) -> RegimeFlags:
        N = self.N if N is None else N
        n_small = N <= math.log(x) / 10.0
        loglog_ok = math.log(math.log(x)) <= N ** (2.0 - REGIME_EPSILON)
        return RegimeFlags(n_small=bool(n_small), loglog_ok=bool(loglog_ok))

    def with_(self, **kw) -> "ExperimentPlan":
        return replace(self, **kw)


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with a 95% percentile-bootstrap interval."""

    point: float
    ci_lo: float
    ci_hi: float
    se: float
    n_samples: int
    seed: int
    purpose: str = ""

    def __post_init__(self):
        # percentile intervals always bracket the point here; clip defensively
        object.__setattr__(self, "ci_lo", min(self.ci_lo, self.point))
        object.__setattr__(self, "ci_hi", max(self.ci_hi, self.point))


def _boot_rng(master_seed: int, purpose: str) -> np.random.Generator:
    digest = hashlib.sha256(purpose.encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([master_seed & (2**63 - 1), *words]))


def _mean_ordered(values: np.ndarray) -> float:
    return math.fsum(float(v) for v in values) / values.shape[0]


def bootstrap_estimate(
    values: np.ndarray,
    master_seed: int,
    purpose: str,
    n_boot: int = 1000,
    statistic: Callable[[np.ndarray], float] | None = None,
) -> EstimateWithCI:
    """Percentile bootstrap of ``statistic`` (default: the mean).

    ``values`` is indexed by sample, in sample-index order; rows may be
    vectors (the statistic then receives the resampled row block).
    """
    values = np.asarray(values)
    n = values.shape[0]
    if n < 1:
        raise ParameterError("bootstrap needs at least one sample")
    if statistic is None:
        point = _mean_ordered(values)
        stat = lambda block: float(block.mean())
    else:
        point = float(statistic(values))
        stat = statistic
    if n == 1:
        return EstimateWithCI(point, point, point, 0.0, 1, master_seed, purpose)
    rng = _boot_rng(master_seed, purpose)
    stats = np.empty(n_boot)
    chunk = max(1, int(2e6) // max(n, 1))
    done = 0
    while done < n_boot:
        take = min(chunk, n_boot - done)
        idx = rng.integers(0, n, size=(take, n))
        for i in range(take):
            stats[done + i] = stat(values[idx[i]])
        done += take
    lo, hi = np.percentile(stats, [2.5, 97.5])
    se = float(stats.std(ddof=1))
    return EstimateWithCI(point, float(lo), float(hi), se, n, master_seed, purpose)


def _samples_range(plan: ExperimentPlan) -> np.ndarray:
    return np.arange(plan.samples, dtype=np.int64)


def moment_table(
    plan: ExperimentPlan,
    x_list: Sequence[float] | None = None,
    q_list: Sequence[float] | None = None,
) -> dict[tuple[float, float], EstimateWithCI]:
    """E|M(x)|^q for every (x, q) pair, sharing one trace per sample."""
    xs = tuple(x_list) if x_list is not None else plan.x_grid
    qs = tuple(q_list) if q_list is not None else plan.q_list
    if not xs or not qs:
        raise ParameterError("moment_table needs nonempty x and q lists")
    marks = sorted({int(math.floor(x)) for x in xs})
    res = collect_walks(
        plan.model,
        marks[-1],
        marks,
        _samples_range(plan),
        plan.master_seed,
        census=False,
        workers=plan.workers,
        budget=resolve_budget(plan.budget),
    )
    col = {m: j for j, m in enumerate(res.marks)}
    out: dict[tuple[float, float], EstimateWithCI] = {}
    for x in xs:
        m_vals = res.values[:, col[int(math.floor(x))]].astype(np.float64)
        for q in qs:
            if q == 0:
                vals = np.ones_like(m_vals)
            else:
                vals = np.abs(m_vals) ** q
            purpose = f"moment|model={plan.model.kind}|x={x!r}|q={q!r}"
            out[(x, q)] = bootstrap_estimate(
                vals, plan.master_seed, purpose, plan.n_boot
            )
    return out


def estimate_moment(plan: ExperimentPlan, x: float, q: float) -> EstimateWithCI:
    """Sample mean of |M(floor(x))|^q with bootstrap CI."""
    return moment_table(plan, [x], [q])[(x, q)]


def expected_v_table(
    plan: ExperimentPlan, x_list: Sequence[float] | None = None
) -> dict[float, EstimateWithCI]:
    """E V(x) on a grid of x, one census trace per sample."""
    xs = tuple(x_list) if x_list is not None else plan.x_grid
    if not xs:
        raise ParameterError("expected_v_table needs a nonempty x grid")
    marks = sorted({int(math.floor(x)) for x in xs})
    res = collect_walks(
        plan.model,
        marks[-1],
        marks,
        _samples_range(plan),
        plan.master_seed,
        census=True,
        workers=plan.workers,
        budget=resolve_budget(plan.budget),
    )
    col = {m: j for j, m in enumerate(res.marks)}
    out = {}
    for x in xs:
        counts = res.changes[:, col[int(math.floor(x))]].astype(np.float64)
        purpose = f"avg-v|model={plan.model.kind}|x={x!r}"
        out[x] = bootstrap_estimate(counts, plan.master_seed, purpose, plan.n_boot)
    return out


def estimate_expected_V(plan: ExperimentPlan, x: float) -> EstimateWithCI:
    """Mean number of sign changes of M(u) over u in [1, x]."""
    return expected_v_table(plan, [x])[x]


def estimate_sign_change_prob(plan: ExperimentPlan, x: float, N: int) -> EstimateWithCI:
    """P(at least one sign change of M(u) for integer u in (x, e^N x])."""
    a = int(math.floor(x))
    b = int(math.floor(math.exp(N) * x))
    purpose = f"signprob|model={plan.model.kind}|x={x!r}|N={N}"
    if b <= a:
        return EstimateWithCI(0.0, 0.0, 0.0, 0.0, plan.samples, plan.master_seed, purpose)
    res = collect_walks(
        plan.model,
        b,
        [a, b],
        _samples_range(plan),
        plan.master_seed,
        census=True,
        workers=plan.workers,
        budget=resolve_budget(plan.budget),
    )
    ind = (res.changes[:, 1] - res.changes[:, 0] >= 1).astype(np.float64)
    return bootstrap_estimate(ind, plan.master_seed, purpose, plan.n_boot)


def x_ell_grid(epsilon: float, ell_max: int) -> list[float]:
    """The spacing grid x_l = exp(l * (log l)^{1/2+epsilon}), l = 2..ell_max."""
    if not (0 < epsilon <= 0.01):
        raise ParameterError(f"epsilon must lie in (0, 1/100], got {epsilon}")
    if ell_max < 2:
        raise ParameterError(f"ell_max must be >= 2, got {ell_max}")
    return [
        math.exp(ell * math.log(ell) ** (0.5 + epsilon))
        for ell in range(2, ell_max + 1)
    ]


@dataclass(frozen=True)
class EventProbEstimates:
    """Empirical probabilities of the forcing events on the checkpoint grid."""

    p_a: EstimateWithCI
    p_b: EstimateWithCI
    p_change_given_ab: EstimateWithCI | None
    n_ab: int
    lambda1: float
    threshold_ok: bool


def estimate_event_probs(
    plan: ExperimentPlan,
    x: float,
    N: int,
    epsilon: float | None = None,
    delta: float | None = None,
) -> EventProbEstimates:
    eps = plan.epsilon if epsilon is None else epsilon
    dlt = plan.delta if delta is None else delta
    if eps <= 0:
        raise ParameterError("epsilon must be positive")
    if not (0 < dlt < 1):
        raise ParameterError("delta must lie in (0, 1)")
    positions = grid_positions(x, N)
    res = collect_walks(
        plan.model,
        positions[-1],
        positions,
        _samples_range(plan),
        plan.master_seed,
        census=False,
        workers=plan.workers,
        budget=resolve_budget(plan.budget),
    )
    denom = np.array([math.sqrt(math.exp(n) * x) for n in range(1, N + 1)])
    col = [int(np.searchsorted(res.marks, p)) for p in positions]
    y = res.values[:, col].astype(np.float64) / denom
    lam1 = lambda_exact(LambdaParams(N=N, q=1.0, x=x))
    s_n = y.sum(axis=1)
    s_star = np.abs(y).sum(axis=1)
    a = s_star >= eps * lam1
    b = np.abs(s_n) <= lam1 ** (1.0 - dlt)
    mixed = (y.min(axis=1) < 0) & (y.max(axis=1) > 0)
    base = f"events|model={plan.model.kind}|x={x!r}|N={N}|eps={eps!r}|delta={dlt!r}"
    p_a = bootstrap_estimate(
        a.astype(np.float64), plan.master_seed, base + "|A", plan.n_boot
    )
    p_b = bootstrap_estimate(
        b.astype(np.float64), plan.master_seed, base + "|B", plan.n_boot
    )
    ab = a & b
    n_ab = int(ab.sum())
    cond = None
    if N > 1 and n_ab > 0:
        cond = bootstrap_estimate(
            mixed[ab].astype(np.float64), plan.master_seed, base + "|cond", plan.n_boot
        )
    return EventProbEstimates(
        p_a=p_a,
        p_b=p_b,
        p_change_given_ab=cond,
        n_ab=n_ab,
        lambda1=lam1,
        threshold_ok=lam1 ** (1.0 - dlt) < eps * lam1,
    )


def _pearson(block: np.ndarray) -> float:
    a = block[:, 0]
    b = block[:, 1]
    sa = a.std()
    sb = b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def estimate_correlation(
    plan: ExperimentPlan, x: float, n: int, m: int
) -> EstimateWithCI:
    """Empirical Pearson correlation of (Y_n, Y_m) across samples."""
    purpose = f"corr|model={plan.model.kind}|x={x!r}|n={n}|m={m}"
    if n == m:
        return EstimateWithCI(
            1.0, 1.0, 1.0, 0.0, plan.samples, plan.master_seed, purpose
        )
    if n > m:
        n, m = m, n
    positions = grid_positions(x, m)
    pos = [positions[n - 1], positions[m - 1]]
    res = collect_walks(
        plan.model,
        pos[-1],
        pos,
        _samples_range(plan),
        plan.master_seed,
        census=False,
        workers=plan.workers,
        budget=resolve_budget(plan.budget),
    )
    col = [int(np.searchsorted(res.marks, p)) for p in pos]
    denom = np.array(
        [math.sqrt(math.exp(n) * x), math.sqrt(math.exp(m) * x)]
    )
    pairs = res.values[:, col].astype(np.float64) / denom
    return bootstrap_estimate(
        pairs, plan.master_seed, purpose, plan.n_boot, statistic=_pearson
    )


@dataclass
class RunManifest:
    """Everything needed to reproduce a run's numbers bit-exactly."""

    plan: dict
    code_version: str
    wall_time_s: float
    experiment_seeds: dict
    zero_policy: str = "zero-skip"

    def as_dict(self) -> dict:
        return {
            "plan": self.plan,
            "code_version": self.code_version,
            "wall_time_s": self.wall_time_s,
            "experiment_seeds": self.experiment_seeds,
            "zero_policy": self.zero_policy,
        }


def plan_as_dict(plan: ExperimentPlan) -> dict:
    return {
        "master_seed": plan.master_seed,
        "samples": plan.samples,
        "model": plan.model.kind,
        "x_grid": list(plan.x_grid),
        "N": plan.N,
        "epsilon": plan.epsilon,
        "delta": plan.delta,
        "q_list": list(plan.q_list),
        "workers": plan.workers,
        "budget": plan.budget,
        "n_boot": plan.n_boot,
    }
