"""Acceptance gate: every exit criterion as a callable check.

Each criterion returns a :class:`CriterionResult`; ``run_all`` executes the
full gate in order and never raises (an exception inside a criterion is a
failure with the message as detail).  Both ``pytest tests/test_acceptance.py``
and ``rmflab selftest`` run these same functions.

Sampling criteria run at an explicit seed (default ACCEPTANCE_SEED); the
heavy experiments pass their exact step requirement as the budget, since
several criteria deliberately exceed the default 1e9-step guardrail.
"""

from __future__ import annotations

import json
import math
import subprocess
import sys
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import pinned
from .analysis import (
    LambdaParams,
    count_sign_changes,
    exact_correlation,
    lambda_asymptotic,
    lambda_exact,
)
from .models import ModelSpec, collect_walks
from .montecarlo import (
    ExperimentPlan,
    bootstrap_estimate,
    estimate_expected_V,
    estimate_moment,
    estimate_sign_change_prob,
    expected_v_table,
    x_ell_grid,
)
from .rmf import grid_positions
from .sieve import mertens_trace, squarefree_count


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed_s: float


def _wrap(number: int, name: str, fn, *args, **kw) -> CriterionResult:
    t0 = time.time()
    try:
        passed, detail = fn(*args, **kw)
    except Exception as exc:  # an acceptance criterion must never raise
        passed, detail = False, f"exception: {exc!r}"
    return CriterionResult(number, name, bool(passed), detail, time.time() - t0)


def _naive_recount(values) -> int:
    last = 0
    count = 0
    for v in values:
        s = (v > 0) - (v < 0)
        if s == 0:
            continue
        if last != 0 and s != last:
            count += 1
        last = s
    return count


# --- criteria -----------------------------------------------------------


def crit_second_moment(seed: int, workers: int) -> tuple[bool, str]:
    xs = [10**3, 10**4, 10**5]
    plan = ExperimentPlan(
        master_seed=seed, samples=2000, model=ModelSpec("rmf"), workers=workers,
        budget=xs[-1] * 2000,
    )
    res = collect_walks(
        plan.model, xs[-1], xs, np.arange(plan.samples), seed,
        census=False, workers=workers, budget=plan.budget,
    )
    parts = []
    ok = True
    for j, x in enumerate(xs):
        sq = res.values[:, j].astype(np.float64) ** 2
        est = bootstrap_estimate(sq, seed, f"accept1|x={x}", plan.n_boot)
        q = squarefree_count(x)
        dev = abs(est.point - q) / est.se if est.se > 0 else math.inf
        ok &= dev <= 4.0
        parts.append(f"x={x}: EM^2={est.point:.1f} Q={q} dev={dev:.2f}se")
    return ok, "; ".join(parts)


def crit_correlation_decay(seed: int, workers: int) -> tuple[bool, str]:
    x = 10**3
    n_max = 6
    samples = 2000
    positions = grid_positions(x, n_max)
    res = collect_walks(
        ModelSpec("rmf"), positions[-1], positions, np.arange(samples), seed,
        census=False, workers=workers, budget=positions[-1] * samples,
    )
    denom = np.array([math.sqrt(math.exp(n) * x) for n in range(1, n_max + 1)])
    cols = [int(np.searchsorted(res.marks, p)) for p in positions]
    y = res.values[:, cols].astype(np.float64) / denom
    worst_dev = 0.0
    worst_bound = 0.0
    for n in range(1, n_max):
        for m in range(n + 1, n_max + 1):
            pairs = y[:, [n - 1, m - 1]]
            a, b = pairs[:, 0], pairs[:, 1]
            rho_hat = float(np.corrcoef(a, b)[0, 1])
            boots = bootstrap_estimate(
                pairs, seed, f"accept2|{n},{m}",
                statistic=lambda blk: float(np.corrcoef(blk[:, 0], blk[:, 1])[0, 1]),
            )
            rho = exact_correlation(x, n, m)
            dev = abs(rho_hat - rho) / boots.se if boots.se > 0 else math.inf
            worst_dev = max(worst_dev, dev)
            worst_bound = max(worst_bound, abs(rho) * math.exp((m - n) / 2.0))
    ok = worst_dev <= 4.0 and worst_bound <= 2.0
    return ok, f"max dev={worst_dev:.2f}se; max |rho|e^((m-n)/2)={worst_bound:.3f}"


def crit_lambda_asymptotics(seed: int, workers: int) -> tuple[bool, str]:
    parts = []
    ok = True
    for llx, tol in ((100.0, 0.25), (1e4, 0.05)):
        for q in (1.0, 1.5):
            p = LambdaParams(N=10**4, q=q, log_log_x=llx)
            ex = lambda_exact(p)
            asym = lambda_asymptotic(p)
            rel = abs(ex - asym) / ex
            good = rel <= tol
            ok &= good
            parts.append(f"llx={llx:g},q={q}: rel={rel:.3f} (tol {tol}){'' if good else ' FAIL'}")
    return ok, "; ".join(parts)


def crit_bruteforce_oracle(seed: int, workers: int) -> tuple[bool, str]:
    n = 16
    # exact enumeration of all 2^16 paths
    codes = np.arange(1 << n, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(n, dtype=np.uint32)[None, :]) & 1).astype(np.int8)
    steps = 1 - 2 * bits
    paths = np.cumsum(steps, axis=1)
    v_counts = np.empty(1 << n, dtype=np.int64)
    for i in range(1 << n):
        row = paths[i]
        rep = count_sign_changes(row)
        naive = _naive_recount(row)
        if rep.count != naive:
            return False, f"counter mismatch on path {i}: {rep.count} vs naive {naive}"
        v_counts[i] = rep.count
    exact_v = v_counts.mean()
    exact_abs = np.abs(paths[:, -1]).mean()
    # Monte Carlo at 1e5 samples
    plan_samples = 10**5
    res = collect_walks(
        ModelSpec("iid_rademacher"), n, [n], np.arange(plan_samples), seed,
        census=True, workers=workers, budget=n * plan_samples,
    )
    est_v = bootstrap_estimate(res.changes[:, 0].astype(np.float64), seed, "accept4|V")
    est_abs = bootstrap_estimate(np.abs(res.values[:, 0]).astype(np.float64), seed, "accept4|absS")
    dev_v = abs(est_v.point - exact_v) / est_v.se
    dev_abs = abs(est_abs.point - exact_abs) / est_abs.se
    ok = dev_v <= 4.0 and dev_abs <= 4.0
    return ok, (
        f"EV(16)={exact_v:.4f} mc={est_v.point:.4f} ({dev_v:.2f}se); "
        f"E|S16|={exact_abs:.4f} mc={est_abs.point:.4f} ({dev_abs:.2f}se); "
        f"counter exact on all {1 << n} paths"
    )


def crit_erdos_hunt(seed: int, workers: int) -> tuple[bool, str]:
    xs = [2**k for k in range(10, 21)]
    samples = 400
    plan = ExperimentPlan(
        master_seed=seed, samples=samples, model=ModelSpec("iid_rademacher"),
        workers=workers, budget=xs[-1] * samples,
    )
    table = expected_v_table(plan, xs)
    worst = math.inf
    for x in xs:
        floor = 0.4 * math.log(x)
        margin = table[x].ci_lo - floor
        worst = min(worst, margin)
        if margin < 0:
            return False, f"x={x}: EV lower CI {table[x].ci_lo:.2f} < 0.4 log x = {floor:.2f}"
    return True, f"min (EV_ci_lo - 0.4 log x) over grid = {worst:.2f}"


def crit_sign_change_prob(seed: int, workers: int) -> tuple[bool, str]:
    if pinned.THETA_SIGNPROB is None:
        return False, "no pinned theta; run scripts/run_pilot.py first"
    xs = [10**3, 10**4, 10**5]
    n_interval = 8
    samples = 10**3
    biggest = int(math.exp(n_interval) * xs[-1])
    plan = ExperimentPlan(
        master_seed=seed, samples=samples, model=ModelSpec("rmf"),
        workers=workers, budget=biggest * samples + 1,
    )
    points = []
    parts = []
    for x in xs:
        est = estimate_sign_change_prob(plan, x, n_interval)
        points.append(est.point)
        parts.append(f"x={x}: p={est.point:.3f}")
    above = all(p > pinned.THETA_SIGNPROB for p in points)
    trend = sps.spearmanr(np.log(xs), points, alternative="less")
    no_decrease = trend.pvalue > 0.05
    ok = above and no_decrease
    return ok, (
        f"{'; '.join(parts)}; theta={pinned.THETA_SIGNPROB}; "
        f"spearman p(decreasing)={trend.pvalue:.3f}"
    )


def _avg_v_grid() -> list[float]:
    return [x for x in x_ell_grid(0.01, 40) if 10**3 <= x <= 10**6]


def crit_avg_v_growth(seed: int, workers: int) -> tuple[bool, str]:
    if pinned.KAPPA_AVG_V is None:
        return False, "no pinned kappa-hat; run scripts/run_pilot.py first"
    xs = _avg_v_grid()
    samples = 600
    plan = ExperimentPlan(
        master_seed=seed, samples=samples, model=ModelSpec("rmf"),
        workers=workers, budget=int(xs[-1]) * samples + 1,
    )
    table = expected_v_table(plan, xs)
    ratios = []
    ci_floors = []
    parts = []
    for x in xs:
        scale = math.log(math.log(x)) ** 0.51 / math.log(x)
        est = table[x]
        ratios.append(est.point * scale)
        ci_floors.append(est.ci_lo * scale)
        parts.append(f"x={x:.3g}: ratio={est.point * scale:.3f} [{est.ci_lo * scale:.3f},{est.ci_hi * scale:.3f}]")
    ok = min(ratios) >= pinned.KAPPA_AVG_V / 2.0 and min(ci_floors) > 0
    return ok, f"min ratio={min(ratios):.3f} vs kappa/2={pinned.KAPPA_AVG_V / 2:.3f}; " + "; ".join(parts)


def crit_harper_shape(seed: int, workers: int) -> tuple[bool, str]:
    xs = [10**4, 10**5, 10**6, 10**7]
    samples = 500
    res = collect_walks(
        ModelSpec("rmf"), xs[-1], xs, np.arange(samples), seed,
        census=False, workers=workers, budget=xs[-1] * samples,
    )
    ok = True
    parts = []
    for j, x in enumerate(xs):
        m = res.values[:, j].astype(np.float64)
        ratio = np.abs(m).mean() / math.sqrt((m**2).mean())
        target = math.log(math.log(x)) ** -0.25
        rel = ratio / target
        good = 0.25 <= rel <= 4.0
        ok &= good
        parts.append(f"x={x:g}: ratio={ratio:.4f} target={target:.4f} rel={rel:.2f}")
    return ok, "; ".join(parts)


def crit_mertens_baseline(seed: int, workers: int) -> tuple[bool, str]:
    if pinned.MERTENS_1E6_CHANGES is None:
        return False, "no pinned census; run scripts/run_pilot.py first"
    tr = mertens_trace(10**6)
    ok = (
        tr.sign_change_count == pinned.MERTENS_1E6_CHANGES
        and tr.final_value == pinned.MERTENS_1E6_FINAL
    )
    small = mertens_trace(10)
    ok &= small.final_value == -1
    rep = count_sign_changes(_mertens_values(10))
    first_change_u = rep.positions[0] + 1 if rep.positions else None
    ok &= first_change_u == 3
    return ok, (
        f"V(1e6)={tr.sign_change_count} (pinned {pinned.MERTENS_1E6_CHANGES}), "
        f"M(1e6)={tr.final_value} (pinned {pinned.MERTENS_1E6_FINAL}), "
        f"M(10)={small.final_value}, first change at u={first_change_u}"
    )


def _mertens_values(x: int) -> list[int]:
    from .sieve import mobius_sieve

    mu = mobius_sieve(x)
    return list(np.cumsum(mu[1:].astype(np.int64)))


_PERF_CHILD = r"""
import json, resource, time
from rmflab.rmf import SignOracle, rmf_trace
t0 = time.time()
tr = rmf_trace(SignOracle(master_seed={seed}), 10**8, budget=None)
elapsed = time.time() - t0
rss_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
print(json.dumps({{"elapsed": elapsed, "rss_mb": rss_mb,
                   "final": tr.final_value, "changes": tr.sign_change_count}}))
"""


def crit_performance(seed: int, workers: int) -> tuple[bool, str]:
    proc = subprocess.run(
        [sys.executable, "-c", _PERF_CHILD.format(seed=seed)],
        capture_output=True, text=True, timeout=600,
    )
    if proc.returncode != 0:
        return False, f"trace subprocess failed: {proc.stderr[-300:]}"
    info = json.loads(proc.stdout.strip().splitlines()[-1])
    reasons = []
    if info["elapsed"] >= 60.0:
        reasons.append(f"trace took {info['elapsed']:.1f}s >= 60s")
    if info["rss_mb"] >= 1024.0:
        reasons.append(f"peak rss {info['rss_mb']:.0f}MB >= 1GB")
    # reproducibility across worker counts on representative experiments
    for maker in (
        lambda w: estimate_moment(_plan(seed, 200, w, 10**4), 10**4, 2.0),
        lambda w: estimate_expected_V(_plan(seed, 200, w, 10**4), 10**4),
        lambda w: estimate_sign_change_prob(_plan(seed, 200, w, 10**4), 100.0, 2),
    ):
        if maker(1) != maker(2):
            reasons.append("worker count changed an estimate")
            break
    ok = not reasons
    detail = (
        f"x=1e8 trace: {info['elapsed']:.1f}s, rss {info['rss_mb']:.0f}MB, "
        f"M={info['final']}, V={info['changes']}; workers 1 vs 2 identical"
    )
    return ok, detail if ok else detail + "; " + "; ".join(reasons)


def _plan(seed: int, samples: int, workers: int, x: int) -> ExperimentPlan:
    return ExperimentPlan(
        master_seed=seed, samples=samples, model=ModelSpec("rmf"),
        workers=workers, budget=int(math.exp(2)) * x * samples + 10**6,
    )


def crit_sidon(seed: int, workers: int) -> tuple[bool, str]:
    xs = [100, 1000]
    samples = 10**4
    res = collect_walks(
        ModelSpec("sidon_cosine"), xs[-1], xs, np.arange(samples), seed,
        census=False, workers=workers, budget=xs[-1] * samples,
    )
    ok = True
    parts = []
    for j, x in enumerate(xs):
        m = res.values[:, j]
        m2 = (m**2).mean()
        m4 = (m**4).mean()
        kurt = m4 / m2**2
        shape = np.abs(m).mean() / math.sqrt(m2)
        good = 1.0 <= kurt <= 10.0 and shape >= 0.3
        ok &= good
        parts.append(f"x={x}: EM4/(EM2)^2={kurt:.2f}, E|M|/sqrt(EM2)={shape:.3f}")
    return ok, "; ".join(parts)


def crit_harmonic_growth(seed: int, workers: int) -> tuple[bool, str]:
    xs = [2**k for k in range(8, 23)]
    samples = 500
    plan = ExperimentPlan(
        master_seed=seed, samples=samples, model=ModelSpec("harmonic_rademacher"),
        workers=workers, budget=xs[-1] * samples + 1,
    )
    table = expected_v_table(plan, xs)
    ev = np.array([table[x].point for x in xs])
    lx = np.log(np.array(xs, dtype=float))
    llx = np.log(lx)
    fit_ll = sps.linregress(llx, ev)
    fit_l = sps.linregress(lx, ev)
    ssr_ll = float(np.sum((ev - (fit_ll.intercept + fit_ll.slope * llx)) ** 2))
    ssr_l = float(np.sum((ev - (fit_l.intercept + fit_l.slope * lx)) ** 2))
    slope_lo = fit_ll.slope - 1.96 * fit_ll.stderr
    ok = slope_lo > 0 and ssr_ll < ssr_l
    return ok, (
        f"slope(EV ~ loglog x)={fit_ll.slope:.3f} (95% lo {slope_lo:.3f}); "
        f"SSR loglog={ssr_ll:.3f} < SSR log={ssr_l:.3f}: {ssr_ll < ssr_l}"
    )


CRITERIA = [
    (1, "exact second-moment identity", crit_second_moment),
    (2, "correlation decay", crit_correlation_decay),
    (3, "grid-sum asymptotics", crit_lambda_asymptotics),
    (4, "brute-force oracle equivalence", crit_bruteforce_oracle),
    (5, "iid sign-change floor", crit_erdos_hunt),
    (6, "local sign-change probability", crit_sign_change_prob),
    (7, "averaged-V growth", crit_avg_v_growth),
    (8, "moment-shape ratio", crit_harper_shape),
    (9, "Mertens baseline", crit_mertens_baseline),
    (10, "performance and reproducibility", crit_performance),
    (11, "sidon cosine moments", crit_sidon),
    (12, "harmonic loglog growth", crit_harmonic_growth),
]


def run_all(
    seed: int | None = None,
    workers: int = 1,
    numbers: list[int] | None = None,
) -> list[CriterionResult]:
    seed = pinned.ACCEPTANCE_SEED if seed is None else seed
    results = []
    for number, name, fn in CRITERIA:
        if numbers and number not in numbers:
            continue
        results.append(_wrap(number, name, fn, seed, workers))
    return results
