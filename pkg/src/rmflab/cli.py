"""Batch command-line front end.

Subcommands: simulate, moments, lambda, correlations, events, signprob,
avg-v, mertens, models, selftest.  Every experiment writes flat result
records (CSV or JSON lines) plus a run manifest sufficient to reproduce
each number bit-exactly.

Config precedence is flags > config file > defaults.  The config file is
flat ``key = value`` text; keys are the long option names of the chosen
subcommand (dashes or underscores).  Unknown keys are rejected.

Exit codes: 0 success, 2 parameter error, 3 resource error.  Errors print
to stderr as ``rmflab: error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys
import time

from . import __version__
from .analysis import (
    LambdaParams,
    exact_correlation,
    lambda_asymptotic,
    lambda_exact,
)
from .errors import ParameterError, ResourceError, RmflabError
from .models import KINDS, ModelSpec, mian_chowla, psi_predictor, sample_path
from .montecarlo import (
    EstimateWithCI,
    ExperimentPlan,
    RunManifest,
    estimate_correlation,
    estimate_event_probs,
    estimate_expected_V,
    estimate_moment,
    estimate_sign_change_prob,
    expected_v_table,
    moment_table,
    plan_as_dict,
    resolve_budget,
    x_ell_grid,
)
from .sieve import mertens_trace

CSV_HEADER = (
    "experiment,model,x,N,q,point,ci_lo,ci_hi,n_samples,seed,"
    "regime_n_small,regime_loglog_ok"
)
RECORD_FIELDS = CSV_HEADER.split(",")


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def record(
    experiment: str,
    model: str = "",
    x=None,
    N=None,
    q=None,
    point=None,
    est: EstimateWithCI | None = None,
    n_samples=None,
    seed=None,
    flags=None,
) -> dict:
    if est is not None:
        point = est.point
        ci_lo, ci_hi = est.ci_lo, est.ci_hi
        n_samples = est.n_samples
        seed = est.seed
    else:
        ci_lo = ci_hi = None
    return {
        "experiment": experiment,
        "model": model,
        "x": x,
        "N": N,
        "q": q,
        "point": point,
        "ci_lo": ci_lo,
        "ci_hi": ci_hi,
        "n_samples": n_samples,
        "seed": seed,
        "regime_n_small": None if flags is None else flags.n_small,
        "regime_loglog_ok": None if flags is None else flags.loglog_ok,
    }


def export(records: list[dict], fmt: str, path: str, manifest_ref: str | None = None):
    """Write one record per line; CSV keeps the fixed documented header."""
    if not records:
        raise ParameterError("no records to export")
    if fmt not in ("csv", "jsonl"):
        raise ParameterError(f"unknown format {fmt!r}; use csv or jsonl")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            if fmt == "csv":
                fh.write(CSV_HEADER + "\n")
                for r in records:
                    fh.write(",".join(_fmt(r.get(k)) for k in RECORD_FIELDS) + "\n")
            else:
                for r in records:
                    row = {k: r.get(k) for k in RECORD_FIELDS}
                    if manifest_ref:
                        row["manifest"] = manifest_ref
                    for k, v in row.items():
                        if isinstance(v, float):
                            row[k] = float(format(v, ".17g"))
                    fh.write(json.dumps(row) + "\n")
    except OSError as exc:
        raise ResourceError(f"cannot write {path}: {exc}") from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad numeric list {text!r}") from exc


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in _parse_floats(text)]


def load_config(path: str) -> dict[str, str]:
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParameterError(f"{path}:{line_no}: expected 'key = value'")
                key, val = line.split("=", 1)
                cfg[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    return cfg


def _apply_config(args: argparse.Namespace, parser_dests: set[str]):
    if not getattr(args, "config", None):
        return
    cfg = load_config(args.config)
    unknown = set(cfg) - parser_dests
    if unknown:
        raise ParameterError(
            f"unknown config keys: {sorted(unknown)}; valid: {sorted(parser_dests)}"
        )
    for key, raw in cfg.items():
        if getattr(args, key, None) is None:
            setattr(args, key, raw)


_COMMON_DEFAULTS = {
    "samples": 1000,
    "workers": 1,
    "format": "csv",
    "n_boot": 1000,
    "epsilon": 0.1,
    "delta": 0.1,
    "model": "rmf",
}


def _common(sub: argparse.ArgumentParser):
    sub.add_argument("--seed", type=int, default=None, help="master seed (all randomness flows from it)")
    sub.add_argument("--samples", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None, help="sample-level parallelism; output independent of it")
    sub.add_argument("--out", default=None, help="output file path")
    sub.add_argument("--format", choices=("csv", "jsonl"), default=None)
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--budget", type=float, default=None, help="step budget override (also env RMFLAB_BUDGET)")
    sub.add_argument("--n-boot", dest="n_boot", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmflab", description=__doc__)
    p.add_argument("--version", action="version", version=f"rmflab {__version__}")
    sp = p.add_subparsers(dest="command", required=True)

    s = sp.add_parser("simulate", help="one sample path of a model walk")
    s.add_argument("--model", choices=KINDS, default=None)
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--checkpoints", type=str, default="")
    s.add_argument("--sample-index", type=int, default=0)
    _common(s)

    s = sp.add_parser("moments", help="E|M(x)|^q over x- and q-grids")
    s.add_argument("--model", choices=KINDS, default=None)
    s.add_argument("--x", type=str, required=True, help="comma list of x values")
    s.add_argument("--q", type=str, default="1,2", help="comma list of q values")
    _common(s)

    s = sp.add_parser("lambda", help="grid sum: exact vs asymptotic")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--x", type=float, default=None)
    s.add_argument("--log-x", dest="log_x", type=float, default=None)
    s.add_argument("--loglog-x", dest="loglog_x", type=float, default=None)
    s.add_argument("--q", type=str, default="1")
    _common(s)

    s = sp.add_parser("correlations", help="empirical vs exact checkpoint correlations")
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--m", type=int, default=None, help="single partner index")
    s.add_argument("--max-m", dest="max_m", type=int, default=None, help="all pairs n<m<=max-m")
    _common(s)

    s = sp.add_parser("events", help="probabilities of the forcing events A, B")
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--delta", type=float, default=None)
    _common(s)

    s = sp.add_parser("signprob", help="P(sign change in (x, e^N x])")
    s.add_argument("--x", type=str, required=True, help="comma list of x values")
    s.add_argument("--N", type=int, required=True)
    _common(s)

    s = sp.add_parser("avg-v", help="averaged sign-change counts E V(x)")
    s.add_argument("--model", choices=KINDS, default=None)
    s.add_argument("--x", type=str, default=None, help="explicit comma list of x values")
    s.add_argument("--grid-eps", dest="grid_eps", type=float, default=None, help="use the x_ell grid with this epsilon")
    s.add_argument("--ell-max", dest="ell_max", type=int, default=20)
    s.add_argument("--xmin", type=float, default=None)
    s.add_argument("--xmax", type=float, default=None)
    _common(s)

    s = sp.add_parser("mertens", help="deterministic Mertens sign-change census")
    s.add_argument("--x", type=float, required=True)
    _common(s)

    s = sp.add_parser("models", help="list model kinds and their declarations")
    _common(s)

    s = sp.add_parser("selftest", help="run the full acceptance suite")
    _common(s)
    return p


def _resolve(args, key):
    v = getattr(args, key, None)
    if v is None:
        return _COMMON_DEFAULTS.get(key)
    if key in ("samples", "workers", "n_boot") and not isinstance(v, int):
        return int(v)
    if key in ("epsilon", "delta") and not isinstance(v, float):
        return float(v)
    return v


def _plan(args) -> ExperimentPlan:
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = secrets.randbits(48)
        print(f"rmflab: note: no --seed given; drew {seed} from system entropy", file=sys.stderr)
        args.seed = seed
    budget = getattr(args, "budget", None)
    model = ModelSpec(_resolve(args, "model") or "rmf")
    return ExperimentPlan(
        master_seed=int(seed) if not isinstance(seed, int) else seed,
        samples=_resolve(args, "samples"),
        model=model,
        N=int(getattr(args, "N", 0) or 8),
        epsilon=float(_resolve(args, "epsilon")),
        delta=float(_resolve(args, "delta")),
        workers=_resolve(args, "workers"),
        budget=None if budget is None else int(float(budget)),
        n_boot=_resolve(args, "n_boot"),
    )


def _emit(args, records: list[dict], plan: ExperimentPlan | None, t0: float) -> None:
    out = getattr(args, "out", None)
    for r in records:
        cells = [f"{k}={_fmt(r.get(k))}" for k in RECORD_FIELDS if r.get(k) not in (None, "")]
        print("  ".join(cells))
    if not out:
        return
    manifest_path = out + ".manifest.json"
    manifest = RunManifest(
        plan=plan_as_dict(plan) if plan else {"seed": getattr(args, "seed", None)},
        code_version=__version__,
        wall_time_s=time.time() - t0,
        experiment_seeds={r["experiment"]: r.get("seed") for r in records},
    )
    fmt = _resolve(args, "format")
    export(records, fmt, out, manifest_ref=os.path.basename(manifest_path))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True)
    print(f"rmflab: wrote {out} and {manifest_path}", file=sys.stderr)


def cmd_simulate(args) -> int:
    t0 = time.time()
    plan = _plan(args)
    checkpoints = _parse_ints(args.checkpoints) if args.checkpoints else []
    trace = sample_path(
        plan.model,
        int(args.x),
        plan.master_seed,
        sample_index=args.sample_index,
        checkpoints=checkpoints,
        budget=resolve_budget(plan.budget),
    )
    k = plan.model.kind
    recs = [
        record("simulate-final", k, x=trace.x_end, point=float(trace.final_value), n_samples=1, seed=plan.master_seed),
        record("simulate-changes", k, x=trace.x_end, point=float(trace.sign_change_count), n_samples=1, seed=plan.master_seed),
    ]
    for c, v in zip(trace.checkpoint_requests, trace.checkpoint_values):
        recs.append(record("simulate-checkpoint", k, x=c, point=float(v), n_samples=1, seed=plan.master_seed))
    _emit(args, recs, plan, t0)
    return 0


def cmd_moments(args) -> int:
    t0 = time.time()
    plan = _plan(args)
    xs = _parse_floats(args.x)
    qs = _parse_floats(args.q)
    table = moment_table(plan, xs, qs)
    recs = [
        record("moment", plan.model.kind, x=x, q=q, est=table[(x, q)])
        for x in xs
        for q in qs
    ]
    _emit(args, recs, plan, t0)
    return 0


def cmd_lambda(args) -> int:
    t0 = time.time()
    qs = _parse_floats(args.q)
    recs = []
    for q in qs:
        params = LambdaParams(
            N=args.N, q=q, x=args.x, log_x=args.log_x, log_log_x=args.loglog_x
        )
        exact = lambda_exact(params)
        recs.append(record("lambda-exact", x=args.x, N=args.N, q=q, point=exact))
        if q <= 1.9:
            asym = lambda_asymptotic(params)
            recs.append(record("lambda-asymptotic", x=args.x, N=args.N, q=q, point=asym))
            print(f"q={q}: exact={exact:.6g} asymptotic={asym:.6g} ratio={exact / asym:.6g}")
        else:
            print(f"q={q}: exact={exact:.6g} (asymptotic needs q <= 1.9)")
    _emit(args, recs, None, t0)
    return 0


def cmd_correlations(args) -> int:
    t0 = time.time()
    plan = _plan(args)
    pairs = []
    if args.max_m is not None:
        pairs = [(n, m) for n in range(1, args.max_m) for m in range(n + 1, args.max_m + 1)]
    elif args.m is not None:
        pairs = [(args.n, args.m)]
    else:
        raise ParameterError("give --m or --max-m")
    recs = []
    for n, m in pairs:
        est = estimate_correlation(plan, args.x, n, m)
        exact = exact_correlation(args.x, n, m)
        recs.append(record(f"correlation[{n},{m}]", plan.model.kind, x=args.x, N=m, est=est))
        recs.append(record(f"correlation-exact[{n},{m}]", "exact", x=args.x, N=m, point=exact))
    _emit(args, recs, plan, t0)
    return 0


def cmd_events(args) -> int:
    t0 = time.time()
    plan = _plan(args)
    res = estimate_event_probs(plan, args.x, args.N, args.epsilon, args.delta)
    flags = plan.regime_flags(args.x, args.N)
    recs = [
        record("event-A", plan.model.kind, x=args.x, N=args.N, est=res.p_a, flags=flags),
        record("event-B", plan.model.kind, x=args.x, N=args.N, est=res.p_b, flags=flags),
    ]
    if res.p_change_given_ab is not None:
        recs.append(
            record("event-change-given-AB", plan.model.kind, x=args.x, N=args.N,
                   est=res.p_change_given_ab, flags=flags)
        )
    else:
        print("conditional sign-change frequency undefined (no A&B samples or N=1)")
    print(f"lambda1={res.lambda1:.6g} forcing geometry holds: {res.threshold_ok}")
    _emit(args, recs, plan, t0)
    return 0


def cmd_signprob(args) -> int:
    t0 = time.time()
    plan = _plan(args)
    recs = []
    for x in _parse_floats(args.x):
        flags = plan.regime_flags(x, args.N)
        if not flags.n_small or not flags.loglog_ok:
            print(f"rmflab: warning: x={x} N={args.N} outside hypothesis regime {flags}", file=sys.stderr)
        est = estimate_sign_change_prob(plan, x, args.N)
        recs.append(record("signprob", plan.model.kind, x=x, N=args.N, est=est, flags=flags))
    _emit(args, recs, plan, t0)
    return 0


def cmd_avg_v(args) -> int:
    t0 = time.time()
    plan = _plan(args)
    if args.x:
        xs = _parse_floats(args.x)
    elif args.grid_eps is not None:
        xs = x_ell_grid(args.grid_eps, args.ell_max)
    else:
        raise ParameterError("give --x or --grid-eps")
    if args.xmin is not None:
        xs = [x for x in xs if x >= args.xmin]
    if args.xmax is not None:
        xs = [x for x in xs if x <= args.xmax]
    if not xs:
        raise ParameterError("x grid is empty after filtering")
    table = expected_v_table(plan, xs)
    recs = [record("avg-v", plan.model.kind, x=x, est=table[x]) for x in xs]
    _emit(args, recs, plan, t0)
    return 0


def cmd_mertens(args) -> int:
    t0 = time.time()
    trace = mertens_trace(int(args.x))
    recs = [
        record("mertens-changes", "mertens", x=trace.x_end, point=float(trace.sign_change_count), n_samples=1),
        record("mertens-final", "mertens", x=trace.x_end, point=float(trace.final_value), n_samples=1),
    ]
    _emit(args, recs, None, t0)
    return 0


def cmd_models(args) -> int:
    for kind in KINDS:
        spec = ModelSpec(kind)
        mean1 = spec.mean(1)
        v5 = spec.variance_bounds(5)
        try:
            psi = f"psi(1e6) = {psi_predictor(spec, 1e6):.4f}"
        except ParameterError:
            psi = "psi: none declared (stress model)"
        extras = ""
        if kind == "bounded_martingale":
            extras = f"  amplitudes [{spec.martingale_lo}, {spec.martingale_hi}]"
        if kind == "sidon_cosine":
            extras = f"  greedy B2 head: {mian_chowla(8).elements}"
        print(f"{kind:22s} EX_1={mean1:+.0f}  VarX_5 in {v5}  {psi}{extras}")
    return 0


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    if getattr(args, "seed", None) is None:
        raise ParameterError("selftest requires an explicit --seed")
    t0 = time.time()
    results = run_all(seed=int(args.seed), workers=_resolve(args, "workers"))
    recs = []
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] criterion {res.number:>2}: {res.name}  ({res.elapsed_s:.1f}s)  {res.detail}")
        failed += not res.passed
        recs.append(
            record(f"selftest-{res.number}", "acceptance", point=float(res.passed),
                   n_samples=None, seed=int(args.seed))
        )
    _emit(args, recs, None, t0)
    print(f"selftest: {len(results) - failed}/{len(results)} criteria passed")
    return 1 if failed else 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "lambda": cmd_lambda,
    "correlations": cmd_correlations,
    "events": cmd_events,
    "signprob": cmd_signprob,
    "avg-v": cmd_avg_v,
    "mertens": cmd_mertens,
    "models": cmd_models,
    "selftest": cmd_selftest,
}


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    dests = {
        a.dest
        for a in parser._subparsers._group_actions[0].choices[args.command]._actions
        if a.dest != "help"
    }
    try:
        _apply_config(args, dests)
        return _HANDLERS[args.command](args)
    except ParameterError as exc:
        print(f"rmflab: error: parameter: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"rmflab: error: resource: {exc}", file=sys.stderr)
        return 3
    except RmflabError as exc:
        print(f"rmflab: error: internal: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
