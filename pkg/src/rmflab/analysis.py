"""Closed-form quantities and the sign-change counter.

Core objects:

* the grid sum  Lambda(N, x, q) = sum_{n<=N} (1 + (1-q/2) sqrt(loglog(e^n x)))^(-q/2)
  together with its large-x simplification  N / ((1-q/2)^{q/2} (loglog x)^{q/4});
* the moment-shape predictor  (x / (1 + (1-q/2) sqrt(loglog x)))^{q/2};
* exact second-order statistics of the normalized walk Y_n, derived from
  Q(x) by orthogonality:  E M(a)M(b) = Q(min(a,b)),  E M(u) = 1;
* the zero-skip sign-change counter;
* the indicator events A = [S_N* >= eps * Lambda], B = [|S_N| <= Lambda^{1-delta}]
  whose joint occurrence forces mixed signs among Y_1..Y_N whenever
  Lambda^{1-delta} < eps * Lambda.

Parameters x far beyond float range are supported through the log-log
parametrization: loglog(e^n x) = llx + log1p(n * exp(-llx)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .census import change_positions_chunk, zero_run_count
from .errors import ParameterError, ResourceError
from .rmf import CheckpointGrid
from .sieve import squarefree_count

SIEVE_ARGUMENT_CEILING = 10**14  # Q(x) stays fast (O(sqrt x)) below this


@dataclass(frozen=True)
class LambdaParams:
    """Arguments of the grid sum Lambda.

    Give exactly one of ``x`` (requires x >= e), ``log_x`` (>= 1) or
    ``log_log_x`` (>= 0); the latter two exist because interesting regimes
    like loglog x = 10^4 put x itself far outside float range.
    """

    N: int
    q: float
    x: float | None = None
    log_x: float | None = None
    log_log_x: float | None = None
    llx: float = field(init=False)

    def __post_init__(self):
        if self.N < 1 or self.N != int(self.N):
            raise ParameterError(f"N must be a positive integer, got {self.N}")
        if not (1.0 <= self.q <= 2.0):
            raise ParameterError(f"q must lie in [1, 2], got {self.q}")
        given = [v is not None for v in (self.x, self.log_x, self.log_log_x)]
        if sum(given) != 1:
            raise ParameterError("give exactly one of x, log_x, log_log_x")
        if self.x is not None:
            if self.x < math.e:
                raise ParameterError(f"x must be >= e, got {self.x}")
            llx = math.log(math.log(self.x))
        elif self.log_x is not None:
            if self.log_x < 1:
                raise ParameterError(f"log_x must be >= 1, got {self.log_x}")
            llx = math.log(self.log_x)
        else:
            if self.log_log_x < 0:
                raise ParameterError(f"log_log_x must be >= 0, got {self.log_log_x}")
            llx = float(self.log_log_x)
        object.__setattr__(self, "llx", llx)


def _loglog_en_x(llx: float, n: int) -> float:
    """loglog(e^n x) = log(n + log x), stable for any magnitude of log x."""
    return llx + math.log1p(n * math.exp(-llx))


def lambda_exact(params: LambdaParams) -> float:
    """The grid sum itself, compensated summation over n = 1..N."""
    c = 1.0 - params.q / 2.0
    e = -params.q / 2.0
    return math.fsum(
        (1.0 + c * math.sqrt(_loglog_en_x(params.llx, n))) ** e
        for n in range(1, params.N + 1)
    )


def lambda_asymptotic(params: LambdaParams) -> float:
    """Large-x simplification N / ((1-q/2)^{q/2} (loglog x)^{q/4}).

    Only meaningful for q < 2; the stated range is 1 <= q <= 1.9.
    """
    if params.q > 1.9:
        raise ParameterError(f"asymptotic form requires q <= 1.9, got {params.q}")
    if params.llx <= 0:
        raise ParameterError("asymptotic form requires loglog x > 0 (x > e)")
    c = 1.0 - params.q / 2.0
    return params.N / (c ** (params.q / 2.0) * params.llx ** (params.q / 4.0))


def harper_predictor(x: float, q: float) -> float:
    """Moment-scale predictor (x / (1 + (1-q/2) sqrt(loglog x)))^{q/2}."""
    if x < math.exp(math.e):
        raise ParameterError(f"x must be >= e^e, got {x}")
    if not (1.0 <= q <= 2.0):
        raise ParameterError(f"q must lie in [1, 2], got {q}")
    llx = math.log(math.log(x))
    return (x / (1.0 + (1.0 - q / 2.0) * math.sqrt(llx))) ** (q / 2.0)


@dataclass(frozen=True)
class SignChangeReport:
    """Zero-skip census of a finite sequence."""

    count: int
    positions: tuple[int, ...]
    zero_runs: int


def count_sign_changes(values) -> SignChangeReport:
    """Count adjacent opposite-sign pairs after stripping zeros.

    Positions refer to the original indexing and mark the later element of
    each counted pair.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("count_sign_changes needs a nonempty 1-d sequence")
    positions, _ = change_positions_chunk(arr, 0)
    return SignChangeReport(
        count=len(positions),
        positions=tuple(positions),
        zero_runs=zero_run_count(arr),
    )


def exact_cross_moment(a: int, b: int) -> float:
    """E M(a) M(b) = Q(min(a, b)) by orthogonality of the f(n)."""
    if a < 1 or b < 1:
        raise ParameterError("cross moment needs a, b >= 1")
    return float(squarefree_count(min(int(a), int(b))))


def _grid_point(x: float, n: int) -> int:
    u = math.floor(math.exp(n) * x)
    if u > SIEVE_ARGUMENT_CEILING:
        raise ResourceError(
            f"e^{n} * {x} = {u} exceeds the sieve ceiling {SIEVE_ARGUMENT_CEILING}",
            required=u,
        )
    return u


def exact_correlation(x: float, n: int, m: int) -> float:
    """Exact correlation of (Y_n, Y_m) for n < m.

    Built from E Y_n Y_m = Q(floor(e^n x)) / (e^{(n+m)/2} x),
    E Y_k = 1 / sqrt(e^k x), Var Y_k = Q(floor(e^k x))/(e^k x) - 1/(e^k x).
    """
    if not (1 <= n < m):
        raise ParameterError(f"need 1 <= n < m, got n={n}, m={m}")
    if x <= 0:
        raise ParameterError("x must be positive")
    un = _grid_point(x, n)
    um = _grid_point(x, m)
    q_n = squarefree_count(un)
    q_m = squarefree_count(um)
    e_yn_ym = q_n / (math.exp((n + m) / 2.0) * x)
    mean_prod = 1.0 / (math.exp((n + m) / 2.0) * x)
    var_n = q_n / (math.exp(n) * x) - 1.0 / (math.exp(n) * x)
    var_m = q_m / (math.exp(m) * x) - 1.0 / (math.exp(m) * x)
    if var_n <= 0 or var_m <= 0:
        raise ParameterError(f"degenerate variance at x={x}; use larger x")
    return (e_yn_ym - mean_prod) / math.sqrt(var_n * var_m)


def exact_s_n_second_moment(N: int, x: float) -> float:
    """E S_N^2 = sum_{n,m<=N} Q(floor(e^{min} x)) / (e^{(n+m)/2} x), exact."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    q_vals = [squarefree_count(_grid_point(x, k)) for k in range(1, N + 1)]
    terms = []
    for n in range(1, N + 1):
        terms.append(q_vals[n - 1] / (math.exp(n) * x))
        for m in range(n + 1, N + 1):
            terms.append(2.0 * q_vals[n - 1] / (math.exp((n + m) / 2.0) * x))
    return math.fsum(terms)


def chebyshev_tail_bound(N: int, lam: float, x: float) -> float:
    """Markov bound P(|S_N| >= lam) <= E S_N^2 / lam^2 with the exact moment."""
    if lam <= 0:
        raise ParameterError(f"threshold must be positive, got {lam}")
    return exact_s_n_second_moment(N, x) / (lam * lam)


@dataclass(frozen=True)
class EventIndicators:
    """Occurrence of the forcing events on one checkpoint grid.

    ``sign_change_observed`` reports mixed signs among the nonzero Y_n;
    ``threshold_ok`` states the geometry Lambda^{1-delta} < eps * Lambda
    under which A and B jointly force such a change.
    """

    a: bool
    b: bool
    sign_change_observed: bool
    lambda1: float
    threshold_ok: bool


def event_indicators(
    grid: CheckpointGrid, epsilon: float, delta: float
) -> EventIndicators:
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if not (0 < delta < 1):
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    lam1 = lambda_exact(LambdaParams(N=grid.N, q=1.0, x=grid.x))
    a = grid.S_N_star >= epsilon * lam1
    b = abs(grid.S_N) <= lam1 ** (1.0 - delta)
    ys = np.asarray(grid.Y)
    nz = ys[ys != 0]
    mixed = bool(nz.size > 0 and nz.min() < 0 < nz.max())
    return EventIndicators(
        a=bool(a),
        b=bool(b),
        sign_change_observed=mixed,
        lambda1=lam1,
        threshold_ok=lam1 ** (1.0 - delta) < epsilon * lam1,
    )
