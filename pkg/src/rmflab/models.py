"""Orthogonal-sequence walk models and their norm-deficit predictors.

Five selectable walks M(u) = sum_{n<=u} X_n:

``rmf``                  X_n = f(n), the random multiplicative function;
``iid_rademacher``       X_n independent uniform +-1;
``harmonic_rademacher``  X_n = r_n / sqrt(n) (non-unit variance stress model);
``sidon_cosine``         X_k = sqrt(2) cos(n_k U) on a greedy B2 sequence,
                         one uniform U on [0, 2pi) drives the whole path
                         (the sqrt(2) lifts the raw cosine variance 1/2 to 1);
``bounded_martingale``   X_n = r_n s_n with s_n in [A, B] a function of the
                         past (default: s_n = B if M(n-1) <= 0 else A).

Each model declares its mean/variance sequence and, where claimed, the
norm-deficit function psi with ||M(x)||_1 ~ sqrt(x)/psi(x): constant 1 for
the unit-variance examples, (1 + sqrt(loglog x)/2)^(1/2) for the
multiplicative walk.  The harmonic model is exposed as an out-of-hypothesis
stress case and declares no psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import signs
from .engine import PartialSumTrace, WalkResult, check_budget, run_walks
from .errors import ParameterError
from .rmf import RmfWordSource
from .sieve import squarefree_count

KINDS = (
    "rmf",
    "iid_rademacher",
    "harmonic_rademacher",
    "sidon_cosine",
    "bounded_martingale",
)

MIAN_CHOWLA_MAX = 10**4
SALT_SIDON = 0x1B87_3593_7AF1_6D2B
SALT_MARTINGALE = 0x6C62_272E_07BB_0142


@dataclass(frozen=True)
class SidonSet:
    """Strictly increasing integers with pairwise-distinct sums (B2)."""

    elements: tuple[int, ...]
    cap: int = 3  # max solutions of m = n_j +- n_k for any m, ordered pairs

    def __len__(self) -> int:
        return len(self.elements)


@lru_cache(maxsize=None)
def mian_chowla(k: int) -> SidonSet:
    """First k terms of the greedy B2 sequence 1, 2, 4, 8, 13, 21, ...

    Greedy acceptance uses the equivalent distinct-differences test against
    a boolean table, so construction is linear scans over candidates.
    """
    if not (1 <= k <= MIAN_CHOWLA_MAX):
        raise ParameterError(f"mian_chowla needs 1 <= k <= {MIAN_CHOWLA_MAX}")
    elems = [1]
    used = np.zeros(1 << 12, dtype=bool)  # used[d] = difference d occurs
    c = 1
    while len(elems) < k:
        c += 1
        arr = np.asarray(elems, dtype=np.int64)
        if c >= used.size:
            grown = np.zeros(max(used.size * 2, c + 1), dtype=bool)
            grown[: used.size] = used
            used = grown
        diffs = c - arr
        if not used[diffs].any():
            used[diffs] = True
            elems.append(c)
    return SidonSet(elements=tuple(elems))


@dataclass(frozen=True)
class ModelSpec:
    """A walk model plus its parameters.

    ``martingale_lo``/``martingale_hi`` are the amplitude bounds A <= B.
    ``sidon_u`` pins the sidon phase U (test hook).  ``psi_override``
    replaces the declared norm-deficit function (test hook for the
    stability checker).
    """

    kind: str
    martingale_lo: float = 0.5
    martingale_hi: float = 1.0
    sidon_u: float | None = None
    psi_override: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown model kind {self.kind!r}; pick from {KINDS}")
        if not (0 < self.martingale_lo <= self.martingale_hi):
            raise ParameterError("need amplitude bounds 0 < A <= B")

    def mean(self, n: int) -> float:
        """Declared E X_n (exact)."""
        if self.kind == "rmf" and n == 1:
            return 1.0  # f(1) = 1 deterministically
        return 0.0

    def variance_bounds(self, n: int) -> tuple[float, float]:
        """Declared exact variance, as a (lo, hi) interval."""
        if n < 1:
            raise ParameterError("n must be >= 1")
        if self.kind in ("iid_rademacher", "sidon_cosine"):
            return (1.0, 1.0)
        if self.kind == "harmonic_rademacher":
            return (1.0 / n, 1.0 / n)
        if self.kind == "bounded_martingale":
            return (self.martingale_lo**2, self.martingale_hi**2)
        if n == 1:
            return (0.0, 0.0)
        v = 1.0 if squarefree_count(n) - squarefree_count(n - 1) == 1 else 0.0
        return (v, v)


def psi_predictor(model: ModelSpec, x: float) -> float:
    """Declared norm-deficit psi(x) (continuous, non-decreasing, >= 1)."""
    if x < 1:
        raise ParameterError(f"psi is declared on x >= 1, got {x}")
    if model.psi_override is not None:
        return float(model.psi_override(x))
    if model.kind in ("iid_rademacher", "sidon_cosine", "bounded_martingale"):
        return 1.0
    if model.kind == "rmf":
        if x < math.e:
            raise ParameterError("rmf psi needs x >= e so loglog x >= 0")
        return math.sqrt(1.0 + 0.5 * math.sqrt(math.log(math.log(x))))
    raise ParameterError(
        f"model {model.kind!r} declares no psi (out-of-hypothesis stress model)"
    )


@dataclass(frozen=True)
class PsiStabilityReport:
    """Outcome of the slow-variation check on a doubling grid of x."""

    kind: str
    x: float
    N: int
    grid: tuple[float, ...]
    deviations: tuple[float, ...]  # max_n |psi(e^n x)/psi(x) - 1| * log(x)/n
    max_deviation: float
    non_decreasing: bool
    passed: bool


def psi_stability_check(
    model: ModelSpec, x: float, N: int, doublings: int = 6
) -> PsiStabilityReport:
    """Check psi(e^n x) = psi(x)(1 + O(n/log x)) with constant 10.

    Requires the N = o(log x) regime, enforced as N <= log(x)/10.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    if N > math.log(x) / 10.0:
        raise ParameterError(
            f"regime violation: need N <= log(x)/10 = {math.log(x) / 10.0:.3f}"
        )
    grid = tuple(x * 2.0**j for j in range(doublings))
    deviations = []
    seen: list[tuple[float, float]] = []
    for xj in grid:
        base = psi_predictor(model, xj)
        seen.append((xj, base))
        worst = 0.0
        for n in range(1, N + 1):
            xn = math.exp(n) * xj
            val = psi_predictor(model, xn)
            seen.append((xn, val))
            worst = max(worst, abs(val / base - 1.0) * math.log(xj) / n)
        deviations.append(worst)
    seen.sort()
    non_dec = all(b[1] >= a[1] - 1e-12 for a, b in zip(seen, seen[1:]))
    max_dev = max(deviations)
    return PsiStabilityReport(
        kind=model.kind,
        x=float(x),
        N=int(N),
        grid=grid,
        deviations=tuple(deviations),
        max_deviation=max_dev,
        non_decreasing=non_dec,
        passed=bool(non_dec and max_dev <= 10.0),
    )


@dataclass(frozen=True)
class IidWordSource:
    """Engine source for the iid +-1 walk (index-keyed sign family)."""

    master_seed: int
    salt: int = signs.SALT_INDEX
    tag: str = "iid_rademacher"

    def is_float_walk(self) -> bool:
        return False

    def begin(self, x_end: int):
        return None

    def segment(self, state, lo: int, hi: int):
        n = np.arange(lo, hi, dtype=np.uint64)
        return {"lo": lo, "hi": hi, "mn": signs.mix64_array(n * np.uint64(signs.GOLDEN))}

    def block_words(self, ctx, block: int):
        key = signs.block_key(self.master_seed, block, self.salt)
        return signs.mix64_array(ctx["mn"] ^ np.uint64(key)), None

    def weights(self, ctx):
        return None


@dataclass(frozen=True)
class HarmonicWordSource(IidWordSource):
    """iid signs damped by 1/sqrt(n)."""

    tag: str = "harmonic_rademacher"

    def is_float_walk(self) -> bool:
        return True

    def segment(self, state, lo: int, hi: int):
        ctx = super().segment(state, lo, hi)
        ctx["w"] = 1.0 / np.sqrt(np.arange(lo, hi, dtype=np.float64))
        return ctx

    def weights(self, ctx):
        return ctx["w"]


def _sidon_phase(model: ModelSpec, master_seed: int, sample_index: int) -> float:
    if model.sidon_u is not None:
        return float(model.sidon_u)
    return 2.0 * math.pi * signs.uniform01(master_seed, sample_index, SALT_SIDON)


def _collect_sidon(
    model: ModelSpec,
    x_end: int,
    marks: np.ndarray,
    samples: np.ndarray,
    master_seed: int,
    census: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    terms = np.asarray(mian_chowla(x_end).elements, dtype=np.float64)
    values = np.zeros((samples.size, marks.size))
    changes = np.zeros((samples.size, marks.size), dtype=np.int64) if census else None
    phases = np.array(
        [_sidon_phase(model, master_seed, int(s)) for s in samples]
    )
    chunk = max(1, int(2e7) // x_end)
    root2 = math.sqrt(2.0)
    for i0 in range(0, samples.size, chunk):
        i1 = min(i0 + chunk, samples.size)
        steps = root2 * np.cos(np.outer(phases[i0:i1], terms))
        m = np.cumsum(steps, axis=1)
        values[i0:i1] = m[:, marks - 1]
        if census:
            from .census import count_changes_chunk

            for r in range(i1 - i0):
                carry = 0
                acc = 0
                pos = 0
                for j, mk in enumerate(marks):
                    delta, carry = count_changes_chunk(m[r, pos : int(mk)], carry)
                    acc += delta
                    changes[i0 + r, j] = acc
                    pos = int(mk)
    return values, changes


def _collect_martingale(
    model: ModelSpec,
    x_end: int,
    marks: np.ndarray,
    samples: np.ndarray,
    master_seed: int,
    census: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    blocks = np.unique(samples >> 6)
    keys = np.array(
        [signs.block_key(master_seed, int(b), SALT_MARTINGALE) for b in blocks],
        dtype=np.uint64,
    )
    block_pos = {int(b): i for i, b in enumerate(blocks)}
    which = np.array([block_pos[int(s) >> 6] for s in samples])
    lanes = (samples & 63).astype(np.uint64)
    m = np.zeros(samples.size)
    last_sign = np.zeros(samples.size, dtype=np.int8)
    counts = np.zeros(samples.size, dtype=np.int64)
    values = np.zeros((samples.size, marks.size))
    changes = np.zeros((samples.size, marks.size), dtype=np.int64) if census else None
    lo, hi = model.martingale_lo, model.martingale_hi
    mark_at = {int(mk): j for j, mk in enumerate(marks)}
    for n in range(1, x_end + 1):
        words = signs.mix64_array(
            keys ^ np.uint64(signs.mix64((n * signs.GOLDEN) & signs.MASK64))
        )
        bits = ((words[which] >> lanes) & np.uint64(1)).astype(np.float64)
        r = 1.0 - 2.0 * bits
        amp = np.where(m <= 0.0, hi, lo)
        m += r * amp
        if census:
            s = np.sign(m).astype(np.int8)
            nz = s != 0
            counts += ((s != last_sign) & nz & (last_sign != 0)).astype(np.int64)
            last_sign = np.where(nz, s, last_sign)
        j = mark_at.get(n)
        if j is not None:
            values[:, j] = m
            if census:
                changes[:, j] = counts
    return values, changes


def engine_source_for(model: ModelSpec, master_seed: int):
    if model.kind == "rmf":
        return RmfWordSource(master_seed=master_seed)
    if model.kind == "iid_rademacher":
        return IidWordSource(master_seed=master_seed)
    if model.kind == "harmonic_rademacher":
        return HarmonicWordSource(master_seed=master_seed)
    return None


def collect_walks(
    model: ModelSpec,
    x_end: int,
    marks,
    sample_indices,
    master_seed: int,
    *,
    census: bool = True,
    workers: int = 1,
    budget: int | None = None,
) -> WalkResult:
    """Uniform multi-sample collection across all model kinds."""
    x_end = int(x_end)
    if x_end < 1:
        raise ParameterError(f"x_end must be >= 1, got {x_end}")
    source = engine_source_for(model, master_seed)
    if source is not None:
        return run_walks(
            source,
            x_end,
            marks,
            sample_indices,
            census=census,
            workers=workers,
            budget=budget,
        )
    marks_arr = np.asarray(sorted(set(int(v) for v in marks)), dtype=np.int64)
    if marks_arr.size == 0 or marks_arr[0] < 1 or marks_arr[-1] > x_end:
        raise ParameterError(f"marks must be a nonempty subset of [1, {x_end}]")
    samples = np.asarray(sorted(set(int(s) for s in sample_indices)), dtype=np.int64)
    if samples.size == 0 or samples[0] < 0:
        raise ParameterError("sample indices must be nonempty and >= 0")
    check_budget(x_end, samples.size, budget)
    if model.kind == "sidon_cosine":
        if x_end > MIAN_CHOWLA_MAX:
            raise ParameterError(
                f"sidon walk limited to {MIAN_CHOWLA_MAX} terms, got x={x_end}"
            )
        values, changes = _collect_sidon(
            model, x_end, marks_arr, samples, master_seed, census
        )
    else:
        values, changes = _collect_martingale(
            model, x_end, marks_arr, samples, master_seed, census
        )
    return WalkResult(
        sample_indices=samples,
        marks=marks_arr,
        values=values,
        changes=changes,
        tag=model.kind,
    )


def sample_path(
    model: ModelSpec,
    x: int,
    master_seed: int,
    sample_index: int = 0,
    checkpoints=None,
    *,
    budget: int | None = None,
) -> PartialSumTrace:
    """One sample's trace of the model walk up to x."""
    if x < 1:
        raise ParameterError(f"x must be >= 1, got {x}")
    reqs = tuple(sorted(set(int(c) for c in (checkpoints or []))))
    if reqs and (reqs[0] < 1 or reqs[-1] > x):
        raise ParameterError(f"checkpoints must lie in [1, {x}]")
    res = collect_walks(
        model,
        x,
        set(reqs) | {int(x)},
        [sample_index],
        master_seed,
        census=True,
        budget=budget,
    )
    by_mark = {int(m): res.values[0, j] for j, m in enumerate(res.marks)}
    cast = int if res.values.dtype.kind == "i" else float
    return PartialSumTrace(
        x_end=int(x),
        final_value=cast(by_mark[int(x)]),
        sign_change_count=int(res.changes[0, -1]),
        checkpoint_requests=reqs,
        checkpoint_values=tuple(cast(by_mark[c]) for c in reqs),
        model_tag=model.kind,
    )
