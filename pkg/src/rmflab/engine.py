"""Streaming multi-sample partial-sum walker.

The engine evaluates, for many Monte Carlo samples at once, walks of the
form M(u) = sum_{n<=u} X_n where each X_n is (weight) * (Rademacher sign)
or zero.  Signs come from the counter-based generator in :mod:`signs`:
sample ``s`` reads bit ``s % 64`` of a hash word belonging to block
``s // 64``, so one uint64 XOR pass accumulates the sign parity of 64
samples simultaneously.

A *source* adapts a concrete model to the engine.  It provides, per
segment [lo, hi) of integers:

``segment(state, lo, hi) -> ctx``
    shared per-segment data (factorizations, premixed hashes, weights);
``block_words(ctx, block) -> (words, active)``
    uint64 sign-parity words for one 64-sample block, plus an optional
    bool mask of indices with a nonzero step;
``weights(ctx) -> float array or None``
    per-index magnitudes (None means the pure +-1/0 walk).

Walks are reproducible bit-for-bit for any worker count: samples are
partitioned by block, each block's output lands in preallocated rows, and
no cross-sample float reduction happens here.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import isqrt
from typing import Any, Sequence

import numpy as np

from .census import count_changes_chunk
from .errors import ParameterError, ResourceError

DEFAULT_BUDGET = 10**9
MIN_SEGMENT = 1 << 20
INT32_CEILING = 1 << 30  # below this x_end, partial sums fit int32 exactly


@dataclass(frozen=True)
class PartialSumTrace:
    """One sample's walk summary: final value, census, checkpoints."""

    x_end: int
    final_value: int | float
    sign_change_count: int
    checkpoint_requests: tuple[int, ...]
    checkpoint_values: tuple
    model_tag: str


@dataclass
class WalkResult:
    """Per-sample walk values and cumulative sign-change counts at marks.

    ``values[i, j]`` is M(marks[j]) for sample ``sample_indices[i]``;
    ``changes[i, j]`` (census runs only) counts sign changes completing in
    [1, marks[j]], so windows difference exactly: V(a,b] = V(b) - V(a).
    """

    sample_indices: np.ndarray
    marks: np.ndarray
    values: np.ndarray
    changes: np.ndarray | None
    tag: str


def segment_length_for(x_end: int) -> int:
    return max(MIN_SEGMENT, isqrt(max(int(x_end), 1)))


def check_budget(x_end: int, n_samples: int, budget: int | None) -> None:
    if budget is None:
        return
    steps = int(x_end) * int(n_samples)
    if steps > budget:
        raise ResourceError(
            f"run needs {steps} walk steps (x_end={x_end} * samples={n_samples}) "
            f"but the budget is {budget}; raise it explicitly or via RMFLAB_BUDGET",
            required=steps,
        )


def _group_blocks(sample_indices: np.ndarray) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Group samples into (block, lanes, output_rows) triples."""
    out = []
    blocks = sample_indices >> 6
    for b in np.unique(blocks):
        rows = np.flatnonzero(blocks == b)
        lanes = (sample_indices[rows] & 63).astype(np.uint64)
        out.append((int(b), lanes, rows))
    return out


def _run_block_group(args: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    (source, x_end, marks, blocks, census, seg_len) = args
    state = source.begin(x_end)
    n_rows = sum(len(rows) for _, _, rows in blocks)
    k = len(marks)
    float_walk = source.is_float_walk()
    values = np.zeros((n_rows, k), dtype=np.float64 if float_walk else np.int64)
    changes = np.zeros((n_rows, k), dtype=np.int64) if census else None
    running = np.zeros(n_rows, dtype=np.float64 if float_walk else np.int64)
    carry_sign = np.zeros(n_rows, dtype=np.int64)
    change_acc = np.zeros(n_rows, dtype=np.int64)
    # |M(u)| <= u, so int32 partial sums are exact below the ceiling and
    # much faster; the walk still reports int64 values outward.
    cum_dtype = np.int32 if x_end < INT32_CEILING else np.int64

    marks = np.asarray(marks, dtype=np.int64)
    one = np.uint64(1)
    lo = 1
    while lo <= x_end:
        hi = min(lo + seg_len, x_end + 1)
        ctx = source.segment(state, lo, hi)
        w = source.weights(ctx)
        first_mark = int(np.searchsorted(marks, lo))
        last_mark = int(np.searchsorted(marks, hi))
        seg_marks = marks[first_mark:last_mark]
        row = 0
        for block, lanes, rows in blocks:
            words, active = source.block_words(ctx, block)
            active_i8 = None
            if active is not None:
                active_i8 = active.astype(np.int8)
            for lane in lanes:
                bit = ((words >> lane) & one).astype(np.int8)
                np.multiply(bit, np.int8(-2), out=bit)
                bit += np.int8(1)
                if active_i8 is not None:
                    bit *= active_i8
                if w is None:
                    m = np.cumsum(bit, dtype=cum_dtype)
                    m += m.dtype.type(running[row])
                else:
                    m = np.cumsum(bit * w)
                    m += running[row]
                pos = 0
                carry = int(carry_sign[row])
                acc = int(change_acc[row])
                for j, mk in enumerate(seg_marks):
                    cut = int(mk) - lo
                    if census:
                        delta, carry = count_changes_chunk(m[pos : cut + 1], carry)
                        acc += delta
                        changes[row, first_mark + j] = acc
                    values[row, first_mark + j] = m[cut]
                    pos = cut + 1
                if census and pos < m.size:
                    delta, carry = count_changes_chunk(m[pos:], carry)
                    acc += delta
                running[row] = m[-1]
                carry_sign[row] = carry
                change_acc[row] = acc
                row += 1
        lo = hi
    rows_all = np.concatenate([rows for _, _, rows in blocks])
    return rows_all, values, changes


def run_walks(
    source: Any,
    x_end: int,
    marks: Sequence[int],
    sample_indices: Sequence[int] | np.ndarray,
    *,
    census: bool = True,
    workers: int = 1,
    budget: int | None = None,
    segment_len: int | None = None,
) -> WalkResult:
    """Walk all requested samples to ``x_end``, reporting at ``marks``."""
    x_end = int(x_end)
    if x_end < 1:
        raise ParameterError(f"x_end must be >= 1, got {x_end}")
    marks_arr = np.asarray(sorted(set(int(m) for m in marks)), dtype=np.int64)
    if marks_arr.size == 0:
        raise ParameterError("at least one mark is required")
    if marks_arr[0] < 1 or marks_arr[-1] > x_end:
        raise ParameterError(
            f"marks must lie in [1, {x_end}], got range "
            f"[{marks_arr[0]}, {marks_arr[-1]}]"
        )
    samples = np.asarray(sorted(set(int(s) for s in sample_indices)), dtype=np.int64)
    if samples.size == 0:
        raise ParameterError("at least one sample index is required")
    if samples[0] < 0:
        raise ParameterError("sample indices must be >= 0")
    check_budget(x_end, samples.size, budget)
    seg_len = segment_len or segment_length_for(x_end)

    blocks = _group_blocks(samples)
    workers = max(1, int(workers))
    k = marks_arr.size
    float_walk = source.is_float_walk()
    values = np.zeros((samples.size, k), dtype=np.float64 if float_walk else np.int64)
    changes = np.zeros((samples.size, k), dtype=np.int64) if census else None

    if workers == 1 or len(blocks) == 1:
        parts = [_run_block_group((source, x_end, tuple(marks_arr), blocks, census, seg_len))]
    else:
        chunks = [c for c in np.array_split(np.arange(len(blocks)), workers) if c.size]
        payloads = [
            (source, x_end, tuple(marks_arr), [blocks[i] for i in c], census, seg_len)
            for c in chunks
        ]
        with ProcessPoolExecutor(max_workers=len(payloads)) as pool:
            parts = list(pool.map(_run_block_group, payloads))
    for rows, v, ch in parts:
        values[rows] = v
        if census:
            changes[rows] = ch
    return WalkResult(
        sample_indices=samples,
        marks=marks_arr,
        values=values,
        changes=changes,
        tag=source.tag,
    )
