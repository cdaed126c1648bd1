"""Zero-skip sign-change counting primitives.

Policy: zeros never carry sign information.  The sign sequence is first
stripped of zeros and a change is counted for every adjacent pair of
opposite signs; a ``+ ... 0 ... -`` pattern counts exactly once.  Counting
functions thread a carry (the last nonzero sign seen so far) so that long
walks can be processed in streaming chunks and window counts

    V(a, b] = V(b) - V(a)

stay exact across chunk boundaries.

Long chunks are scanned blockwise: a block whose min stays above zero (or
max below) cannot contain a change beyond the single possible flip against
the carry, so the expensive sign-compress pass only runs on blocks that
straddle the origin.  For a walk at height ~sqrt(u) almost every block is
skipped.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 4096


def _count_dense(values: np.ndarray, carry_sign: int) -> tuple[int, int]:
    """Compress-and-diff count on one block known to straddle zero."""
    s = np.sign(values)
    nz = s[s != 0]
    if nz.size == 0:
        return 0, carry_sign
    changes = int(np.count_nonzero(nz[1:] != nz[:-1]))
    if carry_sign != 0 and nz[0] != carry_sign:
        changes += 1
    return changes, int(nz[-1])


def count_changes_chunk(values: np.ndarray, carry_sign: int) -> tuple[int, int]:
    """Count zero-skip sign changes in one chunk of walk values.

    ``carry_sign`` is the last nonzero sign before the chunk (0 if the walk
    has not left the origin yet).  Returns ``(changes, new_carry_sign)``.
    """
    n = values.size
    if n == 0:
        return 0, carry_sign
    lo = values.min()
    hi = values.max()
    if lo > 0:
        return (1 if carry_sign < 0 else 0), 1
    if hi < 0:
        return (1 if carry_sign > 0 else 0), -1
    if lo == 0 and hi == 0:
        return 0, carry_sign
    if n <= 2 * _BLOCK:
        return _count_dense(values, carry_sign)
    nb = n // _BLOCK
    body = values[: nb * _BLOCK].reshape(nb, _BLOCK)
    mins = body.min(axis=1)
    maxs = body.max(axis=1)
    changes = 0
    carry = carry_sign
    for k in range(nb):
        if mins[k] > 0:
            if carry < 0:
                changes += 1
            carry = 1
        elif maxs[k] < 0:
            if carry > 0:
                changes += 1
            carry = -1
        elif mins[k] == 0 and maxs[k] == 0:
            continue
        else:
            d, carry = _count_dense(body[k], carry)
            changes += d
    if nb * _BLOCK < n:
        d, carry = count_changes_chunk(values[nb * _BLOCK :], carry)
        changes += d
    return changes, carry


def change_positions_chunk(
    values: np.ndarray, carry_sign: int, offset: int = 0
) -> tuple[list[int], int]:
    """Positions (by ``offset`` + local index) where a counted change completes."""
    s = np.sign(values)
    idx = np.flatnonzero(s)
    if idx.size == 0:
        return [], carry_sign
    nz = s[idx]
    pos = idx[1:][nz[1:] != nz[:-1]]
    out = [int(p) + offset for p in pos]
    if carry_sign != 0 and nz[0] != carry_sign:
        out.insert(0, int(idx[0]) + offset)
    return out, int(nz[-1])


def zero_run_count(values: np.ndarray) -> int:
    """Number of maximal runs of zeros in the sequence."""
    z = np.asarray(values) == 0
    if not z.any():
        return 0
    starts = z & ~np.concatenate(([False], z[:-1]))
    return int(np.count_nonzero(starts))
