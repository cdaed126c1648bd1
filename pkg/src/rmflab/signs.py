"""Counter-based sign generator: the randomness kernel of every model.

A sample's Rademacher signs are never stored.  Each sign is recomputed on
demand from a 64-bit avalanche hash (the splitmix64 finalizer) of

    (master_seed, block, value)        block = sample_index // 64

and the sample's lane ``sample_index % 64`` picks one bit of the hash word.
One hash therefore yields the signs of 64 consecutive samples at once,
which is what lets the trace engine evaluate whole sample blocks with
single uint64 XOR passes.

Two implementations are kept in lockstep: a pure-Python one for scalar
lookups and a vectorized numpy one for array lookups.  They must agree
bit-for-bit (tested), since reproducibility of every experiment hangs on
this module.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# Per-family salts keep e.g. the iid walk at index n decorrelated from the
# multiplicative walk at prime p = n under the same master seed.
SALT_PRIME = 0xA076_1D64_78BD_642F
SALT_INDEX = 0xE703_7ED1_A0B4_28DB

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (pure Python)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


_NP_M1 = np.uint64(_M1)
_NP_M2 = np.uint64(_M2)
_NP_30 = np.uint64(30)
_NP_27 = np.uint64(27)
_NP_31 = np.uint64(31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> _NP_30
    z *= _NP_M1
    z ^= z >> _NP_27
    z *= _NP_M2
    z ^= z >> _NP_31
    return z


def block_key(master_seed: int, block: int, salt: int) -> int:
    """Key for one 64-sample block of one sign family."""
    return mix64((master_seed + GOLDEN * block + salt) & MASK64)


def sign_word(key: int, value: int) -> int:
    """64 lane sign bits for ``value`` under a block key.

    Bit j is the sign bit of sample ``64*block + j``: 0 encodes +1, 1
    encodes -1.
    """
    return mix64(key ^ mix64((value * GOLDEN) & MASK64))


def sign_words_array(key: int, values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sign_word` over an integer array."""
    v = values.astype(np.uint64, copy=True)
    v *= np.uint64(GOLDEN)
    return mix64_array(mix64_array(v) ^ np.uint64(key))


def sign_bit_to_int(word: int, lane: int) -> int:
    """Extract lane's sign from a word: returns +1 or -1."""
    return 1 - 2 * ((word >> lane) & 1)


def uniform01(master_seed: int, sample_index: int, salt: int) -> float:
    """Deterministic uniform draw on [0, 1) for one sample (53-bit)."""
    word = mix64((master_seed + GOLDEN * sample_index + salt) & MASK64)
    return (word >> 11) * (1.0 / (1 << 53))
