import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmflab import signs


@given(st.integers(0, 2**64 - 1))
def test_mix64_scalar_matches_array(z):
    arr = signs.mix64_array(np.array([z], dtype=np.uint64))
    assert int(arr[0]) == signs.mix64(z)


@given(st.integers(0, 2**64 - 1), st.integers(2, 2**40))
def test_sign_word_scalar_matches_array(key, value):
    word = signs.sign_word(key, value)
    arr = signs.sign_words_array(key, np.array([value], dtype=np.int64))
    assert int(arr[0]) == word


def test_sign_bits_deterministic():
    key = signs.block_key(42, 0, signs.SALT_PRIME)
    w1 = signs.sign_word(key, 101)
    w2 = signs.sign_word(key, 101)
    assert w1 == w2
    assert signs.sign_bit_to_int(w1, 5) in (-1, 1)


def test_block_key_distinguishes_blocks_and_salts():
    ks = {
        signs.block_key(1, 0, signs.SALT_PRIME),
        signs.block_key(1, 1, signs.SALT_PRIME),
        signs.block_key(1, 0, signs.SALT_INDEX),
        signs.block_key(2, 0, signs.SALT_PRIME),
    }
    assert len(ks) == 4


def test_lane_bits_unbiased_over_values():
    # each lane of the hash word should be a fair coin across values
    key = signs.block_key(7, 3, signs.SALT_INDEX)
    vals = np.arange(1, 20001, dtype=np.int64)
    words = signs.sign_words_array(key, vals)
    for lane in (0, 17, 63):
        bits = ((words >> np.uint64(lane)) & np.uint64(1)).astype(np.int64)
        mean = 1.0 - 2.0 * bits.mean()
        assert abs(mean) < 5.0 / np.sqrt(vals.size)


@settings(max_examples=25)
@given(st.integers(0, 2**63), st.integers(0, 2**20))
def test_uniform01_range(seed, idx):
    u = signs.uniform01(seed, idx, signs.SALT_PRIME)
    assert 0.0 <= u < 1.0
