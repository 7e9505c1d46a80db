import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdea_mitm.errors import InvalidInput
from tdea_mitm.sequence import APermutation, a_sequence


@pytest.mark.parametrize("b", [1, 2, 8, 12, 16])
def test_full_period(b):
    values = list(a_sequence(b, seed=3))
    assert sorted(values) == list(range(1 << b))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_permutation_any_seed_b10(seed):
    assert len(set(APermutation(10, seed))) == 1 << 10


def test_block_matches_scalar():
    seq = APermutation(20, seed=12345)
    blk = seq.block(1000, 256)
    assert blk.dtype == np.uint64
    assert [int(v) for v in blk] == [seq.value(i) for i in range(1000, 1256)]


def test_wide_block_matches_scalar():
    seq = APermutation(64, seed=9)
    assert [int(v) for v in seq.block(0, 64)] == [seq.value(i) for i in range(64)]


def test_seeds_give_different_orders():
    a = [APermutation(20, s).value(i) for s in (0, 1) for i in range(8)]
    assert a[:8] != a[8:]


def test_same_seed_reproducible():
    assert list(APermutation(12, 77)) == list(APermutation(12, 77))


def test_bad_width():
    with pytest.raises(InvalidInput):
        APermutation(0)
    with pytest.raises(InvalidInput):
        APermutation(65)
