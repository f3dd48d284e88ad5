import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockcs.types import (BlockStructure, ContractError, SupportSet, block_slice, concat_blocks,
                           gather, scatter)


def test_block_structure_offsets():
    bs = BlockStructure((2, 3, 4), (1, 2, 4))
    assert bs.offsets == (0, 2, 5)
    assert bs.total_len == 9
    assert bs.num_blocks == 3
    assert bs.support_size == 7


@pytest.mark.parametrize("lengths,sparsities", [((), ()), ((2, 2), (1,)), ((2,), (3,)), ((2,), (0,)), ((0,), (0,))])
def test_block_structure_rejects_invalid(lengths, sparsities):
    with pytest.raises(ContractError):
        BlockStructure(lengths, sparsities)


def test_block_slice_examples():
    x = np.array([1 + 1j, 2, 3 - 1j, 4])
    np.testing.assert_array_equal(block_slice(x, BlockStructure((2, 2), (1, 1)), 1), [3 - 1j, 4])
    np.testing.assert_array_equal(block_slice(x, BlockStructure((4,), (1,)), 0), x)
    x3 = np.array([5j, 0, 7])
    np.testing.assert_array_equal(block_slice(x3, BlockStructure((1, 1, 1), (1, 1, 1)), 0), [5j])


def test_block_slice_out_of_range():
    bs = BlockStructure((2, 2), (1, 1))
    with pytest.raises(IndexError):
        block_slice(np.zeros(4, complex), bs, 2)
    with pytest.raises(IndexError):
        block_slice(np.zeros(4, complex), bs, -1)


def test_gather_examples():
    np.testing.assert_array_equal(gather(np.array([1, 2, 3, 4], complex), SupportSet([0, 3], 4)), [1, 4])
    assert gather(np.arange(5, dtype=complex), SupportSet([], 5)).size == 0
    np.testing.assert_array_equal(gather(np.array([1j, 2j, 3j]), SupportSet([1], 3)), [2j])


def test_scatter_examples():
    np.testing.assert_array_equal(scatter(np.array([7]), SupportSet([2], 4), 4), [0, 0, 7, 0])
    np.testing.assert_array_equal(scatter(np.array([], complex), SupportSet([], 3), 3), [0, 0, 0])


def test_scatter_length_mismatch():
    with pytest.raises(ContractError):
        scatter(np.array([1, 2]), SupportSet([0], 3), 3)


def test_support_set_validation():
    T = SupportSet([3, 1], 5)
    np.testing.assert_array_equal(T.indices, [1, 3])
    with pytest.raises(ContractError):
        SupportSet([1, 1], 5)
    with pytest.raises(IndexError):
        SupportSet([5], 5)
    with pytest.raises(ValueError):
        T.indices[0] = 2


def test_complement_partitions_range():
    T = SupportSet([0, 2, 5], 7)
    C = T.complement()
    assert sorted(set(T) | set(C)) == list(range(7))
    assert not set(T) & set(C)


layouts = st.lists(st.tuples(st.integers(1, 6), st.integers(1, 6)), min_size=1, max_size=6).map(
    lambda bl: BlockStructure(tuple(d for d, _ in bl), tuple(min(s, d) for d, s in bl)))


@settings(max_examples=100, deadline=None)
@given(bs=layouts, seed=st.integers(0, 2**32 - 1))
def test_blocks_concatenate_to_signal(bs, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(bs.total_len) + 1j * rng.standard_normal(bs.total_len)
    np.testing.assert_array_equal(concat_blocks([block_slice(x, bs, i) for i in range(bs.num_blocks)]), x)


@settings(max_examples=100, deadline=None)
@given(bs=layouts, seed=st.integers(0, 2**32 - 1))
def test_scatter_gather_round_trip(bs, seed):
    rng = np.random.default_rng(seed)
    n = bs.total_len
    T = SupportSet(np.flatnonzero(rng.random(n) < 0.5), n)
    v = rng.standard_normal(len(T)) + 1j * rng.standard_normal(len(T))
    x = scatter(v, T, n)
    np.testing.assert_array_equal(gather(x, T), v)
    assert np.all(x[T.complement().indices] == 0)
    assert sum(len(b) for b in T.per_block(bs)) == len(T)
    for i, part in enumerate(T.per_block(bs)):
        assert all(i == int(np.searchsorted(np.asarray(bs.offsets), j, side="right") - 1) for j in part)
