"""Block structures, support sets and the indexing helpers shared by every solver.

Signals are plain ``complex128`` numpy vectors. Indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


def as_signal(x, n: int | None = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise ContractError(f"{name} must be a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ContractError(f"{name} has length {v.shape[0]}, expected {n}")
    return v


@dataclass(frozen=True)
class BlockStructure:
    """Partition of ``n`` coordinates into contiguous blocks with per-block sparsity.

    Parameters
    ----------
    lengths : sequence of int
        Block lengths ``d_1, ..., d_I``.
    sparsities : sequence of int
        Maximum number of nonzeros allowed in each block, ``1 <= s_i <= d_i``.
    """

    lengths: tuple[int, ...]
    sparsities: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)
    total_len: int = field(init=False)

    def __post_init__(self):
        lengths = tuple(int(d) for d in self.lengths)
        sparsities = tuple(int(s) for s in self.sparsities)
        if len(lengths) == 0:
            raise ContractError("a block structure needs at least one block")
        if len(lengths) != len(sparsities):
            raise ContractError(
                f"{len(lengths)} block lengths but {len(sparsities)} sparsities"
            )
        for i, (d, s) in enumerate(zip(lengths, sparsities)):
            if d < 1:
                raise ContractError(f"block {i} has non-positive length {d}")
            if not 1 <= s <= d:
                raise ContractError(f"block {i}: sparsity {s} outside [1, {d}]")
        offsets = tuple(int(o) for o in np.concatenate(([0], np.cumsum(lengths)[:-1])))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "sparsities", sparsities)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "total_len", int(sum(lengths)))

    @classmethod
    def uniform(cls, count: int, length: int, sparsity: int = 1) -> "BlockStructure":
        return cls((length,) * count, (sparsity,) * count)

    @property
    def num_blocks(self) -> int:
        return len(self.lengths)

    @property
    def support_size(self) -> int:
        """Total number of kept coordinates, ``sum(s_i)``."""
        return int(sum(self.sparsities))

    @property
    def is_uniform(self) -> bool:
        return len(set(self.lengths)) == 1 and len(set(self.sparsities)) == 1

    def block_range(self, i: int) -> range:
        if not 0 <= i < self.num_blocks:
            raise IndexError(f"block index {i} out of range [0, {self.num_blocks})")
        start = self.offsets[i]
        return range(start, start + self.lengths[i])

    def block_ids(self) -> np.ndarray:
        """Block index of every coordinate."""
        return np.repeat(np.arange(self.num_blocks), self.lengths)

    def nonzeros_per_block(self, x) -> np.ndarray:
        nz = (np.asarray(x) != 0).astype(np.int64)
        return np.add.reduceat(nz, np.asarray(self.offsets))

    def is_feasible(self, x) -> bool:
        """True if every block has at most ``s_i`` exact nonzeros."""
        return bool(np.all(self.nonzeros_per_block(x) <= np.asarray(self.sparsities)))

    def to_dict(self) -> dict:
        return {"lengths": list(self.lengths), "sparsities": list(self.sparsities)}


class SupportSet:
    """Sorted set of coordinate indices within ``[0, n)``.

    Immutable; the index array is read-only.
    """

    __slots__ = ("_indices", "_n")

    def __init__(self, indices: Iterable[int], n: int):
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                         dtype=np.int64).ravel()
        n = int(n)
        if n < 0:
            raise ContractError(f"negative ambient length {n}")
        if idx.size:
            idx = np.sort(idx)
            if np.any(np.diff(idx) == 0):
                raise ContractError("support indices must be unique")
            if idx[0] < 0 or idx[-1] >= n:
                raise IndexError(f"support index outside [0, {n})")
        idx.setflags(write=False)
        self._indices = idx
        self._n = n

    @classmethod
    def from_sorted(cls, idx: np.ndarray, n: int) -> "SupportSet":
        # trusted fast path for indices produced internally
        obj = cls.__new__(cls)
        idx = np.asarray(idx, dtype=np.int64)
        idx.setflags(write=False)
        obj._indices = idx
        obj._n = int(n)
        return obj

    @property
    def indices(self) -> np.ndarray:
        return self._indices

    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return int(self._indices.size)

    def __iter__(self):
        return iter(self._indices.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._indices, other._indices)

    def __hash__(self) -> int:
        return hash((self._n, self._indices.tobytes()))

    def __repr__(self) -> str:
        return f"SupportSet({self._indices.tolist()}, n={self._n})"

    def mask(self) -> np.ndarray:
        m = np.zeros(self._n, dtype=bool)
        m[self._indices] = True
        return m

    def complement(self) -> "SupportSet":
        return SupportSet.from_sorted(np.flatnonzero(~self.mask()), self._n)

    def per_block(self, bs: BlockStructure) -> list[np.ndarray]:
        """Split the indices by block (the sub-supports of each block)."""
        if bs.total_len != self._n:
            raise ContractError(f"block structure covers {bs.total_len} coordinates, support lives in {self._n}")
        bounds = np.searchsorted(self._indices, np.asarray(bs.offsets[1:]))
        return np.split(self._indices, bounds)


def block_slice(x, bs: BlockStructure, i: int) -> np.ndarray:
    """Return the ``i``-th block of ``x`` (a copy)."""
    v = as_signal(x, bs.total_len)
    r = bs.block_range(i)
    return v[r.start:r.stop].copy()


def gather(x, T: SupportSet) -> np.ndarray:
    """Entries of ``x`` on ``T`` in ascending index order."""
    v = as_signal(x, T.n)
    return v[T.indices]


def scatter(vals, T: SupportSet, n: int) -> np.ndarray:
    """Place ``vals`` on ``T`` inside a zero vector of length ``n``."""
    vals = as_signal(vals, name="vals")
    if vals.shape[0] != len(T):
        raise ContractError(f"{vals.shape[0]} values for a support of size {len(T)}")
    if T.n != n:
        raise ContractError(f"support lives in length {T.n}, requested length {n}")
    out = np.zeros(n, dtype=np.complex128)
    out[T.indices] = vals
    return out


def concat_blocks(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([as_signal(p) for p in parts]) if parts else np.zeros(0, np.complex128)
