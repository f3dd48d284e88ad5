"""Exhaustive-search ground truth for small block-sparse problems."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import Problem, gradient, kth_largest_magnitude, top_support
from .types import ContractError, SupportSet, as_signal

MAX_SUPPORTS = 10**6
STATIONARY_ATOL = 1e-8


@dataclass(frozen=True)
class OracleResult:
    best_support: SupportSet
    best_x: np.ndarray
    best_objective: float
    supports_evaluated: int


def ls_on_support(p: Problem, T: SupportSet) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares fit of ``y`` on the columns in ``T``."""
    x = np.zeros(p.n, dtype=np.complex128)
    idx = T.indices
    if idx.size:
        u, *_ = np.linalg.lstsq(p.A.entries[:, idx], p.y, rcond=None)
        x[idx] = u
    r = p.A.entries[:, idx] @ x[idx] - p.y
    return x, float(np.vdot(r, r).real)


def count_supports(p: Problem) -> int:
    return math.prod(math.comb(d, s) for d, s in zip(p.bs.lengths, p.bs.sparsities))


def exhaustive_solve(p: Problem) -> OracleResult:
    """Global minimizer by enumerating every per-block support combination.

    Combinations are visited in mixed-radix order with each block's subsets in
    lexicographic order; the first support reaching the minimum wins ties.
    """
    total = count_supports(p)
    if total > MAX_SUPPORTS:
        raise ContractError(f"exhaustive search would visit {total} supports (limit {MAX_SUPPORTS})")
    per_block = [
        [tuple(off + j for j in c) for c in itertools.combinations(range(d), s)]
        for off, d, s in zip(p.bs.offsets, p.bs.lengths, p.bs.sparsities)
    ]
    best = None
    for combo in itertools.product(*per_block):
        T = SupportSet.from_sorted(np.fromiter(itertools.chain.from_iterable(combo), np.int64), p.n)
        x, obj = ls_on_support(p, T)
        if best is None or obj < best[2]:
            best = (T, x, obj)
    return OracleResult(best[0], best[1], best[2], total)


def verify_stationary(p: Problem, x, tau: float, atol: float = STATIONARY_ATOL) -> bool:
    """Blockwise check of the support characterization of tau-stationarity.

    A full block needs zero gradient on its support and off-support gradient moduli
    at most ``M_{s_i}(|x_[i]|) / tau``; a block below its sparsity needs a zero
    gradient everywhere.
    """
    x = as_signal(x, p.n)
    if tau <= 0:
        raise ContractError(f"tau must be positive, got {tau}")
    g = np.abs(gradient(p, x))
    for off, d, s in zip(p.bs.offsets, p.bs.lengths, p.bs.sparsities):
        xb = x[off:off + d]
        gb = g[off:off + d]
        on = xb != 0
        k = int(np.count_nonzero(on))
        if k > s:
            return False
        if k == s:
            if np.any(gb[on] > atol):
                return False
            if np.any(gb[~on] > kth_largest_magnitude(xb, s) / tau + atol):
                return False
        else:
            if np.any(gb > atol):
                return False
    return True


def is_projection_fixed_point(p: Problem, x, tau: float, rtol: float = 1e-9) -> bool:
    """Direct test that every block of ``x`` is a best ``s_i``-term approximation of
    the corresponding block of ``x - tau * grad f(x)``.

    Ties among candidate supports are all accepted.
    """
    x = as_signal(x, p.n)
    u = x - tau * gradient(p, x)
    best = u.copy()
    keep = top_support(u, p.bs).mask()
    best[~keep] = 0.0
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    for off, d, s in zip(p.bs.offsets, p.bs.lengths, p.bs.sparsities):
        xb, ub, pb = x[off:off + d], u[off:off + d], best[off:off + d]
        on = xb != 0
        if np.count_nonzero(on) > s:
            return False
        if np.any(np.abs(xb[on] - ub[on]) > rtol * max(scale, 1.0)):
            return False
        err_x = float(np.linalg.norm(ub - xb) ** 2)
        err_p = float(np.linalg.norm(ub - pb) ** 2)
        if err_x > err_p + rtol * max(scale, 1.0) ** 2:
            return False
    return True
