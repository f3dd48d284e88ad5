"""Least-squares objective over block-sparse complex vectors.

``f(x) = ||A x - y||^2`` with Wirtinger gradient ``A^H (A x - y)`` (derivative with
respect to the conjugate variable). The real directional derivative of ``f``
along ``d`` is ``2 * real_inner(d, gradient(x))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import BlockStructure, ContractError, SupportSet, as_signal

POWER_MAX_ITER = 200
POWER_RTOL = 1e-10
LAMBDA_MARGIN = 1e-6

# relative floating-point allowance used when an inequality is tight by construction
FP_RTOL = 1e-12


def power_iteration(A: np.ndarray, max_iter: int = POWER_MAX_ITER, rtol: float = POWER_RTOL,
                    seed: int = 0) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of ``A^H A`` and its unit eigenvector by power iteration.

    The start vector is drawn from a fixed seed so results are reproducible.
    """
    A = np.asarray(A)
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        Av = A @ v
        lam_new = float(np.vdot(Av, Av).real)
        w = (Av.conj() @ A).conj()
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        v = w / nw
        if lam_new > 0 and abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    Av = A @ v
    return max(lam, float(np.vdot(Av, Av).real)), v


class SensingMatrix:
    """Dense complex ``m x n`` operator with cached spectral constants.

    ``lambda_max`` is the power-iteration estimate of the top eigenvalue of
    ``A^H A`` inflated by a relative margin of 1e-6, and ``alpha_f`` is
    ``1 / (2 lambda_max)``.
    """

    def __init__(self, entries, lambda_max: float | None = None):
        A = np.array(entries, dtype=np.complex128, order="C")
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ContractError(f"sensing matrix must be a nonempty 2-D array, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ContractError("sensing matrix has non-finite entries")
        A.setflags(write=False)
        self.entries = A
        self.adjoint = np.ascontiguousarray(A.conj().T)
        self.adjoint.setflags(write=False)
        self.m, self.n = A.shape
        if lambda_max is None:
            lam, _ = power_iteration(A)
            lambda_max = lam * (1.0 + LAMBDA_MARGIN)
        self.lambda_max = float(lambda_max)
        self.alpha_f = 1.0 / (2.0 * self.lambda_max) if self.lambda_max > 0 else np.inf

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.n

    def __matmul__(self, x):
        return self.entries @ x

    def __repr__(self) -> str:
        return f"SensingMatrix(m={self.m}, n={self.n}, lambda_max={self.lambda_max:.6g})"


@dataclass(frozen=True)
class Problem:
    """One instance of ``min ||A x - y||^2`` subject to block sparsity."""

    A: SensingMatrix
    y: np.ndarray
    bs: BlockStructure

    def __post_init__(self):
        if not isinstance(self.A, SensingMatrix):
            object.__setattr__(self, "A", SensingMatrix(self.A))
        y = np.array(as_signal(self.y, self.A.m, "y"))
        if not np.all(np.isfinite(y)):
            raise ContractError("y has non-finite entries")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.bs.total_len != self.A.n:
            raise ContractError(
                f"block structure covers {self.bs.total_len} coordinates but A has {self.A.n} columns"
            )

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n

    def residual(self, x) -> np.ndarray:
        return self.A.entries @ as_signal(x, self.n) - self.y


def objective(p: Problem, x) -> float:
    r = p.residual(x)
    return float(np.vdot(r, r).real)


def gradient(p: Problem, x) -> np.ndarray:
    return p.A.adjoint @ p.residual(x)


def real_inner(u, v) -> float:
    """``Re(u^H v)``: the Euclidean inner product of the real views of ``u`` and ``v``."""
    u = as_signal(u, name="u")
    v = as_signal(v, u.shape[0], "v")
    return float(np.vdot(u, v).real)


def top_support(v, bs: BlockStructure) -> SupportSet:
    """Indices of the ``s_i`` largest moduli inside each block; ties go to the lower index."""
    v = as_signal(v, bs.total_len, "v")
    mag = np.abs(v)
    if bs.is_uniform:
        d, s = bs.lengths[0], bs.sparsities[0]
        order = np.argsort(-mag.reshape(bs.num_blocks, d), axis=1, kind="stable")[:, :s]
        order.sort(axis=1)
        idx = (order + np.asarray(bs.offsets)[:, None]).ravel()
    else:
        parts = []
        for off, d, s in zip(bs.offsets, bs.lengths, bs.sparsities):
            order = np.argsort(-mag[off:off + d], kind="stable")[:s]
            parts.append(np.sort(order) + off)
        idx = np.concatenate(parts)
    return SupportSet.from_sorted(idx, bs.total_len)


def block_project(x, bs: BlockStructure) -> np.ndarray:
    """Blockwise hard threshold: keep the ``s_i`` largest-modulus entries of each block."""
    v = as_signal(x, bs.total_len)
    T = top_support(v, bs)
    out = np.zeros_like(v)
    out[T.indices] = v[T.indices]
    return out


def kth_largest_magnitude(v, k: int) -> float:
    v = as_signal(v, name="v")
    if not 1 <= k <= v.shape[0]:
        raise ContractError(f"k={k} outside [1, {v.shape[0]}]")
    mag = np.abs(v)
    return float(np.partition(mag, mag.shape[0] - k)[mag.shape[0] - k])


def stationarity_map(p: Problem, x, T: SupportSet, grad: np.ndarray | None = None) -> np.ndarray:
    """Residual equal to the gradient on ``T`` and to ``x`` off ``T``, laid out by position."""
    x = as_signal(x, p.n)
    g = gradient(p, x) if grad is None else grad
    out = x.copy()
    out[T.indices] = g[T.indices]
    return out


def halting_tolerance(p: Problem, x, T: SupportSet, tau: float,
                      grad: np.ndarray | None = None) -> float:
    """Stopping measure: ``||F(x;T)||`` plus the worst off-support gradient excess.

    The excess at an off-support index is ``|grad_i| - max|x| / tau`` clipped at 0.
    """
    if tau <= 0:
        raise ContractError(f"tau must be positive, got {tau}")
    x = as_signal(x, p.n)
    g = gradient(p, x) if grad is None else grad
    F = stationarity_map(p, x, T, grad=g)
    tol = float(np.linalg.norm(F))
    off = ~T.mask()
    if np.any(off):
        top = float(np.max(np.abs(x))) if x.size else 0.0
        excess = np.abs(g[off]) - top / tau
        tol += max(float(np.max(excess)), 0.0)
    return tol


def _slack(*terms: float) -> float:
    return FP_RTOL * sum(abs(t) for t in terms) + 1e-300


def check_lipschitz(p: Problem, q1, q2) -> bool:
    """Does ``||grad(q1) - grad(q2)|| <= ||q1 - q2|| / alpha_f`` hold?"""
    lhs = float(np.linalg.norm(gradient(p, q1) - gradient(p, q2)))
    rhs = float(np.linalg.norm(as_signal(q1) - as_signal(q2))) / p.A.alpha_f
    return lhs <= rhs + _slack(lhs, rhs)


def check_descent_lemma(p: Problem, q1, q2, tau: float) -> bool:
    """Quadratic upper bound ``f(q1) <= f(q2) + 2<q1-q2, grad f(q2)> + ||q1-q2||^2 / tau``."""
    if tau > p.A.alpha_f / 2 * (1 + 1e-12):
        raise ContractError(f"tau={tau} exceeds alpha_f/2={p.A.alpha_f / 2}")
    q1 = as_signal(q1, p.n)
    q2 = as_signal(q2, p.n)
    diff = q1 - q2
    f1, f2 = objective(p, q1), objective(p, q2)
    lin = 2.0 * real_inner(diff, gradient(p, q2))
    quad = float(np.vdot(diff, diff).real) / tau
    return f1 <= f2 + lin + quad + _slack(f1, f2, lin, quad)


def check_convexity_lemma(p: Problem, q1, q2) -> bool:
    """First-order convexity ``f(q1) >= f(q2) + 2<q1-q2, grad f(q2)>``."""
    q1 = as_signal(q1, p.n)
    q2 = as_signal(q2, p.n)
    f1, f2 = objective(p, q1), objective(p, q2)
    lin = 2.0 * real_inner(q1 - q2, gradient(p, q2))
    return f1 >= f2 + lin - _slack(f1, f2, lin)
