"""Block Newton hard-thresholding pursuit.

Each iteration picks the ``s_i`` largest entries per block of ``x - tau * grad f(x)``,
computes either a subspace Newton direction (when the switch test accepts it) or a
momentum gradient direction, backtracks with Armijo, and writes exact zeros off the
chosen support.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import Problem, halting_tolerance, real_inner, top_support
from .types import ContractError, SupportSet, as_signal

NEWTON_RIDGE = 1e-10
NEWTON_RESIDUAL_RTOL = 1e-6
# squared Cholesky pivots below this fraction of the largest mean a numerically singular Gram block
NEWTON_PIVOT_RTOL = 1e-14


class HaltReason(str, enum.Enum):
    TOLERANCE = "tolerance"
    MAX_ITER = "max_iter"


class Direction(str, enum.Enum):
    NEWTON = "newton"
    GRADIENT = "gradient"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the BNHTP iteration.

    ``tau="auto"`` resolves to ``alpha_f / 2`` of the problem at solve time.
    """

    tau: float | str = "auto"
    gamma: float = 0.01
    eta: float = 0.1
    armijo_sigma: float = 1e-4
    armijo_beta: float = 0.5
    epsilon: float = 1e-6
    max_iter: int = 100
    max_backtracks: int = 50

    def __post_init__(self):
        if isinstance(self.tau, str):
            if self.tau != "auto":
                raise ContractError(f"tau: expected a positive number or 'auto', got {self.tau!r}")
        elif not self.tau > 0:
            raise ContractError(f"tau: must be positive, got {self.tau}")
        if not 0 < self.gamma < 1:
            raise ContractError(f"gamma: must lie in (0, 1), got {self.gamma}")
        if not self.eta >= 0:
            raise ContractError(f"eta: must be nonnegative, got {self.eta}")
        if not 0 < self.armijo_sigma < 1:
            raise ContractError(f"armijo_sigma: must lie in (0, 1), got {self.armijo_sigma}")
        if not 0 < self.armijo_beta < 1:
            raise ContractError(f"armijo_beta: must lie in (0, 1), got {self.armijo_beta}")
        if not self.epsilon > 0:
            raise ContractError(f"epsilon: must be positive, got {self.epsilon}")
        if int(self.max_iter) < 1:
            raise ContractError(f"max_iter: must be >= 1, got {self.max_iter}")
        if int(self.max_backtracks) < 1:
            raise ContractError(f"max_backtracks: must be >= 1, got {self.max_backtracks}")


@dataclass
class IterationRecord:
    iteration: int
    objective: float          # f at the new iterate
    prev_objective: float     # f at the iterate the step started from
    tolerance: float          # halting measure at the starting iterate
    alpha: float
    direction: Direction
    accepted: bool
    armijo_bound: float       # sigma * alpha * (real directional derivative)
    feasible: bool
    support: tuple[int, ...] = field(repr=False)
    note: str | None = None


@dataclass
class SolveResult:
    x_hat: np.ndarray
    iterations: int
    halting_reason: HaltReason
    history: list = field(repr=False)
    wall_time: float
    diagnostic: str | None = None
    x_raw: np.ndarray | None = field(default=None, repr=False)


def auto_tau(p: Problem) -> float:
    return p.A.alpha_f / 2.0


def _resolve_tau(p: Problem, cfg: SolverConfig) -> float:
    return auto_tau(p) if cfg.tau == "auto" else float(cfg.tau)


def _apply(p: Problem, x: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(x)
    if nz.size * 4 < x.size:
        return p.A.entries[:, nz] @ x[nz]
    return p.A.entries @ x


def select_support(p: Problem, x, tau: float, grad: np.ndarray | None = None) -> SupportSet:
    """Blockwise top-``s_i`` support of the gradient step ``x - tau * grad f(x)``."""
    x = as_signal(x, p.n)
    g = p.A.adjoint @ (_apply(p, x) - p.y) if grad is None else grad
    return top_support(x - tau * g, p.bs)


def gradient_direction(p: Problem, x, T: SupportSet, prev_d, eta: float) -> np.ndarray:
    """Momentum gradient direction of the support-restricted problem.

    On ``T`` it is ``-A_T^H (A_T x_T - y) + eta * prev_d_T``; off ``T`` it is ``-x``.
    """
    x = as_signal(x, p.n)
    prev_d = as_signal(prev_d, p.n, "prev_d")
    idx = T.indices
    A_T = p.A.entries[:, idx]
    r_T = A_T @ x[idx] - p.y
    d = -x.copy()
    d[idx] = -(A_T.conj().T @ r_T) + eta * prev_d[idx]
    return d


def _cholesky_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    c, lower = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
    piv = np.abs(np.diag(c)) ** 2
    if not piv.min() > NEWTON_PIVOT_RTOL * piv.max():
        raise np.linalg.LinAlgError("numerically singular Gram block")
    return scipy.linalg.cho_solve((c, lower), rhs, check_finite=False)


def newton_direction(p: Problem, x, T: SupportSet,
                     grad: np.ndarray | None = None) -> tuple[np.ndarray, bool]:
    """Subspace Newton direction on ``T``.

    Solves ``(A^H A)_{TT} d_T = (A^H A)_{T,T^c} x_{T^c} - grad_T`` by Cholesky and sets
    ``d_{T^c} = -x_{T^c}``. Returns ``solvable=False`` instead of raising when the
    Gram block is numerically singular.
    """
    x = as_signal(x, p.n)
    Ax = _apply(p, x)
    g = p.A.adjoint @ (Ax - p.y) if grad is None else grad
    idx = T.indices
    d = -x.copy()
    if idx.size == 0:
        return d, True
    A_T = p.A.entries[:, idx]
    A_TH = A_T.conj().T
    G = A_TH @ A_T
    # (A^H A)_{T,T^c} x_{T^c} = A_T^H (A x - A_T x_T)
    rhs = A_TH @ (Ax - A_T @ x[idx]) - g[idx]
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        d[idx] = 0.0
        return d, True
    try:
        dT = _cholesky_solve(G, rhs)
    except (np.linalg.LinAlgError, ValueError):
        ridge = NEWTON_RIDGE * float(np.trace(G).real) / idx.size
        try:
            dT = _cholesky_solve(G + ridge * np.eye(idx.size), rhs)
        except (np.linalg.LinAlgError, ValueError):
            return d, False
    if not np.all(np.isfinite(dT)) or np.linalg.norm(G @ dT - rhs) > NEWTON_RESIDUAL_RTOL * rhs_norm:
        return d, False
    d[idx] = dT
    return d, True


def newton_switch(p: Problem, x, T: SupportSet, dN, gamma: float, tau: float,
                  grad: np.ndarray | None = None) -> bool:
    """Accept the Newton step iff ``<grad_T, dN_T> <= -gamma ||dN||^2 + ||x_{T^c}||^2 / (4 tau)``."""
    x = as_signal(x, p.n)
    dN = as_signal(dN, p.n, "dN")
    g = p.A.adjoint @ (_apply(p, x) - p.y) if grad is None else grad
    idx = T.indices
    off = np.ones(p.n, dtype=bool)
    off[idx] = False
    lhs = real_inner(g[idx], dN[idx])
    rhs = -gamma * float(np.vdot(dN, dN).real) + float(np.vdot(x[off], x[off]).real) / (4.0 * tau)
    return lhs <= rhs


def armijo_search(p: Problem, x, d, cfg: SolverConfig, support: SupportSet | None = None,
                  grad: np.ndarray | None = None) -> tuple[float, bool]:
    """Backtracking step ``alpha = beta**l`` with sufficient decrease.

    Accepts the first ``l >= 0`` with
    ``f(trial) <= f(x) + sigma * alpha * 2 Re(d^H grad f(x))``. Without ``support`` the
    trial point is ``x + alpha d``; with it the trial point is the iterate the solver
    actually moves to: ``x_T + alpha d_T`` on ``T`` and zero elsewhere.

    The objective change is evaluated in closed form (expanding the quadratic) so the
    test stays accurate when the change is many orders below ``f(x)``.
    """
    x = as_signal(x, p.n)
    d = as_signal(d, p.n, "d")
    Ax = _apply(p, x)
    r = Ax - p.y
    g = p.A.adjoint @ r if grad is None else grad
    slope = 2.0 * real_inner(d, g)
    if support is None:
        u = _apply(p, d)
        w = np.zeros_like(r)
    else:
        idx = support.indices
        A_T = p.A.entries[:, idx]
        u = A_T @ d[idx]
        w = A_T @ x[idx] - Ax                      # A applied to (-x off T)
    beta, sigma = cfg.armijo_beta, cfg.armijo_sigma
    alpha = 1.0
    for _ in range(int(cfg.max_backtracks) + 1):
        step = alpha * u + w
        change = 2.0 * real_inner(step, r) + float(np.vdot(step, step).real)
        if change <= sigma * alpha * slope:
            return alpha, True
        alpha *= beta
    return 0.0, False


def bnhtp_solve(p: Problem, cfg: SolverConfig | None = None, x0=None) -> SolveResult:
    """Run BNHTP from ``x0`` (zero by default) until the halting measure drops below
    ``epsilon`` or ``max_iter`` iterations have run."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    x = np.zeros(p.n, np.complex128) if x0 is None else as_signal(x0, p.n, "x0").copy()
    tau = _resolve_tau(p, cfg)
    bs = p.bs
    prev_d = np.zeros(p.n, np.complex128)
    history: list[IterationRecord] = []
    reason = HaltReason.MAX_ITER
    diagnostic = None

    Ax = _apply(p, x)
    for k in range(int(cfg.max_iter)):
        r = Ax - p.y
        f = float(np.vdot(r, r).real)
        g = p.A.adjoint @ r
        T = top_support(x - tau * g, bs)
        tol = halting_tolerance(p, x, T, tau, grad=g)

        kind = Direction.GRADIENT
        d, ok = newton_direction(p, x, T, grad=g)
        alpha, accepted = 0.0, False
        if ok and newton_switch(p, x, T, d, cfg.gamma, tau, grad=g):
            kind = Direction.NEWTON
            alpha, accepted = armijo_search(p, x, d, cfg, support=T, grad=g)
        if not accepted:
            kind = Direction.GRADIENT
            d = gradient_direction(p, x, T, prev_d, cfg.eta)
            alpha, accepted = armijo_search(p, x, d, cfg, support=T, grad=g)

        slope = 2.0 * real_inner(d, g)
        if accepted:
            x_new = np.zeros_like(x)
            x_new[T.indices] = x[T.indices] + alpha * d[T.indices]
            Ax_new = _apply(p, x_new)
            r_new = Ax_new - p.y
            f_new = float(np.vdot(r_new, r_new).real)
        else:
            x_new, Ax_new, f_new = x, Ax, f
        history.append(IterationRecord(
            iteration=k + 1, objective=f_new, prev_objective=f, tolerance=tol, alpha=alpha,
            direction=kind, accepted=accepted, armijo_bound=cfg.armijo_sigma * alpha * slope,
            feasible=bs.is_feasible(x_new), support=tuple(T.indices.tolist()),
            note=None if accepted else "armijo_failed",
        ))
        if tol < cfg.epsilon:
            reason = HaltReason.TOLERANCE
            x, Ax = x_new, Ax_new
            break
        if not accepted:
            diagnostic = "armijo_failed"
            break
        prev_d = d
        x, Ax = x_new, Ax_new

    return SolveResult(
        x_hat=x, iterations=len(history), halting_reason=reason, history=history,
        wall_time=time.perf_counter() - t0, diagnostic=diagnostic,
    )
