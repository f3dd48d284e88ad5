import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockcs.bnhtp import (Direction, HaltReason, SolverConfig, armijo_search, auto_tau, bnhtp_solve,
                           gradient_direction, newton_direction, newton_switch, select_support)
from blockcs.datagen import gaussian_entries
from blockcs.metrics import relative_error
from blockcs.model import Problem, SensingMatrix, block_project, gradient, objective
from blockcs.types import BlockStructure, ContractError, SupportSet, gather
from conftest import crandn, identity_problem, random_problem


def planted(m, lengths, sparsities, seed, sigma=0.0):
    rng = np.random.default_rng(seed)
    bs = BlockStructure(tuple(lengths), tuple(sparsities))
    A = gaussian_entries(m, bs.total_len, seed)
    x = np.zeros(bs.total_len, complex)
    for off, d, s in zip(bs.offsets, bs.lengths, bs.sparsities):
        pos = off + rng.choice(d, s, replace=False)
        x[pos] = crandn(rng, s) * np.sqrt(2)
    y = A @ x + sigma * crandn(rng, m)
    return Problem(SensingMatrix(A), y, bs), x


# ---- config

@pytest.mark.parametrize("kw", [dict(tau=0), dict(tau="big"), dict(gamma=1.0), dict(eta=-1), dict(armijo_sigma=0),
                                dict(armijo_beta=1), dict(epsilon=0), dict(max_iter=0), dict(max_backtracks=0)])
def test_config_rejects_out_of_range(kw):
    with pytest.raises(ContractError):
        SolverConfig(**kw)


# ---- support selection

def test_select_support_identity_example():
    p = identity_problem([5, 1, 0, 3], (2, 2), (1, 1))
    assert select_support(p, np.zeros(4), 0.25) == SupportSet([0, 3], 4)


def test_select_support_tie_rule():
    p = identity_problem([2, 2j, -2, -2j], (4,), (2,))
    assert select_support(p, np.zeros(4), 0.5) == SupportSet([0, 1], 4)


def test_select_support_at_stationary_point():
    # identity, x = block hard threshold of y: the gradient vanishes on supp(x)
    y = np.array([4, 0.5, 0, 0, -3j, 0.2])
    p = identity_problem(y, (3, 3), (1, 1))
    x = block_project(y, p.bs)
    assert select_support(p, x, 0.25) == SupportSet(np.flatnonzero(x), 6)


def test_select_support_sizes():
    p = random_problem(10, 12, (3, 4, 5), (1, 2, 3), seed=2)
    T = select_support(p, crandn(np.random.default_rng(3), 12), 0.1)
    assert [len(b) for b in T.per_block(p.bs)] == [1, 2, 3]


# ---- gradient direction

def test_gradient_direction_zero_at_fit():
    y = np.array([1 + 1j, 0, 2, 0])
    p = identity_problem(y, (2, 2), (1, 1))
    T = SupportSet([0, 2], 4)
    x = np.array([1 + 1j, 0, 2, 0])
    np.testing.assert_array_equal(gradient_direction(p, x, T, np.zeros(4), 0.0), 0)


def test_gradient_direction_reduced_problem_oracle():
    rng = np.random.default_rng(4)
    p = random_problem(8, 12, (4, 4, 4), (2, 2, 2), seed=4)
    x = crandn(rng, 12)
    T = SupportSet([0, 3, 5, 6, 9, 11], 12)
    d = gradient_direction(p, x, T, crandn(rng, 12), 0.0)
    reduced = Problem(SensingMatrix(p.A.entries[:, T.indices]), p.y, BlockStructure((len(T),), (1,)))
    np.testing.assert_allclose(gather(d, T), -gradient(reduced, gather(x, T)), rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(d[T.complement().indices], -x[T.complement().indices])


def test_gradient_direction_momentum_is_linear():
    rng = np.random.default_rng(5)
    p = random_problem(8, 12, (4, 4, 4), (1, 1, 1), seed=5)
    x, d0 = crandn(rng, 12), crandn(rng, 12)
    T = SupportSet([1, 6, 8], 12)
    base = gradient_direction(p, x, T, np.zeros(12), 0.5)
    shifted = gradient_direction(p, x, T, d0, 0.5)
    np.testing.assert_array_equal(gather(shifted, T), gather(base, T) + 0.5 * gather(d0, T))
    np.testing.assert_array_equal(shifted[T.complement().indices], base[T.complement().indices])


# ---- Newton direction

def test_newton_direction_identity_closed_form():
    rng = np.random.default_rng(6)
    y, x = crandn(rng, 6), crandn(rng, 6)
    p = identity_problem(y, (3, 3), (1, 1))
    T = SupportSet([1, 5], 6)
    d, ok = newton_direction(p, x, T)
    assert ok
    expected = np.zeros(6, complex)
    expected[T.indices] = y[T.indices]
    np.testing.assert_allclose(x + d, expected, atol=1e-14)


def test_newton_direction_zero_when_residual_orthogonal():
    p0 = random_problem(8, 12, (4, 4, 4), (1, 1, 1), seed=7)
    T = SupportSet([0, 5, 10], 12)
    A_T = p0.A.entries[:, T.indices]
    u = crandn(np.random.default_rng(8), 3)
    q, _ = np.linalg.qr(np.column_stack([A_T, crandn(np.random.default_rng(9), 8)]))
    perp = q[:, 3]                                      # orthogonal to span(A_T)
    y = A_T @ u + perp
    p = Problem(p0.A, y, p0.bs)
    x = np.zeros(12, complex)
    x[T.indices] = u
    d, ok = newton_direction(p, x, T)
    assert ok
    assert np.max(np.abs(gather(d, T))) <= 1e-10


def test_newton_direction_normal_equations_oracle():
    p = random_problem(8, 12, (4, 4, 4), (2, 1, 1), seed=10)
    T = SupportSet([0, 2, 5, 9], 12)
    x = np.zeros(12, complex)
    x[T.indices] = crandn(np.random.default_rng(11), 4)
    d, ok = newton_direction(p, x, T)
    assert ok
    A_T = p.A.entries[:, T.indices]
    u = np.linalg.solve(A_T.conj().T @ A_T, A_T.conj().T @ p.y)
    np.testing.assert_allclose(gather(x + d, T), u, rtol=1e-10)


def test_newton_direction_singular_gram_uses_ridge():
    rng = np.random.default_rng(12)
    col = crandn(rng, 4)
    A = np.column_stack([col, col, crandn(rng, 4), crandn(rng, 4)])
    p = Problem(SensingMatrix(A), crandn(rng, 4), BlockStructure((2, 2), (2, 2)))
    x = crandn(rng, 4)
    T = SupportSet([0, 1, 2, 3], 4)
    d, ok = newton_direction(p, x, T)
    if ok:
        g = gradient(p, x)
        G = A.conj().T @ A
        rhs = A.conj().T @ (A @ x - A @ x) - g         # T covers every column
        assert np.linalg.norm(G @ d - rhs) <= 1e-6 * np.linalg.norm(rhs)


def test_newton_direction_more_columns_than_rows():
    p = random_problem(3, 8, (4, 4), (3, 3), seed=30)
    d, ok = newton_direction(p, crandn(np.random.default_rng(31), 8), SupportSet([0, 1, 2, 4, 5, 6], 8))
    assert np.all(np.isfinite(d)) or not ok


def test_newton_direction_non_finite_system_reports_flag():
    p = random_problem(6, 8, (4, 4), (1, 1), seed=32)
    g = np.full(8, np.nan + 0j)
    d, ok = newton_direction(p, np.zeros(8), SupportSet([0, 4], 8), grad=g)
    assert ok is False


# ---- Newton switch

def test_newton_switch_zero_direction():
    p = random_problem(6, 8, seed=13)
    x = np.zeros(8, complex)
    x[2] = 1.0
    T = SupportSet([2], 8)
    assert newton_switch(p, x, T, np.zeros(8), 0.01, 0.1)


def test_newton_switch_rejects_ascent():
    p = random_problem(6, 8, seed=14)
    x = np.zeros(8, complex)
    x[1] = 1.0
    T = SupportSet([1, 4], 8)
    dN = np.zeros(8, complex)
    dN[T.indices] = gather(gradient(p, x), T)
    assert np.linalg.norm(dN) > 0
    for gamma in (1e-6, 0.01, 0.5):
        assert not newton_switch(p, x, T, dN, gamma, 0.1)


def test_newton_switch_near_stationary_point():
    p, x_true = planted(20, (4, 4, 4), (1, 1, 1), seed=15)
    T = SupportSet(np.flatnonzero(x_true), 12)
    x = x_true + 1e-3 * np.where(x_true != 0, 1, 0)
    dN, ok = newton_direction(p, x, T)
    assert ok
    assert newton_switch(p, x, T, dN, 0.01, auto_tau(p))


# ---- Armijo

def test_armijo_zero_direction():
    p = random_problem(6, 8, seed=16)
    assert armijo_search(p, crandn(np.random.default_rng(17), 8), np.zeros(8), SolverConfig()) == (1.0, True)


def test_armijo_identity_full_step():
    p = identity_problem([1, 0, 0], (3,), (1,))
    alpha, ok = armijo_search(p, np.zeros(3), np.array([1, 0, 0]), SolverConfig(armijo_sigma=0.3))
    assert ok and alpha == 1.0


def test_armijo_backtracks_on_ill_scaled_quadratic():
    A = np.diag([100.0, 1.0])
    p = Problem(SensingMatrix(A), np.array([0, 0], complex), BlockStructure((2,), (2,)))
    x = np.array([1.0, 1.0], complex)
    d = -gradient(p, x)                                 # descent, but far too long along the stiff axis
    alpha, ok = armijo_search(p, x, d, SolverConfig())
    assert ok and alpha < 1.0
    assert objective(p, x + alpha * d) < objective(p, x)


def test_armijo_reports_failure():
    p = identity_problem([1, 0], (2,), (1,))
    alpha, ok = armijo_search(p, np.zeros(2), np.array([-1, 0]), SolverConfig(max_backtracks=5))
    assert (alpha, ok) == (0.0, False)


# ---- solver

def test_solve_identity_one_newton_step():
    rng = np.random.default_rng(18)
    y = crandn(rng, 9)
    p = identity_problem(y, (3, 3, 3), (1, 2, 1))
    res = bnhtp_solve(p)
    target = block_project(y, p.bs)
    first = res.history[0]
    assert first.direction is Direction.NEWTON and first.alpha == 1.0 and first.accepted
    np.testing.assert_allclose(res.x_hat, target, atol=1e-14)
    assert res.halting_reason is HaltReason.TOLERANCE
    assert objective(p, res.x_hat) == pytest.approx(np.sum(np.abs(y - target) ** 2), rel=1e-12)


def test_solve_zero_measurements():
    p = Problem(SensingMatrix(crandn(np.random.default_rng(19), 5, 8)), np.zeros(5), BlockStructure((4, 4), (1, 1)))
    res = bnhtp_solve(p)
    assert res.iterations == 1
    assert res.halting_reason is HaltReason.TOLERANCE
    assert res.history[0].tolerance == 0.0
    assert np.all(res.x_hat == 0)


def test_solve_recovers_planted_noiseless_default_config():
    """Planted 32x128 instances (4 blocks of 32, s_i = 2), default configuration."""
    errors = []
    for seed in range(10):
        p, x = planted(32, (32,) * 4, (2,) * 4, seed)
        errors.append(relative_error(bnhtp_solve(p).x_hat, x))
    assert max(errors) <= 1e-8, f"R-errors: {np.round(errors, 4).tolist()}"


def test_solve_recovers_planted_noiseless_large_tau():
    """Same instances with tau = 64 * auto_tau: wider support swaps escape the first guess."""
    for seed in range(10):
        p, x = planted(32, (32,) * 4, (2,) * 4, seed)
        assert relative_error(bnhtp_solve(p, SolverConfig(tau=64 * auto_tau(p))).x_hat, x) <= 1e-8


def test_stationary_start_halts_immediately():
    y = np.array([4, 0.5, 0, 0, -3j, 0.2])
    p = identity_problem(y, (3, 3), (1, 1))
    x0 = block_project(y, p.bs)
    res = bnhtp_solve(p, x0=x0)
    assert res.iterations == 1
    assert res.history[0].tolerance < SolverConfig().epsilon
    np.testing.assert_array_equal(res.x_hat, x0)


def test_newton_exactness_on_first_step():
    p, _ = planted(30, (8, 8, 8), (1, 1, 1), seed=20, sigma=0.1)
    res = bnhtp_solve(p, SolverConfig(max_iter=1))
    rec = res.history[0]
    assert rec.direction is Direction.NEWTON and rec.alpha == 1.0
    T = SupportSet(rec.support, p.n)
    A_T = p.A.entries[:, T.indices]
    u = np.linalg.lstsq(A_T, p.y, rcond=None)[0]
    np.testing.assert_allclose(gather(res.x_hat, T), u, rtol=1e-8)


def test_armijo_failure_halts_with_diagnostic():
    p, _ = planted(12, (4, 4, 4), (1, 1, 1), seed=21, sigma=0.5)
    res = bnhtp_solve(p, SolverConfig(max_backtracks=1, armijo_sigma=0.999, epsilon=1e-14))
    if res.diagnostic is not None:
        assert res.diagnostic == "armijo_failed"
        assert res.halting_reason is HaltReason.MAX_ITER
        assert res.history[-1].note == "armijo_failed"
    assert res.iterations == len(res.history)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_scale_covariance_of_support_sequence(c):
    for seed in range(5):
        p, _ = planted(40, (16,) * 4, (1,) * 4, seed, sigma=0.05)
        tau = auto_tau(p)
        base = bnhtp_solve(p, SolverConfig(tau=tau))
        scaled = Problem(SensingMatrix(c * p.A.entries), c * p.y, p.bs)
        res = bnhtp_solve(scaled, SolverConfig(tau=tau / c**2))
        assert [h.support for h in res.history] == [h.support for h in base.history]


# ---- auto tau

def test_auto_tau_identity():
    p = identity_problem(np.ones(6), (6,), (1,))
    assert auto_tau(p) == pytest.approx(0.25, rel=1e-5)


def test_auto_tau_scaling():
    p = random_problem(10, 14, seed=22)
    q = Problem(SensingMatrix(3.0 * p.A.entries), p.y, p.bs)
    assert auto_tau(q) == pytest.approx(auto_tau(p) / 9.0, rel=1e-8)


def test_auto_tau_against_eigensolver():
    p = random_problem(50, 100, seed=23)
    lam = np.linalg.eigvalsh(p.A.entries.conj().T @ p.A.entries)[-1]
    assert 0.999 <= auto_tau(p) * 4 * lam <= 1.001


# ---- invariants

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), sigma=st.sampled_from([0.0, 0.01, 0.3]),
       mult=st.sampled_from([1.0, 4.0, 32.0]), eta=st.sampled_from([0.0, 0.1, 0.9]))
def test_iterates_feasible_and_descending(seed, sigma, mult, eta):
    p, _ = planted(10, (4, 5, 3), (1, 2, 1), seed, sigma=sigma)
    res = bnhtp_solve(p, SolverConfig(tau=mult * auto_tau(p), eta=eta))
    assert res.iterations == len(res.history)
    assert p.bs.is_feasible(res.x_hat)
    for h in res.history:
        assert h.feasible
        assert len(h.support) == p.bs.support_size
        if h.accepted:
            slack = 1e-12 * max(h.prev_objective, 1.0)
            assert h.objective <= h.prev_objective + h.armijo_bound + slack
            assert h.armijo_bound <= 0.0
