import numpy as np
import pytest

from blockcs.datagen import gaussian_entries
from blockcs.model import Problem, SensingMatrix
from blockcs.types import BlockStructure


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_problem(m, n, lengths=None, sparsities=None, seed=0):
    """Gaussian problem with random y; blocks default to a single block of length n, s=1."""
    rng = np.random.default_rng(seed)
    bs = BlockStructure(tuple(lengths or (n,)), tuple(sparsities or (1,) * len(lengths or (n,))))
    return Problem(SensingMatrix(crandn(rng, m, n)), crandn(rng, m), bs)


def identity_problem(y, lengths, sparsities):
    y = np.asarray(y, dtype=complex)
    return Problem(SensingMatrix(np.eye(y.size)), y, BlockStructure(tuple(lengths), tuple(sparsities)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def report():
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict."""
    def record(criterion: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
