"""Shared fixtures and small matrix builders for the test suite."""
import numpy as np
import pytest

from amgtune.sparse import CooMatrix, build, from_dense


def tridiag(n, lo=-1.0, d=2.0, hi=-1.0):
    """Dense ``tridiag(lo, d, hi)`` of order ``n``."""
    return (np.diag(np.full(n, d)) + np.diag(np.full(n - 1, lo), -1)
            + np.diag(np.full(n - 1, hi), 1))


def laplacian_1d(n):
    return from_dense(tridiag(n))


def random_sparse(rng, n_rows, n_cols, density=0.2):
    """Random sparse matrix as (CSR, dense) with roughly ``density`` fill."""
    M = rng.normal(size=(n_rows, n_cols)) * (rng.random((n_rows, n_cols)) < density)
    return from_dense(M), M


def random_spd(rng, n, density=0.1):
    """Diagonally dominant symmetric M-matrix of order ``n``."""
    M = -rng.random((n, n)) * (rng.random((n, n)) < density)
    M = np.triu(M, 1)
    M = M + M.T
    np.fill_diagonal(M, -M.sum(axis=1) + 1.0)
    return M


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lap5():
    return laplacian_1d(5)


def coo(n_rows, n_cols, entries):
    r, c, v = zip(*entries) if entries else ((), (), ())
    return CooMatrix(n_rows, n_cols, np.array(r, dtype=np.int64), np.array(c, dtype=np.int64),
                     np.array(v, dtype=np.float64))


def csr(n_rows, n_cols, entries):
    return build(coo(n_rows, n_cols, entries))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
