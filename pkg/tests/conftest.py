import numpy as np
import pytest

from vortex_lab.dynamics import DualState


def random_simplex(rng, n, floor=0.0):
    """Interior point with every entry >= floor."""
    return floor + rng.dirichlet(np.ones(n)) * (1 - n * floor)


def random_zero_sum(rng, lo=2, hi=5):
    n, m = rng.integers(lo, hi + 1, size=2)
    return rng.uniform(-1, 1, size=(n, m))


def random_dual(rng, sizes, scale=1.0):
    return DualState(tuple(rng.normal(scale=scale, size=s) for s in sizes))


def trivial_matrix(rng, n, m):
    """A_jk = a_j - b_k scaled into [-1, 1]."""
    a = rng.uniform(-0.5, 0.5, n)
    b = rng.uniform(-0.5, 0.5, m)
    return a[:, None] - b[None, :]


def central_jacobian(f, v, h=1e-5):
    """Central-difference Jacobian of f: R^d -> R^d at v."""
    v = np.asarray(v, float)
    cols = []
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        cols.append((f(v + e) - f(v - e)) / (2 * h))
    return np.stack(cols, axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# --- acceptance reporting -----------------------------------------------------

_CRITERIA = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records and prints one pass/fail line."""
    def record(n, ok, detail=""):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
