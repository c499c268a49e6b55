"""Tests for the forward/backward solve phase."""

import numpy as np
import pytest

from hlu.errors import DimensionError
from hlu.factor import FactorConfig, factorize
from hlu.problems import GridSpec, advection_diffusion, identity, poisson, random_dominant, ring
from hlu.solve import SolveSession, solve


def _relative_error(x: np.ndarray, reference: np.ndarray) -> float:
    return float(np.linalg.norm(x - reference) / np.linalg.norm(reference))


def test_identity_is_solved_exactly():
    """The identity is solved exactly."""
    handle = factorize(identity(8), FactorConfig(epsilon=0.5, depth=2))
    b = np.arange(1.0, 9.0)
    np.testing.assert_array_equal(solve(handle, b), b)
    assert handle.stats.aux_variables == 0


@pytest.mark.parametrize("partitioner", ["bisection", "contiguous"])
def test_poisson_tight_epsilon_matches_dense(partitioner):
    """Tight epsilon matches the dense solution."""
    m = poisson(GridSpec((16, 16)))
    handle = factorize(m, FactorConfig(epsilon=1e-12, depth=4, partitioner=partitioner))
    b = np.random.default_rng(0).standard_normal(m.n)
    x = handle.solve(b)
    assert _relative_error(x, np.linalg.solve(m.to_dense(), b)) <= 1e-8


def test_ring_solve():
    """Test solving on a ring."""
    m = ring(16)
    handle = factorize(m, FactorConfig(epsilon=1e-12, depth=3, partitioner="contiguous"))
    b = np.ones(16)
    assert _relative_error(handle.solve(b), np.linalg.solve(m.to_dense(), b)) <= 1e-10


def test_nonsymmetric_solve():
    """Test a non-symmetric matrix."""
    m = advection_diffusion(GridSpec((6, 6, 6)), sigma=1.0, r=5.0)
    handle = factorize(m, FactorConfig(epsilon=1e-12, depth=3))
    b = np.random.default_rng(1).standard_normal(m.n)
    assert _relative_error(handle.solve(b), np.linalg.solve(m.to_dense(), b)) <= 1e-8


def test_random_dominant_solve():
    """Test a random diagonally dominant matrix."""
    m = random_dominant(200, density=0.02, seed=9)
    handle = factorize(m, FactorConfig(epsilon=1e-12, depth=3))
    b = np.random.default_rng(2).standard_normal(m.n)
    assert _relative_error(handle.solve(b), np.linalg.solve(m.to_dense(), b)) <= 1e-8


def test_solve_is_linear():
    """The solve map is linear in the right-hand side."""
    m = poisson(GridSpec((12, 12)))
    handle = factorize(m, FactorConfig(epsilon=1e-2, depth=3))
    rng = np.random.default_rng(3)
    b1, b2 = rng.standard_normal(m.n), rng.standard_normal(m.n)
    alpha, beta = 2.5, -0.75
    combined = handle.solve(alpha * b1 + beta * b2)
    separate = alpha * handle.solve(b1) + beta * handle.solve(b2)
    assert np.linalg.norm(combined - separate) <= 1e-10 * np.linalg.norm(separate)


def test_solve_is_deterministic_and_reusable():
    """Repeated solves give identical answers."""
    m = poisson(GridSpec((10, 10)))
    handle = factorize(m, FactorConfig(epsilon=1e-3, depth=3))
    b = np.random.default_rng(4).standard_normal(m.n)
    first = handle.solve(b)
    handle.solve(np.ones(m.n))
    np.testing.assert_array_equal(handle.solve(b), first)


def test_loose_epsilon_is_approximate():
    """Loose epsilon is less accurate and adds fewer auxiliary variables."""
    m = poisson(GridSpec((16, 16)))
    tight = factorize(m, FactorConfig(epsilon=1e-10, depth=4))
    loose = factorize(m, FactorConfig(epsilon=1e-1, depth=4))
    b = np.random.default_rng(5).standard_normal(m.n)
    exact = np.linalg.solve(m.to_dense(), b)
    assert _relative_error(tight.solve(b), exact) < _relative_error(loose.solve(b), exact)
    assert loose.stats.aux_variables <= tight.stats.aux_variables


def test_wrong_rhs_length():
    """A right-hand side of the wrong length is rejected."""
    handle = factorize(ring(16), FactorConfig(depth=2))
    with pytest.raises(DimensionError):
        handle.solve(np.ones(15))


def test_session_keeps_state_off_the_tree():
    """Solving does not write into the factored tree."""
    handle = factorize(ring(16), FactorConfig(depth=2, partitioner="contiguous"))
    session = SolveSession(handle)
    x = session.run(np.ones(16))
    assert set(session.var) >= set(handle.tree.leaves())
    other = SolveSession(handle).run(2 * np.ones(16))
    np.testing.assert_allclose(other, 2 * x, rtol=1e-12)


def test_super_rhs_concatenates_children():
    """A super node's rhs joins its children in order."""
    handle = factorize(ring(16), FactorConfig(depth=3, partitioner="contiguous"))
    session = SolveSession(handle)
    b = np.arange(16.0)
    session.set_rhs(b)
    s = handle.tree.supers[3, 1]
    np.testing.assert_array_equal(session.rhs[s], b[4:8])
    top = handle.tree.supers[1, 0]
    assert session.rhs[top].size == 0
