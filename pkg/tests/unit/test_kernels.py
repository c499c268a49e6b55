"""Tests for the dense kernels: pivoted LU, gemm, truncation rules and low-rank factors."""

import numpy as np
import pytest

from hlu.errors import ConfigError, DimensionError, SingularPivotError
from hlu.kernels import (
    FrobeniusGlobal,
    RelativeSigma,
    gemm,
    low_rank_factor,
    lu_factor,
    lu_solve,
    make_rule,
    stack_interactions,
    truncated_svd,
)

SEEDS = range(250)


def _random_shape(rng: np.random.Generator) -> tuple[int, int]:
    return int(rng.integers(1, 13)), int(rng.integers(1, 13))


# ========== LU ==========


@pytest.mark.parametrize("seed", SEEDS)
def test_lu_reconstructs_random_blocks(seed):
    """P L U reproduces the block."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 17))
    a = rng.standard_normal((n, n)) + n * np.eye(n) * rng.choice([0.0, 1.0])
    handle = lu_factor(a)
    p, lower, upper = handle.factors()
    np.testing.assert_allclose(p @ lower @ upper, a, atol=1e-11 * max(1.0, np.abs(a).max()))
    assert np.all(np.abs(np.tril(lower, -1)) <= 1.0 + 1e-12)


@pytest.mark.parametrize("seed", SEEDS)
def test_lu_solve_random_blocks(seed):
    """LU solve matches numpy."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 17))
    a = rng.standard_normal((n, n)) + 2 * n * np.eye(n)
    rhs = rng.standard_normal((n, int(rng.integers(1, 4))))
    x = lu_solve(lu_factor(a), rhs)
    np.testing.assert_allclose(a @ x, rhs, atol=1e-10)


def test_lu_needs_pivoting():
    """A zero leading entry is handled by pivoting."""
    handle = lu_factor(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(lu_solve(handle, np.array([2.0, 3.0])), [3.0, 2.0])


def test_lu_singular_blocks():
    """Singular blocks raise SingularPivotError."""
    with pytest.raises(SingularPivotError) as info:
        lu_factor(np.zeros((2, 2)), "s[2,1]", 2)
    assert info.value.node == "s[2,1]"
    assert info.value.level == 2
    assert "s[2,1]" in str(info.value)
    with pytest.raises(SingularPivotError):
        lu_factor(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_lu_empty_block():
    """Test the 0x0 pivot block."""
    handle = lu_factor(np.zeros((0, 0)))
    assert handle.size == 0
    assert lu_solve(handle, np.zeros(0)).shape == (0,)


def test_lu_rejects_rectangular():
    """Rectangular pivot blocks are rejected."""
    with pytest.raises(DimensionError):
        lu_factor(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        lu_solve(lu_factor(np.eye(2)), np.ones(3))


# ========== gemm ==========


@pytest.mark.parametrize("seed", SEEDS)
def test_gemm_matches_numpy(seed):
    """gemm agrees with alpha A B + beta C."""
    rng = np.random.default_rng(seed)
    m, k = _random_shape(rng)
    n = int(rng.integers(1, 13))
    a, b, c = rng.standard_normal((m, k)), rng.standard_normal((k, n)), rng.standard_normal((m, n))
    alpha, beta = rng.standard_normal(2)
    np.testing.assert_allclose(gemm(alpha, a, b, beta, c), alpha * a @ b + beta * c, atol=1e-12)


def test_gemm_does_not_touch_inputs():
    """Inputs are left unchanged by gemm."""
    c = np.ones((2, 2))
    out = gemm(2.0, np.eye(2), np.eye(2), 1.0, c)
    np.testing.assert_array_equal(out, 3 * np.eye(2) + (1 - np.eye(2)))
    np.testing.assert_array_equal(c, np.ones((2, 2)))


def test_gemm_shape_errors():
    """Mismatched gemm operands raise DimensionError."""
    with pytest.raises(DimensionError):
        gemm(1.0, np.ones((2, 3)), np.ones((2, 2)), 0.0, np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        gemm(1.0, np.ones((2, 2)), np.ones((2, 2)), 1.0, np.zeros((3, 2)))


# ========== Truncation ==========


@pytest.mark.parametrize("seed", SEEDS)
def test_truncated_svd_rules(seed):
    """Test rank selection for both truncation rules."""
    rng = np.random.default_rng(seed)
    rows, cols = _random_shape(rng)
    m = rng.standard_normal((rows, cols)) * np.logspace(0, -8, cols)
    eps = float(10.0 ** -rng.integers(1, 9))

    rel = truncated_svd(m, RelativeSigma(eps))
    s = rel.singular_values
    assert rel.rank == int(np.count_nonzero(s >= eps * s[0]))
    assert rel.dropped_energy == pytest.approx(float(np.sqrt(np.sum(s[rel.rank :] ** 2))))
    approx = rel.u @ np.diag(rel.s) @ rel.vt
    assert np.linalg.norm(m - approx) == pytest.approx(rel.dropped_energy, rel=1e-6, abs=1e-12)

    frob = truncated_svd(m, FrobeniusGlobal(eps))
    total = float(np.linalg.norm(s))
    assert frob.dropped_energy < eps * total or frob.rank == s.size
    if frob.rank > 0:
        tail = float(np.sqrt(np.sum(s[frob.rank - 1 :] ** 2)))
        assert tail >= eps * total


def test_relative_sigma_example():
    """Relative cutoff on a known spectrum."""
    s = np.array([10.0, 1.0, 1e-3, 1e-9])
    assert RelativeSigma(1e-2).rank(s) == 2
    assert RelativeSigma(1.0).rank(s) == 1
    assert RelativeSigma(1e-12).rank(s) == 4


def test_frobenius_example():
    """Frobenius tail cutoff on a known spectrum."""
    s = np.array([4.0, 3.0])
    assert FrobeniusGlobal(0.7).rank(s) == 1
    assert FrobeniusGlobal(0.5).rank(s) == 2
    assert FrobeniusGlobal(0.7).rank(s, reference_norm=100.0) == 0


def test_zero_matrix_has_rank_zero():
    """A zero block compresses to rank 0."""
    result = truncated_svd(np.zeros((3, 4)), RelativeSigma(1e-3))
    assert result.rank == 0
    assert result.u.shape == (3, 0)
    assert result.vt.shape == (0, 4)


def test_empty_matrix():
    """Test SVD of empty blocks."""
    result = truncated_svd(np.zeros((0, 4)), RelativeSigma(1e-3))
    assert result.rank == 0
    assert result.vt.shape == (0, 4)


def test_non_finite_rejected():
    """NaN blocks cannot be compressed."""
    with pytest.raises(ValueError):
        truncated_svd(np.array([[np.nan, 1.0]]), RelativeSigma(0.1))


@pytest.mark.parametrize("eps", [0.0, -1.0, 1.5])
def test_epsilon_range(eps):
    """Epsilon must lie in (0, 1]."""
    with pytest.raises(ConfigError):
        RelativeSigma(eps)
    with pytest.raises(ConfigError):
        FrobeniusGlobal(eps)


def test_make_rule():
    """Test rule lookup by name."""
    assert make_rule("relsigma", 1e-3) == RelativeSigma(1e-3)
    assert make_rule("frob", 1e-3) == FrobeniusGlobal(1e-3)
    with pytest.raises(ConfigError):
        make_rule("spectral", 1e-3)


# ========== Low-rank factors ==========


@pytest.mark.parametrize("seed", SEEDS)
def test_low_rank_factor_energy(seed):
    """Dropped energy equals the reconstruction error."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 9))
    t = int(rng.integers(1, 4))
    outgoing = [rng.standard_normal((int(rng.integers(1, 6)), m)) for _ in range(t)]
    incoming = [rng.standard_normal((m, int(rng.integers(1, 6)))) for _ in range(t)]
    factor = low_rank_factor(outgoing, incoming, RelativeSigma(1e-1))

    stacked = stack_interactions(outgoing, incoming)
    error = np.linalg.norm(stacked - factor.reconstruction())
    assert error == pytest.approx(factor.dropped_energy, rel=1e-6, abs=1e-12)
    assert factor.stacked_norm == pytest.approx(np.linalg.norm(stacked))
    assert factor.v.shape == (m, factor.rank)
    for a, r_k in zip(outgoing, factor.left):
        assert r_k.shape == (a.shape[0], factor.rank)
    for b, q_k in zip(incoming, factor.right):
        assert q_k.shape == (b.shape[1], factor.rank)
    np.testing.assert_allclose(factor.v.T @ factor.v, np.eye(factor.rank), atol=1e-10)


def test_low_rank_factor_exact_rank_one():
    """A rank-one interaction is captured exactly."""
    u = np.array([[1.0], [2.0]])
    v = np.array([[3.0, 0.0, 4.0]])
    factor = low_rank_factor([u @ v], [(2 * u @ v).T], RelativeSigma(1e-10))
    assert factor.rank == 1
    assert factor.dropped_energy < 1e-12
    np.testing.assert_allclose(factor.left[0] @ factor.v.T, u @ v, atol=1e-12)
    np.testing.assert_allclose(factor.right[0] @ factor.v.T, 2 * u @ v, atol=1e-12)


def test_stack_interactions_shapes():
    """Test the stacked interaction layout."""
    with pytest.raises(DimensionError):
        stack_interactions([np.ones((2, 3))], [])
    with pytest.raises(DimensionError):
        stack_interactions([np.ones((2, 3))], [np.ones((4, 2))])
    stacked = stack_interactions([np.ones((2, 3))], [np.zeros((3, 5))])
    assert stacked.shape == (7, 3)
    with pytest.raises(DimensionError):
        stack_interactions([], [])


def test_graded_spectrum_rank():
    """Rank tracks a geometric spectrum."""
    rng = np.random.default_rng(42)
    q1, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    q2, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    m = q1 @ np.diag(10.0 ** -np.arange(8)) @ q2.T
    result = truncated_svd(m, RelativeSigma(5e-4))
    assert result.rank == 4
    np.testing.assert_allclose(result.u.T @ result.u, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(result.vt @ result.vt.T, np.eye(4), atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_full_rank_reconstruction(seed):
    """Keeping every term reconstructs the blocks."""
    rng = np.random.default_rng(seed)
    m = rng.standard_normal(_random_shape(rng))
    result = truncated_svd(m, RelativeSigma(1e-16))
    approx = result.u @ np.diag(result.s) @ result.vt
    assert np.linalg.norm(m - approx) <= 1e-13 * np.linalg.norm(m)
