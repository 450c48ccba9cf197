import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structcons.eigen import characteristic_residual, eigenvalues, hessenberg, spectral_radius
from structcons.topology import laplacian, canonical_topology


def _match(a, b, tol):
    # greedy pairing of two multisets of complex numbers
    b = list(b)
    for z in a:
        j = int(np.argmin([abs(z - w) for w in b]))
        assert abs(z - b[j]) <= tol, (z, b[j])
        b.pop(j)


def _companion_roots(M):
    """Oracle: roots of the characteristic polynomial via numpy's companion matrix."""
    return np.roots(np.poly(M))


def test_triangular():
    _match(eigenvalues(np.array([[0.0, 0.0], [-1.0, 1.0]])), [0, 1], 1e-12)


def test_identity():
    _match(eigenvalues(np.eye(3)), [1, 1, 1], 1e-12)


def test_canonical_laplacian_has_zero_with_leader_left_vector():
    L = laplacian(canonical_topology(), np.ones(4))
    vals = eigenvalues(L)
    assert np.min(np.abs(vals)) < 1e-10
    e = np.zeros(4)
    e[0] = 1
    np.testing.assert_allclose(e @ L, 0)
    _match(vals, _companion_roots(L), 1e-6)


def test_rotation_block_gives_complex_pair():
    vals = eigenvalues(np.array([[0.0, -2.0], [2.0, 0.0]]))
    _match(vals, [2j, -2j], 1e-12)


def test_hessenberg_similarity():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6))
    H = hessenberg(M)
    assert np.allclose(np.tril(H, -2), 0)
    np.testing.assert_allclose(np.trace(H), np.trace(M), atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(H), np.linalg.norm(M), rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 9))
def test_matches_companion_oracle(seed, n):
    M = np.random.default_rng(seed).normal(size=(n, n))
    vals = eigenvalues(M)
    assert vals.shape == (n,)
    # every computed value is a root of det(M - z I)
    assert max(characteristic_residual(M, z) for z in vals) < 1e-8 * max(1.0, np.abs(M).max())
    _match(vals, _companion_roots(M), 1e-6)


def test_spectral_radius_vs_lapack():
    M = np.random.default_rng(3).normal(size=(8, 8))
    assert spectral_radius(M) == pytest.approx(np.abs(np.linalg.eigvals(M)).max(), rel=1e-10)
