import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from minres_wp.linsolve import SaddleSystem, SingularSystemError, as_csr, lu_solve, solve_saddle
from oracles import block_saddle_solve, gauss_solve


def _random_saddle(rng, nV, nU):
    G = rng.standard_normal((nV, nV))
    A = G @ G.T + nV * np.eye(nV)
    B = rng.standard_normal((nV, nU))
    F = rng.standard_normal(nV)
    return A, B, F


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 12), st.data())
def test_saddle_matches_block_elimination(seed, nV, data):
    nU = data.draw(st.integers(1, min(5, nV)))
    A, B, F = _random_saddle(np.random.default_rng(seed), nV, nU)
    psi, u = solve_saddle(SaddleSystem(sp.csr_matrix(A), sp.csr_matrix(B), F))
    psi0, u0 = block_saddle_solve(A, B, F)
    assert np.max(np.abs(psi - psi0)) <= 1e-10 * max(1.0, np.max(np.abs(psi0)))
    assert np.max(np.abs(u - u0)) <= 1e-10 * max(1.0, np.max(np.abs(u0)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_sparse_lu_matches_dense_elimination(seed):
    rng = np.random.default_rng(seed)
    M = sp.random(20, 20, density=0.2, random_state=rng, format="csr") + sp.eye(20) * 5.0
    b = rng.standard_normal(20)
    x = lu_solve(M, b)
    x0 = gauss_solve(M.toarray(), b)
    assert np.max(np.abs(x - x0)) <= 1e-10 * max(1.0, np.max(np.abs(x0)))


def test_weight_scaling_identity():
    # scaling A by s leaves u unchanged and scales psi by 1/s
    A, B, F = _random_saddle(np.random.default_rng(3), 8, 3)
    psi, u = solve_saddle(SaddleSystem(sp.csr_matrix(A), sp.csr_matrix(B), F))
    psi2, u2 = solve_saddle(SaddleSystem(sp.csr_matrix(7.0 * A), sp.csr_matrix(B), F))
    assert np.allclose(u, u2, atol=1e-12) and np.allclose(psi, 7.0 * psi2, atol=1e-12)


def test_structurally_singular():
    M = sp.csr_matrix(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(SingularSystemError) as info:
        lu_solve(M, np.ones(3))
    assert info.value.pivot in (0, 1)
    with pytest.raises(SingularSystemError):
        lu_solve(sp.csr_matrix((3, 3)), np.ones(3))


def test_rank_deficient_coupling_reports_b_block():
    A, B, F = _random_saddle(np.random.default_rng(4), 6, 2)
    B[:, 1] = 2.0 * B[:, 0]
    with pytest.raises(SingularSystemError) as info:
        solve_saddle(SaddleSystem(sp.csr_matrix(A), sp.csr_matrix(B), F))
    assert info.value.block == "B"


def test_singular_a_block_reported():
    A, B, F = _random_saddle(np.random.default_rng(5), 6, 2)
    A[:, 0] = 0.0
    A[0, :] = 0.0
    B[0, :] = 0.0
    with pytest.raises(SingularSystemError) as info:
        solve_saddle(SaddleSystem(sp.csr_matrix(A), sp.csr_matrix(B), F))
    assert info.value.block == "A"


def test_shape_validation_and_csr():
    with pytest.raises(ValueError):
        SaddleSystem(sp.eye(3), sp.csr_matrix(np.ones((2, 1))), np.ones(3))
    M = as_csr(sp.coo_matrix(([1.0, 2.0], ([0, 0], [1, 1])), shape=(2, 2)))
    assert M.nnz == 1 and M[0, 1] == 3.0 and M.has_sorted_indices
