import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ddcm_vms.errors import SingularSystem
from ddcm_vms.sparse import TripletBuffer, backward_error, compress, solve_direct


def test_duplicates_summed():
    buf = TripletBuffer((2, 2))
    buf.add([0, 0], [0, 0], [1.0, 2.0])
    A = compress(buf)
    assert A.nnz == 1 and A[0, 0] == 3.0


def test_empty_buffer():
    A = compress(TripletBuffer((3, 3)))
    assert A.nnz == 0
    assert np.all(A @ np.arange(3.0) == 0)


def test_out_of_range_index():
    with pytest.raises(IndexError):
        TripletBuffer((2, 2)).add([2], [0], [1.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_product_matches_triplet_sum(seed):
    g = np.random.default_rng(seed)
    r, c = g.integers(0, 50, 400), g.integers(0, 50, 400)
    v = g.standard_normal(400)
    buf = TripletBuffer((50, 50))
    buf.add(r, c, v)
    A = compress(buf)
    x = g.standard_normal(50)
    ref = np.zeros(50)
    np.add.at(ref, r, v * x[c])
    assert np.abs(A @ x - ref).max() <= 1e-13
    for i in range(50):
        cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)


def test_identity_and_permutation():
    b = np.array([3.0, -1.0, 7.0])
    assert np.array_equal(solve_direct(sp.eye(3, format="csr"), b), b)
    x = solve_direct(sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 2.0]))
    assert np.allclose(x, [2.0, 1.0], rtol=0, atol=1e-15)


@pytest.mark.parametrize("n", [100, 800])
def test_random_well_conditioned(n, rng):
    A = sp.random(n, n, density=0.02, random_state=1, format="csr") + 5 * sp.eye(n)
    b = rng.standard_normal(n)
    x = solve_direct(A.tocsr(), b)
    assert backward_error(A, x, b) <= 1e-10
    assert np.abs(A @ x - b).max() <= 1e-10 * (np.abs(b).max() + 1)


def test_singular_reports_pivot():
    A = sp.csr_matrix(np.array([[1.0, 2.0, 0], [2.0, 4.0, 0], [0, 0, 1.0]]))
    with pytest.raises(SingularSystem) as exc:
        solve_direct(A, np.ones(3))
    assert exc.value.pivot == 1


def test_adjoint_consistency(rng):
    n = 120
    A = sp.csr_matrix(rng.standard_normal((n, n)) + n * np.eye(n))
    b, c = rng.standard_normal(n), rng.standard_normal(n)
    lhs = solve_direct(A, b) @ c
    rhs = b @ solve_direct(A.T.tocsr(), c)
    assert abs(lhs - rhs) <= 1e-9 * abs(lhs)


def test_deterministic(rng):
    A = sp.csr_matrix(rng.standard_normal((60, 60)) + 10 * np.eye(60))
    b = rng.standard_normal(60)
    assert np.array_equal(solve_direct(A, b), solve_direct(A, b))
