import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from qwhit import BudgetError
from qwhit.sparse import (
    canonical, is_canonical, kron, max_row_nnz, read_coo, spectral_radius, write_coo,
)


def random_sparse(seed, n=6, density=0.4):
    rng = np.random.default_rng(seed)
    re = sp.random(n, n, density=density, random_state=rng, format="csr")
    im = sp.random(n, n, density=density, random_state=rng, format="csr")
    return (re + 1j * im).tocsr()


def test_canonical_sums_duplicates_and_drops_zeros():
    A = sp.csr_matrix(([1.0, 2.0, 0.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    C = canonical(A)
    assert is_canonical(C)
    assert C.nnz == 1 and C[0, 1] == 3.0


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_kron_matches_dense(s1, s2):
    A, B = random_sparse(s1, 3), random_sparse(s2, 4)
    K = kron(A, B)
    assert is_canonical(K)
    np.testing.assert_allclose(K.toarray(), np.kron(A.toarray(), B.toarray()))


def test_kron_budget():
    with pytest.raises(BudgetError):
        kron(sp.identity(10, format="csr"), sp.identity(10, format="csr"), budget=50)


def test_max_row_nnz():
    assert max_row_nnz(sp.identity(4, format="csr")) == 1
    assert max_row_nnz(sp.csr_matrix(np.ones((3, 3)))) == 3


@pytest.mark.parametrize(
    "A, rho",
    [
        (np.zeros((3, 3)), 0.0),
        (np.diag([0.5, -0.9]), 0.9),
        (0.7 * np.array([[0, 1], [-1, 0]]), 0.7),  # complex pair
        (np.array([[0.5, 10.0], [0.0, 0.5]]), 0.5),  # non-normal
    ],
)
def test_spectral_radius(A, rho):
    assert spectral_radius(A) == pytest.approx(rho, abs=5e-3)


@given(st.integers(0, 10_000))
def test_coo_roundtrip(seed):
    A = canonical(random_sparse(seed))
    buf = io.StringIO()
    write_coo(A, buf)
    buf.seek(0)
    B = read_coo(buf)
    assert (A != B).nnz == 0
