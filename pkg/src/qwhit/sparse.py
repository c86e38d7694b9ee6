"""Complex CSR matrices: canonical form, Kronecker products, text export.

Matrices are plain :class:`scipy.sparse.csr_matrix` objects kept in canonical
form (sorted column indices, no duplicates, no stored zeros).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numba import njit

from qwhit.errors import BudgetError, QwhitError

ZERO_DROP = 1e-300


def canonical(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=complex)
    A.sum_duplicates()
    A.data[np.abs(A.data) < ZERO_DROP] = 0
    A.eliminate_zeros()
    A.sort_indices()
    return A


def is_canonical(A: sp.csr_matrix) -> bool:
    if np.any(np.abs(A.data) < ZERO_DROP):
        return False
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
        if np.any(np.diff(cols) <= 0):
            return False
    return True


def kron(A, B, budget: int | None = None) -> sp.csr_matrix:
    """Sparse Kronecker product, never densified."""
    dim = A.shape[0] * B.shape[0]
    if budget is not None and dim > budget:
        raise BudgetError(f"Kronecker dimension {dim} exceeds budget {budget}")
    return canonical(sp.kron(A, B, format="csr"))


def max_row_nnz(A: sp.csr_matrix) -> int:
    return int(np.diff(A.indptr).max(initial=0))


def spectral_radius(A, iters: int = 2000, seed: int = 0, tol: float = 1e-9) -> float:
    """Spectral radius of a square matrix by power iteration.

    The estimate is the geometric-mean growth ``(|A^{2k} x| / |A^k x|)^{1/k}``
    over the second half of the run, which converges for non-normal ``A`` and
    for complex-conjugate dominant pairs where plain Rayleigh quotients
    oscillate.  It is re-evaluated every 100 steps and the run stops once two
    successive values agree to ``tol`` (relative), or after ``iters`` steps.
    Returns 0 when the iterate vanishes (nilpotent ``A``).
    """
    A = sp.csr_matrix(A, dtype=complex)
    if A.shape[0] != A.shape[1]:
        raise QwhitError("spectral_radius needs a square matrix")
    if iters < 2:
        raise QwhitError("iters must be >= 2")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    logs, steps = _power_logs(A.indptr, A.indices, A.data, x, iters, tol)
    if steps == 0:
        return 0.0
    return float(np.exp(logs[steps // 2 : steps].mean()))


@njit(cache=True)
def _power_logs(indptr, indices, data, x, iters, tol):
    n = x.size
    logs = np.empty(iters)
    y = np.empty_like(x)
    prev = -1.0
    for m in range(iters):
        nrm2 = 0.0
        for i in range(n):
            acc = 0j
            for j in range(indptr[i], indptr[i + 1]):
                acc += data[j] * x[indices[j]]
            y[i] = acc
            nrm2 += acc.real * acc.real + acc.imag * acc.imag
        if nrm2 == 0.0:
            return logs, 0
        nrm = np.sqrt(nrm2)
        logs[m] = np.log(nrm)
        for i in range(n):
            x[i] = y[i] / nrm
        done = m + 1
        if done >= 200 and done % 100 == 0:
            est = np.exp(logs[done // 2 : done].mean())
            if abs(est - prev) <= tol * est:
                return logs, done
            prev = est
    return logs, iters


def write_coo(A: sp.csr_matrix, fh) -> None:
    """Write ``"D nnz"`` then one ``"row col re im"`` line per nonzero (0-based)."""
    A = canonical(A)
    fh.write(f"{A.shape[0]} {A.nnz}\n")
    coo = A.tocoo()
    for r, c, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def read_coo(fh) -> sp.csr_matrix:
    header = fh.readline().split()
    if len(header) != 2:
        raise QwhitError("coordinate file header must be 'D nnz'")
    dim, nnz = int(header[0]), int(header[1])
    rows, cols, vals = [], [], []
    for line in fh:
        if not line.strip():
            continue
        r, c, re, im = line.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(complex(float(re), float(im)))
    if len(vals) != nnz:
        raise QwhitError(f"header announces {nnz} nonzeros, file has {len(vals)}")
    return canonical(sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim)))
