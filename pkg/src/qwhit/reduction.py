"""Hitting probability at position 0 as a linear-system functional.

With ``M`` the transient block of the walk operator (positions ``1..n-1``),

    p0 = y^dagger (I - M (x) M*)^{-1} b,
    b  = psi0 (x) psi0*,
    y  = |1, top> (x) |1, top*>,

all in ``tidx (x) tidx`` coordinates.  ``pn`` follows as ``1 - p0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from qwhit import numerics
from qwhit.errors import NotConvergedError, QwhitError
from qwhit.sparse import canonical, kron
from qwhit.walk import L, R, InitialState, WalkSpec, derive_coin_kets, tidx

# Largest N = (2n-2)^2 the builders accept (n = 1025).
SYSTEM_BUDGET = 2**22
IMAG_TOL = 1e-8
SOLVERS = ("direct", "cgnr", "neumann")
# Dense LU is O(N^3); above this size the sparse factorization is far faster.
DENSE_DIRECT_MAX = 256


@dataclass
class ReductionResult:
    p0: float
    pn: float
    solver: str
    iterations: int
    residual_norm: float

    def to_dict(self) -> dict:
        return {
            "p0": self.p0,
            "pn": self.pn,
            "solver": self.solver,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
        }


def build_M(spec: WalkSpec) -> sp.csr_matrix:
    """Transient walk matrix, ``2(n-1)`` square; zero for ``n = 2``."""
    n = spec.n
    T = spec.coin.matrix()
    dim = spec.transient_dim
    rows, cols, vals = [], [], []
    for k in range(1, n):
        for d in (L, R):
            if k >= 2:
                rows.append(tidx(k - 1, L))
                cols.append(tidx(k, d))
                vals.append(T[L, d])
            if k <= n - 2:
                rows.append(tidx(k + 1, R))
                cols.append(tidx(k, d))
                vals.append(T[R, d])
    return canonical(sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim)))


def build_A(spec: WalkSpec, budget: int = SYSTEM_BUDGET) -> sp.csr_matrix:
    M = build_M(spec)
    MM = kron(M, M.conj(), budget=budget)
    return canonical(sp.identity(MM.shape[0], dtype=complex, format="csr") - MM)


def build_b(init: InitialState, n: int) -> np.ndarray:
    psi = init.transient(n)
    return np.kron(psi, psi.conj())


def build_probe(spec: WalkSpec) -> np.ndarray:
    e = np.zeros(spec.transient_dim, dtype=complex)
    e[tidx(1, L) : tidx(1, R) + 1] = derive_coin_kets(spec.coin).top
    return np.kron(e, e.conj())


def _functional(y, v, what="p0"):
    val = np.vdot(y, v)
    if abs(val.imag) >= IMAG_TOL:
        raise AssertionError(
            f"{what} has imaginary part {val.imag:.3e}; the reduction is built wrong"
        )
    return float(val.real)


def hitting_prob_direct(
    spec: WalkSpec,
    init: InitialState,
    solver: str = "direct",
    tol: float = 1e-13,
    max_iters: int | None = None,
) -> ReductionResult:
    """Solve ``A v = b`` with the chosen solver and read off ``p0 = y^dagger v``.

    ``direct`` uses dense LU for tiny systems and sparse LU otherwise.
    Raises :class:`NotConvergedError` (carrying the partial result) when an
    iterative solver runs out of iterations.
    """
    if solver not in SOLVERS:
        raise QwhitError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    A = build_A(spec)
    b = build_b(init, spec.n)
    y = build_probe(spec)
    if solver == "direct":
        if A.shape[0] <= DENSE_DIRECT_MAX:
            report = numerics.lu_solve(A, b)
        else:
            report = numerics.sparse_lu_solve(A, b)
    elif solver == "cgnr":
        report = numerics.cgnr_solve(A, b, tol=tol, max_iters=max_iters)
    else:
        M = build_M(spec)
        report = numerics.neumann_solve(kron(M, M.conj()), b, tol=tol, max_iters=max_iters)
    p0 = _functional(y, report.solution)
    result = ReductionResult(p0, 1.0 - p0, solver, report.iterations, report.residual_norm)
    if not report.converged:
        raise NotConvergedError(
            f"{solver} stopped at residual {report.residual_norm:.3e}", partial=result
        )
    return result


def neumann_partial(spec: WalkSpec, init: InitialState, K: int) -> float:
    """``y^dagger (sum_{m=0}^{K} (M (x) M*)^m) b`` by repeated mat-vec."""
    if K < 0:
        raise QwhitError("K must be >= 0")
    M = build_M(spec)
    MM = kron(M, M.conj())
    y = build_probe(spec)
    term = build_b(init, spec.n)
    total = np.vdot(y, term)
    for _ in range(K):
        term = MM @ term
        total += np.vdot(y, term)
    return float(total.real)
