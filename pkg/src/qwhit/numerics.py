"""Linear solvers and singular-value estimates for the walk system matrix.

The system matrix ``A = I - M (x) M*`` is non-Hermitian, so the iterative
solver is conjugate gradient on the normal equations ``A^H A x = A^H b``
(CGNR).  It only touches ``A`` through ``A @ v`` and ``A^H @ v``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qwhit.errors import BudgetError, NotConvergedError, QwhitError

DENSE_BUDGET = 4096
CSV_HEADER = ["n", "kappa", "sigma_max", "sigma_min", "iters_max", "iters_min"]


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def _residual(A, x, b) -> float:
    return float(np.linalg.norm(A @ x - b))


def lu_solve(A, b) -> SolveReport:
    """Dense LU with partial pivoting; the reference solver for small systems."""
    N = A.shape[0]
    if N > DENSE_BUDGET:
        raise BudgetError(f"dense solve of dimension {N} exceeds budget {DENSE_BUDGET}")
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)  # singularity is checked below
        lu, piv = la.lu_factor(dense, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * max(pivots.max(), 1.0) * N:
        raise QwhitError("matrix is singular to working precision")
    x = la.lu_solve((lu, piv), np.asarray(b, dtype=complex))
    return SolveReport(x, 1, _residual(A, x, b), True)


def sparse_lu_solve(A, b) -> SolveReport:
    try:
        x = spla.splu(sp.csc_matrix(A, dtype=complex)).solve(np.asarray(b, dtype=complex))
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise QwhitError(f"matrix is singular: {exc}") from None
    return SolveReport(x, 1, _residual(A, x, b), True)


def cgnr_solve(A, b, tol: float = 1e-10, max_iters: int | None = None) -> SolveReport:
    """CG on ``A^H A x = A^H b`` until ``|A x - b| <= tol |b|``.

    The recurrence residual is confirmed against an explicit ``A x - b`` before
    declaring convergence.  On failure the best iterate comes back with
    ``converged=False``.
    """
    if not tol > 0:
        raise QwhitError("tol must be positive")
    b = np.asarray(b, dtype=complex)
    N = b.shape[0]
    if max_iters is None:
        max_iters = 20 * N
    AH = A.conj().T.tocsr() if sp.issparse(A) else np.conj(A).T
    bnorm = np.linalg.norm(b)
    x = np.zeros(N, dtype=complex)
    if bnorm == 0:
        return SolveReport(x, 0, 0.0, True)
    target = tol * bnorm
    r = b.copy()
    z = AH @ r
    p = z.copy()
    zz = np.vdot(z, z).real
    it = 0
    rnorm = bnorm
    while it < max_iters:
        if rnorm <= target:
            rnorm = _residual(A, x, b)
            if rnorm <= target:
                break
            r = b - A @ x  # recurrence drifted; restart from the true residual
            z = AH @ r
            p = z.copy()
            zz = np.vdot(z, z).real
        w = A @ p
        ww = np.vdot(w, w).real
        if ww == 0.0:
            break
        alpha = zz / ww
        x += alpha * p
        r -= alpha * w
        z = AH @ r
        zz_new = np.vdot(z, z).real
        p = z + (zz_new / zz) * p
        zz = zz_new
        rnorm = np.linalg.norm(r)
        it += 1
    rnorm = _residual(A, x, b)
    return SolveReport(x, it, rnorm, rnorm <= target)


def neumann_solve(MM, b, tol: float = 1e-13, max_iters: int | None = None) -> SolveReport:
    """Solve ``(I - MM) v = b`` by the series ``sum_m MM^m b``.

    The residual after ``K`` terms is exactly the next term ``MM^{K} b``.
    """
    b = np.asarray(b, dtype=complex)
    if max_iters is None:
        max_iters = 10_000_000
    target = tol * np.linalg.norm(b)
    v = b.copy()
    term = MM @ b
    it = 0
    tnorm = np.linalg.norm(term)
    while tnorm > target and it < max_iters:
        v += term
        term = MM @ term
        tnorm = np.linalg.norm(term)
        it += 1
    return SolveReport(v, it, float(tnorm), tnorm <= target)


def lanczos_top(apply, v0, tol: float = 1e-6, max_iters: int = 100_000, check_every: int = 10):
    """Largest eigenvalue of a Hermitian operator by the Lanczos recurrence.

    No reorthogonalization: lost orthogonality only duplicates converged Ritz
    values, it does not move the extreme one.  Stops when the Ritz residual
    ``|beta_k s_k|`` falls below ``tol`` times the Ritz value.  Returns
    ``(value, iterations)``.
    """
    q = np.asarray(v0, dtype=complex)
    q = q / np.linalg.norm(q)
    q_prev = np.zeros_like(q)
    alphas, betas = [], []
    beta = 0.0
    theta = np.nan
    for k in range(1, max_iters + 1):
        w = apply(q) - beta * q_prev
        alpha = np.vdot(q, w).real
        w -= alpha * q
        beta = np.linalg.norm(w)
        alphas.append(alpha)
        if k % check_every == 0 or beta == 0.0 or k == max_iters:
            vals, vecs = la.eigh_tridiagonal(
                np.array(alphas), np.array(betas), select="i", select_range=(k - 1, k - 1)
            )
            theta = vals[0]
            if beta * abs(vecs[-1, 0]) <= tol * abs(theta) or beta == 0.0:
                return float(theta), k
        betas.append(beta)
        q_prev, q = q, w / beta
    raise NotConvergedError("Lanczos iteration did not converge", partial=float(theta))


def sigma_extremes(A, tol: float = 1e-6, max_iters: int = 100_000, seed: int = 0):
    """Largest and smallest singular values of ``A``.

    ``sigma_max`` is the top eigenvalue of ``A^H A`` and ``sigma_min`` the top
    eigenvalue of ``(A^H A)^{-1}``, each found by :func:`lanczos_top`
    (power iteration accelerated by the Lanczos recurrence).  The inverse is applied through one sparse LU factorization of
    ``A``.  The start vector is seeded random: a structured start (all ones)
    can sit inside a symmetry sector of ``A`` and miss the true extreme.
    Returns ``(sigma_max, sigma_min, iters_max, iters_min)`` where the counts
    are operator applications.
    """
    A = sp.csc_matrix(A, dtype=complex)
    N = A.shape[0]
    if A.nnz == 0:
        raise QwhitError("sigma_extremes needs a nonzero matrix")
    if N <= 2:
        s = np.linalg.svd(A.toarray(), compute_uv=False)
        if s[-1] == 0:
            raise QwhitError("matrix is singular")
        return float(s[0]), float(s[-1]), 1, 1
    AH = A.conj().T.tocsc()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(N) + 1j * rng.standard_normal(N)

    try:
        lam_max, iters_max = lanczos_top(lambda v: AH @ (A @ v), v0, tol, max_iters)
    except NotConvergedError as exc:
        raise NotConvergedError(
            f"sigma_max: {exc}", partial=math.sqrt(max(exc.partial, 0.0))
        ) from None
    try:
        lu = spla.splu(A)
    except RuntimeError:
        raise QwhitError("matrix is singular") from None
    try:
        lam_inv, iters_min = lanczos_top(
            lambda v: lu.solve(lu.solve(v, trans="H")), v0, tol, max_iters
        )
    except NotConvergedError as exc:
        raise NotConvergedError(
            f"sigma_min: {exc}", partial=1.0 / math.sqrt(exc.partial)
        ) from None
    return math.sqrt(lam_max), 1.0 / math.sqrt(lam_inv), iters_max, iters_min


@dataclass
class KappaSample:
    n: int
    kappa: float
    sigma_max: float
    sigma_min: float
    iters_max: int
    iters_min: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def kappa_sample(coin, n: int, tol: float = 1e-6) -> KappaSample:
    from qwhit.reduction import build_A
    from qwhit.walk import WalkSpec

    try:
        smax, smin, imax, imin = sigma_extremes(build_A(WalkSpec(n, coin)), tol=tol)
    except (QwhitError, NotConvergedError) as exc:
        return KappaSample(n, math.nan, math.nan, math.nan, 0, 0, error=str(exc))
    return KappaSample(n, smax / smin, smax, smin, imax, imin)


def sweep_kappa(coin, n_min: int, n_max: int, tol: float = 1e-6, ns=None, workers: int = 1):
    """One :class:`KappaSample` per ``n`` in ``[n_min, n_max]`` (or in ``ns``).

    Failures are recorded on the sample's ``error`` field and the sweep goes on.
    """
    if ns is None:
        if not 3 <= n_min <= n_max:
            raise QwhitError("need 3 <= n_min <= n_max")
        ns = range(n_min, n_max + 1)
    ns = list(ns)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda n: kappa_sample(coin, n, tol), ns))
    return [kappa_sample(coin, n, tol) for n in ns]


@dataclass
class FitResult:
    exponent: float
    log_coefficient: float
    rms_log_residual: float

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "log_coefficient": self.log_coefficient,
            "rms_log_residual": self.rms_log_residual,
        }


def fit_exponent(samples) -> FitResult:
    """Least-squares line through ``(log n, log kappa)``."""
    good = [s for s in samples if s.ok]
    if len(good) < 3:
        raise QwhitError(">= 3 samples required")
    x = np.log([s.n for s in good])
    if len(np.unique(x)) < 3:
        raise QwhitError("degenerate abscissas: need >= 3 distinct n")
    y = np.log([s.kappa for s in good])
    design = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, icpt])
    return FitResult(float(slope), float(icpt), float(np.sqrt(np.mean(resid**2))))


def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in samples:
        if s.ok:
            w.writerow(
                [s.n, f"{s.kappa:.16e}", f"{s.sigma_max:.16e}", f"{s.sigma_min:.16e}",
                 s.iters_max, s.iters_min]
            )
    return buf.getvalue()
