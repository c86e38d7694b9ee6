"""Dense channel algebra: Kraus maps, their matrix representation, and the
hitting probability of an absorbing subspace.

Vectorization is row-major, ``vec(rho) = sum_{kl} rho_kl |k>|l>``, so that

    vec(F rho F^dagger) = (F (x) F*) vec(rho),
    (rho (x) I) |Omega> = vec(rho),    <Omega| vec(X) = tr(X),

with ``|Omega> = sum_i |i>|i>``.  Everything here is dense and meant for
small dimensions; it is the reference against which the sparse reduction is
checked, not a scalable path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qwhit.errors import BudgetError, QwhitError
from qwhit.sparse import spectral_radius

DIM_BUDGET = 64
TOL = 1e-10


def vec(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise QwhitError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1).astype(complex)


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    D = int(round(np.sqrt(v.size)))
    if D * D != v.size:
        raise QwhitError(f"length {v.size} is not a perfect square")
    return v.reshape(D, D)


def max_entangled(D: int) -> np.ndarray:
    """Unnormalized ``|Omega> = sum_i |i>|i>``, i.e. ``vec(I)``."""
    return np.eye(D, dtype=complex).reshape(-1)


@dataclass(frozen=True)
class KrausMap:
    """Completely positive map ``rho -> sum_k F_k rho F_k^dagger``."""

    ops: tuple

    def __init__(self, ops, channel: bool = False):
        ops = tuple(np.asarray(F, dtype=complex) for F in ops)
        if not ops:
            raise QwhitError("a Kraus map needs at least one operator")
        D = ops[0].shape[0]
        for F in ops:
            if F.shape != (D, D):
                raise QwhitError("Kraus operators must be square and of equal dimension")
        object.__setattr__(self, "ops", ops)
        if channel and not self.is_trace_preserving():
            raise QwhitError("Kraus operators do not satisfy sum F^dagger F = I")

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def is_trace_preserving(self, tol: float = TOL) -> bool:
        S = sum(F.conj().T @ F for F in self.ops)
        return bool(np.max(np.abs(S - np.eye(self.dim))) < tol)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(F @ rho @ F.conj().T for F in self.ops)


def check_projector(P: np.ndarray, tol: float = TOL) -> np.ndarray:
    P = np.asarray(P, dtype=complex)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise QwhitError("projector must be a square matrix")
    if np.max(np.abs(P @ P - P), initial=0) > tol or np.max(np.abs(P - P.conj().T), initial=0) > tol:
        raise QwhitError("not an orthogonal projector (need P^2 = P = P^dagger)")
    return P


def matrix_representation(kraus: KrausMap, budget: int = DIM_BUDGET) -> np.ndarray:
    """``M_F = sum_k F_k (x) F_k*`` (entry-wise conjugate on the second factor)."""
    if kraus.dim > budget:
        raise BudgetError(f"dimension {kraus.dim} exceeds dense budget {budget}")
    return sum(np.kron(F, F.conj()) for F in kraus.ops)


def split_shift_transient(kraus: KrausMap, P_B, P_T):
    """Kraus families ``{P_B F_k P_T}`` (shift) and ``{P_T F_k P_T}`` (transient)."""
    P_B = check_projector(P_B)
    P_T = check_projector(P_T)
    if P_B.shape != (kraus.dim, kraus.dim) or P_T.shape != P_B.shape:
        raise QwhitError("projector dimension does not match the Kraus map")
    if np.max(np.abs(P_B @ P_T)) > TOL:
        raise QwhitError("P_B and P_T are not orthogonal")
    shift = KrausMap([P_B @ F @ P_T for F in kraus.ops])
    transient = KrausMap([P_T @ F @ P_T for F in kraus.ops])
    return shift, transient


def _prepare(kraus, P_B, P_T, rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (kraus.dim, kraus.dim):
        raise QwhitError("density matrix dimension does not match the Kraus map")
    if np.max(np.abs(rho - rho.conj().T)) > TOL or abs(np.trace(rho) - 1) > TOL:
        raise QwhitError("rho must be Hermitian with unit trace")
    if np.linalg.eigvalsh(rho).min() < -TOL:
        raise QwhitError("rho must be positive semidefinite")
    shift, transient = split_shift_transient(kraus, P_B, P_T)
    return rho, matrix_representation(shift), matrix_representation(transient)


def lemma1_hitting(kraus: KrausMap, P_B, P_T, rho) -> float:
    """Probability that ``rho`` is eventually absorbed into the range of ``P_B``.

    ``tr(P_B rho) + <Omega| M_s (I - M_t)^{-1} (rho (x) I) |Omega>`` where
    ``M_s``, ``M_t`` represent the shift and transient maps.  ``P_B`` must span
    a minimal (absorbing) subspace; that is the caller's responsibility.
    """
    rho, Ms, Mt = _prepare(kraus, P_B, P_T, rho)
    radius = spectral_radius(Mt)
    if radius >= 1 - 1e-9:
        raise QwhitError(
            f"transient operator not strictly contracting (spectral radius {radius:.12g})"
        )
    D = kraus.dim
    omega = max_entangled(D)
    x = np.linalg.solve(np.eye(D * D) - Mt, vec(rho))
    val = np.trace(np.asarray(P_B) @ rho) + np.vdot(omega, Ms @ x)
    if abs(val.imag) >= 1e-9:
        raise AssertionError(f"hitting probability has imaginary part {val.imag:.3e}")
    return float(val.real)


def lemma1_partial(kraus: KrausMap, P_B, P_T, rho, K: int) -> float:
    """``tr(P_B rho) + sum_{m<=K} tr(F_s o F_t^m (rho))`` by direct Kraus application."""
    rho = np.asarray(rho, dtype=complex)
    shift, transient = split_shift_transient(kraus, P_B, P_T)
    total = np.trace(np.asarray(P_B) @ rho).real
    cur = rho
    for _ in range(K + 1):
        total += np.trace(shift.apply(cur)).real
        cur = transient.apply(cur)
    return float(total)


def walk_channel(spec):
    """Kraus map ``{U M_no, M_yes}`` of one walk step with the projector onto
    ``|0, L>`` and the projector onto positions ``1..n-1``."""
    from qwhit.walk import L, build_walk_unitary, idx

    n, D = spec.n, spec.dim
    U = build_walk_unitary(spec).toarray()
    yes = np.zeros((D, D), dtype=complex)
    for k in (0, n):
        for d in (0, 1):
            yes[idx(k, d), idx(k, d)] = 1.0
    no = np.eye(D, dtype=complex) - yes
    P_B = np.zeros((D, D), dtype=complex)
    P_B[idx(0, L), idx(0, L)] = 1.0
    return KrausMap([U @ no, yes], channel=True), P_B, no
