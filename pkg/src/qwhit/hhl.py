"""State-vector simulation of the HHL route to the hitting probability.

Pipeline for ``A v = b`` with ``A = I - M (x) M*``:

1. Hermitian dilation ``H = [[0, A], [A^H, 0]]`` (A padded to a power of two
   with an identity block); ``H [0; x] = [b; 0]`` holds iff ``A x = b``.
2. Phase estimation of ``exp(i H t0)`` into a ``c``-qubit clock.  Powers of
   ``exp(i H t0)`` are applied exactly from an eigendecomposition of ``H``.
3. Ancilla rotation: clock value ``m`` (two's complement) stands for the
   eigenvalue ``m * 2 pi / (2^c t0)``; the ancilla's ``|1>`` amplitude is
   ``C / lambda`` (clipped to [-1, 1]; zero for ``m = 0``).
4. Inverse phase estimation, then post-selection on ancilla ``|1>`` and
   clock ``|0...0>``.

The post-selected system vector is ``~ C [0; x]``, so the success probability
is ``~ C^2 |x|^2`` and the normalization factor is recovered as
``mu = sqrt(success_probability) / C``.  The hitting probability is then
``mu <y|x~>`` with the inner product from a Hadamard test (signed) or a SWAP
test (magnitude only).
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from qwhit.errors import BudgetError, QwhitError
from qwhit.reduction import build_A, build_b, build_probe

ESTIMATORS = ("hadamard-test", "swap-test")


def qubit_budget() -> int:
    return int(os.environ.get("QWHIT_BUDGET_QUBITS", "26"))


@dataclass(frozen=True)
class HHLConfig:
    """Simulation settings.

    ``evolution_time`` and ``rotation_constant`` default (``None``) to
    ``(1 - 2^{1-c}) pi / sigma_max`` and ``0.9 sigma_min`` of the padded
    matrix.  ``shots = 0`` selects exact-amplitude mode.
    """

    clock_qubits: int = 8
    evolution_time: float | None = None
    rotation_constant: float | None = None
    shots: int = 0
    estimator: str = "hadamard-test"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.clock_qubits <= 20:
            raise QwhitError("clock_qubits must be in 1..20")
        if self.evolution_time is not None and not self.evolution_time > 0:
            raise QwhitError("evolution_time must be positive")
        if self.rotation_constant is not None and not self.rotation_constant > 0:
            raise QwhitError("rotation_constant must be positive")
        if self.shots < 0:
            raise QwhitError("shots must be >= 0")
        if self.estimator not in ESTIMATORS:
            raise QwhitError(f"estimator must be one of {ESTIMATORS}")


@dataclass
class HHLOutcome:
    p_estimate: float
    mu: float
    success_probability: float
    shots_used: int
    standard_error: float
    clock_qubits: int = 0
    clamped_by: float = 0.0

    def to_dict(self) -> dict:
        return {
            "p_estimate": self.p_estimate,
            "mu": self.mu,
            "success_probability": self.success_probability,
            "shots": self.shots_used,
            "standard_error": self.standard_error,
            "clock_qubits": self.clock_qubits,
            "clamped_by": self.clamped_by,
        }


@dataclass
class HHLSolution:
    """Post-selected register after one simulated HHL run.

    ``state`` is the normalized dilated system vector (length ``2 N_pad``);
    the solution lives in its second half.
    """

    state: np.ndarray
    mu: float
    success_probability: float
    evolution_time: float
    rotation_constant: float
    n_rows: int

    @property
    def x_state(self) -> np.ndarray:
        """Second-half block of ``state`` trimmed to the unpadded size (not renormalized)."""
        half = self.state.size // 2
        return self.state[half : half + self.n_rows]

    @property
    def solution(self) -> np.ndarray:
        """Reconstructed ``x ~ A^{-1} b``."""
        return self.mu * self.x_state


def _pad_size(N: int) -> int:
    return 1 << max(0, (N - 1).bit_length())


def hermitian_dilation(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=complex)
    N = A.shape[0]
    Np = _pad_size(N)
    if int(math.log2(2 * Np)) > qubit_budget():
        raise BudgetError(f"dilated dimension {2 * Np} exceeds the qubit budget")
    pad = sp.block_diag([A, sp.identity(Np - N, dtype=complex)], format="csr") if Np > N else A
    H = sp.bmat([[None, pad], [pad.conj().T, None]], format="csr")
    H.sort_indices()
    return H


def _signed_clock(K: int) -> np.ndarray:
    m = np.arange(K)
    return np.where(m < K // 2, m, m - K)


def hhl_statevector(A, b, cfg: HHLConfig) -> HHLSolution:
    b = np.asarray(b, dtype=complex)
    N = A.shape[0]
    if b.shape != (N,):
        raise QwhitError("right-hand side has the wrong length")
    if abs(np.linalg.norm(b) - 1.0) > 1e-12:
        raise QwhitError("right-hand side must have unit norm")
    if np.any(b.imag != 0):
        raise QwhitError("right-hand side must have real amplitudes")
    H = hermitian_dilation(A)
    S = H.shape[0]
    c = cfg.clock_qubits
    total = int(math.log2(S)) + c + 1
    if total > qubit_budget():
        raise BudgetError(f"{total} qubits needed, budget is {qubit_budget()}")
    K = 1 << c

    lam, V = np.linalg.eigh(H.toarray())
    mags = np.abs(lam)
    sigma_min, sigma_max = mags.min(), mags.max()
    t0 = cfg.evolution_time or (1.0 - 2.0 ** (1 - c)) * math.pi / sigma_max
    C = cfg.rotation_constant or 0.9 * sigma_min
    if C > sigma_min * (1 + 1e-12):
        raise QwhitError(
            f"rotation constant C={C:.6g} exceeds min |eigenvalue| {sigma_min:.6g}"
        )
    est = _signed_clock(K) * (2 * math.pi / (K * t0))
    bins = np.rint(lam * t0 * K / (2 * math.pi)).astype(np.int64)
    distinct = np.unique(np.round(lam, 9))
    if np.unique(bins).size < distinct.size:
        warnings.warn("clock resolution too coarse: distinct eigenvalues share a clock bin")

    psi0 = np.zeros(S, dtype=complex)
    psi0[: b.size] = b
    k = np.arange(K)
    phases = np.exp(1j * np.outer(lam, k) * t0)  # (S, K) in eigen coordinates
    Vh = V.conj().T

    # Hadamards on the clock, then controlled exp(i H t0 k) on clock value k.
    psi = np.repeat(psi0[:, None], K, axis=1) / math.sqrt(K)
    psi = V @ (phases * (Vh @ psi))
    psi = np.fft.fft(psi, axis=1) / math.sqrt(K)  # inverse QFT

    with np.errstate(divide="ignore"):
        ratio = np.where(est == 0, 0.0, C / np.where(est == 0, 1.0, est))
    ratio = np.clip(ratio, -1.0, 1.0)
    psi = psi * ratio[None, :]  # ancilla |1> branch only

    psi = np.fft.ifft(psi, axis=1) * math.sqrt(K)  # QFT
    psi = V @ (phases.conj() * (Vh @ psi))
    post = psi.sum(axis=1) / math.sqrt(K)  # clock back to |0...0>

    success = float(np.vdot(post, post).real)
    if success <= 0:
        raise QwhitError("post-selection has zero success probability")
    return HHLSolution(
        state=post / math.sqrt(success),
        mu=math.sqrt(success) / C,
        success_probability=success,
        evolution_time=t0,
        rotation_constant=C,
        n_rows=N,
    )


def estimate_inner(y_state, x_state, cfg: HHLConfig, rng=None):
    """Overlap estimate ``(value, standard_error)``.

    ``hadamard-test`` estimates ``Re <y|x>`` from ``P(0) = (1 + Re<y|x>)/2``;
    ``swap-test`` estimates ``|<y|x>|^2`` from ``P(0) = (1 + |<y|x>|^2)/2`` and
    returns its nonnegative root.  ``cfg.shots = 0`` gives exact values.
    """
    y = np.asarray(y_state, dtype=complex)
    x = np.asarray(x_state, dtype=complex)
    if y.shape != x.shape:
        raise QwhitError("states must have equal dimension")
    overlap = np.vdot(y, x)
    exact = overlap.real if cfg.estimator == "hadamard-test" else abs(overlap) ** 2
    if cfg.shots == 0:
        value = exact if cfg.estimator == "hadamard-test" else math.sqrt(exact)
        return float(value), 0.0
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p_zero = min(max((1.0 + exact) / 2.0, 0.0), 1.0)
    freq = rng.binomial(cfg.shots, p_zero) / cfg.shots
    raw = 2.0 * freq - 1.0
    se_raw = 2.0 * math.sqrt(freq * (1.0 - freq) / cfg.shots)
    if cfg.estimator == "hadamard-test":
        return float(raw), float(se_raw)
    if raw <= 0:
        return 0.0, math.sqrt(se_raw)
    return math.sqrt(raw), se_raw / (2.0 * math.sqrt(raw))


def q_hitting_prob(spec, init, cfg: HHLConfig) -> HHLOutcome:
    """Hitting probability at position 0 through the simulated HHL pipeline.

    Only real-amplitude initial states are accepted, since the right-hand side
    is prepared as two copies ``psi0 (x) psi0``.
    """
    n = spec.n
    if not init.is_real(n):
        raise QwhitError("complex initial state: the HHL route accepts real amplitudes only")
    A = build_A(spec)
    b = build_b(init, n).real.astype(complex)
    y = build_probe(spec)
    sol = hhl_statevector(A, b, cfg)
    y_dil = np.zeros_like(sol.state)
    half = sol.state.size // 2
    y_dil[half : half + y.size] = y

    if cfg.shots == 0:
        inner, se_inner = estimate_inner(y_dil, sol.state, cfg)
        mu, se_mu, used = sol.mu, 0.0, 0
    else:
        rng = np.random.default_rng(cfg.seed)
        freq = rng.binomial(cfg.shots, sol.success_probability) / cfg.shots
        C = sol.rotation_constant
        mu = math.sqrt(freq) / C
        se_mu = (
            math.sqrt(freq * (1 - freq) / cfg.shots) / (2 * math.sqrt(freq) * C)
            if freq > 0
            else math.inf
        )
        inner, se_inner = estimate_inner(y_dil, sol.state, cfg, rng=rng)
        used = 2 * cfg.shots
    raw = mu * inner
    p = min(max(raw, 0.0), 1.0)
    se = math.hypot(inner * se_mu, mu * se_inner) if cfg.shots else 0.0
    return HHLOutcome(
        p_estimate=float(p),
        mu=float(mu),
        success_probability=sol.success_probability,
        shots_used=used,
        standard_error=se,
        clock_qubits=cfg.clock_qubits,
        clamped_by=float(raw - p),
    )
