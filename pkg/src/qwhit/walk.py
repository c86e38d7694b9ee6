"""Coined walk on positions 0..n with absorbing boundaries at 0 and n.

Basis convention for the full space: ``idx(k, d) = 2*k + d`` with direction
``d = 0`` for L and ``d = 1`` for R.  Transient coordinates (positions
``1..n-1`` only) use ``tidx(k, d) = 2*(k - 1) + d``.

One walk step measures the position first (absorbing whatever sits on 0 or
n) and then applies ``U = S (I (x) T)``.  Since the unabsorbed branch is the
single operator ``U M_no``, a pure initial state stays pure and the
iteration below runs on state vectors instead of density matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from qwhit.errors import QwhitError

L, R = 0, 1
_DIRS = {"L": L, "R": R, "l": L, "r": R, "0": L, "1": R}

NORM_TOL = 1e-12
FORBIDDEN_TOL = 1e-18
_FORBIDDEN_MSG = (
    "nonzero amplitude on (0,R) or (n,L): a boundary is entered only from the "
    "inward direction, so this signals an indexing bug"
)


def idx(k: int, d: int) -> int:
    return 2 * k + d


def tidx(k: int, d: int) -> int:
    return 2 * (k - 1) + d


@dataclass(frozen=True)
class Coin:
    """Coin parameters ``(a, b, theta)``.

    The coin operator is ``T = [[a, b], [-e^{i theta} b*, e^{i theta} a*]]``.
    ``constraint="unit"`` enforces ``|a|^2 + |b|^2 = 1``.  ``constraint="l1"``
    enforces ``|a| + |b| = 1`` instead and yields a non-unitary coin; it exists
    only so the condition-number sweep can be run under that reading.
    """

    a: complex
    b: complex
    theta: float = 0.0
    constraint: str = "unit"

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        object.__setattr__(self, "theta", float(self.theta))
        if self.a == 0 or self.b == 0:
            raise QwhitError("degenerate coin: a and b must both be nonzero")
        if self.constraint == "unit":
            norm = abs(self.a) ** 2 + abs(self.b) ** 2
            if abs(norm - 1.0) > NORM_TOL:
                raise QwhitError(f"coin not normalized: |a|^2+|b|^2 = {norm!r}")
        elif self.constraint == "l1":
            norm = abs(self.a) + abs(self.b)
            if abs(norm - 1.0) > NORM_TOL:
                raise QwhitError(f"coin not l1-normalized: |a|+|b| = {norm!r}")
        else:
            raise QwhitError(f"unknown coin constraint {self.constraint!r}")

    @classmethod
    def hadamard(cls) -> "Coin":
        s = 1.0 / math.sqrt(2.0)
        return cls(s, s, math.pi)

    @classmethod
    def random(cls, rng, min_abs_a=0.0, max_abs_a=1.0, constraint="unit") -> "Coin":
        """Draw a coin with ``|a|`` uniform in ``[min_abs_a, max_abs_a)``.

        Phases of ``a``, ``b`` and ``theta`` are uniform on ``[0, 2 pi)``.
        """
        mag_a = rng.uniform(min_abs_a, max_abs_a)
        mag_b = math.sqrt(1.0 - mag_a**2) if constraint == "unit" else 1.0 - mag_a
        pa, pb, theta = rng.uniform(0.0, 2.0 * math.pi, size=3)
        return cls(mag_a * np.exp(1j * pa), mag_b * np.exp(1j * pb), theta, constraint)

    def matrix(self) -> np.ndarray:
        ph = np.exp(1j * self.theta)
        return np.array(
            [[self.a, self.b], [-ph * np.conj(self.b), ph * np.conj(self.a)]],
            dtype=complex,
        )


@dataclass(frozen=True)
class CoinKets:
    """The kets ``|top>`` and ``|bot>`` with ``T = |L><top| + |R><bot|``."""

    top: np.ndarray
    bot: np.ndarray


def derive_coin_kets(coin: Coin) -> CoinKets:
    a, b = coin.a, coin.b
    top = np.array([np.conj(a), np.conj(b)], dtype=complex)
    bot = np.exp(-1j * coin.theta) * np.array([-b, a], dtype=complex)
    return CoinKets(top, bot)


@dataclass(frozen=True)
class WalkSpec:
    n: int
    coin: Coin = field(default_factory=Coin.hadamard)

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise QwhitError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < 2:
            raise QwhitError("n must be >= 2")

    @property
    def dim(self) -> int:
        return 2 * (self.n + 1)

    @property
    def transient_dim(self) -> int:
        return 2 * (self.n - 1)


@dataclass(frozen=True)
class InitialState:
    """Generator for an initial state supported on positions ``1..n-1``.

    Use the constructors :meth:`basis`, :meth:`explicit` and :meth:`random`.
    ``explicit`` amplitudes are given in transient coordinates (length
    ``2(n-1)``) or in full coordinates (length ``2(n+1)``, zero on the
    boundary positions).
    """

    kind: str
    k: int = 1
    d: int = L
    amplitudes: tuple = ()
    seed: int = 0
    real_only: bool = False

    @classmethod
    def basis(cls, k: int, d) -> "InitialState":
        if isinstance(d, str):
            if d not in _DIRS:
                raise QwhitError(f"direction must be L or R, got {d!r}")
            d = _DIRS[d]
        return cls("basis", k=int(k), d=int(d), real_only=True)

    @classmethod
    def explicit(cls, amplitudes) -> "InitialState":
        amps = tuple(complex(z) for z in amplitudes)
        real = all(z.imag == 0 for z in amps)
        return cls("explicit", amplitudes=amps, real_only=real)

    @classmethod
    def random(cls, seed: int, real_only: bool = False) -> "InitialState":
        return cls("random", seed=int(seed), real_only=real_only)

    def transient(self, n: int) -> np.ndarray:
        """Amplitudes in transient coordinates, validated for walk size n."""
        dim = 2 * (n - 1)
        if self.kind == "basis":
            if not 1 <= self.k <= n - 1:
                raise QwhitError(f"initial position {self.k} outside 1..{n - 1}")
            psi = np.zeros(dim, dtype=complex)
            psi[tidx(self.k, self.d)] = 1.0
            return psi
        if self.kind == "random":
            rng = np.random.default_rng(self.seed)
            psi = rng.standard_normal(dim).astype(complex)
            if not self.real_only:
                psi += 1j * rng.standard_normal(dim)
            return psi / np.linalg.norm(psi)
        if self.kind == "explicit":
            amps = np.array(self.amplitudes, dtype=complex)
            if amps.size == 2 * (n + 1):
                if np.any(amps[[0, 1, 2 * n, 2 * n + 1]] != 0):
                    raise QwhitError("initial state has support on an absorbing position")
                amps = amps[2:-2]
            if amps.size != dim:
                raise QwhitError(
                    f"expected {dim} transient amplitudes for n={n}, got {amps.size}"
                )
            norm = np.vdot(amps, amps).real
            if abs(norm - 1.0) > NORM_TOL:
                raise QwhitError(f"initial state must have unit norm, got {norm!r}")
            return amps
        raise QwhitError(f"unknown initial state kind {self.kind!r}")

    def full(self, n: int) -> np.ndarray:
        psi = np.zeros(2 * (n + 1), dtype=complex)
        psi[2:-2] = self.transient(n)
        return psi

    def is_real(self, n: int) -> bool:
        return bool(np.all(self.transient(n).imag == 0))


def build_walk_unitary(spec: WalkSpec) -> sp.csr_matrix:
    """Sparse ``U = S (I_p (x) T)`` on the full ``2(n+1)``-dimensional space.

    ``S`` shifts modulo ``n+1``; the wrap-around entries are kept even though
    measurement makes them unreachable.
    """
    n = spec.n
    T = spec.coin.matrix()
    rows, cols, vals = [], [], []
    for k in range(n + 1):
        left, right = (k - 1) % (n + 1), (k + 1) % (n + 1)
        for d in (L, R):
            rows += [idx(left, L), idx(right, R)]
            cols += [idx(k, d), idx(k, d)]
            vals += [T[L, d], T[R, d]]
    U = sp.csr_matrix((vals, (rows, cols)), shape=(spec.dim, spec.dim), dtype=complex)
    U.sort_indices()
    return U


def _check_forbidden(psi2: np.ndarray) -> None:
    # psi2 has shape (n+1, 2); (0, R) and (n, L) have no incoming arrows.
    if abs(psi2[0, R]) ** 2 >= FORBIDDEN_TOL or abs(psi2[-1, L]) ** 2 >= FORBIDDEN_TOL:
        raise AssertionError(_FORBIDDEN_MSG)


def _step(psi2: np.ndarray, T: np.ndarray):
    _check_forbidden(psi2)
    absorbed0 = float(np.vdot(psi2[0], psi2[0]).real)
    absorbed_n = float(np.vdot(psi2[-1], psi2[-1]).real)
    psi2 = psi2.copy()
    psi2[0] = 0.0
    psi2[-1] = 0.0
    tossed = psi2 @ T.T
    out = np.empty_like(psi2)
    out[:, L] = np.roll(tossed[:, L], -1)
    out[:, R] = np.roll(tossed[:, R], 1)
    return absorbed0, absorbed_n, out


def iterate_step(state: np.ndarray, spec: WalkSpec):
    """One measure-then-evolve step.

    Returns ``(absorbed0, absorbedN, next_state)`` where the absorbed masses
    are read off positions 0 and n before ``U`` is applied.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape != (spec.dim,):
        raise QwhitError(f"state must have length {spec.dim}")
    a0, an, nxt = _step(state.reshape(spec.n + 1, 2), spec.coin.matrix())
    return a0, an, nxt.reshape(-1)


@dataclass
class HitResult:
    p0: float
    pn: float
    residual: float
    steps: int
    converged: bool = True
    decay_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "p0": self.p0,
            "pn": self.pn,
            "residual": self.residual,
            "steps": self.steps,
            "converged": self.converged,
        }


def hitting_prob_iterative(
    spec: WalkSpec,
    init: InitialState,
    eps: float = 1e-10,
    max_steps: int = 1_000_000,
) -> HitResult:
    """Accumulate absorbed mass step by step until less than ``eps`` remains.

    ``p0`` and ``pn`` are partial sums, hence lower bounds on the limits; the
    unabsorbed mass ``residual`` bounds the error of each.  Returns with
    ``converged=False`` instead of raising when ``max_steps`` runs out.
    ``decay_ok`` is cleared if the residual ever fails to halve over a window
    of ``4 n^2`` steps.
    """
    if not eps > 0:
        raise QwhitError("eps must be positive")
    if max_steps < 1:
        raise QwhitError("max_steps must be >= 1")
    n = spec.n
    psi2 = init.full(n).reshape(n + 1, 2)
    p0, pn, residual, steps, decay_ok, bad = _iterate_kernel(
        psi2, spec.coin.matrix(), float(eps), int(max_steps), 4 * n * n, FORBIDDEN_TOL
    )
    if bad:
        raise AssertionError(_FORBIDDEN_MSG)
    return HitResult(p0, pn, residual, steps, residual < eps, decay_ok)


@numba.njit(cache=True)
def _iterate_kernel(psi, T, eps, max_steps, window, forbidden_tol):
    # Same arithmetic as _step, fused into one compiled loop.
    n1 = psi.shape[0]
    cur = psi.copy()
    nxt = np.zeros_like(cur)
    p0 = 0.0
    pn = 0.0
    residual = 0.0
    for k in range(n1):
        residual += abs(cur[k, 0]) ** 2 + abs(cur[k, 1]) ** 2
    window_start = residual
    decay_ok = True
    steps = 0
    while steps < max_steps and residual >= eps:
        if abs(cur[0, 1]) ** 2 >= forbidden_tol or abs(cur[n1 - 1, 0]) ** 2 >= forbidden_tol:
            return p0, pn, residual, steps, decay_ok, True
        p0 += abs(cur[0, 0]) ** 2 + abs(cur[0, 1]) ** 2
        pn += abs(cur[n1 - 1, 0]) ** 2 + abs(cur[n1 - 1, 1]) ** 2
        nxt[:, :] = 0.0
        residual = 0.0
        for k in range(1, n1 - 1):
            left = T[0, 0] * cur[k, 0] + T[0, 1] * cur[k, 1]
            right = T[1, 0] * cur[k, 0] + T[1, 1] * cur[k, 1]
            nxt[(k - 1) % n1, 0] = left
            nxt[(k + 1) % n1, 1] = right
            residual += abs(left) ** 2 + abs(right) ** 2
        cur, nxt = nxt, cur
        steps += 1
        if steps % window == 0:
            if residual > 0.5 * window_start:
                decay_ok = False
            window_start = residual
    return p0, pn, residual, steps, decay_ok, False


def state_to_json(state) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(state, dtype=complex)]


def state_from_json(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)
