"""Hitting probabilities of one-dimensional coined quantum walks.

Four routes compute the probability that a walk on positions ``0..n`` is
absorbed at position 0:

* :func:`qwhit.walk.hitting_prob_iterative` -- brute-force step iteration,
* :func:`qwhit.reduction.hitting_prob_direct` -- the linear-system closed form
  ``p = y^dagger (I - M (x) M*)^{-1} (psi0 (x) psi0*)``,
* the same system solved iteratively (CGNR or Neumann series),
* :func:`qwhit.hhl.q_hitting_prob` -- a state-vector simulation of HHL.
"""

from qwhit.errors import BudgetError, NotConvergedError, QwhitError
from qwhit.walk import Coin, HitResult, InitialState, WalkSpec

__all__ = [
    "BudgetError",
    "Coin",
    "HitResult",
    "InitialState",
    "NotConvergedError",
    "QwhitError",
    "WalkSpec",
]

__version__ = "0.1.0"
