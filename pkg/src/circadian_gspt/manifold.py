"""Critical and slow manifolds of the fast dimerization subsystem.

The fast variable ``P1`` relaxes to the stable root ``h(P)`` of
``2K P1^2 + P1 - P = 0``. For ``eps > 0`` the attracting invariant graph is
``P1 = h(P) + eps q1(M, P) + O(eps^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kn
from .errors import DomainError, InvalidParameterError
from .models import pack_scaled, rhs_rescaled
from .params import Params, ScaledParams

__all__ = [
    "ManifoldDomain",
    "h",
    "dh_dP",
    "h_closed_form",
    "q1",
    "q_slow",
    "mu",
    "invariance_defect",
    "distance_to_manifold",
    "distance_along",
    "layer_rhs_fast_component",
    "normal_rate_bound",
]


@dataclass(frozen=True)
class ManifoldDomain:
    """Compact piece of the critical manifold over ``[-rho1, M_max] x [-rho1, P_max]``."""

    rho1: float
    M_max: float
    P_max: float
    K: float

    def __post_init__(self):
        if not 0 < self.rho1 < 1.0 / (8.0 * self.K):
            raise InvalidParameterError("rho1 must lie in (0, 1/(8K))")

    @property
    def lower(self) -> float:
        return -self.rho1

    @classmethod
    def for_params(cls, p: Params, rho1: float | None = None) -> "ManifoldDomain":
        K = p.k_a / p.k_d
        if rho1 is None:
            rho1 = min(1.0 / (16.0 * K), 0.01)
        return cls(rho1=rho1, M_max=p.M_bound + rho1, P_max=p.P_bound + rho1, K=K)

    def contains(self, M: float, P: float) -> bool:
        return self.lower <= M <= self.M_max and self.lower <= P <= self.P_max


def _check_branch(P, K):
    P = np.asarray(P, dtype=float)
    if np.any(1.0 + 8.0 * K * P < 0):
        raise DomainError("1 + 8KP < 0: outside the real branch of h")
    return P


def h(P, K):
    """Critical manifold ``P1 = h(P)``, the nonnegative root of ``2K x^2 + x = P``.

    Evaluated as ``2P / (sqrt(1 + 8KP) + 1)``, which equals
    ``(sqrt(1 + 8KP) - 1) / (4K)`` but keeps full precision when ``8KP`` is small.
    Accepts scalars or arrays.
    """
    P = _check_branch(P, K)
    out = kn.h_array(P, K)
    return float(out) if out.ndim == 0 else out


def h_closed_form(P, K):
    """``(sqrt(1 + 8KP) - 1) / (4K)`` as written; cancels badly for small ``8KP``."""
    P = _check_branch(P, K)
    out = (np.sqrt(1.0 + 8.0 * K * P) - 1.0) / (4.0 * K)
    return float(out) if out.ndim == 0 else out


def dh_dP(P, K):
    P = _check_branch(P, K)
    out = 1.0 / np.sqrt(1.0 + 8.0 * K * P)
    return float(out) if out.ndim == 0 else out


def mu(P, K):
    """Nonzero eigenvalue ``-sqrt(1 + 8KP)`` of the layer problem on ``P1 = h(P)``."""
    P = _check_branch(P, K)
    out = -np.sqrt(1.0 + 8.0 * K * P)
    return float(out) if out.ndim == 0 else out


def q1(M, P, sp: ScaledParams):
    """First-order slow-manifold coefficient.

    Both terms carry a factor ``P``; the first is linear in ``M``.
    """
    _check_branch(P, sp.K)
    out = np.asarray(kn.q1_array(M, P, pack_scaled(sp)))
    return float(out) if out.ndim == 0 else out


def q_slow(M, P, sp: ScaledParams, order: int = 1):
    """Truncated slow-manifold graph: ``h`` for order 0, ``h + eps q1`` for order 1."""
    if order == 0:
        return h(P, sp.K)
    if order == 1:
        return h(P, sp.K) + sp.eps * q1(M, P, sp)
    raise ValueError("order must be 0 or 1")


def _fd_step(x):
    return 1e-6 * max(1.0, abs(x))


def invariance_defect(M: float, P: float, sp: ScaledParams, order: int = 1) -> float:
    """Residual of the invariance equation on the truncated graph.

    Returns ``F3 - dq/dM F1 - dq/dP F2`` where ``F`` is the fast-time field at
    ``(M, P, q_slow(M, P))``. ``dh/dP`` is analytic; derivatives of ``q1`` use
    central differences.
    """
    P1 = q_slow(M, P, sp, order)
    F = rhs_rescaled([M, P, P1], sp)
    dq_dM = 0.0
    dq_dP = dh_dP(P, sp.K)
    if order == 1 and sp.eps != 0.0:
        hm = _fd_step(M)
        dq_dM = sp.eps * (q1(M + hm, P, sp) - q1(M - hm, P, sp)) / (2.0 * hm)
        hp = min(_fd_step(P), P) if P > 0 else 0.0
        if hp > 0:
            dq1_dP = (q1(M, P + hp, sp) - q1(M, P - hp, sp)) / (2.0 * hp)
        else:
            hp = _fd_step(P)
            dq1_dP = (q1(M, P + hp, sp) - q1(M, P, sp)) / hp
        dq_dP += sp.eps * dq1_dP
    return float(F[2] - dq_dM * F[0] - dq_dP * F[1])


def distance_to_manifold(s, sp: ScaledParams, order: int = 0) -> float:
    """``|P1 - q_slow(M, P)|`` for a state ``(M, P, P1)``."""
    M, P, P1 = (float(v) for v in s)
    return abs(P1 - q_slow(M, P, sp, order))


def distance_along(states: np.ndarray, sp: ScaledParams, order: int = 0) -> np.ndarray:
    """Vectorized :func:`distance_to_manifold` for an ``(n, 3)`` state array."""
    M, P, P1 = states[:, 0], states[:, 1], states[:, 2]
    return np.abs(P1 - q_slow(M, P, sp, order))


def layer_rhs_fast_component(P1, P, K):
    """``-2K P1^2 - P1 + P``, the only nonzero layer component."""
    return -2.0 * K * P1 * P1 - P1 + P


def normal_rate_bound(P_values, K) -> float:
    """Smallest ``|mu|`` over the given ``P`` values."""
    return float(np.min(np.sqrt(1.0 + 8.0 * K * np.asarray(P_values, dtype=float))))
