"""Vector fields of the circadian model family.

States are plain float arrays with fixed component order:

=============  =================  ============================
model          components         time
=============  =================  ============================
original       (M, P1, P2)        t
full           (M, P, P1)         t
rescaled       (M, P, P1)         tau = k_d t
layer          (M, P, P1)         tau
qssa/reduced   (M, P)             t
lienard        (x, y)             rescaled, see lienard_params
=============  =================  ============================

States outside the biological cone are evaluated normally; use
:func:`in_cone` to test membership.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from . import _kernels as kn
from .errors import DomainError, InvalidParameterError, SingularStateError
from .integrator import CompiledRHS
from .params import Params, ScaledParams, unscale

__all__ = [
    "COMPONENTS",
    "LienardParams",
    "in_cone",
    "lienard_params",
    "lienard_coordinates",
    "lienard_time_factor",
    "pack",
    "pack_scaled",
    "rhs_original",
    "rhs_full",
    "rhs_rescaled",
    "rhs_layer",
    "rhs_qssa",
    "rhs_reduced",
    "rhs_lienard",
]

COMPONENTS = {
    "original": ("M", "P1", "P2"),
    "full3d": ("M", "P", "P1"),
    "rescaled": ("M", "P", "P1"),
    "layer": ("M", "P", "P1"),
    "qssa": ("M", "P"),
    "reduced": ("M", "P"),
    "lienard": ("x", "y"),
}

_GUARD = 1e-300


@dataclass(frozen=True)
class LienardParams:
    a: float
    b1: float
    b2: float
    c: float
    delta: float
    v: float

    def __post_init__(self):
        for name, value in zip(("a", "b1", "b2", "c", "delta", "v"), astuple(self)):
            if not (np.isfinite(value) and value > 0):
                raise InvalidParameterError(f"Lienard parameter {name} must be positive, got {value!r}")


def pack(p: Params) -> np.ndarray:
    return np.array([p.nu_m, p.k_m, p.nu_p, p.k_1, p.k_2, p.k_3, p.P_c, p.J_p, p.k_a, p.k_d, p.r])


def pack_scaled(sp: ScaledParams) -> np.ndarray:
    return np.array([sp.eps, sp.K, sp.nu_m_t, sp.k_m_t, sp.nu_p_t, sp.k_1_t, sp.k_2_t,
                     sp.k_3_t, sp.P_c, sp.J_p, sp.k_d])


def _state(s, n):
    y = np.asarray(s, dtype=float)
    if y.shape != (n,):
        raise ValueError(f"expected a state with {n} components, got shape {y.shape}")
    return y


def in_cone(s, tol: float = 0.0) -> bool:
    """Membership of ``(M, P, P1)`` in ``{M >= 0, P >= P1 >= 0}`` up to ``tol``."""
    M, P, P1 = _state(s, 3)
    return bool(M >= -tol and P1 >= -tol and P - P1 >= -tol)


def rhs_original(s, p: Params) -> np.ndarray:
    """``d(M, P1, P2)/dt`` in monomer/dimer coordinates (any ratio ``r``)."""
    y = _state(s, 3)
    if abs(p.J_p + y[1] + p.r * y[2]) < _GUARD:
        raise SingularStateError("J_p + P1 + r P2 vanishes")
    return kn.original_kernel(y, pack(p))


def rhs_full(s, p: Params) -> np.ndarray:
    """``d(M, P, P1)/dt`` with total protein ``P = P1 + 2 P2``."""
    y = _state(s, 3)
    if abs(p.J_p + y[1]) < _GUARD:
        raise SingularStateError("J_p + P vanishes")
    return kn.full_kernel(y, pack(p))


def rhs_rescaled(s, sp: ScaledParams) -> np.ndarray:
    """Fast-time field; ``k_d * rhs_rescaled(s, scale(p, eps)) == rhs_full(s, p)``."""
    y = _state(s, 3)
    if abs(sp.J_p + y[1]) < _GUARD:
        raise SingularStateError("J_p + P vanishes")
    return kn.rescaled_kernel(y, pack_scaled(sp))


def rhs_layer(s, sp: ScaledParams) -> np.ndarray:
    """Layer problem: ``M`` and ``P`` frozen, ``P1' = -2K P1^2 - P1 + P``."""
    return kn.layer_kernel(_state(s, 3), pack_scaled(sp))


def _check_reduced_domain(y, J_p):
    if y[1] < 0:
        raise DomainError(f"reduced models need P >= 0, got P={y[1]!r}")
    if abs(J_p + y[1]) < _GUARD:
        raise SingularStateError("J_p + P vanishes")


def rhs_qssa(s, p: Params) -> np.ndarray:
    """Quasi-steady-state planar model with ``P1 = h(P)``."""
    y = _state(s, 2)
    _check_reduced_domain(y, p.J_p)
    return kn.qssa_kernel(y, pack(p))


def rhs_reduced(s, sp: ScaledParams, order: int = 1) -> np.ndarray:
    """Reduced planar field on the slow manifold, physical time units.

    ``order=0`` is exactly :func:`rhs_qssa` at ``unscale(sp)``; ``order=1``
    adds the terms linear in ``eps`` generated by ``q1``. Terms of order
    ``eps**2`` are dropped.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    y = _state(s, 2)
    p = unscale(sp)
    _check_reduced_domain(y, p.J_p)
    base = kn.qssa_kernel(y, pack(p))
    if order == 0:
        return base
    return base + kn.reduced_correction(y, pack(p), pack_scaled(sp))


def lienard_params(p: Params) -> LienardParams:
    """Coefficients of the Lienard-like planar form, taken verbatim.

    Note that ``b1`` carries ``k_2`` and ``b2`` carries ``k_1``; see
    :func:`lienard_coordinates` for the transform that pairs them the other
    way round.
    """
    K = p.k_a / p.k_d
    return LienardParams(
        a=8.0 * p.J_p * K,
        b1=8.0 * p.k_2 * K / p.k_3,
        b2=8.0 * p.k_1 * K / p.k_3,
        c=256.0 * (K * p.P_c) ** 2,
        delta=p.k_m / p.k_3,
        v=2048.0 * p.nu_m * p.nu_p * p.P_c**2 * K**3 / (p.k_3 * p.k_m),
    )


def pack_lienard(lp: LienardParams) -> np.ndarray:
    return np.array(astuple(lp), dtype=float)


def rhs_lienard(s, lp: LienardParams) -> np.ndarray:
    y = _state(s, 2)
    if abs(y[0] ** 2 + 2.0 * y[0] + lp.a) < _GUARD:
        raise SingularStateError("x^2 + 2x + a vanishes")
    return kn.lienard_kernel(y, pack_lienard(lp))


def lienard_coordinates(M, P, p: Params):
    """Candidate change of variables from ``(M, P)`` to Lienard ``(x, y)``.

    ``x = 4K h(P)`` so that ``x^2 + 2x = 8KP``, and
    ``y = (8K nu_p / k_3) M + delta (x^2 + 2x)``. Combined with the time change
    ``ds = k_3 dt / (2 (x + 1))`` this maps the QSSA field onto the Lienard form
    with ``k_2`` multiplying ``x^2`` and ``k_1`` multiplying ``2x``.
    """
    K = p.k_a / p.k_d
    P = np.asarray(P, dtype=float)
    x = 4.0 * K * kn.h_array(P, K)
    y = 8.0 * K * p.nu_p / p.k_3 * np.asarray(M, dtype=float) + p.k_m / p.k_3 * (x * x + 2.0 * x)
    return x, y


def lienard_time_factor(x, p: Params):
    """``dt/ds`` for the candidate time change, ``2 (x + 1) / k_3``."""
    return 2.0 * (np.asarray(x, dtype=float) + 1.0) / p.k_3


# -- compiled fields for the integrator -------------------------------------

def original_field(p: Params) -> CompiledRHS:
    return CompiledRHS(kn.original_kernel, pack(p), COMPONENTS["original"])


def full_field(p: Params) -> CompiledRHS:
    return CompiledRHS(kn.full_kernel, pack(p), COMPONENTS["full3d"])


def rescaled_field(sp: ScaledParams) -> CompiledRHS:
    return CompiledRHS(kn.rescaled_kernel, pack_scaled(sp), COMPONENTS["rescaled"])


def layer_field(sp: ScaledParams) -> CompiledRHS:
    return CompiledRHS(kn.layer_kernel, pack_scaled(sp), COMPONENTS["layer"])


def qssa_field(p: Params) -> CompiledRHS:
    return CompiledRHS(kn.qssa_kernel, pack(p), COMPONENTS["qssa"])


def reduced_field(sp: ScaledParams, order: int = 1, fast_time: bool = False) -> CompiledRHS:
    """Reduced field of the given order; ``fast_time`` divides it by ``k_d``."""
    p = unscale(sp)
    if order == 0:
        kernel = kn.qssa_fast_kernel if fast_time else kn.qssa_kernel
        return CompiledRHS(kernel, pack(p), COMPONENTS["reduced"])
    if order != 1:
        raise ValueError("order must be 0 or 1")
    kernel = kn.reduced1_fast_kernel if fast_time else kn.reduced1_kernel
    both = np.concatenate([pack(p), pack_scaled(sp)])
    return CompiledRHS(kernel, both, COMPONENTS["reduced"])


def lienard_field(lp: LienardParams) -> CompiledRHS:
    return CompiledRHS(kn.lienard_kernel, pack_lienard(lp), COMPONENTS["lienard"])
