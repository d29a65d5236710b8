"""Physical and scaled parameter sets for the dimerization circadian model.

The physical model has no small parameter. ``eps`` enters only when the rate
constants are split as ``rate = eps * k_d * tilde_rate`` and ``k_a = K * k_d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import InvalidParameterError

__all__ = [
    "InvalidParameterError",
    "Params",
    "ScaledParams",
    "scale",
    "unscale",
    "FIGURE2",
    "FIGURE2_EPS",
    "FIGURE2_INITIAL_CONDITIONS",
    "figure2_scaled",
]


def _require_positive(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise InvalidParameterError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class Params:
    """Rate constants of the three-variable mRNA / monomer / dimer model.

    Attributes:
        nu_m: maximal mRNA synthesis rate.
        k_m: mRNA degradation rate.
        nu_p: translation rate of mRNA into monomer.
        k_1: maximal monomer phosphorylation rate.
        k_2: maximal dimer phosphorylation rate.
        k_3: first-order protein degradation rate.
        P_c: dimer level at half-maximal transcription.
        J_p: Michaelis constant of the kinase.
        k_a: dimerization rate.
        k_d: dimer dissociation rate.
        r: ratio of enzyme-substrate dissociation constants.
    """

    nu_m: float
    k_m: float
    nu_p: float
    k_1: float
    k_2: float
    k_3: float
    P_c: float
    J_p: float
    k_a: float
    k_d: float
    r: float = 2.0

    def __post_init__(self):
        _require_positive(self, [f.name for f in fields(self)])
        if not self.k_1 > self.k_2:
            raise InvalidParameterError(
                f"monomer phosphorylation must be faster than dimer: k_1={self.k_1} <= k_2={self.k_2}"
            )

    @property
    def K(self) -> float:
        """Dimerization equilibrium constant ``k_a / k_d``."""
        return self.k_a / self.k_d

    @property
    def M_bound(self) -> float:
        """Upper mRNA bound ``nu_m / k_m`` of the attracting box."""
        return self.nu_m / self.k_m

    @property
    def P_bound(self) -> float:
        """Upper total-protein bound ``nu_m nu_p / (k_3 k_m)`` of the attracting box."""
        return self.nu_m * self.nu_p / (self.k_3 * self.k_m)

    def replace(self, **changes) -> "Params":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return Params(**values)


@dataclass(frozen=True)
class ScaledParams:
    """Parameters in the fast-time formulation.

    ``P_c``, ``J_p`` and ``k_d`` carry through unchanged; ``eps`` may be 0 only
    to describe the layer problem, which is never converted back to ``Params``.
    """

    eps: float
    K: float
    nu_m_t: float
    k_m_t: float
    nu_p_t: float
    k_1_t: float
    k_2_t: float
    k_3_t: float
    P_c: float
    J_p: float
    k_d: float
    r: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise InvalidParameterError(f"eps must be finite and nonnegative, got {self.eps!r}")
        names = [f.name for f in fields(self) if f.name != "eps"]
        _require_positive(self, names)
        if not self.k_1_t > self.k_2_t:
            raise InvalidParameterError("scaled rates must satisfy k_1_t > k_2_t")

    def with_eps(self, eps: float) -> "ScaledParams":
        """Same tilde rates, different small parameter (a singular-perturbation sweep)."""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values["eps"] = eps
        return ScaledParams(**values)

    def replace(self, **changes) -> "ScaledParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ScaledParams(**values)


def scale(p: Params, eps: float) -> ScaledParams:
    """Split the physical rates as ``rate = eps * k_d * tilde_rate``.

    Raises:
        InvalidParameterError: if ``eps`` is not a finite positive number.
    """
    if not (isinstance(eps, (int, float)) and math.isfinite(eps) and eps > 0):
        raise InvalidParameterError(f"eps must be a finite positive number, got {eps!r}")
    unit = eps * p.k_d
    return ScaledParams(
        eps=eps,
        K=p.k_a / p.k_d,
        nu_m_t=p.nu_m / unit,
        k_m_t=p.k_m / unit,
        nu_p_t=p.nu_p / unit,
        k_1_t=p.k_1 / unit,
        k_2_t=p.k_2 / unit,
        k_3_t=p.k_3 / unit,
        P_c=p.P_c,
        J_p=p.J_p,
        k_d=p.k_d,
        r=p.r,
    )


def unscale(s: ScaledParams) -> Params:
    """Inverse of :func:`scale`."""
    if s.eps <= 0:
        raise InvalidParameterError("eps = 0 describes the layer problem and has no physical counterpart")
    unit = s.eps * s.k_d
    return Params(
        nu_m=unit * s.nu_m_t,
        k_m=unit * s.k_m_t,
        nu_p=unit * s.nu_p_t,
        k_1=unit * s.k_1_t,
        k_2=unit * s.k_2_t,
        k_3=unit * s.k_3_t,
        P_c=s.P_c,
        J_p=s.J_p,
        k_a=s.K * s.k_d,
        k_d=s.k_d,
        r=s.r,
    )


# Standard Drosophila PER/TIM rate constants with fast dimerization (k_a = 20000, k_d = 100).
FIGURE2 = Params(
    nu_m=1.0,
    k_m=0.1,
    nu_p=0.5,
    k_1=10.0,
    k_2=0.03,
    k_3=0.1,
    P_c=0.1,
    J_p=0.05,
    k_a=20000.0,
    k_d=100.0,
    r=2.0,
)
FIGURE2_EPS = 0.0003
FIGURE2_INITIAL_CONDITIONS = (
    (10.0, 10.0, 2.0),
    (15.0, 15.0, 2.0),
    (20.0, 20.0, 2.0),
    (10.0, 20.0, 2.0),
    (20.0, 10.0, 2.0),
)


def figure2_scaled(eps: float = FIGURE2_EPS) -> ScaledParams:
    """Tilde rates of ``FIGURE2`` (fixed at ``eps = 3e-4``) with the requested ``eps``.

    Sweeping ``eps`` here keeps the tilde rates fixed, which is the sweep under
    which the asymptotic orders in ``eps`` are observable.
    """
    return scale(FIGURE2, FIGURE2_EPS).with_eps(eps)
