"""Slow-fast analysis of a dimerization circadian oscillator.

Submodules: :mod:`params`, :mod:`models`, :mod:`manifold`, :mod:`integrator`,
:mod:`analysis` and :mod:`cli`.
"""

from .errors import (
    CircadianError,
    ConvergenceError,
    DomainError,
    FitWindowError,
    IntegrationError,
    InvalidParameterError,
    SingularStateError,
)
from .integrator import EventSpec, IntegratorConfig, Trajectory, integrate, integrate_rescaled
from .manifold import ManifoldDomain, distance_to_manifold, h, invariance_defect, mu, q1, q_slow
from .models import (
    LienardParams,
    lienard_params,
    rhs_full,
    rhs_layer,
    rhs_lienard,
    rhs_original,
    rhs_qssa,
    rhs_reduced,
    rhs_rescaled,
)
from .params import FIGURE2, FIGURE2_EPS, FIGURE2_INITIAL_CONDITIONS, Params, ScaledParams, figure2_scaled, scale, unscale

__version__ = "0.1.0"
