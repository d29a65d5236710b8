"""Numerical checks of invariance, attraction and slow-manifold reduction.

Every check returns an immutable report; failures are recorded in the report
rather than raised, except for genuine numerical breakdowns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import qmc

from .errors import ConvergenceError, FitWindowError, InvalidParameterError
from .integrator import EventSpec, IntegratorConfig, Trajectory, integrate
from .manifold import dh_dP, distance_along, h, mu, q_slow
from .models import (
    LienardParams,
    full_field,
    lienard_coordinates,
    lienard_field,
    lienard_params,
    lienard_time_factor,
    qssa_field,
    reduced_field,
    rescaled_field,
    rhs_lienard,
    rhs_qssa,
)
from .params import Params, ScaledParams, unscale

__all__ = [
    "Region",
    "FaceResult",
    "InvarianceReport",
    "EnvelopeReport",
    "ComparisonReport",
    "CycleReport",
    "DecayReport",
    "AttractionReport",
    "ManifoldApproachReport",
    "LienardReport",
    "check_invariance",
    "envelope_case",
    "envelopes",
    "gronwall_envelopes",
    "locate_slow_graph",
    "decay_rate",
    "compare_models",
    "fit_order",
    "find_limit_cycle",
    "check_attraction",
    "manifold_approach",
    "lienard_experiment",
]

REFERENCE_CFG = IntegratorConfig(rtol=1e-10, atol=1e-12)


# ---------------------------------------------------------------------------
# positive invariance

@dataclass(frozen=True)
class Region:
    """A polyhedral region given by its faces.

    Each face is ``(name, normal, sampler)``: ``normal`` points into the region
    and ``sampler(u)`` maps points of the unit square to points on the face.
    Use the constructors rather than building faces by hand.
    """

    kind: str
    bounds: tuple
    faces: tuple = field(repr=False)

    @classmethod
    def cone_A_plus(cls, window: float = 1e3) -> "Region":
        """``{M >= 0, P >= P1 >= 0}`` in ``(M, P, P1)``, truncated at ``window``."""
        w = float(window)
        faces = (
            ("M=0", (1.0, 0.0, 0.0), lambda u: (0.0, w * u[0], w * u[0] * u[1])),
            ("P1=0", (0.0, 0.0, 1.0), lambda u: (w * u[0], w * u[1], 0.0)),
            ("P=P1", (0.0, 1.0, -1.0), lambda u: (w * u[0], w * u[1], w * u[1])),
        )
        return cls("cone_A_plus", ((0.0, w), (0.0, w), (0.0, w)), faces)

    @classmethod
    def box_A1_plus(cls, p: Params) -> "Region":
        """``{0 <= M <= nu_m/k_m, 0 <= P1 <= P <= nu_m nu_p/(k_3 k_m)}``."""
        Mb, Pb = p.M_bound, p.P_bound
        faces = (
            ("M=0", (1.0, 0.0, 0.0), lambda u: (0.0, Pb * u[0], Pb * u[0] * u[1])),
            ("M=M_max", (-1.0, 0.0, 0.0), lambda u: (Mb, Pb * u[0], Pb * u[0] * u[1])),
            ("P1=0", (0.0, 0.0, 1.0), lambda u: (Mb * u[0], Pb * u[1], 0.0)),
            ("P=P1", (0.0, 1.0, -1.0), lambda u: (Mb * u[0], Pb * u[1], Pb * u[1])),
            ("P=P_max", (0.0, -1.0, 0.0), lambda u: (Mb * u[0], Pb, Pb * u[1])),
        )
        return cls("box_A1_plus", ((0.0, Mb), (0.0, Pb), (0.0, Pb)), faces)

    @classmethod
    def cone_R3_plus(cls, window: float = 1e3) -> "Region":
        """Nonnegative octant in ``(M, P1, P2)``."""
        w = float(window)
        faces = (
            ("M=0", (1.0, 0.0, 0.0), lambda u: (0.0, w * u[0], w * u[1])),
            ("P1=0", (0.0, 1.0, 0.0), lambda u: (w * u[0], 0.0, w * u[1])),
            ("P2=0", (0.0, 0.0, 1.0), lambda u: (w * u[0], w * u[1], 0.0)),
        )
        return cls("cone_R3_plus", ((0.0, w),) * 3, faces)

    @classmethod
    def custom_box(cls, bounds: Sequence[tuple], window: float = 1e3) -> "Region":
        """Axis-aligned box; infinite bounds are truncated at ``+-window``."""
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        n = len(bounds)
        finite = [(max(lo, -window), min(hi, window)) for lo, hi in bounds]
        for lo, hi in finite:
            if not lo < hi:
                raise InvalidParameterError(f"inconsistent bounds {bounds}")
        faces = []
        for i, (lo, hi) in enumerate(bounds):
            others = [j for j in range(n) if j != i]
            for value, sign, label in ((lo, 1.0, "min"), (hi, -1.0, "max")):
                if not math.isfinite(value):
                    continue
                normal = tuple(sign if j == i else 0.0 for j in range(n))

                def sampler(u, i=i, value=value, others=others):
                    x = [0.0] * n
                    x[i] = value
                    for k, j in enumerate(others):
                        a, b = finite[j]
                        x[j] = a + (b - a) * u[k]
                    return tuple(x)

                faces.append((f"x{i}={label}", normal, sampler))
        return cls("custom_box", bounds, tuple(faces))


@dataclass(frozen=True)
class FaceResult:
    name: str
    n_samples: int
    worst_value: float
    worst_point: tuple
    passed: bool


@dataclass(frozen=True)
class InvarianceReport:
    region: str
    margin: float
    faces: tuple

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.faces)

    @property
    def worst_value(self) -> float:
        return min(f.worst_value for f in self.faces)


def check_invariance(region: Region, rhs: Callable, n_samples: int = 10_000,
                     margin: float = 1e-12, seed: int = 0) -> InvarianceReport:
    """Sample every face quasi-randomly and test the inward normal component.

    A face passes when ``normal . rhs(x) >= -margin`` at every sample.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    results = []
    for k, (name, normal, sampler) in enumerate(region.faces):
        nrm = np.asarray(normal)
        dim_free = len(nrm) - 1
        u = qmc.Halton(d=dim_free, scramble=True, seed=seed + k).random(n_samples)
        worst, worst_pt = math.inf, None
        for row in u:
            x = np.asarray(sampler(row), dtype=float)
            val = float(nrm @ np.asarray(rhs(x)))
            if val < worst:
                worst, worst_pt = val, tuple(float(c) for c in x)
        results.append(FaceResult(name, n_samples, worst, worst_pt, worst >= -margin))
    return InvarianceReport(region.kind, margin, tuple(results))


# ---------------------------------------------------------------------------
# Gronwall envelopes

CASES = ("km_gt_k3_nondeg", "km_gt_k3_deg", "k3_gt_km", "k3_eq_km")


@dataclass(frozen=True)
class EnvelopeReport:
    case_id: str
    sample_times: np.ndarray
    bound_values: dict
    simulated: dict
    violations: int
    max_violation: float
    flags: tuple = ()

    @property
    def passed(self) -> bool:
        return self.violations == 0


def envelope_case(p: Params) -> str:
    """Branch of the envelope formulas; exact comparisons on the given values."""
    if p.k_m > p.k_3:
        return "km_gt_k3_deg" if p.k_3 + p.k_d == p.k_m else "km_gt_k3_nondeg"
    if p.k_3 > p.k_m:
        return "k3_gt_km"
    return "k3_eq_km"


def envelopes(s0, p: Params, t) -> dict:
    """Analytic upper bounds for ``M``, ``P`` and ``P1`` at times ``t``."""
    t = np.asarray(t, dtype=float)
    M0, P0, P10 = (float(v) for v in s0)
    nm, km, npp, k3, kd = p.nu_m, p.k_m, p.nu_p, p.k_3, p.k_d
    e = np.exp
    M = M0 * e(-km * t) + nm / km
    if k3 != km:
        P = P0 * e(-k3 * t) + npp * M0 / (k3 - km) * (e(-km * t) - e(-k3 * t)) + nm * npp / (k3 * km)
    else:
        P = P0 * e(-k3 * t) + npp * M0 * t * e(-k3 * t) + npp * nm / k3**2
    case = envelope_case(p)
    if case == "km_gt_k3_nondeg":
        P1 = (P10 * e(-(k3 + kd) * t)
              + npp * M0 / (k3 + kd - km) * (e(-km * t) - e(-(k3 + kd) * t))
              + (P0 + npp * M0 / (km - k3)) * e(-k3 * t)
              + nm * npp / (k3 * km))
    elif case == "km_gt_k3_deg":
        P1 = (P10 * e(-km * t) + npp * M0 * t * e(-km * t)
              + (P0 + npp * M0 / kd) * e(-k3 * t)
              + nm * npp / (k3 * km))
    elif case == "k3_gt_km":
        P1 = (P10 * e(-(k3 + kd) * t) + npp * M0 / (k3 - km) * e(-km * t)
              + P0 * e(-k3 * t) + nm * npp / (k3 * km))
    else:
        P1 = (P10 * e(-(k3 + kd) * t)
              + (P0 + npp * M0 / kd * (kd * t + e(-kd * t) + 1.0)) * e(-k3 * t)
              + nm * npp / k3**2)
    return {"M": M, "P": P, "P1": P1}


def _sample_trajectory(field_, s0, times, cfg) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise ValueError("times must be strictly increasing")
    if np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
        tr = integrate(field_, s0, times[0], times[-1], cfg, out_dt=steps[0])
        return tr.states[: len(times)]
    out = [np.asarray(s0, dtype=float)]
    for a, b in zip(times[:-1], times[1:]):
        out.append(integrate(field_, out[-1], a, b, cfg).final_state)
    return np.array(out)


def gronwall_envelopes(s0, p: Params, times, cfg: IntegratorConfig = REFERENCE_CFG,
                       envelope_scale: float = 1.0, rel_tol: float = 1e-9) -> EnvelopeReport:
    """Simulate the full model and compare with the analytic envelopes.

    ``envelope_scale`` multiplies the bounds; it exists to exercise the failure
    path and is 1 for real checks. A sample violates its bound when it exceeds
    ``bound + rel_tol * max(1, |bound|)``.
    """
    if not (s0[0] >= 0 and s0[1] >= s0[2] >= 0):
        raise ValueError("initial state must lie in the cone M >= 0, P >= P1 >= 0")
    times = np.asarray(times, dtype=float)
    states = _sample_trajectory(full_field(p), s0, times, cfg)
    bounds = {k: envelope_scale * v for k, v in envelopes(s0, p, times - times[0]).items()}
    sim = {"M": states[:, 0], "P": states[:, 1], "P1": states[:, 2]}
    violations, worst = 0, -math.inf
    flags = []
    for key in ("M", "P", "P1"):
        excess = sim[key] - bounds[key]
        tol = rel_tol * np.maximum(1.0, np.abs(bounds[key]))
        bad = excess > tol
        violations += int(bad.sum())
        worst = max(worst, float(excess.max()))
        if bad.any() and key == "P1" and envelope_case(p) == "k3_eq_km":
            flags.append("P1 envelope for k3 = km violated: check the transcribed bound")
    return EnvelopeReport(envelope_case(p), times, bounds, sim, violations, worst, tuple(flags))


# ---------------------------------------------------------------------------
# slow manifold

def locate_slow_graph(sp: ScaledParams, grid, cfg: IntegratorConfig = IntegratorConfig(rtol=1e-13, atol=1e-16),
                      window_efolds: float = 10.0, tol: float = 1e-13, max_passes: int = 8) -> np.ndarray:
    """Empirical attracting graph ``P1*(M, P)`` at each grid point.

    The fast-time system is integrated over ``window_efolds / |mu(P)|`` so the
    fast transient dies out and the orbit lands on the attracting manifold.
    The slow variables drift during the window, so each pass starts where the
    previous pass says the orbit must start to land on ``(M, P)``; the small
    remaining offset in ``P`` is removed with the layer slope ``dh/dP`` and
    passes repeat until successive estimates agree to ``tol``.

    Near ``P = 0`` the slow drift ``eps k_1_t / J_p`` is as fast as the normal
    rate, so the required start can leave the real branch of ``h`` or the
    passes stop contracting. There a single forward window is used and the
    endpoint is shifted by ``h(P) - h(P_end)``; that estimate is only
    ``O(eps)`` accurate.

    Raises:
        ConvergenceError: if even the fallback estimate is not finite.
    """
    field_ = rescaled_field(sp)
    floor = -min(1.0 / (16.0 * sp.K), 0.01)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    out = np.empty(len(grid))
    for i, (M, P) in enumerate(grid):
        T = window_efolds / abs(mu(P, sp.K))
        Ms, Ps, offset = M, P, 0.0  # offset = estimate - h(P)
        prev, est = math.inf, math.nan
        for _ in range(max_passes):
            if Ps < floor:
                break
            end = integrate(field_, [Ms, Ps, h(Ps, sp.K) + offset], 0.0, T, cfg).final_state
            dM, dP = end[0] - M, end[1] - P
            est = end[2] - dh_dP(P, sp.K) * dP
            if abs(est - prev) <= tol * max(1.0, abs(est)):
                break
            prev, offset = est, est - h(P, sp.K)
            Ms, Ps = Ms - dM, Ps - dP
            est = math.nan
        if math.isnan(est):
            end = integrate(field_, [M, P, h(P, sp.K)], 0.0, T, cfg).final_state
            est = end[2] + h(P, sp.K) - h(max(end[1], floor), sp.K)
        if not math.isfinite(est):
            raise ConvergenceError(f"slow graph at (M, P) = ({M}, {P}) is not finite")
        out[i] = est
    return out


@dataclass(frozen=True)
class DecayReport:
    fitted_rate: float
    predicted_rate: float
    P_land: float
    n_samples: int
    window: tuple

    @property
    def relative_error(self) -> float:
        return abs(self.fitted_rate - self.predicted_rate) / self.predicted_rate


def decay_rate(s0, sp: ScaledParams, cfg: IntegratorConfig = IntegratorConfig(rtol=1e-12, atol=1e-15),
               efolds: float = 30.0, linear_fraction: float = 0.02, floor_factor: float = 1e3,
               min_samples: int = 10) -> DecayReport:
    """Fit the exponential approach to the slow manifold.

    Distances to the first-order graph are sampled over ``efolds`` fast
    e-folds. Only samples in the linear regime (``2K d < linear_fraction *
    |mu|``) and above ``floor_factor`` times the residual level are fitted.
    The prediction is ``|mu(P_land)|`` with ``P_land`` the value of ``P`` at
    the end of the fitted window.

    Raises:
        FitWindowError: with fewer than ``min_samples`` usable samples.
    """
    s0 = np.asarray(s0, dtype=float)
    rate0 = abs(mu(s0[1], sp.K))
    T = efolds / rate0
    tr = integrate(rescaled_field(sp), s0, 0.0, T, cfg, out_dt=T / 2000.0)
    order = 1 if sp.eps > 0 else 0
    d = distance_along(tr.states, sp, order)
    tail = d[int(0.9 * len(d)):]
    floor = max(float(tail.max()), cfg.atol)
    rates = np.sqrt(1.0 + 8.0 * sp.K * np.maximum(tr.states[:, 1], 0.0))
    usable = (d > floor_factor * floor) & (2.0 * sp.K * d < linear_fraction * rates)
    idx = np.flatnonzero(usable)
    if len(idx) < min_samples:
        raise FitWindowError(f"only {len(idx)} usable samples before the distance hits its floor")
    # keep the first contiguous run so a late bump cannot bias the fit
    breaks = np.flatnonzero(np.diff(idx) > 1)
    if len(breaks):
        idx = idx[: breaks[0] + 1]
    if len(idx) < min_samples:
        raise FitWindowError(f"only {len(idx)} contiguous usable samples")
    slope = np.polyfit(tr.times[idx], np.log(d[idx]), 1)[0]
    P_land = float(tr.states[idx[-1], 1])
    return DecayReport(float(-slope), float(abs(mu(P_land, sp.K))), P_land, len(idx),
                       (float(tr.times[idx[0]]), float(tr.times[idx[-1]])))


@dataclass(frozen=True)
class ManifoldApproachReport:
    initial: tuple
    threshold: float
    entry_time: float
    stays: bool
    max_after_entry: float
    time_unit: str = "tau"

    @property
    def passed(self) -> bool:
        return self.stays and math.isfinite(self.entry_time)


def manifold_approach(s0, sp: ScaledParams, tau_end: float, threshold: Optional[float] = None,
                      order: int = 0, cfg: IntegratorConfig = IntegratorConfig(rtol=1e-9, atol=1e-12),
                      out_dt: float = 0.01) -> ManifoldApproachReport:
    """Time for the orbit to come within ``threshold`` (default ``10 eps``) of
    the order-``order`` graph, and whether it stays there until ``tau_end``."""
    if threshold is None:
        threshold = 10.0 * sp.eps
    tr = integrate(rescaled_field(sp), s0, 0.0, tau_end, cfg, out_dt=out_dt)
    d = distance_along(tr.states, sp, order)
    inside = d < threshold
    if not inside.any():
        return ManifoldApproachReport(tuple(s0), threshold, math.inf, False, float(d.max()))
    # entry = first sample after which the orbit never leaves again
    outside = np.flatnonzero(~inside)
    first = 0 if len(outside) == 0 else outside[-1] + 1
    first_in = int(np.argmax(inside))
    stays = first == first_in and first < len(d)
    entry = float(tr.times[first_in])
    return ManifoldApproachReport(tuple(float(v) for v in s0), threshold, entry, bool(stays),
                                  float(d[first_in:].max()))


# ---------------------------------------------------------------------------
# reduced versus full dynamics

@dataclass(frozen=True)
class ComparisonReport:
    eps_values: tuple
    sup_errors: tuple
    fitted_order: float
    window: tuple
    order: int


def fit_order(eps_values, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(eps)``."""
    eps = np.asarray(eps_values, dtype=float)
    err = np.asarray(errors, dtype=float)
    if len(eps) < 2:
        raise ValueError("need at least two eps values")
    if len(np.unique(eps)) < 2:
        raise ValueError("degenerate fit: eps values must not all coincide")
    if np.any(err <= 0) or np.any(eps <= 0):
        raise ValueError("eps values and errors must be positive")
    return float(np.polyfit(np.log(eps), np.log(err), 1)[0])


def compare_models(s0_3d, sp: ScaledParams, order: int = 1, window=(0.01, 0.75),
                   eps_list=(3e-4, 1.5e-4), cfg: IntegratorConfig = REFERENCE_CFG,
                   n_out: int = 2000) -> ComparisonReport:
    """Sup distance in ``(M, P)`` between the full and reduced models.

    The tilde rates of ``sp`` are kept and ``eps`` is swept over ``eps_list``.
    ``window`` is given in slow time ``sigma = eps * tau`` so every ``eps``
    covers the same stretch of slow dynamics. With ``k_d = 100`` and
    ``eps = 3e-4``, ``sigma = 0.03 t`` and the default window is roughly one
    oscillation, ``t`` in ``[0.33, 25]``. Longer windows pick up phase drift
    between the two cycles and the error grows with the window.

    The reduced model starts from the full model's ``(M, P)`` at ``T0``; the
    sup is taken over ``n_out`` equally spaced times in the window.

    Raises:
        ValueError: for a bad window, duplicate ``eps`` values, or ``T0``
            inside twenty fast e-folds.
    """
    T0, T1 = (float(w) for w in window)
    if not T1 > T0 > 0:
        raise ValueError("window must satisfy 0 < T0 < T1")
    if len(eps_list) < 2:
        raise ValueError("need at least two eps values")
    if len(set(float(e) for e in eps_list)) < len(eps_list):
        raise ValueError("degenerate fit: duplicate eps values")
    errors = []
    for eps in eps_list:
        spe = sp.with_eps(float(eps))
        tau0, tau1 = T0 / eps, T1 / eps
        # transient must be over: twenty fast e-folds at the weakest normal rate
        if tau0 < 20.0 / abs(mu(0.0, spe.K)):
            raise ValueError("T0 is inside the fast transient")
        head = integrate(rescaled_field(spe), s0_3d, 0.0, tau0, cfg)
        start = head.final_state
        dt = (tau1 - tau0) / n_out
        full = integrate(rescaled_field(spe), start, tau0, tau1, cfg, out_dt=dt)
        red = integrate(reduced_field(spe, order, fast_time=True), start[:2], tau0, tau1, cfg, out_dt=dt)
        n = min(len(full.times), len(red.times))
        diff = np.abs(full.states[:n, :2] - red.states[:n, :2]).max(axis=1)
        errors.append(float(diff.max()))
    return ComparisonReport(tuple(float(e) for e in eps_list), tuple(errors),
                            fit_order(eps_list, errors), (T0, T1), order)


# ---------------------------------------------------------------------------
# limit cycles

@dataclass(frozen=True)
class CycleReport:
    found: bool
    period: float
    amplitude: tuple
    section: EventSpec
    return_error: float
    crossing_times: tuple = ()
    crossing_states: tuple = ()


def _model_field(model: str, params):
    if model == "full3d":
        return full_field(params)
    if model == "qssa":
        return qssa_field(params)
    if model == "reduced":
        return reduced_field(params, 1)
    if model == "lienard":
        return lienard_field(params)
    if model == "rescaled":
        return rescaled_field(params)
    raise ValueError(f"unknown model {model!r}")


def find_limit_cycle(model: str, params, s0, section: EventSpec, t_max: float,
                     cfg: IntegratorConfig = REFERENCE_CFG, rel_tol: float = 1e-6,
                     min_amplitude: float = 1e-6, n_agree: int = 3) -> CycleReport:
    """Detect a periodic orbit from successive section crossings.

    The first half of ``[0, t_max]`` is discarded as transient. A cycle is
    reported when the last ``n_agree`` crossings agree to ``rel_tol`` relative
    and the orbit still moves (peak-to-peak above ``min_amplitude`` relative
    to the state scale between the last two crossings). Finding no cycle is a
    result, not an error.
    """
    field_ = _model_field(model, params)
    state = integrate(field_, s0, 0.0, 0.5 * t_max, cfg).final_state
    t = 0.5 * t_max
    times, states, segments = [], [], []
    while t < t_max:
        tr = integrate(field_, state, t, t_max, cfg, event=section)
        segments.append(tr.states)
        state, t = tr.final_state, tr.final_time
        if tr.terminated_by != "event":
            break
        times.append(t)
        states.append(state.copy())
    if len(times) < n_agree:
        return CycleReport(False, math.nan, (), section, math.nan, tuple(times), tuple(map(tuple, states)))
    pts = np.array(states[-n_agree:])
    scale = max(1e-300, float(np.abs(pts).max()))
    spread = float(np.abs(pts - pts[-1]).max()) / scale
    # segments[i] ends at crossing i, so the last full period is segments[len(times) - 1]
    last = segments[len(times) - 1]
    amplitude = tuple(float(v) for v in last.max(axis=0) - last.min(axis=0))
    moving = max(amplitude) > min_amplitude * scale
    found = spread <= rel_tol and moving
    period = float(np.mean(np.diff(times[-n_agree:])))
    return_error = float(np.linalg.norm(np.asarray(states[-1]) - np.asarray(states[-2])))
    return CycleReport(bool(found), period if found else math.nan, amplitude, section, return_error,
                       tuple(times), tuple(map(tuple, states)))


# ---------------------------------------------------------------------------
# attraction of the box A1+

@dataclass(frozen=True)
class AttractionReport:
    n_starts: int
    entry_times: tuple
    stayed: tuple
    inflate: float
    t_end: float

    @property
    def passed(self) -> bool:
        return all(self.stayed) and all(math.isfinite(t) for t in self.entry_times)


def random_cone_starts(n: int, upper: float = 100.0, seed: int = 0) -> np.ndarray:
    """Uniform starts in ``[0, upper]^2`` for ``(M, P)`` with ``P1`` uniform in ``[0, P]``."""
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.0, upper, n)
    P = rng.uniform(0.0, upper, n)
    P1 = P * rng.uniform(0.0, 1.0, n)
    return np.column_stack([M, P, P1])


def check_attraction(p: Params, n_starts: int = 100, seed: int = 0, upper: float = 100.0,
                     t_end: float = 500.0, inflate: float = 1e-6,
                     cfg: IntegratorConfig = IntegratorConfig(rtol=1e-6, atol=1e-9)) -> AttractionReport:
    """Random starts in the cone must enter the inflated box and stay in it.

    Membership is tested at every accepted integration step.
    """
    Mb, Pb = p.M_bound, p.P_bound
    entries, stayed = [], []
    for s0 in random_cone_starts(n_starts, upper, seed):
        tr = integrate(full_field(p), s0, 0.0, t_end, cfg)
        M, P, P1 = tr.states.T
        inside = ((M >= -inflate) & (M <= Mb + inflate) & (P1 >= -inflate)
                  & (P1 <= P + inflate) & (P <= Pb + inflate))
        if not inside.any():
            entries.append(math.inf)
            stayed.append(False)
            continue
        first = int(np.argmax(inside))
        entries.append(float(tr.times[first]))
        stayed.append(bool(inside[first:].all()))
    return AttractionReport(n_starts, tuple(entries), tuple(stayed), inflate, t_end)


# ---------------------------------------------------------------------------
# Lienard-like form

@dataclass(frozen=True)
class LienardReport:
    params: LienardParams
    swapped: LienardParams
    residual_verbatim: float
    residual_swapped: float
    verbatim_matches: bool
    swapped_matches: bool
    cycle_verbatim: Optional[CycleReport]
    cycle_swapped: Optional[CycleReport]
    qssa_period: float
    swapped_period_t: float

    def lines(self):
        lp = self.params
        yield f"lienard.a = {lp.a!r}"
        yield f"lienard.b1 = {lp.b1!r}"
        yield f"lienard.b2 = {lp.b2!r}"
        yield f"lienard.c = {lp.c!r}"
        yield f"lienard.delta = {lp.delta!r}"
        yield f"lienard.v = {lp.v!r}"
        yield f"transform.residual_verbatim = {self.residual_verbatim:.3e}"
        yield f"transform.residual_swapped = {self.residual_swapped:.3e}"
        yield f"transform.verbatim_b1_b2_consistent = {self.verbatim_matches}"
        yield f"transform.swapped_b1_b2_consistent = {self.swapped_matches}"
        for label, cyc in (("verbatim", self.cycle_verbatim), ("swapped", self.cycle_swapped)):
            if cyc is not None:
                yield f"cycle.{label}.found = {cyc.found}"
                yield f"cycle.{label}.period_s = {cyc.period!r}"
        yield f"cycle.qssa.period_t = {self.qssa_period!r}"
        yield f"cycle.swapped.period_t = {self.swapped_period_t!r}"


def _pushforward_residual(p: Params, lp: LienardParams, MP: np.ndarray) -> float:
    """Max relative mismatch between the QSSA field mapped through the
    candidate transform and the Lienard field."""
    K = p.k_a / p.k_d
    worst = 0.0
    for M, P in MP:
        x, y = lienard_coordinates(M, P, p)
        dM, dP = rhs_qssa([M, P], p)
        # x = 4K h(P): dx/dP = 4K h'(P); y = (8K nu_p/k_3) M + delta (x^2 + 2x)
        dx_dt = 4.0 * K * dh_dP(P, K) * dP
        dy_dt = 8.0 * K * p.nu_p / p.k_3 * dM + p.k_m / p.k_3 * (2.0 * x + 2.0) * dx_dt
        dt_ds = lienard_time_factor(x, p)
        mapped = np.array([dx_dt, dy_dt]) * dt_ds
        target = rhs_lienard([float(x), float(y)], lp)
        scale = np.abs(target).max() + np.abs(mapped).max()
        worst = max(worst, float(np.abs(mapped - target).max() / scale))
    return worst


def lienard_experiment(p: Params, n_points: int = 200, seed: int = 0, run_cycles: bool = True,
                       t_max_qssa: float = 600.0, match_tol: float = 1e-10) -> LienardReport:
    """Compare the QSSA model with the Lienard form under ``x = 4K h(P)``.

    The coefficients are used verbatim and with ``b1``/``b2`` exchanged; the
    report records which pairing the candidate transform reproduces and the
    limit-cycle periods found for each.
    """
    lp = lienard_params(p)
    swapped = LienardParams(lp.a, lp.b2, lp.b1, lp.c, lp.delta, lp.v)
    rng = np.random.default_rng(seed)
    MP = np.column_stack([rng.uniform(0.0, p.M_bound, n_points), rng.uniform(0.0, p.P_bound, n_points)])
    r_verb = _pushforward_residual(p, lp, MP)
    r_swap = _pushforward_residual(p, swapped, MP)

    cyc_v = cyc_s = None
    qssa_period = swapped_period_t = math.nan
    if run_cycles:
        M_sec = 1.0
        sec2 = EventSpec((1.0, 0.0), -M_sec, "up")
        qc = find_limit_cycle("qssa", p, [1.0, 1.0], sec2, t_max_qssa)
        qssa_period = qc.period
        # section on y through the QSSA section line at a representative P
        x0, y0 = lienard_coordinates(1.0, 1.0, p)
        secL = EventSpec((1.0, 0.0), -float(x0), "up")
        t_max_s = t_max_qssa * p.k_3 / (2.0 * (float(x0) + 1.0)) * 4.0
        start = [float(x0), float(y0)]
        cyc_v = _safe_cycle("lienard", lp, start, secL, t_max_s)
        cyc_s = _safe_cycle("lienard", swapped, start, secL, t_max_s)
        if cyc_s is not None and cyc_s.found:
            swapped_period_t = _physical_period(swapped, cyc_s, p)
    return LienardReport(lp, swapped, r_verb, r_swap, r_verb <= match_tol, r_swap <= match_tol,
                         cyc_v, cyc_s, qssa_period, swapped_period_t)


def _safe_cycle(model, params, s0, section, t_max):
    from .errors import IntegrationError

    try:
        return find_limit_cycle(model, params, s0, section, t_max)
    except IntegrationError:
        return None


def _physical_period(lp: LienardParams, cyc: CycleReport, p: Params) -> float:
    """Period in physical time: integrate ``dt/ds = 2 (x + 1) / k_3`` over one cycle."""
    t0 = cyc.crossing_times[-2]
    t1 = cyc.crossing_times[-1]
    tr = integrate(lienard_field(lp), cyc.crossing_states[-2], t0, t1, REFERENCE_CFG, out_dt=(t1 - t0) / 4000)
    factor = lienard_time_factor(tr.states[:, 0], p)
    return float(trapezoid(factor, tr.times))
