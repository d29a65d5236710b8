"""Explicit Runge-Kutta integration with step control, dense output and events.

Two methods are available:

* ``rk45_adaptive``: Dormand-Prince 5(4) with PI step-size control and the
  usual fourth-order continuous extension for output and event location.
* ``rk4_fixed``: classical fourth-order Runge-Kutta with constant step
  ``h_init`` and cubic Hermite output.

The stepping loop is written once in plain Python. When the right-hand side
is a :class:`CompiledRHS` the loop is compiled with numba and the kernel is
called without interpreter overhead; any other callable runs the same loop
in pure Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import (
    EventRefinementError,
    MaxStepsError,
    NonFiniteStateError,
    StepFloorError,
)

__all__ = [
    "CompiledRHS",
    "EventSpec",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "integrate_rescaled",
]

METHODS = ("rk4_fixed", "rk45_adaptive")
DIRECTIONS = {"up": 1, "down": -1, "both": 0}

_T_END, _EVENT, _STEP_FLOOR, _MAX_STEPS, _NON_FINITE, _REFINE_FAIL = range(6)
_STATUS_NAMES = ("t_end", "event", "step_floor", "max_steps", "non_finite", "event_refinement")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``h_init``, ``h_min`` and ``h_max`` may be left as ``None``; they are then
    derived from the integration interval: ``h_min = 1e-12 * span``,
    ``h_max = span`` and an automatic initial step for the adaptive method.
    ``rk4_fixed`` requires ``h_init``.
    """

    method: str = "rk45_adaptive"
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: Optional[float] = None
    h_min: Optional[float] = None
    h_max: Optional[float] = None
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        for name in ("h_init", "h_min", "h_max"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        lo = self.h_min if self.h_min is not None else 0.0
        hi = self.h_max if self.h_max is not None else math.inf
        if self.h_init is not None and not lo <= self.h_init <= hi:
            raise ValueError("require h_min <= h_init <= h_max")
        if lo > hi:
            raise ValueError("require h_min <= h_max")
        if self.method == "rk4_fixed" and self.h_init is None:
            raise ValueError("rk4_fixed needs an explicit h_init")

    def resolved(self, span: float) -> tuple[float, float, float]:
        """Return ``(h_init, h_min, h_max)`` for an interval of length ``span``.

        ``h_init = 0`` signals the automatic initial-step heuristic.
        """
        h_min = self.h_min if self.h_min is not None else 1e-12 * span
        h_max = self.h_max if self.h_max is not None else span
        h_init = self.h_init if self.h_init is not None else 0.0
        return h_init, h_min, h_max


@dataclass(frozen=True)
class EventSpec:
    """Affine section ``coefficients . state + offset = 0``.

    ``direction`` selects crossings where the surface value increases
    (``"up"``), decreases (``"down"``) or either.
    """

    coefficients: tuple
    offset: float = 0.0
    direction: str = "both"
    refine_tol: float = 1e-12

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 1 or not np.any(coef != 0.0):
            raise ValueError("event surface must have a nonzero coefficient vector")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {tuple(DIRECTIONS)}")
        if not self.refine_tol > 0:
            raise ValueError("refine_tol must be positive")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in coef))

    def value(self, state) -> float:
        return float(np.dot(self.coefficients, state) + self.offset)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    steps_taken: int
    rejected_steps: int
    terminated_by: str
    time_unit: str = "t"
    component_names: tuple = field(default=())

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def component(self, name: str) -> np.ndarray:
        return self.states[:, self.component_names.index(name)]


@dataclass(frozen=True)
class CompiledRHS:
    """A numba-compiled autonomous field ``kernel(y, args) -> dy/dt``."""

    kernel: Callable
    args: np.ndarray
    names: tuple = ()

    def __call__(self, state) -> np.ndarray:
        return self.kernel(np.asarray(state, dtype=float), self.args)


# ---------------------------------------------------------------------------
# Dormand-Prince tableau
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0
)
D1, D3, D4, D5, D6, D7 = (
    -12715105075.0 / 11282082432.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
)


@njit(cache=True)
def _all_finite(v):
    for x in v:
        if not math.isfinite(x):
            return False
    return True


@njit(cache=True)
def _dense(c0, c1, c2, c3, c4, theta):
    return c0 + theta * (c1 + (1.0 - theta) * (c2 + theta * (c3 + (1.0 - theta) * c4)))


@njit(cache=True)
def _grow(buf, n):
    if n < buf.shape[0]:
        return buf
    new = np.empty((2 * buf.shape[0], buf.shape[1]))
    new[: buf.shape[0]] = buf
    return new


@njit(cache=True)
def _grow1(buf, n):
    if n < buf.shape[0]:
        return buf
    new = np.empty(2 * buf.shape[0])
    new[: buf.shape[0]] = buf
    return new


def _run(f, args, y0, t0, t_end, method, rtol, atol, h_init, h_min, h_max, max_steps,
         out_dt, ev_coef, ev_offset, ev_dir, ev_tol, use_event):
    n = y0.shape[0]
    fixed = method == 0
    if out_dt > 0.0:
        n_grid = int(math.floor((t_end - t0) / out_dt * (1.0 + 1e-12) + 1e-9)) + 1
        cap = n_grid + 2
    else:
        n_grid = 0
        cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, n))
    times[0] = t0
    states[0] = y0
    n_out = 1
    next_k = 1

    y = y0.copy()
    t = t0
    k1 = f(y, args)
    steps = 0
    rejected = 0
    if not (_all_finite(k1) and _all_finite(y)):
        return _NON_FINITE, times, states, n_out, steps, rejected

    if fixed:
        h = h_init
    elif h_init > 0.0:
        h = h_init
    else:
        # automatic initial step (Hairer, Norsett & Wanner, Sec. II.4)
        sc = atol + np.abs(y) * rtol
        d0 = math.sqrt(np.mean((y / sc) ** 2))
        d1 = math.sqrt(np.mean((k1 / sc) ** 2))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, h_max, t_end - t0)
        f1 = f(y + h0 * k1, args)
        d2 = math.sqrt(np.mean(((f1 - k1) / sc) ** 2)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        h = min(100.0 * h0, h1, h_max, t_end - t0)
    h = min(h, h_max)
    err_old = 1e-4
    last_rejected = False
    armed = False
    g_old = 0.0
    if use_event:
        g_old = np.dot(ev_coef, y) + ev_offset

    while t < t_end:
        if steps >= max_steps:
            return _MAX_STEPS, times, states, n_out, steps, rejected
        h_try = min(h, t_end - t)
        last = h_try >= t_end - t
        if fixed:
            k2 = f(y + 0.5 * h_try * k1, args)
            k3 = f(y + 0.5 * h_try * k2, args)
            k4 = f(y + h_try * k3, args)
            y_new = y + h_try / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            k7 = f(y_new, args)
            if not (_all_finite(y_new) and _all_finite(k7)):
                return _NON_FINITE, times, states, n_out, steps, rejected
            ydiff = y_new - y
            # cubic Hermite in the same nested form as the DP5 extension
            c0 = y
            c1 = ydiff
            c2 = h_try * k1 - ydiff
            c3 = ydiff - h_try * k7 - c2
            c4 = np.zeros(n)
        else:
            k2 = f(y + h_try * (A21 * k1), args)
            k3 = f(y + h_try * (A31 * k1 + A32 * k2), args)
            k4 = f(y + h_try * (A41 * k1 + A42 * k2 + A43 * k3), args)
            k5 = f(y + h_try * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), args)
            k6 = f(y + h_try * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), args)
            y_new = y + h_try * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            k7 = f(y_new, args)
            err_vec = h_try * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            if _all_finite(y_new) and _all_finite(k7):
                err = 0.0
                for i in range(n):
                    sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
                    r = abs(err_vec[i]) / sc
                    if r > err:
                        err = r
                finite = True
            else:
                err = math.inf
                finite = False
            if err > 1.0:
                rejected += 1
                if finite:
                    factor = max(0.2, 0.9 * err ** -0.2)
                else:
                    factor = 0.2
                h = h_try * factor
                last_rejected = True
                if h < h_min:
                    if finite:
                        return _STEP_FLOOR, times, states, n_out, steps, rejected
                    return _NON_FINITE, times, states, n_out, steps, rejected
                continue
            factor = 0.9 * max(err, 1e-10) ** -0.17 * err_old ** 0.04
            factor = min(10.0, max(0.2, factor))
            if last_rejected:
                factor = min(factor, 1.0)
            err_old = max(err, 1e-4)
            ydiff = y_new - y
            c0 = y
            c1 = ydiff
            c2 = h_try * k1 - ydiff
            c3 = ydiff - h_try * k7 - c2
            c4 = h_try * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            h = min(h_max, h_try * factor)
            last_rejected = False

        steps += 1
        t_new = t_end if last else t + h_try

        # event location on the interpolant
        event_hit = False
        t_ev = 0.0
        y_ev = y_new
        if use_event:
            g_new = np.dot(ev_coef, y_new) + ev_offset
            if armed:
                crossed = False
                if ev_dir >= 0 and g_old < 0.0 <= g_new:
                    crossed = True
                if ev_dir <= 0 and g_old > 0.0 >= g_new:
                    crossed = True
                if crossed:
                    lo = 0.0
                    hi = 1.0
                    g_lo = g_old
                    it = 0
                    while (hi - lo) * h_try > ev_tol:
                        mid = 0.5 * (lo + hi)
                        g_mid = np.dot(ev_coef, _dense(c0, c1, c2, c3, c4, mid)) + ev_offset
                        if (g_lo < 0.0) == (g_mid < 0.0) and g_mid != 0.0:
                            lo = mid
                            g_lo = g_mid
                        else:
                            hi = mid
                        it += 1
                        if it > 200:
                            return _REFINE_FAIL, times, states, n_out, steps, rejected
                    theta = hi
                    t_ev = t + theta * h_try
                    y_ev = _dense(c0, c1, c2, c3, c4, theta)
                    event_hit = True
            g_old = g_new
            armed = True

        t_stop = t_ev if event_hit else t_new
        if out_dt > 0.0:
            while next_k < n_grid:
                tk = min(t0 + next_k * out_dt, t_end)
                if tk > t_stop:
                    break
                theta = (tk - t) / h_try
                if theta > 1.0:
                    theta = 1.0
                times[n_out] = tk
                states[n_out] = _dense(c0, c1, c2, c3, c4, theta)
                n_out += 1
                next_k += 1
        else:
            if not event_hit:
                times = _grow1(times, n_out)
                states = _grow(states, n_out)
                times[n_out] = t_new
                states[n_out] = y_new
                n_out += 1

        if event_hit:
            times = _grow1(times, n_out)
            states = _grow(states, n_out)
            if times[n_out - 1] < t_ev:
                times[n_out] = t_ev
                states[n_out] = y_ev
                n_out += 1
            else:
                states[n_out - 1] = y_ev
            return _EVENT, times, states, n_out, steps, rejected

        t = t_new
        y = y_new
        k1 = k7
        if fixed:
            h = h_init

    if out_dt > 0.0 and times[n_out - 1] < t_end - 1e-9 * out_dt:
        times[n_out] = t_end
        states[n_out] = y
        n_out += 1
    return _T_END, times, states, n_out, steps, rejected


_run_compiled = njit(_run)


def integrate(
    rhs,
    s0,
    t0: float,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    out_dt: Optional[float] = None,
    event: Optional[EventSpec] = None,
    time_unit: str = "t",
) -> Trajectory:
    """Integrate the autonomous system ``ds/dt = rhs(s)`` from ``t0`` to ``t_end``.

    Args:
        rhs: a :class:`CompiledRHS` (fast path) or any callable mapping a state
            array to its derivative.
        s0: initial state.
        t0, t_end: integration interval, ``t_end > t0``.
        cfg: method and tolerances.
        out_dt: if given, states are reported at ``t0 + k * out_dt`` by dense
            interpolation (plus ``t_end`` when it is not on the grid);
            otherwise every accepted step is reported.
        event: optional section; integration stops at the first crossing in
            the requested direction after the first step, located by bisection.

    Returns:
        The trajectory; ``terminated_by`` is ``"t_end"`` or ``"event"``.

    Raises:
        StepFloorError, MaxStepsError, NonFiniteStateError, EventRefinementError:
            with the partial trajectory attached.
    """
    y0 = np.array(s0, dtype=float).reshape(-1)
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")
    if out_dt is not None and not out_dt > 0:
        raise ValueError("out_dt must be positive")
    h_init, h_min, h_max = cfg.resolved(t_end - t0)

    if event is not None:
        coef = np.asarray(event.coefficients, dtype=float)
        if coef.shape != y0.shape:
            raise ValueError("event coefficients must match the state dimension")
        ev = (coef, float(event.offset), DIRECTIONS[event.direction], float(event.refine_tol), True)
    else:
        ev = (np.zeros_like(y0), 0.0, 0, 1.0, False)

    if isinstance(rhs, CompiledRHS):
        runner, f, args = _run_compiled, rhs.kernel, np.asarray(rhs.args, dtype=float)
        names = rhs.names
    else:
        runner, args, names = _run, np.zeros(0), ()

        def f(y, _args):
            return np.asarray(rhs(y), dtype=float)

    method = METHODS.index(cfg.method)
    # overflow in trial stages is caught by the finiteness checks
    with np.errstate(over="ignore", invalid="ignore"):
        status, times, states, n_out, steps, rejected = runner(
            f, args, y0, float(t0), float(t_end), method, float(cfg.rtol), float(cfg.atol),
            float(h_init), float(h_min), float(h_max), int(cfg.max_steps),
            float(out_dt) if out_dt is not None else 0.0, *ev,
        )
    traj = Trajectory(
        times=times[:n_out].copy(),
        states=states[:n_out].copy(),
        steps_taken=int(steps),
        rejected_steps=int(rejected),
        terminated_by=_STATUS_NAMES[status],
        time_unit=time_unit,
        component_names=tuple(names),
    )
    if status == _STEP_FLOOR:
        raise StepFloorError(f"step size fell below h_min={h_min:g} near t={traj.final_time:g}", traj)
    if status == _MAX_STEPS:
        raise MaxStepsError(f"exceeded max_steps={cfg.max_steps}", traj)
    if status == _NON_FINITE:
        raise NonFiniteStateError(f"non-finite state near t={traj.final_time:g}", traj)
    if status == _REFINE_FAIL:
        raise EventRefinementError("event bisection did not converge", traj)
    return traj


def integrate_rescaled(
    s0,
    sp,
    t0: float,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    out_dt: Optional[float] = None,
    event: Optional[EventSpec] = None,
    physical_time: bool = False,
) -> Trajectory:
    """Integrate the fast-time system for ``(M, P, P1)``.

    ``t0``, ``t_end`` and ``out_dt`` are in fast time ``tau = k_d t``. With
    ``physical_time=True`` the returned timestamps are divided by ``k_d``.
    """
    from .models import rescaled_field

    traj = integrate(rescaled_field(sp), s0, t0, t_end, cfg, out_dt, event, time_unit="tau")
    if physical_time:
        traj = replace(traj, times=traj.times / sp.k_d, time_unit="t")
    return traj
