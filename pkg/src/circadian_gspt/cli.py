"""Command-line front end.

Scenarios are flat ``key = value`` files with at most one dot per key, e.g.::

    model = full3d
    params.k_m = 0.2
    integrator.rtol = 1e-9
    initial.M = 10

``--scenario figure2`` (the default) selects the built-in reference set (``FIGURE2``).
``--set key=value`` overrides are applied afterwards, last one wins.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from typing import Iterable

import numpy as np

from . import analysis as an
from .errors import CircadianError, ConvergenceError, IntegrationError, SingularStateError
from .integrator import EventSpec, IntegratorConfig, integrate
from .manifold import invariance_defect, mu, q1, h
from .models import (
    COMPONENTS,
    LienardParams,
    full_field,
    layer_field,
    lienard_field,
    lienard_params,
    original_field,
    qssa_field,
    reduced_field,
    rescaled_field,
    rhs_full,
    rhs_original,
)
from .params import Params, scale

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


FIGURE2_SCENARIO = {
    "model": "full3d",
    "t0": "0",
    "t_end": "200",
    "out_dt": "0.1",
    "seed": "0",
    "params.nu_m": "1",
    "params.k_m": "0.1",
    "params.nu_p": "0.5",
    "params.k_1": "10",
    "params.k_2": "0.03",
    "params.k_3": "0.1",
    "params.P_c": "0.1",
    "params.J_p": "0.05",
    "params.k_a": "20000",
    "params.k_d": "100",
    "params.r": "2",
    "scaling.eps_base": "3e-4",
    "initial_conditions": "10,10,2; 15,15,2; 20,20,2; 10,20,2; 20,10,2",
}

DEFAULTS = {
    "t0": "0",
    "seed": "0",
    "params.r": "2",
    "scaling.eps_base": "3e-4",
    "reduced.order": "1",
    "integrator.method": "rk45_adaptive",
    "integrator.rtol": "1e-8",
    "integrator.atol": "1e-10",
    "integrator.max_steps": "50000000",
    "invariance.n_samples": "10000",
    "invariance.window": "50",
    "invariance.margin": "1e-12",
    "envelopes.t_end": "200",
    "envelopes.dt": "0.5",
    "envelopes.scale": "1",
    "manifold.eps_list": "3e-4,1.5e-4",
    "manifold.grid_n": "10",
    "reduction.eps_list": "3e-4,1.5e-4",
    "reduction.order": "1",
    "reduction.window": "0.01,0.75",
    "reduction.max_error": "1e-2",
    "cycles.t_max": "600",
    "cycles.section_M": "1",
    "grid.M_min": "0",
    "grid.M_max": "10",
    "grid.n_M": "11",
    "grid.P_min": "0",
    "grid.P_max": "50",
    "grid.n_P": "51",
}

PARAM_KEYS = tuple(f.name for f in fields(Params))
LIENARD_KEYS = tuple(f.name for f in fields(LienardParams))
INTEGRATOR_KEYS = tuple(f.name for f in fields(IntegratorConfig))
SCALAR_KEYS = {"model", "t0", "t_end", "out_dt", "seed", "initial_conditions", "checks"}
SECTIONS = {
    "params": set(PARAM_KEYS),
    "scaling": {"eps_base", "eps"},
    "reduced": {"order"},
    "lienard": set(LIENARD_KEYS),
    "integrator": set(INTEGRATOR_KEYS),
    "initial": {"M", "P", "P1", "P2", "x", "y"},
    "invariance": {"n_samples", "window", "margin"},
    "envelopes": {"t_end", "dt", "scale"},
    "manifold": {"eps_list", "grid_n"},
    "reduction": {"eps_list", "order", "window", "max_error"},
    "cycles": {"t_max", "section_M"},
    "grid": {"M_min", "M_max", "n_M", "P_min", "P_max", "n_P"},
}
MODELS = ("original", "full3d", "rescaled", "layer", "qssa", "reduced", "lienard")
SUITES = ("invariance", "envelopes", "manifold", "reduction", "cycles")


# ---------------------------------------------------------------------------
# scenario handling

def parse_lines(lines: Iterable[str]) -> dict:
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        _check_key(key)
        out[key] = value
    return out


def _check_key(key: str):
    if key in SCALAR_KEYS:
        return
    if key.count(".") != 1:
        raise ConfigError(f"unknown key {key!r}")
    section, name = key.split(".")
    if name not in SECTIONS.get(section, ()):
        raise ConfigError(f"unknown key {key!r}")


def load_scenario(name_or_path: str, overrides=()) -> dict:
    raw = dict(DEFAULTS)
    if name_or_path == "figure2" and not os.path.exists(name_or_path):
        raw.update(FIGURE2_SCENARIO)
    else:
        try:
            with open(name_or_path, encoding="utf-8") as fh:
                raw.update(parse_lines(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {name_or_path!r}: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        _check_key(key)
        raw[key] = value
    return raw


def _float(raw, key) -> float:
    if key not in raw:
        raise ConfigError(f"missing key {key!r}")
    try:
        value = float(raw[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw[key]!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    return value


def _int(raw, key) -> int:
    value = _float(raw, key)
    if value != int(value):
        raise ConfigError(f"{key} must be an integer")
    return int(value)


def float_list(text: str, key: str = "list") -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{key}: values must be finite")
    return values


def eps_list(text: str, key: str = "eps-list") -> list:
    values = float_list(text, key)
    if len(values) < 2:
        raise ConfigError(f"{key}: need at least two eps values")
    if len(set(values)) < len(values):
        raise ConfigError(f"{key}: degenerate fit, eps values must be distinct")
    if min(values) <= 0:
        raise ConfigError(f"{key}: eps values must be positive")
    return values


@dataclass(frozen=True)
class Scenario:
    raw: dict

    @property
    def model(self) -> str:
        model = self.raw.get("model", "full3d")
        if model not in MODELS:
            raise ConfigError(f"unknown model {model!r}; expected one of {MODELS}")
        return model

    @property
    def params(self) -> Params:
        values = {k: _float(self.raw, f"params.{k}") for k in PARAM_KEYS}
        return Params(**values)

    @property
    def eps_base(self) -> float:
        return _float(self.raw, "scaling.eps_base")

    def scaled(self, eps=None):
        base = scale(self.params, self.eps_base)
        if eps is None:
            eps = _float(self.raw, "scaling.eps") if "scaling.eps" in self.raw else self.eps_base
        return base.with_eps(eps)

    @property
    def lienard(self) -> LienardParams:
        lp = lienard_params(self.params)
        over = {k: _float(self.raw, f"lienard.{k}") for k in LIENARD_KEYS if f"lienard.{k}" in self.raw}
        return LienardParams(**{**lp.__dict__, **over})

    @property
    def integrator(self) -> IntegratorConfig:
        kw = {}
        for k in INTEGRATOR_KEYS:
            key = f"integrator.{k}"
            if key not in self.raw:
                continue
            if k == "method":
                kw[k] = self.raw[key]
            elif k == "max_steps":
                kw[k] = _int(self.raw, key)
            else:
                kw[k] = _float(self.raw, key)
        try:
            return IntegratorConfig(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def seed(self) -> int:
        return _int(self.raw, "seed")

    def initial_conditions(self) -> list:
        text = self.raw.get("initial_conditions", "")
        out = []
        for chunk in text.split(";"):
            if chunk.strip():
                out.append(tuple(float_list(chunk, "initial_conditions")))
        return out

    def initial(self, names) -> np.ndarray:
        keys = [f"initial.{n}" for n in names]
        if any(k in self.raw for k in keys):
            return np.array([_float(self.raw, k) for k in keys])
        ics = self.initial_conditions()
        if ics and len(ics[0]) == len(names):
            return np.array(ics[0])
        if ics and len(names) == 2 and len(ics[0]) == 3 and names[0] == "M":
            return np.array(ics[0][:2])
        raise ConfigError(f"no initial state for components {names}")

    def get(self, key) -> float:
        return _float(self.raw, key)


# ---------------------------------------------------------------------------
# output helpers

def fmt(x) -> str:
    return f"{float(x):.16e}"


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, output):
    if output:
        write_atomic(output, text)
    else:
        sys.stdout.write(text)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# simulate

def build_field(sc: Scenario):
    """Return ``(field, component names, time column)`` for the scenario model."""
    model = sc.model
    if model == "original":
        return original_field(sc.params), COMPONENTS["original"], "t"
    if model == "full3d":
        return full_field(sc.params), COMPONENTS["full3d"], "t"
    if model == "rescaled":
        return rescaled_field(sc.scaled()), COMPONENTS["rescaled"], "tau"
    if model == "layer":
        return layer_field(sc.scaled()), COMPONENTS["layer"], "tau"
    if model == "qssa":
        return qssa_field(sc.params), COMPONENTS["qssa"], "t"
    if model == "reduced":
        order = _int(sc.raw, "reduced.order")
        return reduced_field(sc.scaled(), order), COMPONENTS["reduced"], "t"
    return lienard_field(sc.lienard), COMPONENTS["lienard"], "s"


def cmd_simulate(sc: Scenario, output) -> int:
    field_, names, tcol = build_field(sc)
    s0 = sc.initial(names)
    t0, t_end = sc.get("t0"), sc.get("t_end")
    out_dt = sc.get("out_dt") if "out_dt" in sc.raw else None
    if not t_end > t0:
        raise ConfigError("t_end must exceed t0")
    if out_dt is not None and not out_dt > 0:
        raise ConfigError("out_dt must be positive")
    tr = integrate(field_, s0, t0, t_end, sc.integrator, out_dt=out_dt, time_unit=tcol)
    rows = np.column_stack([tr.times, tr.states])
    emit(csv_text((tcol,) + tuple(names), rows), output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

@dataclass(frozen=True)
class Finding:
    check: str
    status: str  # pass, fail or info
    value: float
    tol: float
    note: str = ""

    def line(self) -> str:
        text = f"check={self.check} status={self.status} worst={fmt(self.value)} tol={fmt(self.tol)}"
        return text + (f" note={self.note}" if self.note else "")


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def suite_invariance(sc: Scenario):
    p = sc.params
    n = _int(sc.raw, "invariance.n_samples")
    margin = sc.get("invariance.margin")
    window = sc.get("invariance.window")
    seed = sc.seed
    runs = (
        ("A_plus", an.Region.cone_A_plus(window), lambda x: rhs_full(x, p)),
        ("A1_plus", an.Region.box_A1_plus(p), lambda x: rhs_full(x, p)),
        ("R3_plus", an.Region.cone_R3_plus(window), lambda x: rhs_original(x, p)),
    )
    for label, region, rhs in runs:
        rep = an.check_invariance(region, rhs, n, margin, seed)
        for face in rep.faces:
            yield Finding(f"invariance.{label}.{face.name}", _status(face.passed), face.worst_value, -margin)


def suite_envelopes(sc: Scenario):
    p = sc.params
    times = np.arange(0.0, sc.get("envelopes.t_end") + 1e-9, sc.get("envelopes.dt"))
    scale_ = sc.get("envelopes.scale")
    for k, s0 in enumerate(sc.initial_conditions()):
        rep = an.gronwall_envelopes(s0, p, times, envelope_scale=scale_)
        note = rep.case_id + ("; " + "; ".join(rep.flags) if rep.flags else "")
        yield Finding(f"envelopes.ic{k}", _status(rep.passed), rep.max_violation, 0.0,
                      note.replace(" ", "_"))


def _grid(n):
    M = np.linspace(0.0, 10.0, n)
    P = np.linspace(0.1, 50.0, n)
    return [(m, q) for m in M for q in P]


def suite_manifold(sc: Scenario):
    e1, e2 = eps_list(sc.raw["manifold.eps_list"], "manifold.eps_list")[:2]
    grid = _grid(_int(sc.raw, "manifold.grid_n"))
    sp1, sp2 = sc.scaled(e1), sc.scaled(e2)
    expected = (e1 / e2) ** 2
    ratios = []
    for M, P in grid:
        d1 = abs(invariance_defect(M, P, sp1, 1))
        d2 = abs(invariance_defect(M, P, sp2, 1))
        ratios.append(d1 / d2 if d2 > 0 else math.inf)
    ratios = np.array(ratios)
    lo, hi = 0.75 * expected, 1.25 * expected
    worst = ratios[np.argmax(np.abs(ratios - expected))]
    yield Finding("manifold.defect_ratio", _status(bool(np.all((ratios >= lo) & (ratios <= hi)))),
                  worst, hi, f"range=[{lo:g},{hi:g}]")

    sp = sc.scaled()
    gap = min(abs(invariance_defect(M, P, sp, 0)) - abs(invariance_defect(M, P, sp, 1)) for M, P in grid)
    yield Finding("manifold.defect_ordering", _status(gap > 0), gap, 0.0)

    ics = sc.initial_conditions()
    if ics:
        try:
            dr = an.decay_rate(ics[0], sp)
            yield Finding("manifold.decay_rate", _status(dr.relative_error <= 0.1), dr.relative_error, 0.1)
        except CircadianError as exc:
            yield Finding("manifold.decay_rate", "fail", math.nan, 0.1, type(exc).__name__)
    tau_end = sc.get("t_end") * sp.k_d
    for k, s0 in enumerate(ics):
        rep = an.manifold_approach(s0, sp, tau_end)
        yield Finding(f"manifold.approach.ic{k}", _status(rep.passed), rep.max_after_entry, rep.threshold,
                      f"entry_tau={rep.entry_time:.6g}")


def suite_reduction(sc: Scenario):
    eps_values = eps_list(sc.raw["reduction.eps_list"], "reduction.eps_list")
    window = float_list(sc.raw["reduction.window"], "reduction.window")
    order = _int(sc.raw, "reduction.order")
    ics = sc.initial_conditions()
    s0 = ics[0] if ics else tuple(sc.initial(COMPONENTS["full3d"]))
    rep = an.compare_models(s0, sc.scaled(), order, tuple(window), eps_values)
    for e, err in zip(rep.eps_values, rep.sup_errors):
        yield Finding(f"reduction.sup_error.eps={e:g}", "info", err, 0.0)
    yield Finding("reduction.fitted_order", _status(rep.fitted_order >= 1.0), rep.fitted_order, 1.0)
    max_err = sc.get("reduction.max_error")
    yield Finding("reduction.sup_error_first", _status(rep.sup_errors[0] < max_err), rep.sup_errors[0], max_err)


def suite_cycles(sc: Scenario):
    p, sp = sc.params, sc.scaled()
    t_max = sc.get("cycles.t_max")
    Msec = sc.get("cycles.section_M")
    s3 = EventSpec((1.0, 0.0, 0.0), -Msec, "up")
    s2 = EventSpec((1.0, 0.0), -Msec, "up")
    ics = sc.initial_conditions()
    s0 = ics[0] if ics else tuple(sc.initial(COMPONENTS["full3d"]))
    full = an.find_limit_cycle("full3d", p, s0, s3, t_max)
    qssa = an.find_limit_cycle("qssa", p, s0[:2], s2, t_max)
    red = an.find_limit_cycle("reduced", sp, s0[:2], s2, t_max)
    for name, rep in (("full3d", full), ("qssa", qssa), ("reduced", red)):
        yield Finding(f"cycles.{name}.period", "info", rep.period, 0.0, f"found={rep.found}")
    tol = 5.0 * sp.eps
    if full.found and red.found:
        rel = abs(red.period - full.period) / full.period
        yield Finding("cycles.reduced_vs_full_period", _status(rel <= tol), rel, tol)
    if full.found and qssa.found:
        rel = abs(qssa.period - full.period) / full.period
        yield Finding("cycles.qssa_vs_full_period", "info", rel, tol, "O(eps)_gap,_not_asserted")
    lp = lienard_params(p)
    rep = an.lienard_experiment(p)
    K = p.k_a / p.k_d
    exact = (lp.a == 8.0 * p.J_p * K and lp.b1 == 8.0 * p.k_2 * K / p.k_3
             and lp.b2 == 8.0 * p.k_1 * K / p.k_3 and lp.delta == p.k_m / p.k_3)
    yield Finding("cycles.lienard_params", _status(exact), 0.0, 0.0)
    yield Finding("cycles.lienard_transform_verbatim", "info", rep.residual_verbatim, 1e-10,
                  f"consistent={rep.verbatim_matches}")
    yield Finding("cycles.lienard_transform_swapped", "info", rep.residual_swapped, 1e-10,
                  f"consistent={rep.swapped_matches}")
    if rep.cycle_swapped is not None and rep.cycle_swapped.found and math.isfinite(rep.qssa_period):
        rel = abs(rep.swapped_period_t - rep.qssa_period) / rep.qssa_period
        yield Finding("cycles.lienard_swapped_vs_qssa_period", "info", rel, 1e-6)


SUITE_FUNCS = {
    "invariance": suite_invariance,
    "envelopes": suite_envelopes,
    "manifold": suite_manifold,
    "reduction": suite_reduction,
    "cycles": suite_cycles,
}


def suite_names(sc: Scenario, suite) -> tuple:
    """``--suite`` wins; otherwise the scenario's ``checks`` list, else all."""
    if suite is None:
        suite = sc.raw.get("checks", "all")
    names = [n.strip() for n in suite.split(",") if n.strip()]
    if names == ["all"]:
        return SUITES
    for n in names:
        if n not in SUITES:
            raise ConfigError(f"unknown suite {n!r}; expected one of {SUITES + ('all',)}")
    return tuple(names)


def cmd_verify(sc: Scenario, suite, output) -> int:
    names = suite_names(sc, suite)
    findings = []
    for name in names:
        findings.extend(SUITE_FUNCS[name](sc))
    failed = sum(f.status == "fail" for f in findings)
    lines = [f.line() for f in findings]
    lines.append(f"summary checks={sum(f.status != 'info' for f in findings)} failed={failed}")
    emit("\n".join(lines) + "\n", output)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# compare and manifold-eval

def cmd_compare(sc: Scenario, eps_text, output) -> int:
    values = eps_list(eps_text if eps_text is not None else sc.raw["reduction.eps_list"])
    window = float_list(sc.raw["reduction.window"], "reduction.window")
    order = _int(sc.raw, "reduction.order")
    ics = sc.initial_conditions()
    s0 = ics[0] if ics else tuple(sc.initial(COMPONENTS["full3d"]))
    rep = an.compare_models(s0, sc.scaled(), order, tuple(window), values)
    lines = ["eps,sup_error"]
    lines += [f"{fmt(e)},{fmt(err)}" for e, err in zip(rep.eps_values, rep.sup_errors)]
    lines.append(f"fitted_order,{fmt(rep.fitted_order)}")
    emit("\n".join(lines) + "\n", output)
    return EXIT_OK


def cmd_manifold_eval(sc: Scenario, output) -> int:
    sp = sc.scaled()
    Ms = np.linspace(sc.get("grid.M_min"), sc.get("grid.M_max"), _int(sc.raw, "grid.n_M"))
    Ps = np.linspace(sc.get("grid.P_min"), sc.get("grid.P_max"), _int(sc.raw, "grid.n_P"))
    M, P = (a.ravel() for a in np.meshgrid(Ms, Ps, indexing="ij"))
    rows = np.column_stack([M, P, h(P, sp.K), q1(M, P, sp), mu(P, sp.K)])
    emit(csv_text(("M", "P", "h", "q1", "mu"), rows), output)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circadian-gspt", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "compare", "manifold-eval"):
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", default="figure2", help="scenario file or 'figure2'")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
        sp.add_argument("--output", default=None, help="output path (stdout if omitted)")
        sp.add_argument("--seed", type=int, default=None)
        if name == "verify":
            sp.add_argument("--suite", default=None, help=f"one of {', '.join(SUITES)} or all")
        if name == "compare":
            sp.add_argument("--eps-list", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        raw = load_scenario(args.scenario, args.overrides)
        if args.seed is not None:
            raw["seed"] = str(args.seed)
        sc = Scenario(raw)
        sc.model  # validates the name early
        if args.command == "simulate":
            return cmd_simulate(sc, args.output)
        if args.command == "verify":
            return cmd_verify(sc, args.suite, args.output)
        if args.command == "compare":
            return cmd_compare(sc, args.eps_list, args.output)
        return cmd_manifold_eval(sc, args.output)
    except (IntegrationError, ConvergenceError, SingularStateError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, CircadianError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
