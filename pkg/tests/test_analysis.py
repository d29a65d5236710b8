import math

import numpy as np
import pytest

from circadian_gspt import analysis as an
from circadian_gspt.errors import FitWindowError, InvalidParameterError
from circadian_gspt.integrator import EventSpec, IntegratorConfig, integrate
from circadian_gspt.manifold import distance_along, h, q_slow
from circadian_gspt.models import qssa_field, reduced_field, rhs_full, rhs_original
from circadian_gspt.params import FIGURE2, figure2_scaled, unscale

SEC3 = EventSpec((1.0, 0.0, 0.0), -1.0, "up")
SEC2 = EventSpec((1.0, 0.0), -1.0, "up")


# -- invariance ---------------------------------------------------------------

def full(x):
    return rhs_full(x, FIGURE2)


def test_cone_faces_pass():
    rep = an.check_invariance(an.Region.cone_A_plus(50.0), full, 2000)
    assert rep.passed and [f.name for f in rep.faces] == ["M=0", "P1=0", "P=P1"]
    assert all(f.worst_point is not None for f in rep.faces)


def test_box_faces_pass_and_M_face_sign():
    rep = an.check_invariance(an.Region.box_A1_plus(FIGURE2), full, 2000)
    assert rep.passed and len(rep.faces) == 5
    # at M = nu_m/k_m the inward component is -dM/dt, which is >= 0
    m_face = next(f for f in rep.faces if f.name == "M=M_max")
    assert m_face.worst_value >= 0.0


def test_original_octant_passes():
    rep = an.check_invariance(an.Region.cone_R3_plus(), lambda x: rhs_original(x, FIGURE2), 1000)
    assert rep.passed


def test_failure_is_reported_not_raised():
    rep = an.check_invariance(an.Region.custom_box([(0, 1), (0, 1)]), lambda x: np.array([-1.0, 0.0]), 50)
    assert not rep.passed
    bad = [f for f in rep.faces if not f.passed]
    assert [f.name for f in bad] == ["x0=min"]
    assert bad[0].worst_value == -1.0


def test_custom_box_unbounded_and_invalid():
    r = an.Region.custom_box([(0, math.inf), (0, 5), (-1, 1)])
    assert len(r.faces) == 5
    with pytest.raises(InvalidParameterError):
        an.Region.custom_box([(1, 0)])
    with pytest.raises(ValueError):
        an.check_invariance(r, lambda x: x, 0)


def test_invariance_deterministic():
    a = an.check_invariance(an.Region.cone_A_plus(50.0), full, 500, seed=3)
    b = an.check_invariance(an.Region.cone_A_plus(50.0), full, 500, seed=3)
    assert a == b


# -- envelopes ----------------------------------------------------------------

@pytest.mark.parametrize("changes,case", [
    (dict(k_m=0.2), "km_gt_k3_nondeg"),
    (dict(k_m=0.2, k_d=0.1), "km_gt_k3_deg"),
    (dict(k_3=0.2), "k3_gt_km"),
    ({}, "k3_eq_km"),
])
def test_envelope_cases(changes, case):
    assert an.envelope_case(FIGURE2.replace(**changes)) == case


def test_envelopes_at_origin():
    env = an.envelopes((0, 0, 0), FIGURE2, [0.0])
    assert env["M"][0] == pytest.approx(10.0)
    assert env["P"][0] == pytest.approx(50.0)
    assert env["P1"][0] == pytest.approx(50.0)


def test_figure2_envelope_example():
    rep = an.gronwall_envelopes((20, 20, 2), FIGURE2, np.arange(0, 200.001, 0.5))
    assert rep.case_id == "k3_eq_km" and rep.violations == 0 and not rep.flags
    assert len(rep.sample_times) == 401


def test_nondeg_envelope_example():
    rep = an.gronwall_envelopes((20, 20, 2), FIGURE2.replace(k_m=0.2), np.arange(0, 200.001, 0.5))
    assert rep.case_id == "km_gt_k3_nondeg" and rep.violations == 0


def test_envelope_forced_failure_and_flag():
    rep = an.gronwall_envelopes((20, 20, 2), FIGURE2, np.arange(0, 50.001, 0.5), envelope_scale=0.5)
    assert rep.violations > 0 and rep.max_violation > 0
    assert not rep.passed


def test_envelope_flag_on_P1_branch():
    # at scale 0.1 the k3 = km P1 envelope sits below P1(0)
    rep = an.gronwall_envelopes((0.0, 20.0, 20.0), FIGURE2, [0.0, 0.5], envelope_scale=0.1)
    assert rep.flags and "k3 = km" in rep.flags[0]


def test_envelope_nonuniform_times_and_validation():
    rep = an.gronwall_envelopes((5, 3, 1), FIGURE2, [0.0, 0.3, 1.0, 7.5, 40.0])
    assert rep.violations == 0
    with pytest.raises(ValueError):
        an.gronwall_envelopes((5, 3, 4), FIGURE2, [0.0, 1.0])
    with pytest.raises(ValueError):
        an.gronwall_envelopes((5, 3, 1), FIGURE2, [0.0, 1.0, 1.0])


# -- slow graph and decay -----------------------------------------------------

def test_slow_graph_eps0_is_h():
    sp = figure2_scaled(0.0)
    g = an.locate_slow_graph(sp, [(5, 10), (1, 0.5)])
    assert np.allclose(g, h(np.array([10, 0.5]), sp.K), atol=1e-12)


def test_slow_graph_second_order_agreement():
    dev = []
    for eps in (3e-4, 1.5e-4):
        sp = figure2_scaled(eps)
        dev.append(abs(an.locate_slow_graph(sp, [(5, 10)])[0] - q_slow(5, 10, sp, 1)))
    assert 3 <= dev[0] / dev[1] <= 5
    # and far below the O(eps) gap to h
    assert dev[0] < 1e-2 * abs(q_slow(5, 10, figure2_scaled(3e-4), 1) - h(10, 200))


def test_slow_graph_grid_ratio():
    """|P1* - (h + eps q1)| = C eps^2 on a 20 x 20 grid, C from halving eps."""
    M, P = np.meshgrid(np.linspace(0, 10, 20), np.linspace(0.1, 50, 20))
    grid = np.column_stack([M.ravel(), P.ravel()])
    dev = []
    for eps in (3e-4, 1.5e-4):
        sp = figure2_scaled(eps)
        dev.append(np.abs(an.locate_slow_graph(sp, grid) - q_slow(grid[:, 0], grid[:, 1], sp, 1)))
    ratio = dev[0] / dev[1]
    assert np.all((ratio >= 3) & (ratio <= 5))


def test_slow_graph_nonnegative_near_P0():
    g = an.locate_slow_graph(figure2_scaled(3e-4), [(0.0, 1e-4), (10.0, 1e-4), (0.0, 1e-2), (5.0, 1e-2)])
    assert np.all(g >= 0)


def test_decay_rate_figure2():
    rep = an.decay_rate((10, 10, 2), figure2_scaled(3e-4))
    assert rep.relative_error <= 0.1
    assert rep.n_samples >= 10


def test_decay_rate_layer_linear_regime():
    sp = figure2_scaled(0.0)
    rep = an.decay_rate((1.0, 1.0, h(1.0, sp.K) + 1e-4), sp)
    assert rep.fitted_rate == pytest.approx(math.sqrt(1601), rel=0.01)


def test_decay_rate_zero_offset():
    sp = figure2_scaled(0.0)
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-15)
    s0 = (1.0, 1.0, h(1.0, sp.K))
    tr = integrate(an.rescaled_field(sp), s0, 0.0, 1.0, cfg)
    # stays at the level of the integration tolerance
    assert np.max(distance_along(tr.states, sp, 0)) <= cfg.rtol * s0[2] + cfg.atol
    with pytest.raises(FitWindowError):
        an.decay_rate(s0, sp)


def test_layer_distance_monotone():
    sp = figure2_scaled(0.0)
    tr = integrate(an.rescaled_field(sp), (1.0, 2.0, 2.0), 0.0, 1.0, an.REFERENCE_CFG, out_dt=0.001)
    d = distance_along(tr.states, sp, 0)
    above = d > 1e-10  # before hitting the rounding floor
    assert np.all(np.diff(d[above]) < 0)


# -- reduction ----------------------------------------------------------------

def test_fit_order():
    assert an.fit_order([1e-3, 5e-4], [4e-6, 1e-6]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        an.fit_order([1e-3, 1e-3], [1.0, 2.0])
    with pytest.raises(ValueError):
        an.fit_order([1e-3], [1.0])


def test_compare_models_order1():
    rep = an.compare_models((10, 10, 2), figure2_scaled(3e-4), 1, eps_list=(3e-4, 1.5e-4))
    assert rep.fitted_order >= 1.0
    assert rep.sup_errors[0] < 1e-2
    assert all(e > 0 for e in rep.sup_errors)
    # measured: the order-1 error is O(eps^2), see the decisions ledger
    assert 3.0 <= rep.sup_errors[0] / rep.sup_errors[1] <= 5.0


def test_compare_models_validation():
    sp = figure2_scaled(3e-4)
    with pytest.raises(ValueError):
        an.compare_models((10, 10, 2), sp, 1, eps_list=(3e-4, 3e-4))
    with pytest.raises(ValueError):
        an.compare_models((10, 10, 2), sp, 1, window=(1e-4, 0.1))


def test_qssa_against_itself():
    f = qssa_field(FIGURE2)
    a = integrate(f, (2.0, 1.0), 0.0, 20.0, an.REFERENCE_CFG, out_dt=0.5)
    b = integrate(f, (2.0, 1.0), 0.0, 20.0, an.REFERENCE_CFG, out_dt=0.5)
    assert np.max(np.abs(a.states - b.states)) == 0.0


def test_order0_vs_order1_linear_in_eps():
    gaps = []
    for eps in (3e-4, 1.5e-4):
        sp = figure2_scaled(3e-4).with_eps(eps)
        tau1 = 0.05 / eps
        r0 = integrate(reduced_field(sp, 0, True), (2.0, 1.0), 0.0, tau1, an.REFERENCE_CFG, out_dt=tau1 / 200)
        r1 = integrate(reduced_field(sp, 1, True), (2.0, 1.0), 0.0, tau1, an.REFERENCE_CFG, out_dt=tau1 / 200)
        gaps.append(np.max(np.abs(r0.states - r1.states)))
    assert 1.9 <= gaps[0] / gaps[1] <= 2.1


# -- cycles -------------------------------------------------------------------

def test_no_cycle_at_stable_equilibrium():
    p = FIGURE2.replace(P_c=100.0)  # weak repression, no oscillation
    rep = an.find_limit_cycle("qssa", p, (1.0, 1.0), SEC2, 2000.0)
    assert not rep.found and math.isnan(rep.period)


@pytest.fixture(scope="module")
def cycles():
    full = an.find_limit_cycle("full3d", FIGURE2, (10, 10, 2), SEC3, 600.0)
    qssa = an.find_limit_cycle("qssa", FIGURE2, (10, 10), SEC2, 600.0)
    red = an.find_limit_cycle("reduced", figure2_scaled(3e-4), (10, 10), SEC2, 600.0)
    return full, qssa, red


def test_cycles_found(cycles):
    for rep in cycles:
        assert rep.found and 20 < rep.period < 30
        assert rep.return_error <= 1e-6 * max(np.abs(rep.crossing_states[-1]))
    full = cycles[0]
    assert full.amplitude[0] == pytest.approx(2.17, abs=0.05)


def test_reduced_period_within_5eps(cycles):
    full, _, red = cycles
    assert abs(red.period - full.period) / full.period <= 5 * 3e-4


def test_qssa_period_gap_is_first_order(cycles):
    """The QSSA period misses by O(eps) with a constant near 23, not within 5 eps."""
    full, qssa, _ = cycles
    gap1 = abs(qssa.period - full.period) / full.period
    p2 = unscale(figure2_scaled(1.5e-4))
    f2 = an.find_limit_cycle("full3d", p2, (10, 10, 2), SEC3, 1200.0)
    q2 = an.find_limit_cycle("qssa", p2, (10, 10), SEC2, 1200.0)
    gap2 = abs(q2.period - f2.period) / f2.period
    assert 1.8 <= gap1 / gap2 <= 2.2
    assert gap1 > 5 * 3e-4


def test_unknown_model():
    with pytest.raises(ValueError):
        an.find_limit_cycle("nope", FIGURE2, (1, 1), SEC2, 10.0)


# -- attraction and Lienard ---------------------------------------------------

def test_random_starts_in_cone():
    s = an.random_cone_starts(50, seed=1)
    assert np.all(s >= 0) and np.all(s[:, 2] <= s[:, 1]) and np.all(s <= 100)
    assert np.array_equal(s, an.random_cone_starts(50, seed=1))


def test_attraction_small():
    rep = an.check_attraction(FIGURE2, n_starts=3, seed=5, t_end=200.0)
    assert rep.passed and len(rep.entry_times) == 3


def test_lienard_experiment_report():
    rep = an.lienard_experiment(FIGURE2, run_cycles=False)
    assert not rep.verbatim_matches and rep.swapped_matches
    assert rep.residual_swapped < 1e-12
    assert (rep.swapped.b1, rep.swapped.b2) == (rep.params.b2, rep.params.b1)
    lines = list(rep.lines())
    assert lines[0] == "lienard.a = 80.0"
    assert any(l.startswith("transform.swapped_b1_b2_consistent = True") for l in lines)
