import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circadian_gspt.errors import DomainError, InvalidParameterError
from circadian_gspt.manifold import (
    ManifoldDomain,
    distance_along,
    distance_to_manifold,
    dh_dP,
    h,
    h_closed_form,
    invariance_defect,
    layer_rhs_fast_component,
    mu,
    q1,
    q_slow,
)
from circadian_gspt.params import FIGURE2, figure2_scaled

K = 200.0


def test_h_zero():
    assert h(0.0, K) == 0.0


def test_h_bisection_oracle():
    f = lambda x: 2 * K * x * x + x - 1  # noqa: E731
    root = mp.findroot(f, (0, 1), solver="bisect", tol=1e-30)
    assert h(1.0, K) == pytest.approx(float(root), abs=1e-12)
    assert h(1.0, K) == pytest.approx((math.sqrt(1601) - 1) / 800, rel=1e-15)


def test_root_residual_log_grid():
    P = np.logspace(-8, math.log10(50), 1000)
    hv = h(P, K)
    assert np.max(np.abs(2 * K * hv**2 + hv - P)) <= 1e-12


@given(st.floats(0.0, 1e3))
def test_h_bounds(P):
    hv = h(P, K)
    assert 0.0 <= hv <= P


def test_h_increasing():
    hv = h(np.linspace(0, 50, 5001), K)
    assert np.all(np.diff(hv) > 0)


def test_stable_form_beats_closed_form_near_zero():
    P = 1e-14
    exact = float(2 * mp.mpf(P) / (mp.sqrt(1 + 8 * K * mp.mpf(P)) + 1))
    assert h(P, K) == pytest.approx(exact, rel=1e-15)
    assert abs(h_closed_form(P, K) - exact) / exact > 1e-6


@given(st.floats(0.0, 50.0))
def test_stable_and_closed_forms_agree_away_from_zero(P):
    if P > 1e-3:
        assert h(P, K) == pytest.approx(h_closed_form(P, K), rel=1e-12)


def test_branch_point():
    assert h(-1 / (8 * K), K) == pytest.approx(-1 / (4 * K))
    with pytest.raises(DomainError):
        h(-1.0, K)
    with pytest.raises(DomainError):
        mu(-1.0, K)


def test_mu_values():
    assert mu(0.0, K) == -1.0
    assert mu(1.0, K) == pytest.approx(-math.sqrt(1601))


@pytest.mark.parametrize("P", np.linspace(0, 50, 11))
def test_mu_is_layer_jacobian(P):
    hv, step = h(P, K), 1e-6
    fd = (layer_rhs_fast_component(hv + step, P, K) - layer_rhs_fast_component(hv - step, P, K)) / (2 * step)
    assert fd == pytest.approx(mu(P, K), rel=1e-6)


def test_dh_dP_finite_difference():
    P, step = 3.0, 1e-6
    assert dh_dP(P, K) == pytest.approx((h(P + step, K) - h(P - step, K)) / (2 * step), rel=1e-8)


def test_q1_zero_at_P0_and_second_term(sp2):
    assert q1(5.0, 0.0, sp2) == 0.0
    # at M = 0 only the second term survives
    P = 2.0
    s = math.sqrt(1 + 8 * K * P)
    second = (8 * K * P * P * (sp2.k_2_t - 2 * sp2.k_1_t - sp2.J_p * sp2.k_3_t - sp2.k_3_t * P)
              / ((sp2.J_p + P) * (1 + 8 * K * P) * (1 + s) ** 2))
    assert q1(0.0, P, sp2) == pytest.approx(second, rel=1e-14)


def _defect_mp(M, P, sp, eps):
    """Invariance defect of h + eps q1 at 50 digits, derivatives by mpmath."""
    mp.mp.dps = 50
    Kk = mp.mpf(sp.K)
    t = {k: mp.mpf(getattr(sp, k)) for k in ("nu_m_t", "k_m_t", "nu_p_t", "k_1_t", "k_2_t", "k_3_t", "P_c", "J_p")}

    def q(m, p):
        s = mp.sqrt(1 + 8 * Kk * p)
        hh = 2 * p / (s + 1)
        a = 8 * Kk * t["nu_p_t"] * m * p / ((1 + 8 * Kk * p) * (1 + s))
        b = (8 * Kk * p * p * (t["k_2_t"] - 2 * t["k_1_t"] - t["J_p"] * t["k_3_t"] - t["k_3_t"] * p)
             / ((t["J_p"] + p) * (1 + 8 * Kk * p) * (1 + s) ** 2))
        return hh + eps * (a + b)

    M, P = mp.mpf(M), mp.mpf(P)
    P1 = q(M, P)
    den = t["J_p"] + P
    F1 = eps * (4 * t["nu_m_t"] * t["P_c"] ** 2 / (4 * t["P_c"] ** 2 + (P - P1) ** 2) - t["k_m_t"] * M)
    F2 = eps * (t["nu_p_t"] * M - ((t["k_1_t"] - t["k_2_t"]) * P1 + t["k_2_t"] * P) / den - t["k_3_t"] * P)
    F3 = eps * (t["nu_p_t"] * M - t["k_1_t"] * P1 / den - t["k_3_t"] * P1) - 2 * Kk * P1**2 - P1 + P
    qm = mp.diff(lambda m: q(m, P), M)
    qp = mp.diff(lambda p: q(M, p), P)
    return F3 - qm * F1 - qp * F2


@pytest.mark.parametrize("M,P", [(5.0, 10.0), (0.5, 0.2), (9.0, 45.0)])
def test_q1_kills_first_order_defect(sp2, M, P):
    """Independent oracle: defect / eps -> 0 as eps -> 0 only if q1 is right."""
    d1 = _defect_mp(M, P, sp2, mp.mpf("1e-12"))
    d2 = _defect_mp(M, P, sp2, mp.mpf("5e-13"))
    assert float(abs(d1 / d2)) == pytest.approx(4.0, rel=1e-6)


def test_defect_order0_zero_at_eps0(sp2):
    # zero up to rounding in -2K h^2 - h + P
    for P in (0.0, 0.3, 10.0, 50.0):
        assert abs(invariance_defect(5.0, P, sp2.with_eps(0.0), 0)) <= 1e-14 * max(1.0, P)


def test_defect_order0_halves():
    a = invariance_defect(5.0, 10.0, figure2_scaled(3e-4), 0)
    b = invariance_defect(5.0, 10.0, figure2_scaled(1.5e-4), 0)
    assert 1.9 <= a / b <= 2.1


def test_defect_order1_quarters_and_beats_order0():
    sp1, sp2 = figure2_scaled(3e-4), figure2_scaled(1.5e-4)
    for M in np.linspace(0, 10, 10):
        for P in np.linspace(0.1, 50, 10):
            d1, d2 = invariance_defect(M, P, sp1, 1), invariance_defect(M, P, sp2, 1)
            assert 3 <= abs(d1 / d2) <= 5
            assert abs(d1) < abs(invariance_defect(M, P, sp1, 0))


def test_q_slow_orders(sp2):
    assert q_slow(1.0, 2.0, sp2, 0) == h(2.0, K)
    assert q_slow(1.0, 2.0, sp2, 1) - q_slow(1.0, 2.0, sp2, 0) == pytest.approx(sp2.eps * q1(1.0, 2.0, sp2), rel=1e-12)
    with pytest.raises(ValueError):
        q_slow(1.0, 2.0, sp2, 2)


def test_distance(sp2):
    assert distance_to_manifold((0.0, 1.0, 0.0), sp2, 0) == pytest.approx(0.0487656, abs=1e-7)
    assert distance_to_manifold((3.0, 2.0, q_slow(3.0, 2.0, sp2, 1)), sp2, 1) == 0.0
    states = np.array([[0.0, 1.0, 0.0], [3.0, 2.0, h(2.0, K)]])
    assert np.allclose(distance_along(states, sp2, 0), [h(1.0, K), 0.0])


def test_domain():
    d = ManifoldDomain.for_params(FIGURE2)
    assert d.rho1 == pytest.approx(min(1 / (16 * K), 0.01))
    assert d.lower == -d.rho1
    assert d.contains(0.0, 50.0) and not d.contains(11.0, 1.0)
    with pytest.raises(InvalidParameterError):
        ManifoldDomain(1 / (8 * K), 10, 50, K)


def test_mu_negative_on_domain():
    d = ManifoldDomain.for_params(FIGURE2)
    P = np.linspace(d.lower + 1e-9, d.P_max, 1000)
    assert np.all(mu(P, K) < 0)
