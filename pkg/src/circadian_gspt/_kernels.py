"""Compiled right-hand sides and manifold primitives.

Every kernel takes a state array and a packed parameter array so that the
integrator loop can be compiled once per kernel. Packing layouts:

    physical: [nu_m, k_m, nu_p, k_1, k_2, k_3, P_c, J_p, k_a, k_d, r]
    scaled:   [eps, K, nu_m_t, k_m_t, nu_p_t, k_1_t, k_2_t, k_3_t, P_c, J_p, k_d]
    lienard:  [a, b1, b2, c, delta, v]
"""

import math

import numpy as np
from numba import njit

# physical layout
NU_M, K_M, NU_P, K_1, K_2, K_3, P_C, J_P, K_A, K_D, R = range(11)
# scaled layout
EPS, KK, NU_M_T, K_M_T, NU_P_T, K_1_T, K_2_T, K_3_T, SP_C, SJ_P, SK_D = range(11)


def h_expr(P, K):
    # 2P / (sqrt(1+8KP) + 1) equals (sqrt(1+8KP) - 1) / (4K) without cancellation
    return 2.0 * P / (np.sqrt(1.0 + 8.0 * K * P) + 1.0)


def q1_expr(M, P, K, nu_p_t, k_1_t, k_2_t, k_3_t, J_p):
    s = np.sqrt(1.0 + 8.0 * K * P)
    first = 8.0 * K * nu_p_t * M * P / ((1.0 + 8.0 * K * P) * (1.0 + s))
    second = (
        8.0 * K * P * P * (k_2_t - 2.0 * k_1_t - J_p * k_3_t - k_3_t * P)
        / ((J_p + P) * (1.0 + 8.0 * K * P) * (1.0 + s) ** 2)
    )
    return first + second


# the same expressions serve numpy arrays (plain calls) and compiled scalars
h_scalar = njit(cache=True)(h_expr)
_q1_jit = njit(cache=True)(q1_expr)


def h_array(P, K):
    return h_expr(np.asarray(P, dtype=float), K)


def q1_array(M, P, sa):
    return q1_expr(np.asarray(M, dtype=float), np.asarray(P, dtype=float), sa[KK],
                   sa[NU_P_T], sa[K_1_T], sa[K_2_T], sa[K_3_T], sa[SJ_P])


@njit(cache=True)
def q1_scalar(M, P, sa):
    return _q1_jit(M, P, sa[KK], sa[NU_P_T], sa[K_1_T], sa[K_2_T], sa[K_3_T], sa[SJ_P])


@njit(cache=True)
def original_kernel(y, a):
    M, P1, P2 = y[0], y[1], y[2]
    den = a[J_P] + P1 + a[R] * P2
    out = np.empty(3)
    out[0] = a[NU_M] / (1.0 + (P2 / a[P_C]) ** 2) - a[K_M] * M
    out[1] = (
        a[NU_P] * M - a[K_1] * P1 / den - a[K_3] * P1
        - 2.0 * a[K_A] * P1 * P1 + 2.0 * a[K_D] * P2
    )
    out[2] = a[K_A] * P1 * P1 - a[K_D] * P2 - a[K_2] * P2 / den - a[K_3] * P2
    return out


@njit(cache=True)
def full_kernel(y, a):
    M, P, P1 = y[0], y[1], y[2]
    Pc2 = a[P_C] * a[P_C]
    den = a[J_P] + P
    out = np.empty(3)
    out[0] = 4.0 * a[NU_M] * Pc2 / (4.0 * Pc2 + (P - P1) ** 2) - a[K_M] * M
    out[1] = a[NU_P] * M - ((a[K_1] - a[K_2]) * P1 + a[K_2] * P) / den - a[K_3] * P
    out[2] = (
        a[NU_P] * M - a[K_1] * P1 / den - a[K_3] * P1
        - 2.0 * a[K_A] * P1 * P1 - a[K_D] * P1 + a[K_D] * P
    )
    return out


@njit(cache=True)
def rescaled_kernel(y, sa):
    M, P, P1 = y[0], y[1], y[2]
    eps = sa[EPS]
    Pc2 = sa[SP_C] * sa[SP_C]
    den = sa[SJ_P] + P
    out = np.empty(3)
    out[0] = eps * (4.0 * sa[NU_M_T] * Pc2 / (4.0 * Pc2 + (P - P1) ** 2) - sa[K_M_T] * M)
    out[1] = eps * (
        sa[NU_P_T] * M - ((sa[K_1_T] - sa[K_2_T]) * P1 + sa[K_2_T] * P) / den - sa[K_3_T] * P
    )
    out[2] = (
        eps * (sa[NU_P_T] * M - sa[K_1_T] * P1 / den - sa[K_3_T] * P1)
        - 2.0 * sa[KK] * P1 * P1 - P1 + P
    )
    return out


@njit(cache=True)
def layer_kernel(y, sa):
    out = np.zeros(3)
    out[2] = -2.0 * sa[KK] * y[2] * y[2] - y[2] + y[1]
    return out


@njit(cache=True)
def qssa_kernel(y, a):
    M, P = y[0], y[1]
    K = a[K_A] / a[K_D]
    hP = h_scalar(P, K)
    Pc2 = a[P_C] * a[P_C]
    out = np.empty(2)
    out[0] = 4.0 * a[NU_M] * Pc2 / (4.0 * Pc2 + (P - hP) ** 2) - a[K_M] * M
    out[1] = a[NU_P] * M - ((a[K_1] - a[K_2]) * hP + a[K_2] * P) / (a[J_P] + P) - a[K_3] * P
    return out


@njit(cache=True)
def reduced_correction(y, a, sa):
    """First-order terms of the reduced field, physical time units."""
    M, P = y[0], y[1]
    hP = h_scalar(P, sa[KK])
    eq1 = sa[EPS] * q1_scalar(M, P, sa)
    Pc2 = a[P_C] * a[P_C]
    den = 4.0 * Pc2 + (P - hP) ** 2
    out = np.empty(2)
    out[0] = 8.0 * a[NU_M] * Pc2 * eq1 * (P - hP) / (den * den)
    out[1] = (a[K_2] - a[K_1]) * eq1 / (a[J_P] + P)
    return out


@njit(cache=True)
def reduced1_kernel(y, both):
    # both = physical layout followed by scaled layout
    a = both[:11]
    sa = both[11:]
    return qssa_kernel(y, a) + reduced_correction(y, a, sa)


@njit(cache=True)
def reduced1_fast_kernel(y, both):
    # reduced order-1 field in fast time: physical field divided by k_d
    return reduced1_kernel(y, both) / both[K_D]


@njit(cache=True)
def qssa_fast_kernel(y, a):
    return qssa_kernel(y, a) / a[K_D]


@njit(cache=True)
def lienard_kernel(y, la):
    x, yy = y[0], y[1]
    a, b1, b2, c, delta, v = la[0], la[1], la[2], la[3], la[4], la[5]
    w = x * x + 2.0 * x
    frac = (b2 * x * x + 2.0 * b1 * x) / (w + a)
    out = np.empty(2)
    out[0] = yy - ((delta + 1.0) * w + frac)
    out[1] = 2.0 * delta * (x + 1.0) * (v / (x ** 4 + c) - frac - w)
    return out
