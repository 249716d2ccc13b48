"""Numba kernels.  Signatures mirror ``_numpy`` exactly."""
import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _falling(p, k):
    out = 1.0
    for j in range(k):
        out *= p - j
    return out


@njit(cache=True)
def _comb3(n, k):
    if k == 0 or k == n:
        return 1.0
    if n == 2:
        return 2.0
    return 3.0


@njit(cache=True)
def _gcdf(z, eps, order):
    if order == 0:
        return 0.5 * (1.0 + math.erf(z / _SQRT2))
    pdf = math.exp(-0.5 * z * z) * _INV_SQRT2PI
    if order == 1:
        return pdf / eps
    if order == 2:
        return -z * pdf / (eps * eps)
    return (z * z - 1.0) * pdf / (eps * eps * eps)


@njit(cache=True)
def lam1(t, order, kind, p1, p2):
    if kind == 0:
        return 1.0 if order == 0 else 0.0
    if kind == 1:
        if order == 0:
            return t
        return 1.0 if order == 1 else 0.0
    if kind == 2:
        if order == 0:
            return 1.0 - t
        return -1.0 if order == 1 else 0.0
    if kind == 3:
        if order == 0:
            return t * (1.0 - t)
        if order == 1:
            return 1.0 - 2.0 * t
        return -2.0 if order == 2 else 0.0
    if kind == 4:
        if order == 0:
            return -t * math.log(t) - (1.0 - t) * math.log1p(-t)
        if order == 1:
            return math.log1p(-t) - math.log(t)
        if order == 2:
            return -1.0 / t - 1.0 / (1.0 - t)
        return 1.0 / (t * t) - 1.0 / ((1.0 - t) * (1.0 - t))
    if kind == 5:
        a = p1 - 1.0
        b = p2 - 1.0
        out = 0.0
        for k in range(order + 1):
            ca = _falling(a, k)
            cb = _falling(b, order - k)
            if (order - k) % 2 == 1:
                cb = -cb
            if ca == 0.0 or cb == 0.0:
                continue
            out += _comb3(order, k) * ca * cb * t ** (a - k) * (1.0 - t) ** (b - order + k)
        return out
    # smooth trimming
    u = (t - p1) / p2
    v = (1.0 - p1 - t) / p2
    out = 0.0
    for k in range(order + 1):
        r = _gcdf(v, p2, order - k)
        if (order - k) % 2 == 1:
            r = -r
        out += _comb3(order, k) * _gcdf(u, p2, k) * r
    return out


@njit(cache=True)
def lam(t, order, kind, p1, p2):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = lam1(t[i], order, kind, p1, p2)
    return out


@njit(cache=True)
def omega_psi(q1, q0, e, kind, p1, p2):
    m = e.shape[0]
    num = 0.0
    den = 0.0
    for i in range(m):
        w = lam1(e[i], 0, kind, p1, p2)
        den += w
        num += w * (q1[i] - q0[i])
    return den / m, num / den


@njit(cache=True)
def _field_into(q1, q0, e, kind, p1, p2, f1, f0, fe):
    omega, psi = omega_psi(q1, q0, e, kind, p1, p2)
    for i in range(e.shape[0]):
        ei = e[i]
        w = lam1(ei, 0, kind, p1, p2)
        f1[i] = q1[i] * (1.0 - q1[i]) * w / (omega * ei)
        f0[i] = -q0[i] * (1.0 - q0[i]) * w / (omega * (1.0 - ei))
        if kind == 0:
            fe[i] = 0.0
        else:
            dw = lam1(ei, 1, kind, p1, p2)
            fe[i] = ei * (1.0 - ei) * dw * (q1[i] - q0[i] - psi) / omega


@njit(cache=True)
def field(q1, q0, e, kind, p1, p2):
    m = e.shape[0]
    f1 = np.empty(m)
    f0 = np.empty(m)
    fe = np.empty(m)
    _field_into(q1, q0, e, kind, p1, p2, f1, f0, fe)
    return f1, f0, fe


@njit(cache=True)
def rk4_step(q1, q0, e, h, kind, p1, p2):
    m = e.shape[0]
    k1 = np.empty((3, m))
    k2 = np.empty((3, m))
    k3 = np.empty((3, m))
    k4 = np.empty((3, m))
    s1 = np.empty(m)
    s0 = np.empty(m)
    se = np.empty(m)
    _field_into(q1, q0, e, kind, p1, p2, k1[0], k1[1], k1[2])
    for i in range(m):
        s1[i] = q1[i] + 0.5 * h * k1[0, i]
        s0[i] = q0[i] + 0.5 * h * k1[1, i]
        se[i] = e[i] + 0.5 * h * k1[2, i]
    _field_into(s1, s0, se, kind, p1, p2, k2[0], k2[1], k2[2])
    for i in range(m):
        s1[i] = q1[i] + 0.5 * h * k2[0, i]
        s0[i] = q0[i] + 0.5 * h * k2[1, i]
        se[i] = e[i] + 0.5 * h * k2[2, i]
    _field_into(s1, s0, se, kind, p1, p2, k3[0], k3[1], k3[2])
    for i in range(m):
        s1[i] = q1[i] + h * k3[0, i]
        s0[i] = q0[i] + h * k3[1, i]
        se[i] = e[i] + h * k3[2, i]
    _field_into(s1, s0, se, kind, p1, p2, k4[0], k4[1], k4[2])
    n1 = np.empty(m)
    n0 = np.empty(m)
    ne = np.empty(m)
    c = h / 6.0
    for i in range(m):
        n1[i] = q1[i] + c * (k1[0, i] + 2.0 * k2[0, i] + 2.0 * k3[0, i] + k4[0, i])
        n0[i] = q0[i] + c * (k1[1, i] + 2.0 * k2[1, i] + 2.0 * k3[1, i] + k4[1, i])
        ne[i] = e[i] + c * (k1[2, i] + 2.0 * k2[2, i] + 2.0 * k3[2, i] + k4[2, i])
    return n1, n0, ne


@njit(cache=True)
def eif_obs(q1, q0, e, a, y, kind, p1, p2, full):
    omega, psi = omega_psi(q1, q0, e, kind, p1, p2)
    m = e.shape[0]
    out = np.empty(m)
    for i in range(m):
        ei = e[i]
        tau = q1[i] - q0[i]
        w = lam1(ei, 0, kind, p1, p2)
        dw = lam1(ei, 1, kind, p1, p2)
        if a[i] == 1:
            resid = (y[i] - q1[i]) / ei
        else:
            resid = -(y[i] - q0[i]) / (1.0 - ei)
        d = (w * resid + dw * (tau - psi) * (a[i] - ei)) / omega
        if full:
            d += w * (tau - psi) / omega
        out[i] = d
    return out


@njit(cache=True)
def loglik_score(q1, q0, e, a, y, kind, p1, p2):
    omega, psi = omega_psi(q1, q0, e, kind, p1, p2)
    m = e.shape[0]
    ll = 0.0
    sc = 0.0
    for i in range(m):
        ei = e[i]
        tau = q1[i] - q0[i]
        w = lam1(ei, 0, kind, p1, p2)
        dw = lam1(ei, 1, kind, p1, p2)
        if a[i] == 1:
            pa = ei
            q = q1[i]
            resid = (y[i] - q) / ei
        else:
            pa = 1.0 - ei
            q = q0[i]
            resid = -(y[i] - q) / (1.0 - ei)
        py = q if y[i] == 1 else 1.0 - q
        ll += math.log(pa) + math.log(py)
        sc += (w * resid + dw * (tau - psi) * (a[i] - ei)) / omega
    return ll / m, sc / m
