"""Vectorized numpy kernels; the reference path when numba is disabled."""
import numpy as np

from ..weights import WeightSpec, _lambda_raw

_KINDS = ("ATE", "ATT", "ATC", "ATO", "ATEN", "ATB", "SmoothTrim")


def _spec(kind, p1, p2):
    name = _KINDS[kind]
    if name == "ATB":
        return WeightSpec(name, nu1=p1, nu2=p2)
    if name == "SmoothTrim":
        return WeightSpec(name, alpha=p1, eps=p2)
    return WeightSpec(name)


def lam(t, order, kind, p1, p2):
    return _lambda_raw(_spec(kind, p1, p2), np.asarray(t, dtype=float), order)


def omega_psi(q1, q0, e, kind, p1, p2):
    w = lam(e, 0, kind, p1, p2)
    den = w.sum()
    return den / e.shape[0], float(np.dot(w, q1 - q0) / den)


def field(q1, q0, e, kind, p1, p2):
    omega, psi = omega_psi(q1, q0, e, kind, p1, p2)
    w = lam(e, 0, kind, p1, p2)
    f1 = q1 * (1.0 - q1) * w / (omega * e)
    f0 = -q0 * (1.0 - q0) * w / (omega * (1.0 - e))
    if kind == 0:
        fe = np.zeros_like(e)
    else:
        fe = e * (1.0 - e) * lam(e, 1, kind, p1, p2) * (q1 - q0 - psi) / omega
    return f1, f0, fe


def rk4_step(q1, q0, e, h, kind, p1, p2):
    k1 = field(q1, q0, e, kind, p1, p2)
    k2 = field(q1 + 0.5 * h * k1[0], q0 + 0.5 * h * k1[1], e + 0.5 * h * k1[2], kind, p1, p2)
    k3 = field(q1 + 0.5 * h * k2[0], q0 + 0.5 * h * k2[1], e + 0.5 * h * k2[2], kind, p1, p2)
    k4 = field(q1 + h * k3[0], q0 + h * k3[1], e + h * k3[2], kind, p1, p2)
    c = h / 6.0
    base = (q1, q0, e)
    return tuple(
        base[j] + c * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) for j in range(3)
    )


def eif_obs(q1, q0, e, a, y, kind, p1, p2, full):
    omega, psi = omega_psi(q1, q0, e, kind, p1, p2)
    tau = q1 - q0
    w = lam(e, 0, kind, p1, p2)
    dw = lam(e, 1, kind, p1, p2)
    resid = np.where(a == 1, (y - q1) / e, -(y - q0) / (1.0 - e))
    d = (w * resid + dw * (tau - psi) * (a - e)) / omega
    if full:
        d = d + w * (tau - psi) / omega
    return d


def loglik_score(q1, q0, e, a, y, kind, p1, p2):
    qa = np.where(a == 1, q1, q0)
    pa = np.where(a == 1, e, 1.0 - e)
    py = np.where(y == 1, qa, 1.0 - qa)
    ll = np.mean(np.log(pa) + np.log(py))
    sc = np.mean(eif_obs(q1, q0, e, a, y, kind, p1, p2, False))
    return float(ll), float(sc)
