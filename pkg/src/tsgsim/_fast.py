"""Jitted numerical kernels.

Everything here is an implementation detail behind the public modules; the
semantics are defined (and tested) against the plain-Python reference
implementations in the test suite. Set NUMBA_DISABLE_JIT=1 to run the same
code uncompiled.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

# violation codes used by closed_loop_scan
VIOL_NONE = 0
VIOL_LOS = 1
VIOL_SOFT_DOCK = 3


@njit(cache=True)
def kepler_e(mean_anomaly: float, ecc: float, tol: float, max_iter: int) -> float:
    """Eccentric anomaly from mean anomaly by Newton iteration."""
    m = mean_anomaly % TWO_PI
    e_anom = m if ecc < 0.8 else math.pi
    for _ in range(max_iter):
        f = e_anom - ecc * math.sin(e_anom) - m
        if abs(f) < tol:
            break
        e_anom -= f / (1.0 - ecc * math.cos(e_anom))
    return e_anom


@njit(cache=True)
def reference_states(
    times: np.ndarray,
    sma: float,
    ecc: float,
    mean0: float,
    mean_motion: float,
    rot: np.ndarray,
    mu: float,
    tol: float,
    max_iter: int,
) -> np.ndarray:
    """Conic-solution states at ``times`` for an elliptic orbit, shape (n, 6)."""
    n = times.shape[0]
    out = np.empty((n, 6))
    p = sma * (1.0 - ecc * ecc)
    vfac = math.sqrt(mu / p)
    root = math.sqrt(1.0 - ecc * ecc)
    for k in range(n):
        m = mean0 + mean_motion * times[k]
        e_anom = kepler_e(m, ecc, tol, max_iter)
        ce = math.cos(e_anom)
        se = math.sin(e_anom)
        denom = 1.0 - ecc * ce
        cnu = (ce - ecc) / denom
        snu = root * se / denom
        r = sma * denom
        px = r * cnu
        py = r * snu
        vx = -vfac * snu
        vy = vfac * (ecc + cnu)
        out[k, 0] = rot[0, 0] * px + rot[0, 1] * py
        out[k, 1] = rot[1, 0] * px + rot[1, 1] * py
        out[k, 2] = rot[2, 0] * px + rot[2, 1] * py
        out[k, 3] = rot[0, 0] * vx + rot[0, 1] * vy
        out[k, 4] = rot[1, 0] * vx + rot[1, 1] * vy
        out[k, 5] = rot[2, 0] * vx + rot[2, 1] * vy
    return out


@njit(cache=True, inline="always")
def _deriv_controlled(y: np.ndarray, ux: float, uy: float, uz: float, mu: float) -> np.ndarray:
    r = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
    c = -mu / (r * r * r)
    return np.array([y[3], y[4], y[5], c * y[0] + ux, c * y[1] + uy, c * y[2] + uz])


@njit(cache=True, inline="always")
def _rk4_controlled(x: np.ndarray, dt: float, ux: float, uy: float, uz: float, mu: float) -> np.ndarray:
    k1 = _deriv_controlled(x, ux, uy, uz, mu)
    k2 = _deriv_controlled(x + 0.5 * dt * k1, ux, uy, uz, mu)
    k3 = _deriv_controlled(x + 0.5 * dt * k2, ux, uy, uz, mu)
    k4 = _deriv_controlled(x + dt * k3, ux, uy, uz, mu)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def closed_loop_scan(
    xd0: np.ndarray,
    chief: np.ndarray,
    target: np.ndarray,
    gains: np.ndarray,
    gain_idx: np.ndarray,
    control_dt: float,
    substeps: int,
    mu: float,
    u_max: float,
    cos_alpha: float,
    los_eps: float,
    gamma1: float,
    gamma2: float,
    gamma3: float,
    check: bool,
):
    """Simulate the saturated feedback loop over a grid of control intervals.

    ``chief`` and ``target`` hold one state row per sample time (n_samples =
    n_intervals + 1). The deputy is integrated with ``substeps`` RK4 steps per
    control interval under zero-order-hold control. Approach-corridor and
    soft-docking values are evaluated at every sample; with ``check`` the scan
    stops at the first violation.

    Returns (ok, viol_index, viol_code, deputy_states, controls,
    control_norms, h1, h3, h3_active); on early exit only rows
    [0, viol_index] are meaningful. ``control_norms`` carries the saturated
    magnitudes in the kernel's own arithmetic, guaranteed <= u_max.
    """
    ns = chief.shape[0]
    n = ns - 1
    xd = np.empty((ns, 6))
    u_hist = np.zeros((n, 3))
    u_norm = np.zeros(n)
    h1 = np.zeros(ns)
    h3 = np.zeros(ns)
    h3_active = np.zeros(ns, dtype=np.bool_)
    for j in range(6):
        xd[0, j] = xd0[j]
    ok = True
    viol_idx = -1
    viol_code = VIOL_NONE
    sub_dt = control_dt / substeps
    for i in range(ns):
        # approach-corridor value at sample i (cone opens along -v_chief)
        px = xd[i, 0] - chief[i, 0]
        py = xd[i, 1] - chief[i, 1]
        pz = xd[i, 2] - chief[i, 2]
        pn = math.sqrt(px * px + py * py + pz * pz)
        vcx = chief[i, 3]
        vcy = chief[i, 4]
        vcz = chief[i, 5]
        vn = math.sqrt(vcx * vcx + vcy * vcy + vcz * vcz)
        if pn < los_eps:
            h1[i] = cos_alpha - 1.0
        else:
            h1[i] = (vcx * px + vcy * py + vcz * pz) / (vn * pn) + cos_alpha
        if pn <= gamma1:
            h3_active[i] = True
            wx = xd[i, 3] - chief[i, 3]
            wy = xd[i, 4] - chief[i, 4]
            wz = xd[i, 5] - chief[i, 5]
            h3[i] = math.sqrt(wx * wx + wy * wy + wz * wz) - gamma2 * pn - gamma3
        else:
            h3[i] = np.nan
        if check:
            if h1[i] > 0.0:
                ok = False
                viol_idx = i
                viol_code = VIOL_LOS
                break
            if h3_active[i] and h3[i] > 0.0:
                ok = False
                viol_idx = i
                viol_code = VIOL_SOFT_DOCK
                break
        if i == n:
            break
        # saturated feedback over [i, i+1]
        kmat = gains[gain_idx[i]]
        ux = 0.0
        uy = 0.0
        uz = 0.0
        for j in range(6):
            dxj = target[i, j] - xd[i, j]
            ux += kmat[0, j] * dxj
            uy += kmat[1, j] * dxj
            uz += kmat[2, j] * dxj
        un = math.sqrt(ux * ux + uy * uy + uz * uz)
        if un > u_max:
            s = u_max / un
            ux *= s
            uy *= s
            uz *= s
            # the rescale can overshoot u_max by one ulp; correct it
            un = math.sqrt(ux * ux + uy * uy + uz * uz)
            while un > u_max:
                ux = math.nextafter(ux, 0.0)
                uy = math.nextafter(uy, 0.0)
                uz = math.nextafter(uz, 0.0)
                un = math.sqrt(ux * ux + uy * uy + uz * uz)
        u_hist[i, 0] = ux
        u_hist[i, 1] = uy
        u_hist[i, 2] = uz
        u_norm[i] = un
        x = xd[i].copy()
        for _ in range(substeps):
            x = _rk4_controlled(x, sub_dt, ux, uy, uz, mu)
        for j in range(6):
            xd[i + 1, j] = x[j]
    return ok, viol_idx, viol_code, xd, u_hist, u_norm, h1, h3, h3_active
