"""Numba implementations of the flow kernels.

Same stepping rules as the numpy module, written as explicit loops so
the batch dimension parallelizes.  fastmath stays off to keep the two
backends numerically interchangeable.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1

_SQRT3 = np.sqrt(3.0)


@njit(cache=True)
def _bump_chi_scalar(u):
    if u <= 0.0:
        return 1.0, 0.0
    if u >= 1.0:
        return 0.0, 0.0
    a = np.exp(-1.0 / (1.0 - u))
    b = np.exp(-1.0 / u)
    den = a + b
    chi = a / den
    dchi = -a * b * (1.0 / (1.0 - u) ** 2 + 1.0 / u**2) / den**2
    return chi, dchi


@njit(cache=True)
def _sg_field_scalar(q, code, par0, par1, par2):
    s = 1.0 if q >= 0.0 else -1.0
    u = (abs(q) - par1) / (par2 - par1)
    chi, dchi = _bump_chi_scalar(u)
    dchi_dq = dchi * s / (par2 - par1)
    if code == 0:
        return par0 * q * chi, par0 * (chi + q * dchi_dq)
    return par0 * np.sin(q) * chi, par0 * (np.cos(q) * chi + np.sin(q) * dchi_dq)


@njit(cache=True, parallel=True)
def advance_coupled(q, p, nx, ny, nz, n_steps, dt, eps_z, omega, hc, hq, hp, g0q, g0p):
    for i in prange(q.shape[0]):
        qi = q[i]
        pi = p[i]
        ax = nx[i]
        ay = ny[i]
        az = nz[i]
        for _ in range(n_steps):
            for js in range(3):
                h = _W0 * dt if js == 1 else _W1 * dt
                for half in range(2):
                    # exact affine z-step over h/2 with n frozen
                    hh = 0.5 * h
                    th = omega * hh
                    c = np.cos(th)
                    s = np.sin(th)
                    so = s / omega
                    cx = eps_z * (g0p + _SQRT3 * (hp[0] * ax + hp[1] * ay + hp[2] * az))
                    cy = -eps_z * (g0q + _SQRT3 * (hq[0] * ax + hq[1] * ay + hq[2] * az))
                    qn = c * qi + so * pi + so * cx + (1.0 - c) / omega**2 * cy
                    pn = -omega * s * qi + c * pi + (c - 1.0) * cx + so * cy
                    qi = qn
                    pi = pn
                    if half == 0:
                        # exact spin rotation about h(z) by 2|h(z)| h
                        ux = hc[0] + qi * hq[0] + pi * hp[0]
                        uy = hc[1] + qi * hq[1] + pi * hp[1]
                        uz = hc[2] + qi * hq[2] + pi * hp[2]
                        r = np.sqrt(ux * ux + uy * uy + uz * uz)
                        if r > 0.0:
                            kx = ux / r
                            ky = uy / r
                            kz = uz / r
                            thn = 2.0 * r * h
                            cn = np.cos(thn)
                            sn = np.sin(thn)
                            kdn = kx * ax + ky * ay + kz * az
                            cxx = ky * az - kz * ay
                            cxy = kz * ax - kx * az
                            cxz = kx * ay - ky * ax
                            om = 1.0 - cn
                            bx = ax * cn + cxx * sn + kx * kdn * om
                            by = ay * cn + cxy * sn + ky * kdn * om
                            bz = az * cn + cxz * sn + kz * kdn * om
                            ax = bx
                            ay = by
                            az = bz
        q[i] = qi
        p[i] = pi
        nx[i] = ax
        ny[i] = ay
        nz[i] = az


@njit(cache=True, parallel=True)
def advance_sg(q1, p1, nx, ny, nz, n_steps, dt, eps, code, par0, par1, par2):
    for i in prange(q1.shape[0]):
        qi = q1[i]
        pi = p1[i]
        ax = nx[i]
        ay = ny[i]
        az = nz[i]
        for _ in range(n_steps):
            for js in range(3):
                h = _W0 * dt if js == 1 else _W1 * dt
                qi += 0.5 * h * pi
                b, db = _sg_field_scalar(qi, code, par0, par1, par2)
                pi += h * eps * (_SQRT3 / 2.0) * db * az
                phi = -b * h
                c = np.cos(phi)
                s = np.sin(phi)
                bx = ax * c - ay * s
                by = ax * s + ay * c
                ax = bx
                ay = by
                qi += 0.5 * h * pi
        q1[i] = qi
        p1[i] = pi
        nx[i] = ax
        ny[i] = ay
        nz[i] = az


@njit(cache=True)
def _var_rhs(y, d, eps, omega, hc, hq, hp, g0q, g0p):
    q = y[0]
    p = y[1]
    n0 = y[2]
    n1 = y[3]
    n2 = y[4]
    h0 = hc[0] + q * hq[0] + p * hp[0]
    h1 = hc[1] + q * hq[1] + p * hp[1]
    h2 = hc[2] + q * hq[2] + p * hp[2]
    d[0] = p + eps * (g0p + _SQRT3 * (hp[0] * n0 + hp[1] * n1 + hp[2] * n2))
    d[1] = -(omega**2) * q - eps * (g0q + _SQRT3 * (hq[0] * n0 + hq[1] * n1 + hq[2] * n2))
    d[2] = 2.0 * (h1 * n2 - h2 * n1)
    d[3] = 2.0 * (h2 * n0 - h0 * n2)
    d[4] = 2.0 * (h0 * n1 - h1 * n0)
    for k in range(2):
        zq = y[5 + k]
        zp = y[7 + k]
        m0 = y[9 + k]
        m1 = y[11 + k]
        m2 = y[13 + k]
        d[5 + k] = zp + eps * _SQRT3 * (hp[0] * m0 + hp[1] * m1 + hp[2] * m2)
        d[7 + k] = -(omega**2) * zq - eps * _SQRT3 * (hq[0] * m0 + hq[1] * m1 + hq[2] * m2)
        gx = hq[0] * zq + hp[0] * zp
        gy = hq[1] * zq + hp[1] * zp
        gz = hq[2] * zq + hp[2] * zp
        d[9 + k] = 2.0 * (h1 * m2 - h2 * m1) + 2.0 * (gy * n2 - gz * n1)
        d[11 + k] = 2.0 * (h2 * m0 - h0 * m2) + 2.0 * (gz * n0 - gx * n2)
        d[13 + k] = 2.0 * (h0 * m1 - h1 * m0) + 2.0 * (gx * n1 - gy * n0)


@njit(cache=True)
def variational_rk4(y0, n_steps, dt, eps, omega, hc, hq, hp, g0q, g0p, record_every, out):
    y = y0.copy()
    k1 = np.empty(15)
    k2 = np.empty(15)
    k3 = np.empty(15)
    k4 = np.empty(15)
    tmp = np.empty(15)
    m = 0
    out[m] = y
    m += 1
    for k in range(n_steps):
        _var_rhs(y, k1, eps, omega, hc, hq, hp, g0q, g0p)
        for j in range(15):
            tmp[j] = y[j] + 0.5 * dt * k1[j]
        _var_rhs(tmp, k2, eps, omega, hc, hq, hp, g0q, g0p)
        for j in range(15):
            tmp[j] = y[j] + 0.5 * dt * k2[j]
        _var_rhs(tmp, k3, eps, omega, hc, hq, hp, g0q, g0p)
        for j in range(15):
            tmp[j] = y[j] + dt * k3[j]
        _var_rhs(tmp, k4, eps, omega, hc, hq, hp, g0q, g0p)
        for j in range(15):
            y[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            out[m] = y
            m += 1
    return m
