"""Pure-numpy reference implementations of the flow kernels.

Semantics are identical to the numba implementations; these are the
fallback path and the ground truth for the backend equivalence tests.
All state arrays are updated in place.
"""

from __future__ import annotations

import numpy as np

# Yoshida triple-jump coefficients: S(w1 h) S(w0 h) S(w1 h) is order 4
# when S is a symmetric order-2 step.
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1

_SQRT3 = np.sqrt(3.0)


def _zstep(q, p, nx, ny, nz, h, eps_z, omega, hc, hq, hp, g0q, g0p):
    # Exact solve of dz/dt = Omega z + c(n) over time h with n frozen.
    th = omega * h
    c, s = np.cos(th), np.sin(th)
    so = s / omega
    m11 = so
    m12 = (1.0 - c) / omega**2
    m21 = c - 1.0
    m22 = so
    cx = eps_z * (g0p + _SQRT3 * (hp[0] * nx + hp[1] * ny + hp[2] * nz))
    cy = -eps_z * (g0q + _SQRT3 * (hq[0] * nx + hq[1] * ny + hq[2] * nz))
    qn = c * q + so * p + m11 * cx + m12 * cy
    pn = -omega * s * q + c * p + m21 * cx + m22 * cy
    q[...] = qn
    p[...] = pn


def _nstep(q, p, nx, ny, nz, h, hc, hq, hp):
    # Exact rotation of n about the local field h(z) by angle 2|h(z)| h.
    ux = hc[0] + q * hq[0] + p * hp[0]
    uy = hc[1] + q * hq[1] + p * hp[1]
    uz = hc[2] + q * hq[2] + p * hp[2]
    r = np.sqrt(ux * ux + uy * uy + uz * uz)
    safe = np.where(r > 0.0, r, 1.0)
    kx, ky, kz = ux / safe, uy / safe, uz / safe
    th = 2.0 * r * h
    c, s = np.cos(th), np.sin(th)
    kdn = kx * nx + ky * ny + kz * nz
    cxx = ky * nz - kz * ny
    cxy = kz * nx - kx * nz
    cxz = kx * ny - ky * nx
    om = 1.0 - c
    nxn = nx * c + cxx * s + kx * kdn * om
    nyn = ny * c + cxy * s + ky * kdn * om
    nzn = nz * c + cxz * s + kz * kdn * om
    nx[...] = nxn
    ny[...] = nyn
    nz[...] = nzn


def _strang(q, p, nx, ny, nz, h, eps_z, omega, hc, hq, hp, g0q, g0p):
    _zstep(q, p, nx, ny, nz, 0.5 * h, eps_z, omega, hc, hq, hp, g0q, g0p)
    _nstep(q, p, nx, ny, nz, h, hc, hq, hp)
    _zstep(q, p, nx, ny, nz, 0.5 * h, eps_z, omega, hc, hq, hp, g0q, g0p)


def advance_coupled(q, p, nx, ny, nz, n_steps, dt, eps_z, omega, hc, hq, hp, g0q, g0p):
    """Advance the coupled (or, with eps_z = 0, decoupled) extended flow.

    Order-4 composition of exact affine z-steps and exact spin
    rotations.  Arrays are 1d float64 and share a common length.
    """
    hc = np.asarray(hc, dtype=float)
    hq = np.asarray(hq, dtype=float)
    hp = np.asarray(hp, dtype=float)
    for _ in range(n_steps):
        _strang(q, p, nx, ny, nz, _W1 * dt, eps_z, omega, hc, hq, hp, g0q, g0p)
        _strang(q, p, nx, ny, nz, _W0 * dt, eps_z, omega, hc, hq, hp, g0q, g0p)
        _strang(q, p, nx, ny, nz, _W1 * dt, eps_z, omega, hc, hq, hp, g0q, g0p)


def bump_chi(u):
    """C-infinity cutoff: 1 for u <= 0, 0 for u >= 1.  Returns (chi, dchi/du)."""
    u = np.asarray(u, dtype=float)
    chi = np.ones_like(u)
    dchi = np.zeros_like(u)
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    a = np.exp(-1.0 / (1.0 - um))
    b = np.exp(-1.0 / um)
    den = a + b
    chi[mid] = a / den
    dchi[mid] = -a * b * (1.0 / (1.0 - um) ** 2 + 1.0 / um**2) / den**2
    chi[u >= 1.0] = 0.0
    return chi, dchi


def sg_field(q, code, par0, par1, par2):
    """Magnetic profile b(q) and derivative b'(q).

    code 0: b = par0 * q on |q| <= par1, smoothly cut off by |q| = par2.
    code 1: b = par0 * sin(q), same cutoff.
    """
    q = np.asarray(q, dtype=float)
    u = (np.abs(q) - par1) / (par2 - par1)
    chi, dchi = bump_chi(u)
    dchi_dq = dchi * np.sign(q) / (par2 - par1)
    if code == 0:
        b = par0 * q * chi
        db = par0 * (chi + q * dchi_dq)
    else:
        b = par0 * np.sin(q) * chi
        db = par0 * (np.cos(q) * chi + np.sin(q) * dchi_dq)
    return b, db


def _sg_strang(q1, p1, nx, ny, nz, h, eps, code, par0, par1, par2):
    q1 += 0.5 * h * p1
    b, db = sg_field(q1, code, par0, par1, par2)
    p1 += h * eps * (_SQRT3 / 2.0) * db * nz
    phi = -b * h
    c, s = np.cos(phi), np.sin(phi)
    nxn = nx * c - ny * s
    nyn = nx * s + ny * c
    nx[...] = nxn
    ny[...] = nyn
    q1 += 0.5 * h * p1


def advance_sg(q1, p1, nx, ny, nz, n_steps, dt, eps, code, par0, par1, par2):
    """Advance the reduced Stern-Gerlach flow along the field axis.

    dq1 = p1, dp1 = eps (sqrt3/2) b'(q1) n3, dn = -b(q1) e3 ^ n.
    The transverse coordinates are free and handled by the caller.
    """
    for _ in range(n_steps):
        _sg_strang(q1, p1, nx, ny, nz, _W1 * dt, eps, code, par0, par1, par2)
        _sg_strang(q1, p1, nx, ny, nz, _W0 * dt, eps, code, par0, par1, par2)
        _sg_strang(q1, p1, nx, ny, nz, _W1 * dt, eps, code, par0, par1, par2)


def _var_rhs(y, eps, omega, hc, hq, hp, g0q, g0p):
    d = np.empty(15)
    q, p = y[0], y[1]
    n = y[2:5]
    Z = y[5:9].reshape(2, 2)
    N = y[9:15].reshape(3, 2)
    h = hc + q * hq + p * hp
    d[0] = p + eps * (g0p + _SQRT3 * (hp @ n))
    d[1] = -(omega**2) * q - eps * (g0q + _SQRT3 * (hq @ n))
    d[2:5] = 2.0 * np.cross(h, n)
    dZ = np.empty((2, 2))
    dN = np.empty((3, 2))
    for k in range(2):
        dZ[0, k] = Z[1, k] + eps * _SQRT3 * (hp @ N[:, k])
        dZ[1, k] = -(omega**2) * Z[0, k] - eps * _SQRT3 * (hq @ N[:, k])
        dN[:, k] = 2.0 * np.cross(h, N[:, k]) + 2.0 * np.cross(
            hq * Z[0, k] + hp * Z[1, k], n
        )
    d[5:9] = dZ.ravel()
    d[9:15] = dN.ravel()
    return d


def variational_rk4(y0, n_steps, dt, eps, omega, hc, hq, hp, g0q, g0p, record_every, out):
    """RK4 integration of the extended flow with its first variation.

    State layout: [q, p, n(3), Z'(2x2 row-major), N'(3x2 row-major)].
    Records into `out` every `record_every` steps (plus the final
    state); returns the number of rows written.
    """
    hc = np.asarray(hc, dtype=float)
    hq = np.asarray(hq, dtype=float)
    hp = np.asarray(hp, dtype=float)
    y = np.array(y0, dtype=float)
    m = 0
    out[m] = y
    m += 1
    for k in range(n_steps):
        k1 = _var_rhs(y, eps, omega, hc, hq, hp, g0q, g0p)
        k2 = _var_rhs(y + 0.5 * dt * k1, eps, omega, hc, hq, hp, g0q, g0p)
        k3 = _var_rhs(y + 0.5 * dt * k2, eps, omega, hc, hq, hp, g0q, g0p)
        k4 = _var_rhs(y + dt * k3, eps, omega, hc, hq, hp, g0q, g0p)
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            out[m] = y
            m += 1
    return m
