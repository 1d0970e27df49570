"""Extended phase-space flows on R^2 x S^2.

The classical system couples a planar orbit z = (q, p) to a unit spin
vector n.  Hamiltonians have the structure

    h = h0(z) + eps * (h0_affine(z) + sqrt(3) hvec(z) . n)

with h0 either harmonic, h0 = (p^2 + omega^2 q^2)/2, or the reduced
field-gradient form h0 = p^2/2 with hvec = -(b(q)/2) e3.  The flow is

    dq = d_p h,  dp = -d_q h,  dn = 2 hvec(z) ^ n,

integrated by an order-4 composition of exact substeps (see kernels).
Setting the back-reaction off freezes eps inside the z-equations only;
the spin still precesses about the decoupled orbit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "ModelSpec",
    "ExtendedState",
    "FlowResult",
    "VariationalState",
    "VariationalResult",
    "hamiltonian_vector_field",
    "integrate_flow",
    "integrate_decoupled",
    "integrate_variational",
    "variational_trajectory",
    "advance_ensemble",
    "energy",
]

SQRT3 = np.sqrt(3.0)

_PROFILE_CODES = {"plateau-linear": 0, "sine": 1}


def _vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(3)
    return arr


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the coupled model.

    h_c, h_q, h_p give the affine spin field hvec(z) = h_c + q h_q + p h_p;
    h0_affine = (c, cq, cp) is the scalar subprincipal part c + cq q + cp p.
    A non-None sg_profile switches h0 to p^2/2 and replaces the spin field
    by hvec = -(b(q)/2) e3 with b drawn from the named profile.
    """

    epsilon: float
    omega: float = 1.0
    h_c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    h_q: np.ndarray = field(default_factory=lambda: np.zeros(3))
    h_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    h0_affine: tuple = (0.0, 0.0, 0.0)
    sg_profile: tuple | None = None  # (name, par0, flat_radius, support_radius)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.sg_profile is None and not self.omega > 0:
            raise ValueError("omega must be positive in harmonic mode")
        for name in ("h_c", "h_q", "h_p"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        object.__setattr__(self, "h0_affine", tuple(float(c) for c in self.h0_affine))
        if self.sg_profile is not None:
            name, p0, p1, p2 = self.sg_profile
            if name not in _PROFILE_CODES:
                raise ValueError(f"unknown profile {name!r}")
            if not 0 < p1 < p2:
                raise ValueError("profile radii must satisfy 0 < flat < support")
            object.__setattr__(
                self, "sg_profile", (name, float(p0), float(p1), float(p2))
            )

    @property
    def mode(self) -> str:
        return "harmonic" if self.sg_profile is None else "stern-gerlach"

    @classmethod
    def rabi(cls, epsilon: float, omega: float = 1.0) -> "ModelSpec":
        """Constant z-field plus position-coupled transverse field."""
        return cls(
            epsilon=epsilon,
            omega=omega,
            h_c=(0.0, 0.0, 0.5),
            h_q=(0.5, 0.0, 0.0),
        )

    def profile_code(self) -> tuple:
        name, p0, p1, p2 = self.sg_profile
        return _PROFILE_CODES[name], p0, p1, p2

    def field(self, q, p):
        """Spin field hvec(z); broadcasts over array-valued q, p."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.sg_profile is not None:
            code, p0, p1, p2 = self.profile_code()
            b, _ = kernels.sg_field(q, code, p0, p1, p2)
            out = np.zeros(np.broadcast(q, p).shape + (3,))
            out[..., 2] = -0.5 * b
            return out
        return (
            self.h_c
            + q[..., None] * self.h_q
            + p[..., None] * self.h_p
        )

    def cache_key(self) -> tuple:
        return (
            round(self.epsilon, 15),
            self.omega,
            tuple(self.h_c),
            tuple(self.h_q),
            tuple(self.h_p),
            self.h0_affine,
            self.sg_profile,
        )


@dataclass(frozen=True)
class ExtendedState:
    """A point (q, p, n) with n on the unit sphere."""

    q: float
    p: float
    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "p", float(self.p))
        n = _vec3(self.n)
        r = np.linalg.norm(n)
        if abs(r - 1.0) > 1e-9:
            raise ValueError(f"spin must be a unit vector, got |n| = {r!r}")
        object.__setattr__(self, "n", n)


def energy(m: ModelSpec, q, p, n):
    """Total symbol energy h(q, p, n); broadcasts over leading axes of n."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = np.asarray(n, dtype=float)
    if m.sg_profile is None:
        h0 = 0.5 * (p**2 + m.omega**2 * q**2)
        c0, cq, cp = m.h0_affine
        sub = c0 + cq * q + cp * p
    else:
        h0 = 0.5 * p**2
        sub = 0.0
    hv = m.field(q, p)
    return h0 + m.epsilon * (sub + SQRT3 * np.sum(hv * n, axis=-1))


def hamiltonian_vector_field(m: ModelSpec, s: ExtendedState) -> tuple:
    """Right-hand side (dq, dp, dn) of the coupled flow at a state."""
    hv = m.field(s.q, s.p)
    dn = 2.0 * np.cross(hv, s.n)
    if m.sg_profile is None:
        _, cq, cp = m.h0_affine
        dq = s.p + m.epsilon * (cp + SQRT3 * (m.h_p @ s.n))
        dp = -m.omega**2 * s.q - m.epsilon * (cq + SQRT3 * (m.h_q @ s.n))
    else:
        code, p0, p1, p2 = m.profile_code()
        _, db = kernels.sg_field(np.asarray(s.q), code, p0, p1, p2)
        dq = s.p
        dp = m.epsilon * (SQRT3 / 2.0) * float(db) * s.n[2]
    return float(dq), float(dp), dn


def default_dt(m: ModelSpec, span: float = 5.0) -> float:
    """Step size heuristic: resolve the orbit and the spin precession."""
    if m.sg_profile is None:
        hmax = np.linalg.norm(m.h_c) + span * (
            np.linalg.norm(m.h_q) + np.linalg.norm(m.h_p)
        )
        dt = min(0.01, 0.01 / m.omega)
    else:
        code, p0, p1, p2 = m.profile_code()
        qs = np.linspace(-p2, p2, 512)
        b, _ = kernels.sg_field(qs, code, p0, p1, p2)
        hmax = 0.5 * float(np.max(np.abs(b)))
        dt = 0.01
    if hmax > 0:
        dt = min(dt, 0.1 / (2.0 * hmax))
    return dt


def advance_ensemble(m, q, p, nx, ny, nz, duration, dt, coupled=True):
    """Advance flat state arrays in place by `duration` (sign sets direction)."""
    if duration == 0.0:
        return
    n_steps = max(1, int(np.ceil(abs(duration) / dt)))
    h = duration / n_steps
    if m.sg_profile is None:
        eps_z = m.epsilon if coupled else 0.0
        _, cq, cp = m.h0_affine
        kernels.advance_coupled(
            q, p, nx, ny, nz, n_steps, h, eps_z, m.omega,
            m.h_c, m.h_q, m.h_p, cq, cp,
        )
    else:
        code, p0, p1, p2 = m.profile_code()
        eps = m.epsilon if coupled else 0.0
        kernels.advance_sg(q, p, nx, ny, nz, n_steps, h, eps, code, p0, p1, p2)


@dataclass
class FlowResult:
    """Sampled trajectory with conservation diagnostics."""

    times: np.ndarray  # (S,) strictly increasing in |t| from 0
    q: np.ndarray
    p: np.ndarray
    n: np.ndarray  # (S, 3)
    energy: np.ndarray
    n_norm_drift: float

    def state(self, i: int) -> ExtendedState:
        n = self.n[i] / np.linalg.norm(self.n[i])
        return ExtendedState(self.q[i], self.p[i], n)

    @property
    def final(self) -> ExtendedState:
        return self.state(len(self.times) - 1)

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))


def _integrate(m, s0, t, dt, n_records, coupled) -> FlowResult:
    if dt is None:
        dt = default_dt(m, span=max(5.0, abs(s0.q) + abs(s0.p)))
    if t == 0.0:
        times = np.array([0.0])
        samples = [(s0.q, s0.p, s0.n.copy())]
    else:
        n_steps = max(1, int(np.ceil(abs(t) / dt)))
        rec = np.unique(np.linspace(0, n_steps, min(n_records, n_steps) + 1).astype(int))
        times = rec * (t / n_steps)
        q = np.array([s0.q])
        p = np.array([s0.p])
        nx = np.array([s0.n[0]])
        ny = np.array([s0.n[1]])
        nz = np.array([s0.n[2]])
        samples = [(q[0], p[0], np.array([nx[0], ny[0], nz[0]]))]
        h = t / n_steps
        for a, b in zip(rec[:-1], rec[1:]):
            if m.sg_profile is None:
                eps_z = m.epsilon if coupled else 0.0
                _, cq, cp = m.h0_affine
                kernels.advance_coupled(
                    q, p, nx, ny, nz, int(b - a), h, eps_z, m.omega,
                    m.h_c, m.h_q, m.h_p, cq, cp,
                )
            else:
                code, p0, p1, p2 = m.profile_code()
                eps = m.epsilon if coupled else 0.0
                kernels.advance_sg(q, p, nx, ny, nz, int(b - a), h, eps, code, p0, p1, p2)
            samples.append((q[0], p[0], np.array([nx[0], ny[0], nz[0]])))
    qs = np.array([s[0] for s in samples])
    ps = np.array([s[1] for s in samples])
    ns = np.array([s[2] for s in samples])
    drift = float(np.max(np.abs(np.linalg.norm(ns, axis=1) - 1.0)))
    en = energy(m, qs, ps, ns) if coupled else np.zeros(len(qs))
    return FlowResult(times=times, q=qs, p=ps, n=ns, energy=en, n_norm_drift=drift)


def integrate_flow(m: ModelSpec, s0: ExtendedState, t: float,
                   dt: float | None = None, n_records: int = 64) -> FlowResult:
    """Integrate the coupled flow from s0 to time t (t < 0 runs backward)."""
    return _integrate(m, s0, t, dt, n_records, coupled=True)


def integrate_decoupled(m: ModelSpec, s0: ExtendedState, t: float,
                        dt: float | None = None, n_records: int = 64) -> FlowResult:
    """Same stepping with the spin back-reaction on z switched off."""
    return _integrate(m, s0, t, dt, n_records, coupled=False)


@dataclass(frozen=True)
class VariationalState:
    """Extended state with the Jacobian blocks of the flow map.

    dZ = d(q,p)/d(q0,p0) (2x2), dN = dn/d(q0,p0) (3x2); spin-direction
    derivatives are not tracked.
    """

    state: ExtendedState
    dZ: np.ndarray = field(default_factory=lambda: np.eye(2))
    dN: np.ndarray = field(default_factory=lambda: np.zeros((3, 2)))

    def pack(self) -> np.ndarray:
        s = self.state
        return np.concatenate(
            [[s.q, s.p], s.n, np.asarray(self.dZ, float).ravel(),
             np.asarray(self.dN, float).ravel()]
        )

    @classmethod
    def unpack(cls, y) -> "VariationalState":
        n = y[2:5] / np.linalg.norm(y[2:5])
        return cls(
            state=ExtendedState(y[0], y[1], n),
            dZ=y[5:9].reshape(2, 2).copy(),
            dN=y[9:15].reshape(3, 2).copy(),
        )


@dataclass
class VariationalResult:
    times: np.ndarray  # (R,)
    y: np.ndarray  # (R, 15)

    @property
    def Z(self) -> np.ndarray:
        return self.y[:, 0:2]

    @property
    def n(self) -> np.ndarray:
        return self.y[:, 2:5]

    @property
    def dZ(self) -> np.ndarray:
        return self.y[:, 5:9].reshape(-1, 2, 2)

    @property
    def dN(self) -> np.ndarray:
        return self.y[:, 9:15].reshape(-1, 3, 2)

    def spectral_norms(self) -> tuple:
        """(||dZ||, ||dN||) spectral norms at every record."""
        zn = np.linalg.norm(self.dZ, ord=2, axis=(1, 2))
        nn = np.linalg.norm(self.dN, ord=2, axis=(1, 2))
        return zn, nn

    @property
    def final(self) -> VariationalState:
        return VariationalState.unpack(self.y[-1])


def variational_trajectory(m: ModelSpec, v0: VariationalState, t: float,
                           dt: float | None = None,
                           record_every: int = 10) -> VariationalResult:
    """Integrate state and first variation jointly with RK4 (harmonic mode)."""
    if m.sg_profile is not None:
        raise ValueError("variational integration is for the harmonic mode")
    if dt is None:
        dt = min(1e-3, default_dt(m))
    if t == 0.0:
        return VariationalResult(np.array([0.0]), v0.pack()[None, :])
    n_steps = max(1, int(np.ceil(abs(t) / dt)))
    h = t / n_steps
    n_rec = n_steps // record_every + 3
    out = np.empty((n_rec, 15))
    _, cq, cp = m.h0_affine
    m_used = kernels.variational_rk4(
        v0.pack(), n_steps, h, m.epsilon, m.omega,
        m.h_c, m.h_q, m.h_p, cq, cp, record_every, out,
    )
    idx = np.arange(0, n_steps + 1, record_every)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    times = idx * h
    return VariationalResult(times=times[:m_used], y=out[:m_used].copy())


def integrate_variational(m: ModelSpec, v0: VariationalState, t: float,
                          dt: float | None = None) -> VariationalState:
    """Final variational state of the joint integration."""
    return variational_trajectory(m, v0, t, dt=dt, record_every=10**9).final
