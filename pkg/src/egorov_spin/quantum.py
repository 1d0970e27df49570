"""Reference quantum dynamics: Hamiltonian assembly, propagation,
Heisenberg conjugation.

Everything is dense: problem sizes stay at desk scale and a single
Hermitian factorization per (model, grid) removes all time-integration
error from the comparisons that consume these operators.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .flows import ModelSpec
from .weyl_grid import Grid, hamiltonian_field, quantize_sigma


@dataclass
class SpinorState:
    """Two-component wavefunction sampled on the position nodes.

    Layout matches the operator blocks: the first N amplitudes are the
    spin-up component.  States are unit vectors in the plain discrete
    l2 inner product.
    """

    grid: Grid
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.complex128)
        if self.psi.shape != (2 * self.grid.N,):
            raise ValueError("spinor must have 2N amplitudes")

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def normalized(self) -> "SpinorState":
        return SpinorState(self.grid, self.psi / np.linalg.norm(self.psi))

    def expectation(self, A: np.ndarray) -> complex:
        return complex(np.vdot(self.psi, A @ self.psi))

    def components(self) -> tuple:
        N = self.grid.N
        return self.psi[:N], self.psi[N:]

    def position_density(self) -> np.ndarray:
        up, dn = self.components()
        return (np.abs(up) ** 2 + np.abs(dn) ** 2)

    def bloch_vector(self) -> np.ndarray:
        up, dn = self.components()
        s1 = 2.0 * np.real(np.vdot(up, dn))
        s2 = 2.0 * np.imag(np.vdot(up, dn))
        s3 = float(np.vdot(up, up).real - np.vdot(dn, dn).real)
        return np.array([s1, s2, s3])


def coherent_state(grid: Grid, q0: float = 0.0, p0: float = 0.0,
                   spin=(1.0, 0.0)) -> SpinorState:
    """Gaussian wave packet of width sqrt(eps) with a fixed spinor."""
    x = grid.x_nodes
    envelope = np.exp(-(x - q0) ** 2 / (2 * grid.eps)
                      + 1j * p0 * (x - q0) / grid.eps)
    chi = np.asarray(spin, dtype=np.complex128)
    if chi.shape != (2,):
        raise ValueError("spin must be a 2-spinor")
    chi = chi / np.linalg.norm(chi)
    psi = np.concatenate([chi[0] * envelope, chi[1] * envelope])
    return SpinorState(grid, psi / np.linalg.norm(psi))


def build_hamiltonian(m: ModelSpec, grid: Grid, taper: bool = False) -> np.ndarray:
    """Hermitian 2N x 2N matrix Op(h0 + eps h1).

    The polynomial symbols quantize exactly, so no boundary treatment is
    needed; the optional taper cuts the symbol near the box edge and is
    kept only for comparison runs.
    """
    H = quantize_sigma(hamiltonian_field(m, grid, taper=taper),
                       check_support=False)
    return 0.5 * (H + H.conj().T)


class Propagator:
    """Spectral factorization of one Hamiltonian, shared by all times.

    unitary(t) memoizes the most recent time so repeated conjugations
    at a common t cost two matrix products each.
    """

    def __init__(self, H: np.ndarray, grid: Grid):
        self.grid = grid
        self.eps = grid.eps
        E, V = np.linalg.eigh(H)
        self.energies = E
        self.basis = V
        self._memo_t = None
        self._memo_U = None

    def unitary(self, t: float) -> np.ndarray:
        if self._memo_t is not None and t == self._memo_t:
            return self._memo_U
        phases = np.exp(-1j * self.energies * (t / self.eps))
        U = (self.basis * phases) @ self.basis.conj().T
        self._memo_t = t
        self._memo_U = U
        return U

    def propagate(self, state: SpinorState, t: float) -> SpinorState:
        Vh_psi = self.basis.conj().T @ state.psi
        Vh_psi *= np.exp(-1j * self.energies * (t / self.eps))
        return SpinorState(state.grid, self.basis @ Vh_psi)

    def heisenberg(self, A: np.ndarray, t: float) -> np.ndarray:
        U = self.unitary(t)
        return U.conj().T @ A @ U


_PROPAGATOR_CACHE: OrderedDict = OrderedDict()
_PROPAGATOR_CAPACITY = 3


def propagator(m: ModelSpec, grid: Grid, taper: bool = False) -> Propagator:
    """Cached propagator factory; factorizations are the dominant cost."""
    key = (m.cache_key(), grid, taper)
    if key in _PROPAGATOR_CACHE:
        _PROPAGATOR_CACHE.move_to_end(key)
        return _PROPAGATOR_CACHE[key]
    prop = Propagator(build_hamiltonian(m, grid, taper=taper), grid)
    _PROPAGATOR_CACHE[key] = prop
    while len(_PROPAGATOR_CACHE) > _PROPAGATOR_CAPACITY:
        _PROPAGATOR_CACHE.popitem(last=False)
    return prop


def propagate(P: Propagator, state: SpinorState, t: float) -> SpinorState:
    return P.propagate(state, t)


def heisenberg_evolve(P: Propagator, A: np.ndarray, t: float) -> np.ndarray:
    return P.heisenberg(A, t)


def _local_fields(m: ModelSpec, x: np.ndarray):
    """Position-diagonal part (W, bvec) of the symbol; needs h_p = 0."""
    if m.sg_profile is None:
        if any(v != 0.0 for v in m.h_p):
            raise ValueError("split-step needs a position-diagonal spin field")
        c0, cq, cp = m.h0_affine
        if cp != 0.0:
            raise ValueError("split-step needs a position-diagonal h0 part")
        W = 0.5 * (m.omega * x) ** 2 + m.epsilon * (c0 + cq * x)
        b = np.array([m.epsilon * (m.h_c[j] + m.h_q[j] * x) for j in range(3)])
    else:
        from . import kernels

        code, p0, p1, p2 = m.profile_code()
        prof, _ = kernels.sg_field(x, code, p0, p1, p2)
        W = np.zeros_like(x)
        b = np.zeros((3, x.size))
        b[2] = -0.5 * m.epsilon * prof
    return W, b


def propagate_split_step(m: ModelSpec, state: SpinorState, t: float,
                         n_steps: int) -> SpinorState:
    """Strang-split reference propagation (cross-check path).

    kick(dt/2) . kinetic(dt) . kick(dt/2); the kick is the closed-form
    exponential of the position-diagonal spin matrix, the kinetic step
    a Fourier multiplier.  Second-order in dt, so only a consistency
    check against the spectral propagator.
    """
    grid = state.grid
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    dt = t / n_steps
    x = grid.x_nodes
    eps = m.epsilon

    W, b = _local_fields(m, x)
    bnorm = np.sqrt((b**2).sum(axis=0))
    theta = 0.5 * dt * bnorm / eps
    # unit axis where defined; zero-field nodes rotate by theta = 0
    with np.errstate(invalid="ignore", divide="ignore"):
        axis = np.where(bnorm > 0, b / bnorm, 0.0)
    c, s = np.cos(theta), np.sin(theta)
    phase = np.exp(-0.5j * dt * W / eps)
    k00 = phase * (c - 1j * s * axis[2])
    k01 = phase * (-1j * s * (axis[0] - 1j * axis[1]))
    k10 = phase * (-1j * s * (axis[0] + 1j * axis[1]))
    k11 = phase * (c + 1j * s * axis[2])

    p = eps * 2.0 * np.pi * np.fft.fftfreq(grid.N, d=grid.dx)
    kin = np.exp(-0.5j * dt * p**2 / eps)

    up, dn = (c.copy() for c in state.components())

    def kick(u, d):
        return k00 * u + k01 * d, k10 * u + k11 * d

    for _ in range(n_steps):
        up, dn = kick(up, dn)
        up = np.fft.ifft(kin * np.fft.fft(up))
        dn = np.fft.ifft(kin * np.fft.fft(dn))
        up, dn = kick(up, dn)
    return SpinorState(grid, np.concatenate([up, dn]))
