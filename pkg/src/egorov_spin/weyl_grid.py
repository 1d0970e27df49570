"""Discrete eps-Weyl quantization on a periodized phase-space box.

Position lives on x_j = -L + j (2L/N), momentum on the dual lattice
p_m = m (pi eps / L), m = -N/2 .. N/2 - 1.  Symbols are sampled on the
doubled position lattice of midpoints u_s = -L + s (L/N) (2N points)
times the momentum lattice, and quantize to N x N matrices through

    A[j, j'] = G[s(j, j'), (j - j') mod N],   G = ifft_p(F),

where s(j, j') indexes the midpoint of the short path between x_j and
x_j' on the position circle: j + j' when the path stays inside the box,
(j + j' + N) mod 2N when it crosses the seam.  The map is exact on the
periodized box: functions of q alone become diag(f(x_j)), functions of
p alone become Fourier multipliers, and real symbols give Hermitian
matrices.  The inverse (Wigner) transform
scatters matrix entries back to the doubled lattice and is exact for
symbols whose momentum support stays inside the box.

Spin symbols carry four coefficient fields (a0, a) and quantize
blockwise to 2N x 2N matrices via a0 Id + a . sigma on the fiber.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fitting import fit_loglog
from .flows import ModelSpec

__all__ = [
    "Grid",
    "SymbolField",
    "GridLeakageError",
    "NumericalError",
    "PowerIterationError",
    "weyl_quantize_scalar",
    "wigner_scalar",
    "quantize_sigma",
    "wigner_transform",
    "operator_norm",
    "hs_norm",
    "hamiltonian_field",
    "sigma_bracket",
    "commutator_defect",
    "moyal_order3_check",
    "DefectReport",
]


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its tolerance."""


class GridLeakageError(NumericalError):
    """Symbol mass on the box boundary exceeds the containment tolerance."""


class PowerIterationError(NumericalError):
    """Power iteration did not converge; carries the best estimate."""

    def __init__(self, message: str, best: float, iterations: int):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


@dataclass(frozen=True)
class Grid:
    """Phase-space box [-L, L) x [-P, P) with N position points.

    P = pi eps N / (2 L); `balanced` picks the smallest power-of-two N
    with L = P >= radius.
    """

    N: int
    L: float
    eps: float

    def __post_init__(self):
        if self.N < 64 or (self.N & (self.N - 1)) != 0:
            raise ValueError("N must be a power of two, at least 64")
        if not (self.L > 0 and self.eps > 0):
            raise ValueError("L and eps must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dp(self) -> float:
        return np.pi * self.eps / self.L

    @property
    def p_box(self) -> float:
        return 0.5 * self.N * self.dp

    @property
    def x_nodes(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def u_nodes(self) -> np.ndarray:
        """Doubled midpoint lattice carrying sampled symbols."""
        return -self.L + (self.L / self.N) * np.arange(2 * self.N)

    @property
    def p_nodes(self) -> np.ndarray:
        return self.dp * np.arange(-self.N // 2, self.N // 2)

    def meshes(self) -> tuple:
        """Broadcastable (U, P) arrays of shapes (2N, 1) and (1, N)."""
        return self.u_nodes[:, None], self.p_nodes[None, :]

    @classmethod
    def balanced(cls, eps: float, radius: float, n_min: int = 64,
                 n_max: int = 4096, margin: float = 1.25) -> "Grid":
        """Smallest power-of-two grid with L = P >= margin * radius.

        The margin keeps symbol supports away from the box edge, where
        the periodized dynamics stops matching the line flow.
        """
        r = margin * radius
        n_req = 2.0 * r**2 / (np.pi * eps)
        N = n_min
        while N < n_req:
            N *= 2
        if N > n_max:
            raise ValueError(
                f"balanced grid needs N = {N} > n_max = {n_max} "
                f"for eps = {eps}, radius = {radius}"
            )
        L = np.sqrt(np.pi * eps * N / 2.0)
        return cls(N=N, L=float(L), eps=eps)

    def taper_field(self, f0: float = 0.85, f1: float = 0.99) -> np.ndarray:
        """Smooth box cutoff, 1 inside |q|, |p| < f0 (L, P), 0 at the edges.

        Kernels of torus-quantized operators wrap around the box, so
        symbols that keep growing up to the boundary (the polynomial
        Hamiltonians) acquire O(1) matrix entries connecting opposite
        edges.  Multiplying the Hamiltonian symbol by this taper before
        quantization removes them; for symbols supported in the flat
        region nothing else changes, up to the taper tails.
        """
        from .kernels import bump_chi

        U, P = self.meshes()
        cq, _ = bump_chi((np.abs(U) / self.L - f0) / (f1 - f0))
        cp, _ = bump_chi((np.abs(P) / self.p_box - f0) / (f1 - f0))
        return cq * cp

    def sample_scalar(self, f) -> np.ndarray:
        U, P = self.meshes()
        vals = np.asarray(f(U, P), dtype=np.complex128)
        return np.broadcast_to(vals, (2 * self.N, self.N)).copy()


@dataclass
class SymbolField:
    """Sampled symbol on the doubled lattice: scalar a0 and spin part a.

    The function represented is a0(z) + sqrt(3) a(z) . n.
    """

    grid: Grid
    a0: np.ndarray  # (2N, N) complex
    a: np.ndarray  # (3, 2N, N) complex

    def __post_init__(self):
        shape = (2 * self.grid.N, self.grid.N)
        self.a0 = np.ascontiguousarray(self.a0, dtype=np.complex128)
        self.a = np.ascontiguousarray(self.a, dtype=np.complex128)
        if self.a0.shape != shape or self.a.shape != (3,) + shape:
            raise ValueError("field shapes do not match the grid")

    @classmethod
    def zero(cls, grid: Grid) -> "SymbolField":
        shape = (2 * grid.N, grid.N)
        return cls(grid, np.zeros(shape, complex), np.zeros((3,) + shape, complex))

    @classmethod
    def from_callables(cls, grid: Grid, a0=None, a=None) -> "SymbolField":
        """Build from a scalar callable and/or three component callables."""
        out = cls.zero(grid)
        if a0 is not None:
            out.a0 = grid.sample_scalar(a0)
        if a is not None:
            out.a = np.stack([grid.sample_scalar(f) for f in a])
        return out

    def __add__(self, other: "SymbolField") -> "SymbolField":
        return SymbolField(self.grid, self.a0 + other.a0, self.a + other.a)

    def __sub__(self, other: "SymbolField") -> "SymbolField":
        return SymbolField(self.grid, self.a0 - other.a0, self.a - other.a)

    def __rmul__(self, c) -> "SymbolField":
        return SymbolField(self.grid, c * self.a0, c * self.a)

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.a0))), float(np.max(np.abs(self.a))))


def _check_support(F: np.ndarray, tol: float = 1e-8, scale: float | None = None):
    if scale is None:
        scale = float(np.max(np.abs(F)))
    if scale == 0.0:
        return
    qmass = max(np.max(np.abs(F[0, :])), np.max(np.abs(F[-1, :]))) / scale
    pmass = max(np.max(np.abs(F[:, 0])), np.max(np.abs(F[:, -1]))) / scale
    if max(qmass, pmass) > tol:
        raise GridLeakageError(
            f"symbol mass on the box boundary: q-edge {qmass:.3e}, "
            f"p-edge {pmass:.3e} (tol {tol:.1e}); enlarge the box",
        )


@lru_cache(maxsize=4)
def _pair_indices(N: int) -> tuple:
    """Midpoint row and displacement class of each matrix entry (j, j').

    The row is the midpoint of the short path between x_j and x_j' on
    the position circle; when the pair is separated by more than half
    the box the path crosses the seam and the midpoint shifts by L.
    The returned arrays are shared; callers must not write into them.
    """
    jj = np.arange(N)
    diff = jj[:, None] - jj[None, :]
    S = (jj[:, None] + jj[None, :] + N * (np.abs(diff) > N // 2)) % (2 * N)
    return S, diff % N


def weyl_quantize_scalar(f, grid: Grid, check_support: bool = True,
                         scale: float | None = None) -> np.ndarray:
    """Quantize a scalar symbol to an N x N matrix.

    `f` is a callable f(U, P) or a (2N, N) array sampled on the doubled
    lattice with monotone momentum ordering.  With check_support the
    boundary mass must stay below 1e-8 relative to the peak (or to
    `scale` when the field is one component of a larger object); disable
    it for polynomial symbols, which quantize exactly regardless.
    """
    N = grid.N
    F = grid.sample_scalar(f) if callable(f) else np.asarray(f, dtype=np.complex128)
    if F.shape != (2 * N, N):
        raise ValueError(f"sampled symbol must have shape {(2 * N, N)}")
    if check_support:
        _check_support(F, scale=scale)
    G = np.fft.ifft(np.fft.ifftshift(F, axes=1), axis=1)
    S, D = _pair_indices(N)
    return np.ascontiguousarray(G[S, D])


def wigner_scalar(A: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of weyl_quantize_scalar, back onto the doubled lattice.

    A matrix determines only the parity class d = j - j' (mod N) of each
    midpoint row, so quantization aliases momenta p and p +- P.  The
    reconstruction resolves the alias in favor of the inner half of the
    box and is exact for symbols supported in |p| < P/2; outside that
    band the returned symbol is zero.
    """
    N = grid.N
    if A.shape != (N, N):
        raise ValueError(f"matrix must have shape {(N, N)}")
    S, D = _pair_indices(N)
    G = np.zeros((2 * N, N), dtype=np.complex128)
    G[S, D] = A
    F = 2.0 * np.fft.fftshift(np.fft.fft(G, axis=1), axes=1)
    m = np.arange(-N // 2, N // 2)
    F[:, np.abs(m) >= N // 4] = 0.0
    return F


def quantize_sigma(f: SymbolField, check_support: bool = True) -> np.ndarray:
    """Quantize a spin symbol field to a 2N x 2N block matrix.

    Op(a0 + sqrt(3) a . n) = K0 x Id + sum_j Kj x sigma_j with the spin
    index outermost.
    """
    scale = f.max_abs()
    K = [weyl_quantize_scalar(f.a0, f.grid, check_support, scale=scale)]
    K += [weyl_quantize_scalar(f.a[j], f.grid, check_support, scale=scale)
          for j in range(3)]
    return np.block([[K[0] + K[3], K[1] - 1j * K[2]],
                     [K[1] + 1j * K[2], K[0] - K[3]]])


def wigner_transform(A: np.ndarray, grid: Grid) -> SymbolField:
    """Spin symbol of a 2N x 2N matrix, blockwise inverse of quantize_sigma."""
    N = grid.N
    if A.shape != (2 * N, 2 * N):
        raise ValueError(f"matrix must have shape {(2 * N, 2 * N)}")
    A11, A12 = A[:N, :N], A[:N, N:]
    A21, A22 = A[N:, :N], A[N:, N:]
    K0 = 0.5 * (A11 + A22)
    K3 = 0.5 * (A11 - A22)
    K1 = 0.5 * (A12 + A21)
    K2 = 0.5j * (A12 - A21)
    a0 = wigner_scalar(K0, grid)
    a = np.stack([wigner_scalar(K, grid) for K in (K1, K2, K3)])
    return SymbolField(grid, a0, a)


def hs_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A))


def operator_norm(A: np.ndarray, tol: float = 1e-3, max_iter: int = 1000,
                  seed: int = 0) -> float:
    """Spectral norm by block power iteration on A*A.

    A two-column block converges at the gap to the third singular value,
    which keeps nearly degenerate leading pairs from stalling.  Raises
    PowerIterationError (carrying the best estimate) when the relative
    change has not dropped below tol within max_iter sweeps.
    """
    rng = np.random.default_rng(seed)
    n = A.shape[1]
    V = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
    V, _ = np.linalg.qr(V)
    prev = np.inf
    est = 0.0
    for _ in range(max_iter):
        W = A @ V
        est = float(np.linalg.svd(W, compute_uv=False)[0])
        if est == 0.0:
            return 0.0
        if abs(est - prev) <= tol * est:
            return est
        prev = est
        U = (W.conj().T @ A).conj().T
        V, _ = np.linalg.qr(U)
    raise PowerIterationError(
        f"power iteration stalled at {est:.6e} after {max_iter} sweeps",
        best=est, iterations=max_iter,
    )


def state_cutoff(grid: Grid, cut: tuple | None = None) -> np.ndarray:
    """Smooth position cutoff vector over x_nodes: 1 inside |x| < cut[0].

    Comparisons against symbols transported by the line flow are only
    meaningful on states supported where box and line dynamics agree:
    near the edges the box wraps trajectories and the boundary taper
    (when used) alters them.  Residual norms are therefore taken as
    || Pi D Pi || with Pi = diag(cutoff), the norm over states supported
    in the resolved region.  `cut` = (c0, c1) in position units; default
    (0.8, 0.92) L.  c0 must cover the symbol support and its flow sweep;
    L - c1 controls the boundary tail picked up at the transition.
    """
    from .kernels import bump_chi

    if cut is None:
        cut = (0.80 * grid.L, 0.92 * grid.L)
    c0, c1 = cut
    if not 0 < c0 < c1 <= grid.L:
        raise ValueError("cut radii must satisfy 0 < c0 < c1 <= L")
    chi, _ = bump_chi((np.abs(grid.x_nodes) - c0) / (c1 - c0))
    return chi


def physical_norm(D: np.ndarray, grid: Grid, cut: tuple | None = None,
                  tol: float = 1e-3, seed: int = 0) -> float:
    """Spectral norm of Pi D Pi, Pi the smooth state cutoff (spin-aware)."""
    chi = state_cutoff(grid, cut)
    n = D.shape[0]
    if n == 2 * grid.N:
        chi = np.concatenate([chi, chi])
    elif n != grid.N:
        raise ValueError("operator size does not match the grid")
    return operator_norm(chi[:, None] * D * chi[None, :], tol=tol, seed=seed)


def _dq(g: np.ndarray, grid: Grid) -> np.ndarray:
    k = 2j * np.pi * np.fft.fftfreq(2 * grid.N, d=grid.L / grid.N)
    return np.fft.ifft(k[:, None] * np.fft.fft(g, axis=0), axis=0)


def _dp(g: np.ndarray, grid: Grid) -> np.ndarray:
    k = 2j * np.pi * np.fft.fftfreq(grid.N, d=grid.dp)
    return np.fft.ifft(k[None, :] * np.fft.fft(g, axis=1), axis=1)


def grad_fields(g: np.ndarray, grid: Grid) -> tuple:
    """Spectral (d_q g, d_p g) of a sampled field on the doubled lattice."""
    return _dq(g, grid), _dp(g, grid)


def hamiltonian_field(m: ModelSpec, grid: Grid, taper: bool = False) -> SymbolField:
    """Hamiltonian symbol h0 + eps (h0_affine + sqrt3 hvec . n) on the grid.

    Every term is a polynomial in q alone or p alone, so the quantization
    is exact (diagonal plus Fourier multipliers) with no boundary
    artifacts.  The optional taper cuts the symbol off near the box edge;
    it buys nothing for these models and costs a quantization error at
    the cutoff shelf, so it is off by default.
    """
    U, P = grid.meshes()
    chi = grid.taper_field() if taper else 1.0
    out = SymbolField.zero(grid)
    if m.sg_profile is None:
        c0, cq, cp = m.h0_affine
        out.a0 = chi * (0.5 * (P**2 + (m.omega * U) ** 2)
                        + m.epsilon * (c0 + cq * U + cp * P)) * np.ones_like(U + P)
        for j in range(3):
            out.a[j] = chi * m.epsilon * (m.h_c[j] + m.h_q[j] * U + m.h_p[j] * P)
    else:
        from . import kernels

        code, p0, p1, p2 = m.profile_code()
        b, _ = kernels.sg_field(grid.u_nodes, code, p0, p1, p2)
        out.a0 = chi * (0.5 * P**2 * np.ones((2 * grid.N, 1)) + 0j)
        out.a[2] = chi * (-0.5 * m.epsilon * b[:, None] * np.ones((1, grid.N)))
    return out


def sigma_bracket(m: ModelSpec, f: SymbolField) -> SymbolField:
    """Projected bracket {h, a} of the full Hamiltonian with a C1 field.

    Combines the phase-space bracket of h0 + eps h1 with the spherical
    bracket of the spin parts; exact on C1 up to spectral differentiation
    of the sampled coefficients.
    """
    if m.sg_profile is not None:
        raise ValueError("sigma_bracket expects the harmonic mode")
    grid = f.grid
    U, P = grid.meshes()
    eps = m.epsilon
    _, cq, cp = m.h0_affine

    def transport(g):
        gq, gp = grad_fields(g, grid)
        return (P + eps * cp) * gq - (m.omega**2 * U + eps * cq) * gp

    out = SymbolField.zero(grid)
    a0q, a0p = grad_fields(f.a0, grid)
    out.a0 = transport(f.a0)
    hv = [m.h_c[j] + m.h_q[j] * U + m.h_p[j] * P for j in range(3)]
    for j in range(3):
        ajq, ajp = grad_fields(f.a[j], grid)
        out.a0 += eps * (m.h_p[j] * ajq - m.h_q[j] * ajp)
        out.a[j] = transport(f.a[j]) + eps * (m.h_p[j] * a0q - m.h_q[j] * a0p)
    # spherical part: -2 hvec(z) ^ a(z)
    for j in range(3):
        k, l = (j + 1) % 3, (j + 2) % 3
        out.a[j] -= 2.0 * (hv[k] * f.a[l] - hv[l] * f.a[k])
    return out


@dataclass(frozen=True)
class DefectReport:
    eps: float
    defect: float
    corrected: float
    lhs_norm: float


def commutator_defect(m: ModelSpec, f: SymbolField,
                      correction: SymbolField | None = None,
                      cut: tuple | None = None,
                      tol: float = 1e-3) -> DefectReport:
    """Norm of (i/eps)[Op h, Op a] - Op {h, a} for a C1 field a.

    For harmonic-plus-affine h the identity has a single correction term
    at order eps involving only the fiber part of a that C1 misses; pass
    it as `correction` = P{h1, (1-P)a} to get the corrected residual.
    `cut` is forwarded to the state cutoff; it should enclose the support
    of a with a few eps / (p-width of a) to spare.
    """
    grid = f.grid
    H = quantize_sigma(hamiltonian_field(m, grid), check_support=False)
    A = quantize_sigma(f)
    lhs = (1j / m.epsilon) * (H @ A - A @ H)
    rhs = quantize_sigma(sigma_bracket(m, f))
    D = lhs - rhs
    defect = physical_norm(D, grid, cut, tol=tol)
    corrected = defect
    if correction is not None:
        Dc = D + 0.5 * m.epsilon * quantize_sigma(correction)
        corrected = physical_norm(Dc, grid, cut, tol=tol)
    return DefectReport(eps=m.epsilon, defect=defect, corrected=corrected,
                        lhs_norm=physical_norm(lhs, grid, cut, tol=tol))


def moyal_residual(grid: Grid, h0_vals: np.ndarray, a_vals: np.ndarray,
                   grad_h0: tuple, cut: tuple | None = None,
                   tol: float = 1e-3) -> float:
    """Residual norm ||[Op h0, Op a] + i eps Op {h0, a}|| on one grid.

    grad_h0 = (d_q h0, d_p h0) sampled analytically (h0 need not be
    box-supported); derivatives of a are spectral.  The residual scales
    like eps^3 for smooth symbols and vanishes to round-off for
    quadratic h0.  The bracket is quantized without the support check:
    when the symbols barely overlap it sits at the differentiation
    round-off floor and a relative edge test is meaningless.
    """
    H = weyl_quantize_scalar(h0_vals, grid, check_support=False)
    A = weyl_quantize_scalar(a_vals, grid)
    h0q, h0p = grad_h0
    aq, ap = grad_fields(np.asarray(a_vals, complex), grid)
    bracket = h0p * aq - h0q * ap
    B = weyl_quantize_scalar(bracket, grid, check_support=False)
    R = (H @ A - A @ H) + 1j * grid.eps * B
    return physical_norm(R, grid, cut, tol=tol)


@dataclass(frozen=True)
class MoyalReport:
    eps: tuple
    residual: tuple
    slope: float


def moyal_order3_check(h0, grad_h0, a, eps_list, N: int = 1024,
                       L: float = 3.0, cut: tuple = (1.2, 1.7),
                       floor: float = 1e-9, tol: float = 1e-3) -> MoyalReport:
    """Fit the eps-scaling of the first-order Weyl commutator remainder.

    h0, a are callables (U, P) -> values; grad_h0(U, P) -> (d_q h0,
    d_p h0) analytic.  Each eps gets its own dual grid on a fixed box.
    The remainder of [Op h0, Op a] = -i eps Op {h0, a} + R is third
    order for smooth symbols; slope is fitted above 10x floor and a
    FitError (carrying the residuals) signals that every point sits on
    the floor, as happens for quadratic h0.
    """
    eps_list = tuple(float(e) for e in eps_list)
    res = []
    for eps in eps_list:
        grid = Grid(N=N, L=L, eps=eps)
        U, P = grid.meshes()
        res.append(moyal_residual(grid, h0(U, P), a(U, P), grad_h0(U, P),
                                  cut=cut, tol=tol))
    slope, _, _ = fit_loglog(eps_list, res, floor=floor)
    return MoyalReport(eps=eps_list, residual=tuple(res), slope=slope)
