"""Closed-form Stratonovich-Weyl calculus for spin-1/2.

The symbol space is C1(S^2), the four-dimensional space of functions
n |-> a0 + sqrt(3) a . n on the unit sphere.  C1 is in one-to-one
correspondence with complex 2x2 matrices via

    quantize:    a0 + sqrt(3) a . n   ->   a0 * Id + a . sigma
    dequantize:  M -> (tr M / 2, tr(M sigma_j) / 2)

and carries an exact star product and Poisson bracket, both given in
closed form on the coefficients.  Everything in this module is exact
up to floating-point round-off; quadrature enters only through the
projection of general sphere functions onto C1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SQRT3",
    "SIGMA",
    "SpinSymbol",
    "SphereQuadrature",
    "sw_kernel",
    "quantize_spin",
    "dequantize_spin",
    "project_C1",
    "star_spin",
    "poisson_s2",
    "pauli_vector",
    "default_quadrature",
    "random_symbol",
]

SQRT3 = np.sqrt(3.0)

SIGMA = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=np.complex128,
)

_ID2 = np.eye(2, dtype=np.complex128)


def pauli_vector(v) -> np.ndarray:
    """Return v . sigma for a length-3 coefficient vector v."""
    v = np.asarray(v, dtype=np.complex128)
    return v[0] * SIGMA[0] + v[1] * SIGMA[1] + v[2] * SIGMA[2]


@dataclass(frozen=True)
class SpinSymbol:
    """Element of C1(S^2): the function n |-> a0 + sqrt(3) a . n.

    Coefficients may be complex; symbols of Hermitian matrices have
    real a0 and a.
    """

    a0: complex
    a: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.complex128))

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=np.complex128).reshape(3)
        object.__setattr__(self, "a", arr)
        object.__setattr__(self, "a0", complex(self.a0))

    def __call__(self, n) -> np.ndarray:
        """Evaluate the symbol at sphere points n (shape (..., 3))."""
        n = np.asarray(n, dtype=float)
        return self.a0 + SQRT3 * (n @ self.a)

    def __add__(self, other: "SpinSymbol") -> "SpinSymbol":
        return SpinSymbol(self.a0 + other.a0, self.a + other.a)

    def __sub__(self, other: "SpinSymbol") -> "SpinSymbol":
        return SpinSymbol(self.a0 - other.a0, self.a - other.a)

    def __rmul__(self, c) -> "SpinSymbol":
        return SpinSymbol(c * self.a0, c * self.a)

    @property
    def is_real(self) -> bool:
        return abs(self.a0.imag) == 0.0 and not self.a.imag.any()

    def max_abs(self) -> float:
        return max(abs(self.a0), float(np.max(np.abs(self.a))))


def sw_kernel(n) -> np.ndarray:
    """Stratonovich-Weyl kernel (1/2)(Id + sqrt(3) n . sigma) at a unit vector n."""
    n = np.asarray(n, dtype=float).reshape(3)
    r = np.linalg.norm(n)
    if abs(r - 1.0) > 1e-10:
        raise ValueError(f"kernel point must be a unit vector, got |n| = {r!r}")
    return 0.5 * (_ID2 + SQRT3 * pauli_vector(n))


def quantize_spin(s: SpinSymbol) -> np.ndarray:
    """Quantize a C1 symbol to a 2x2 matrix: a0 * Id + a . sigma."""
    return s.a0 * _ID2 + pauli_vector(s.a)


def dequantize_spin(M) -> SpinSymbol:
    """Symbol of a 2x2 matrix, a0 = tr(M)/2 and a_j = tr(M sigma_j)/2."""
    M = np.asarray(M, dtype=np.complex128)
    a0 = 0.5 * np.trace(M)
    a = np.array([0.5 * np.trace(M @ SIGMA[j]) for j in range(3)])
    return SpinSymbol(a0, a)


def star_spin(a: SpinSymbol, b: SpinSymbol) -> SpinSymbol:
    """Star product on C1, the symbol of the matrix product.

    (a * b) = (a0 b0 + a.b) + sqrt(3) (a0 b + b0 a + i a^b) . n
    """
    cross = np.cross(a.a, b.a)
    return SpinSymbol(
        a.a0 * b.a0 + a.a @ b.a,
        a.a0 * b.a + b.a0 * a.a + 1j * cross,
    )


def poisson_s2(a: SpinSymbol, b: SpinSymbol) -> SpinSymbol:
    """Spherical Poisson bracket of two C1 symbols.

    {a, b} = -2 sqrt(3) (a ^ b) . n, i.e. coefficients (0, -2 a^b).
    It satisfies [Op a, Op b] = -i Op {a, b}.
    """
    return SpinSymbol(0.0, -2.0 * np.cross(a.a, b.a))


@dataclass(frozen=True)
class SphereQuadrature:
    """Product quadrature on S^2: Gauss-Legendre in cos(theta), trapezoid in phi.

    Exact for spherical polynomials up to the stated degree; weights sum
    to 4 pi.
    """

    nodes: np.ndarray  # (K, 3) unit vectors
    weights: np.ndarray  # (K,) positive, sum 4 pi
    degree: int

    @classmethod
    def build(cls, n_theta: int = 6, n_phi: int = 12) -> "SphereQuadrature":
        x, wx = np.polynomial.legendre.leggauss(n_theta)  # cos(theta) in [-1, 1]
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        wphi = 2.0 * np.pi / n_phi
        ct = np.repeat(x, n_phi)
        st = np.sqrt(1.0 - ct**2)
        ph = np.tile(phi, n_theta)
        nodes = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
        weights = np.repeat(wx, n_phi) * wphi
        degree = min(2 * n_theta - 1, n_phi - 1)
        return cls(nodes=nodes, weights=weights, degree=degree)

    def integrate(self, values) -> complex:
        return np.asarray(values) @ self.weights


_DEFAULT_QUAD = None


def default_quadrature() -> SphereQuadrature:
    global _DEFAULT_QUAD
    if _DEFAULT_QUAD is None:
        _DEFAULT_QUAD = SphereQuadrature.build()
    return _DEFAULT_QUAD


def project_C1(f, quad: SphereQuadrature | None = None) -> SpinSymbol:
    """Project a function on S^2 onto C1.

    a0 = (1/4pi) int f dn,  a = (sqrt(3)/4pi) int n f dn.

    `f` may be a callable taking an (K, 3) array of unit vectors, or an
    array of values already sampled at the quadrature nodes.  Idempotent
    on C1 inputs up to quadrature exactness.
    """
    if quad is None:
        quad = default_quadrature()
    if np.any(quad.weights <= 0):
        raise ValueError("quadrature weights must be positive")
    vals = np.asarray(f(quad.nodes) if callable(f) else f, dtype=np.complex128)
    if vals.shape != (len(quad.weights),):
        raise ValueError("sampled values do not match the quadrature nodes")
    wf = quad.weights * vals
    a0 = wf.sum() / (4.0 * np.pi)
    a = SQRT3 / (4.0 * np.pi) * (wf @ quad.nodes)
    return SpinSymbol(a0, a)


def random_symbol(rng: np.random.Generator, hermitian: bool = True) -> SpinSymbol:
    """Random C1 symbol with O(1) coefficients, for property checks."""
    if hermitian:
        return SpinSymbol(rng.standard_normal(), rng.standard_normal(3))
    re = rng.standard_normal(4)
    im = rng.standard_normal(4)
    return SpinSymbol(re[0] + 1j * im[0], re[1:] + 1j * im[1:])
