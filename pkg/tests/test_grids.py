import numpy as np
import pytest

from egorov_spin import (
    FitError,
    Grid,
    GridLeakageError,
    ModelSpec,
    PowerIterationError,
    SymbolField,
    build_hamiltonian,
    commutator_defect,
    grad_fields,
    hs_norm,
    moyal_order3_check,
    moyal_residual,
    operator_norm,
    physical_norm,
    quantize_sigma,
    state_cutoff,
    weyl_quantize_scalar,
    wigner_scalar,
    wigner_transform,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(N=128, L=4.0, eps=0.25)


def gauss(u, p, s2=0.25, q0=0.0, p0=0.0):
    return np.exp(-((u - q0) ** 2 + (p - p0) ** 2) / (2.0 * s2))


# ------------------------------------------------------------ grid geometry

def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(N=100, L=4.0, eps=0.25)
    with pytest.raises(ValueError):
        Grid(N=32, L=4.0, eps=0.25)
    with pytest.raises(ValueError):
        Grid(N=64, L=-1.0, eps=0.25)


def test_balanced_grid_covers_radius():
    g = Grid.balanced(0.05, 2.5)
    assert g.L >= 2.5 and g.p_box >= 2.5
    assert g.N & (g.N - 1) == 0
    assert abs(g.L - g.p_box) < 1e-12
    with pytest.raises(ValueError):
        Grid.balanced(1e-6, 5.0, n_max=1024)


def test_node_lattices(grid):
    assert len(grid.x_nodes) == grid.N
    assert grid.x_nodes[0] == -grid.L
    assert abs(grid.u_nodes[1] - grid.u_nodes[0] - grid.dx / 2.0) < 1e-15
    assert abs(grid.p_nodes[0] + grid.p_box) < 1e-12


# ------------------------------------------------------------- quantization

def test_position_symbol_quantizes_to_diagonal(grid):
    f = lambda u, p: np.exp(-u**2 / 0.5)
    A = weyl_quantize_scalar(f, grid, check_support=False)
    assert np.max(np.abs(np.diag(A) - np.exp(-grid.x_nodes**2 / 0.5))) < 1e-13
    off = A - np.diag(np.diag(A))
    assert np.max(np.abs(off)) < 1e-13


def test_momentum_symbol_has_plane_wave_eigenvectors(grid):
    g = lambda u, p: np.exp(-p**2 / 0.72)
    A = weyl_quantize_scalar(g, grid, check_support=False)
    for m in (-30, -7, 0, 5, 23):
        pm = grid.dp * m
        v = np.exp(1j * pm * grid.x_nodes / grid.eps) / np.sqrt(grid.N)
        assert np.max(np.abs(A @ v - np.exp(-pm**2 / 0.72) * v)) < 1e-12


def test_real_symbol_gives_hermitian_matrix(grid):
    A = weyl_quantize_scalar(lambda u, p: gauss(u, p, q0=0.3, p0=-0.2), grid)
    assert np.max(np.abs(A - A.conj().T)) < 1e-13


def test_seam_entries_stay_at_symbol_tail_level(grid):
    # entries connecting opposite box edges take the symbol value at the
    # wrapped midpoint; a centered envelope leaves them at its far tail
    A = weyl_quantize_scalar(lambda u, p: gauss(u, p, q0=0.3, p0=-0.2), grid)
    scale = np.max(np.abs(A))
    assert abs(A[0, -1]) / scale < 1e-8
    assert abs(A[-1, 0]) / scale < 1e-8


def test_wigner_round_trip(grid):
    F = grid.sample_scalar(lambda u, p: gauss(u, p, s2=0.16))
    back = wigner_scalar(weyl_quantize_scalar(F, grid), grid)
    assert np.max(np.abs(back - F)) < 1e-10


def test_spin_block_round_trip(grid):
    f = SymbolField.from_callables(
        grid,
        a0=lambda u, p: gauss(u, p),
        a=(lambda u, p: 0.5 * gauss(u, p),
           lambda u, p: -0.2 * gauss(u, p, q0=0.4),
           lambda u, p: 0.8 * gauss(u, p, p0=-0.3)))
    back = wigner_transform(quantize_sigma(f), grid)
    assert np.max(np.abs(back.a0 - f.a0)) < 1e-10
    assert np.max(np.abs(back.a - f.a)) < 1e-10


def test_support_check_rejects_wide_symbols(grid):
    with pytest.raises(GridLeakageError):
        weyl_quantize_scalar(lambda u, p: np.exp(-(u**2 + p**2) / 50.0), grid)


def test_sampled_shape_validation(grid):
    with pytest.raises(ValueError):
        weyl_quantize_scalar(np.ones((grid.N, grid.N)), grid)
    with pytest.raises(ValueError):
        wigner_scalar(np.ones((2 * grid.N, grid.N)), grid)


def test_symbol_field_shape_validation(grid):
    with pytest.raises(ValueError):
        SymbolField(grid, np.zeros((3, 3)), np.zeros((3, 3, 3)))


# --------------------------------------------------------- derived operators

def test_quadratic_hamiltonian_commutes_with_radial_symbols(grid):
    # for h0 = (p^2 + q^2)/2 the first-order bracket rule is exact, and
    # the bracket of a radial envelope vanishes identically
    U, P = grid.meshes()
    H = weyl_quantize_scalar(0.5 * (P**2 + U**2) * np.ones_like(U + P),
                             grid, check_support=False)
    A = weyl_quantize_scalar(gauss(U, P, s2=0.16) * np.ones_like(U + P), grid)
    assert physical_norm(H @ A - A @ H, grid, tol=1e-6) < 1e-8


def test_harmonic_ladder_spectrum():
    g = Grid.balanced(0.25, 3.0)
    E = np.linalg.eigvalsh(build_hamiltonian(ModelSpec(epsilon=0.25), g))
    ladder = 0.25 * (np.arange(8) + 0.5)
    assert np.max(np.abs(E[:16] - np.repeat(ladder, 2))) < 1e-10


def test_constant_field_splits_the_ladder():
    g = Grid.balanced(0.25, 3.0)
    m = ModelSpec(epsilon=0.25, h_c=(0.0, 0.0, 0.5))
    E = np.linalg.eigvalsh(build_hamiltonian(m, g))
    ladder = 0.25 * (np.arange(8) + 0.5)
    want = np.sort(np.concatenate([ladder + 0.125, ladder - 0.125]))
    assert np.max(np.abs(E[:16] - want)) < 1e-10


def test_gradients_are_spectrally_exact(grid):
    U, P = grid.meshes()
    f = np.sin(np.pi * U / grid.L) * np.ones_like(U + P) + 0j
    dq, _ = grad_fields(f, grid)
    assert np.max(np.abs(dq - (np.pi / grid.L) * np.cos(np.pi * U / grid.L))) < 1e-12
    g = np.cos(np.pi * P / grid.p_box) * np.ones_like(U + P) + 0j
    _, dp = grad_fields(g, grid)
    assert np.max(np.abs(dp + (np.pi / grid.p_box)
                         * np.sin(np.pi * P / grid.p_box))) < 1e-12


# ---------------------------------------------------------------- norms

def test_operator_norm_matches_svd(rng):
    M = rng.standard_normal((60, 60)) + 1j * rng.standard_normal((60, 60))
    top = np.linalg.svd(M, compute_uv=False)[0]
    assert abs(operator_norm(M, tol=1e-8) - top) / top < 1e-5


def test_operator_norm_zero_matrix():
    assert operator_norm(np.zeros((8, 8))) == 0.0


def test_power_iteration_error_carries_best_estimate():
    with pytest.raises(PowerIterationError) as exc:
        operator_norm(np.eye(16), max_iter=1)
    assert exc.value.best == pytest.approx(1.0, rel=1e-6)
    assert exc.value.iterations == 1


def test_hs_norm_is_frobenius(rng):
    M = rng.standard_normal((10, 10))
    assert hs_norm(M) == pytest.approx(np.linalg.norm(M))


def test_physical_norm_discards_mass_beyond_the_cut(grid):
    k = int(np.argmin(np.abs(grid.x_nodes - 3.8)))
    D = np.zeros((grid.N, grid.N))
    D[k, k] = 1.0
    assert operator_norm(D) == pytest.approx(1.0, rel=1e-6)
    assert physical_norm(D, grid, cut=(2.0, 2.8)) < 1e-10


def test_state_cutoff_profile(grid):
    chi = state_cutoff(grid, cut=(2.0, 2.8))
    x = grid.x_nodes
    assert np.all(chi[np.abs(x) < 1.99] == 1.0)
    assert np.all(chi[np.abs(x) > 2.81] == 0.0)
    assert np.all((chi >= 0.0) & (chi <= 1.0))
    with pytest.raises(ValueError):
        state_cutoff(grid, cut=(3.0, 2.0))
    with pytest.raises(ValueError):
        physical_norm(np.zeros((7, 7)), grid)


# ----------------------------------------------------- residual diagnostics

def test_commutator_defect_at_floor_for_affine_field():
    m = ModelSpec.rabi(0.125)
    g = Grid(N=128, L=3.0, eps=0.125)
    f = SymbolField.zero(g)
    f.a[2] = g.sample_scalar(lambda u, p: gauss(u, p, s2=0.1024))
    rep = commutator_defect(m, f, cut=(2.25, 2.7))
    assert rep.defect < 1e-6
    assert rep.corrected == rep.defect
    assert rep.lhs_norm > 0.1


def test_moyal_residual_floors_for_quadratic_generator():
    g = Grid(N=256, L=3.0, eps=0.05)
    U, P = g.meshes()
    ones = np.ones_like(U + P)
    res = moyal_residual(g, 0.5 * (U**2 + P**2) * ones,
                         gauss(U, P, s2=0.16) * ones,
                         (U * ones, P * ones), cut=(1.2, 1.7))
    assert res < 1e-10


def test_moyal_order3_check_raises_on_floored_data():
    with pytest.raises(FitError) as exc:
        moyal_order3_check(
            h0=lambda u, p: 0.5 * (u**2 + p**2),
            grad_h0=lambda u, p: (u, p),
            a=lambda u, p: gauss(u, p, s2=0.16),
            eps_list=(2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7))
    assert np.max(exc.value.residuals) < 1e-8
