import numpy as np
import pytest

from egorov_spin import (
    FitError,
    Grid,
    ModelSpec,
    Observable,
    SpinSymbol,
    StepSizeError,
    SweepConfig,
    SweepRow,
    SymbolField,
    WignerState,
    egorov_error,
    exact_corollary_residual,
    exact_symbol_evolution,
    flow_bound_check,
    scaling_fit,
    state_expectation,
    stern_gerlach_run,
    transported_symbols,
    upsample_field,
    write_sweep_csv,
)

SQRT3 = np.sqrt(3.0)


# ------------------------------------------------------------- observables

def test_observable_kinds_and_radius():
    with pytest.raises(ValueError):
        Observable("nope")
    with pytest.raises(ValueError):
        Observable("gauss", sigma=0.0)
    a = Observable("gauss", sigma=0.4)
    assert not a.spin_dependent and a.box_localized
    assert a.radius() == pytest.approx(0.4 * np.sqrt(2.0 * np.log(1e8)))
    r = a.radius(floor=1e-8)
    assert a.envelope(r, 0.0) == pytest.approx(1e-8, rel=1e-10)
    assert Observable("n3-gauss").spin_dependent
    assert not Observable("q-bump").box_localized
    u = Observable("unit")
    assert u.radius() == 0.0
    assert u(1.0, 2.0, 0.0, 0.0, 1.0) == 1.0


def test_observable_fiber_values():
    a = Observable("n3-gauss", sigma=0.4)
    assert a(0.0, 0.0, 0.0, 0.0, 1.0) == pytest.approx(SQRT3)
    mix = Observable("mixed-moment", sigma=0.4)
    assert mix(0.0, 0.0, 1.0, 0.0, 0.0) == pytest.approx(2.0)


# ------------------------------------------------------------- scaling fits

def test_scaling_fit_recovers_exact_power_law():
    eps = np.array([0.25, 0.125, 0.0625, 0.03125])
    fit = scaling_fit(zip(eps, 3.0 * eps**2.5))
    assert fit.slope == pytest.approx(2.5, abs=1e-10)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-10)
    assert fit.stderr < 1e-10
    assert all(fit.used)
    lo, hi = fit.interval
    assert lo <= 2.5 <= hi


def test_scaling_fit_drops_floored_points():
    eps = np.array([0.25, 0.125, 0.0625, 0.03125, 0.015625])
    y = np.array([0.25**3, 0.125**3, 0.0625**3, 3e-9, 2.5e-9])
    fit = scaling_fit(zip(eps, y), floor=1e-9)
    assert fit.used == (True, True, True, False, False)
    assert fit.slope == pytest.approx(3.0, abs=1e-10)


def test_scaling_fit_needs_enough_live_points():
    eps = np.array([0.25, 0.125, 0.0625, 0.03125])
    y = np.array([1e-2, 1e-9, 1e-9, 1e-9])
    with pytest.raises(FitError):
        scaling_fit(zip(eps, y), floor=1e-9)
    with pytest.raises(ValueError):
        scaling_fit([(0.1, 0.2, 0.3)])


def test_sweep_config_validation():
    obs = Observable("gauss")
    good = dict(observable=obs, eps_list=(0.25, 0.125, 0.0625, 0.03125))
    cfg = SweepConfig(**good)
    assert cfg.eps_list == (0.25, 0.125, 0.0625, 0.03125)
    assert cfg.model.mode == "harmonic"
    with pytest.raises(ValueError):
        SweepConfig(observable=obs, eps_list=(0.25, 0.125, 0.0625))
    with pytest.raises(ValueError):
        SweepConfig(observable=obs, eps_list=(0.25, 0.24, 0.23, 0.22))
    with pytest.raises(ValueError):
        SweepConfig(**good, gamma=0.5)
    with pytest.raises(ValueError):
        SweepConfig(observable=Observable("n3-gauss"),
                    eps_list=good["eps_list"], gamma=0.25)
    assert SweepConfig(observable=Observable("n3-gauss"),
                       eps_list=good["eps_list"], gamma=0.2).gamma == 0.2
    with pytest.raises(ValueError):
        SweepConfig(**good, transport="sideways")
    with pytest.raises(ValueError):
        SweepConfig(**good, n_times=0)
    sg = ModelSpec(epsilon=0.25, sg_profile=("sine", 1.0, 1.2, 2.0))
    assert SweepConfig(**good, model=sg).model is sg
    with pytest.raises(ValueError):
        SweepConfig(**good, model=sg, gamma=0.1)


def test_sweep_csv_round_trip(tmp_path):
    rows = [SweepRow(0.25, 1.0, 0.125, 1.25e-3, 2e-15, 256, 3.0, 1200.5),
            SweepRow(0.125, 1.0, 0.125, 3.5e-4, 1e-15, 512, 3.0, 4800.25)]
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, rows)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "eps,t,gamma,error,floor,grid_N,grid_L,runtime_ms"
    assert lines[1] == "0.25,1,0.125,0.00125,2e-15,256,3,1200.5"
    assert len(lines) == 3


# ----------------------------------------------------- transported symbols

def test_transport_projects_symbols_exactly_at_time_zero():
    grid = Grid.balanced(0.25, 3.5)
    m = ModelSpec.rabi(0.25)
    a = Observable("n3-gauss", sigma=0.4)
    f = transported_symbols(m, a, [0.0], grid)[0]
    U, P = grid.meshes()
    want = np.exp(-(U**2 + P**2) / (2.0 * 0.16))
    assert np.max(np.abs(f.a[2] - want)) < 1e-10
    assert np.max(np.abs(f.a0)) < 1e-12
    assert np.max(np.abs(f.a[0])) < 1e-12


def test_transport_validates_times_and_mode():
    grid = Grid.balanced(0.25, 3.5)
    m = ModelSpec.rabi(0.25)
    a = Observable("gauss")
    with pytest.raises(ValueError):
        transported_symbols(m, a, [1.0, 0.5], grid)
    with pytest.raises(ValueError):
        transported_symbols(m, a, [-1.0], grid)
    with pytest.raises(ValueError):
        transported_symbols(m, a, [1.0], grid, transport="both")


def test_transport_quadrature_refinement_is_converged():
    from egorov_spin import SphereQuadrature

    grid = Grid.balanced(0.25, 3.5)
    m = ModelSpec.rabi(0.25)
    a = Observable("n3-gauss", sigma=0.4)
    f1 = transported_symbols(m, a, [0.8], grid, nc=64)[0]
    f2 = transported_symbols(m, a, [0.8], grid, nc=64,
                             quad=SphereQuadrature.build(10, 20))[0]
    assert np.max(np.abs(f1.a - f2.a)) < 1e-8
    assert np.max(np.abs(f1.a0 - f2.a0)) < 1e-8


def test_upsample_is_exact_for_band_limited_fields():
    # coarse p-spacing pi*eps/L must resolve the sigma = 0.4 envelope
    fine = Grid(N=256, L=3.0, eps=0.025)
    coarse = Grid(N=64, L=3.0, eps=0.1)
    f = SymbolField.from_callables(
        coarse, a0=lambda u, p: np.exp(-(u**2 + p**2) / (2.0 * 0.16)))
    lifted = upsample_field(f, fine)
    U, P = fine.meshes()
    want = np.exp(-(U**2 + P**2) / (2.0 * 0.16)) * np.ones_like(U + P)
    assert np.max(np.abs(lifted.a0 - want)) < 1e-9


def test_upsample_rejects_non_refinements():
    fine = Grid(N=256, L=3.0, eps=0.05)
    with pytest.raises(ValueError):
        upsample_field(SymbolField.zero(Grid(N=64, L=2.5, eps=0.2)), fine)
    with pytest.raises(ValueError):
        upsample_field(SymbolField.zero(Grid(N=64, L=3.0, eps=0.1)), fine)


# ----------------------------------------------------------- egorov errors

def test_egorov_error_has_a_round_off_floor_at_time_zero():
    m = ModelSpec.rabi(2.0**-4)
    assert egorov_error(m, Observable("n3-gauss"), 0.0) < 1e-12


def test_constant_field_conjugation_is_exact():
    # with no position or momentum coupling the quantum flow quantizes
    # the classical one exactly: rotation in z, precession in the fiber
    m = ModelSpec(epsilon=2.0**-4, h_c=(0.0, 0.0, 0.5))
    assert egorov_error(m, Observable("n3-gauss"), 1.0) < 1e-8


def test_egorov_error_grows_with_coupling():
    m = ModelSpec.rabi(2.0**-4)
    err = egorov_error(m, Observable("n3-gauss"), 1.0)
    assert 1e-5 < err < 1e-1


def test_explicit_grid_must_match():
    m = ModelSpec.rabi(0.25)
    with pytest.raises(ValueError):
        egorov_error(m, Observable("gauss"), 1.0,
                     grid=Grid(N=64, L=2.0, eps=0.125))
    with pytest.raises(ValueError):
        egorov_error(m, Observable("gauss"), 1.0,
                     grid=Grid(N=64, L=2.0, eps=0.25))


# --------------------------------------------------------- exact evolution

def test_exact_evolution_of_radial_fiber_field_precesses():
    m = ModelSpec(epsilon=0.25, h_c=(0.0, 0.0, 0.5))
    grid = Grid.balanced(0.25, 2.8)
    U, P = grid.meshes()
    G = np.exp(-(U**2 + P**2) / (2.0 * 0.16)) * np.ones_like(U + P)
    zero = np.zeros_like(G)
    f = SymbolField(grid, zero, np.stack([G, zero, zero]))
    t = 1.3
    ft = exact_symbol_evolution(m, f, t)
    assert np.max(np.abs(ft.a[0] - G * np.cos(t))) < 1e-8
    assert np.max(np.abs(ft.a[1] + G * np.sin(t))) < 1e-8
    assert np.max(np.abs(ft.a[2])) < 1e-8
    assert np.max(np.abs(ft.a0)) < 1e-8


def test_exact_evolution_time_zero_returns_copy():
    grid = Grid.balanced(0.25, 2.0)
    f = SymbolField.zero(grid)
    out = exact_symbol_evolution(ModelSpec.rabi(0.25), f, 0.0)
    assert out is not f
    out.a0 += 1.0
    assert np.max(np.abs(f.a0)) == 0.0


def test_exact_evolution_rejects_unstable_steps():
    grid = Grid.balanced(0.25, 2.0)
    f = SymbolField.zero(grid)
    with pytest.raises(StepSizeError):
        exact_symbol_evolution(ModelSpec.rabi(0.25), f, 1.0, dt=0.5)
    with pytest.raises(ValueError):
        exact_symbol_evolution(ModelSpec.rabi(0.25), f, 1.0, dt=-0.1)


def test_exact_evolution_residual_is_at_the_grid_floor():
    row, row0 = exact_corollary_residual(ModelSpec.rabi(2.0**-4),
                                         Observable("n3-gauss"), 1.0)
    assert row.error < 1e-9
    assert row0.error < 1e-10
    assert row.grid_n >= 64


# ------------------------------------------------------ state expectations

def test_wigner_state_validation():
    with pytest.raises(ValueError):
        WignerState(bloch=(1.0, 1.0, 0.0))
    w = WignerState(bloch=(0.0, 0.0, 1.0))
    nodes = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    win = w.fiber_weight(nodes)
    assert win[0] == pytest.approx(0.5 + SQRT3 / 2.0)
    assert win[1] == pytest.approx(0.5 - SQRT3 / 2.0)


def test_state_expectation_of_unit_observable_is_one():
    res = state_expectation(ModelSpec.rabi(2.0**-4), Observable("unit"),
                            WignerState(), 0.0)
    assert res.quantum == pytest.approx(1.0, abs=1e-8)
    assert res.semiclassical == pytest.approx(1.0, abs=1e-10)


def test_state_expectation_matches_gaussian_closed_form():
    # Tr(Op a Op w) equals the phase-space pairing of the two gaussians:
    # 2 sigma^2 / (2 sigma^2 + eps) at t = 0
    eps, sigma = 2.0**-4, 0.4
    want = 2.0 * sigma**2 / (2.0 * sigma**2 + eps)
    res = state_expectation(ModelSpec.rabi(eps), Observable("gauss", sigma=sigma),
                            WignerState(), 0.0)
    assert res.quantum == pytest.approx(want, abs=1e-8)
    assert res.semiclassical == pytest.approx(want, abs=1e-10)


def test_state_expectation_sides_agree_after_evolution():
    res = state_expectation(ModelSpec.rabi(2.0**-4), Observable("n3-gauss"),
                            WignerState(bloch=(0.0, 0.0, 1.0)), 0.4)
    assert abs(res.quantum) > 1e-3
    assert res.discrepancy < 5e-3


# ------------------------------------------------------------ deflections

def test_deflection_closed_forms_on_the_linear_plateau():
    eps, t = 0.01, 2.0
    m = ModelSpec(epsilon=eps, sg_profile=("plateau-linear", 1.0, 1.2, 2.0))
    rep = stern_gerlach_run(m, SpinSymbol(0.5, (0.15, -0.1, 0.25)), eps, t)
    assert rep.slope == pytest.approx(1.0, abs=1e-14)
    assert rep.deflection_closed == pytest.approx(eps * t**2 / 4.0, rel=1e-14)
    assert rep.max_rel_error < 1e-10
    assert rep.pole_deflections[0] == pytest.approx(SQRT3 * rep.deflection_closed,
                                                    rel=1e-8)
    assert rep.linearity_residual < 1e-10 * rep.deflection
    # fiber part (0.15, -0.1, 0.25) encodes the Bloch vector s = 2a
    assert rep.mean == pytest.approx(rep.deflection * 0.5, rel=1e-8)
    assert rep.weights[0] == pytest.approx(0.75, abs=1e-8)
    assert rep.moments[1] == pytest.approx(rep.deflection**2, rel=1e-8)


def test_deflection_of_unpolarized_state_has_zero_mean():
    eps, t = 0.01, 2.0
    m = ModelSpec(epsilon=eps, sg_profile=("plateau-linear", 1.0, 1.2, 2.0))
    rep = stern_gerlach_run(m, SpinSymbol(0.5, (0.0, 0.0, 0.0)), eps, t)
    assert abs(rep.mean) < 1e-10 * rep.deflection
    assert rep.weights[0] == pytest.approx(0.5, abs=1e-8)


def test_deflection_sine_profile_carries_curvature_remainder():
    eps, t = 0.01, 2.0
    m = ModelSpec(epsilon=eps, sg_profile=("sine", 1.0, 1.2, 2.0))
    rep = stern_gerlach_run(m, SpinSymbol(0.5, (0.0, 0.0, 0.5)), eps, t)
    assert rep.max_rel_error < 1e-3


def test_deflection_domain_errors():
    eps = 0.01
    sg = ModelSpec(epsilon=eps, sg_profile=("plateau-linear", 1.0, 1.2, 2.0))
    up = SpinSymbol(0.5, (0.0, 0.0, 0.5))
    with pytest.raises(ValueError):
        stern_gerlach_run(ModelSpec.rabi(eps), up, eps, 1.0)
    with pytest.raises(ValueError):
        stern_gerlach_run(sg, up, eps, 1.0, p1=0.3)
    with pytest.raises(ValueError):
        stern_gerlach_run(sg, SpinSymbol(0.7, (0.0, 0.0, 0.1)), eps, 1.0)
    with pytest.raises(ValueError):
        stern_gerlach_run(sg, SpinSymbol(0.5, (0.0, 0.0, 0.8j)), eps, 1.0)
    with pytest.raises(ValueError):
        stern_gerlach_run(sg, SpinSymbol(0.5, (0.6, 0.6, 0.6)), eps, 1.0)


# ------------------------------------------------------------- flow bounds

def test_flow_bounds_hold_on_the_stated_window():
    rep = flow_bound_check(eps=1e-2, alpha=0.5, n_states=4)
    assert rep.b == pytest.approx(1.0, rel=1e-12)
    assert rep.g == pytest.approx(SQRT3 / 2.0, rel=1e-12)
    assert rep.window == pytest.approx(np.sqrt(0.5 / (rep.b * rep.g)) / 0.1,
                                       rel=1e-12)
    assert rep.passed
    assert "bounds hold" in rep.summary()


def test_flow_bounds_validation():
    with pytest.raises(ValueError):
        flow_bound_check(alpha=1.5)
    with pytest.raises(ValueError):
        flow_bound_check(m=ModelSpec(epsilon=0.1, h_c=(0.0, 0.0, 1.0)))
    with pytest.raises(ValueError):
        flow_bound_check(m=ModelSpec(epsilon=0.1,
                                     sg_profile=("sine", 1.0, 1.0, 2.0)))
