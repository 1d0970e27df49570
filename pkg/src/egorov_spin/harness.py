"""Theorem-scale experiments: quantum-classical comparison sweeps.

The common pipeline per (eps, t): quantize the fiber-projected
observable, conjugate by the exact propagator, transport the symbol
along the classical flow with the spin fiber projected back to C1,
quantize the transported symbol, and take the physically cut spectral
norm of the difference.  Repeating over eps and fitting log error
against log eps measures the order of the semiclassical approximation.

Observables enter as analytic callables, not sampled fields: composing
with the flow requires evaluation at scattered flowed points, where a
sampled field would need trigonometric interpolation at no accuracy
gain for the Gaussian-envelope catalog used here.

Cost control: the transported symbol is smooth with a Gaussian spectrum,
so it is assembled on a coarse stride of the quantization grid (same
box, same p-box) and lifted by Fourier zero-padding.  One trajectory
ensemble advances through all time checkpoints of a sweep, so the flow
cost per eps is that of the longest horizon.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .fitting import FitError, fit_loglog
from .flows import (ExtendedState, ModelSpec, VariationalState,
                    advance_ensemble, default_dt, variational_trajectory)
from .quantum import propagator
from .spin_algebra import SphereQuadrature, SpinSymbol, default_quadrature
from .weyl_grid import (Grid, NumericalError, SymbolField, hs_norm,
                        operator_norm, quantize_sigma, sigma_bracket,
                        state_cutoff, weyl_quantize_scalar)

__all__ = [
    "Observable",
    "StepSizeError",
    "SweepConfig",
    "SweepRow",
    "ScalingReport",
    "ScalingFit",
    "ExpectationResult",
    "WignerState",
    "SternGerlachReport",
    "DeflectionProbe",
    "FlowBoundReport",
    "transported_symbols",
    "upsample_field",
    "egorov_error",
    "scaling_fit",
    "long_time_sweep",
    "exact_symbol_evolution",
    "exact_corollary_residual",
    "state_expectation",
    "stern_gerlach_run",
    "stern_gerlach_quantum_probe",
    "flow_bound_check",
    "write_sweep_csv",
]

SQRT3 = np.sqrt(3.0)


class StepSizeError(NumericalError):
    """Explicit time step exceeds the spectral stability limit."""


# --------------------------------------------------------------- observables

_OBSERVABLE_KINDS = ("gauss", "n3-gauss", "mixed-moment", "q-bump", "unit")


@dataclass(frozen=True)
class Observable:
    """Named observable on extended phase space, evaluated analytically.

    gauss         g(z) = exp(-(q^2+p^2)/(2 sigma^2)), spin-independent
    n3-gauss      sqrt(3) n3 g(z)
    mixed-moment  g(z) (sqrt(3) n3 + 3 n1^2 - 1), not in C1; its fiber
                  projection is sqrt(3) n3 g(z)
    q-bump        exp(-q^2/(2 sigma^2)), constant in p (multiplication
                  operator; not box-localized in momentum)
    unit          the constant 1
    """

    kind: str
    sigma: float = 0.4

    def __post_init__(self):
        if self.kind not in _OBSERVABLE_KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def spin_dependent(self) -> bool:
        return self.kind in ("n3-gauss", "mixed-moment")

    @property
    def box_localized(self) -> bool:
        return self.kind not in ("q-bump", "unit")

    def radius(self, floor: float = 1e-8) -> float:
        """Envelope radius beyond which the Gaussian factor is < floor."""
        if self.kind == "unit":
            return 0.0
        return float(self.sigma * np.sqrt(2.0 * np.log(1.0 / floor)))

    def envelope(self, q, p):
        if self.kind == "unit":
            return np.ones_like(np.asarray(q, dtype=float))
        r2 = q * q if self.kind == "q-bump" else q * q + p * p
        return np.exp(-r2 / (2.0 * self.sigma**2))

    def __call__(self, q, p, nx, ny, nz):
        g = self.envelope(q, p)
        if self.kind == "n3-gauss":
            return SQRT3 * nz * g
        if self.kind == "mixed-moment":
            return g * (SQRT3 * nz + 3.0 * nx**2 - 1.0)
        return g


# ------------------------------------------------------ grid and cut policy

_CUT_WIDTH = 0.45
_TAIL_MARGIN = 0.30


def _grid_and_cut(eps: float, work_radius: float, n_max: int = 4096,
                  grid: Grid | None = None) -> tuple:
    """Quantization grid and state-cutoff radii for a working radius.

    The cutoff transition sits entirely beyond the working radius, and
    the box extends past the cutoff so that wrapped long-chord tails of
    the quantizer stay below the cut region at round-off level.
    """
    c0 = work_radius
    c1 = work_radius + _CUT_WIDTH
    if grid is None:
        grid = Grid.balanced(eps, c1 + _TAIL_MARGIN, n_max=n_max, margin=1.0)
    else:
        if grid.eps != eps:
            raise ValueError("explicit grid has a different eps")
        if grid.L < c1 + _TAIL_MARGIN or grid.p_box < c1 + _TAIL_MARGIN:
            raise ValueError(
                f"explicit grid box {grid.L:.2f} x {grid.p_box:.2f} too small "
                f"for cutoff radius {c1:.2f} plus tail margin")
    return grid, (c0, c1)


def _coarse_stride(grid: Grid, nc: int) -> Grid:
    """Strided subgrid: same box and p-box, every (N // nc)-th node."""
    if nc >= grid.N:
        return grid
    if grid.N % nc:
        raise ValueError("coarse size must divide N")
    return Grid(N=nc, L=grid.L, eps=grid.eps * (grid.N // nc))


def upsample_field(f: SymbolField, fine: Grid) -> SymbolField:
    """Fourier zero-padding lift from a strided subgrid to the full grid.

    Exact for fields band-limited on the subgrid; the transported
    Gaussian-envelope symbols decay spectrally far below the coarse
    Nyquist frequency.
    """
    co = f.grid
    if co.N == fine.N:
        if co != fine:
            raise ValueError("grids differ but have equal size")
        return f
    if fine.N % co.N or co.L != fine.L or co.eps != fine.eps * (fine.N // co.N):
        raise ValueError("target grid is not a refinement of the field's grid")

    def lift(F):
        m0, m1 = F.shape
        M0, M1 = 2 * fine.N, fine.N
        S = np.fft.fftshift(np.fft.fft2(F))
        G = np.zeros((M0, M1), dtype=np.complex128)
        G[(M0 - m0) // 2:(M0 + m0) // 2, (M1 - m1) // 2:(M1 + m1) // 2] = S
        return np.fft.ifft2(np.fft.ifftshift(G)) * (M0 * M1 / (m0 * m1))

    return SymbolField(fine, lift(f.a0), np.stack([lift(f.a[j]) for j in range(3)]))


# ----------------------------------------------- flow-transported observables

def _flow_ensemble(coarse: Grid, quad: SphereQuadrature) -> tuple:
    """Flat trajectory arrays: every coarse node times every fiber node."""
    U, P = coarse.meshes()
    shape = (2 * coarse.N, coarse.N)
    Q = np.broadcast_to(U, shape).ravel()
    Pm = np.broadcast_to(P, shape).ravel()
    K = len(quad.weights)
    q = np.repeat(Q, K)
    p = np.repeat(Pm, K)
    n = np.tile(quad.nodes, (Q.size, 1))
    return (q, p, np.ascontiguousarray(n[:, 0]),
            np.ascontiguousarray(n[:, 1]), np.ascontiguousarray(n[:, 2]))


def _project_fiber(vals: np.ndarray, quad: SphereQuadrature,
                   coarse: Grid) -> SymbolField:
    """project_C1 applied at every phase-space node of the ensemble."""
    shape = (2 * coarse.N, coarse.N)
    V = vals.reshape(-1, len(quad.weights))
    w = quad.weights / (4.0 * np.pi)
    a0 = (V @ w).reshape(shape)
    a = np.stack([
        SQRT3 * (V @ (w * quad.nodes[:, j])).reshape(shape) for j in range(3)
    ])
    return SymbolField(coarse, a0, a)


def transported_symbols(m: ModelSpec, a, times, grid: Grid, nc: int = 128,
                        dt: float | None = None,
                        quad: SphereQuadrature | None = None,
                        transport: str = "coupled") -> list:
    """P(a o Phi^t) on the grid for each t in `times`.

    `a` is any callable a(q, p, n1, n2, n3); `times` must be
    nondecreasing and nonnegative, and the single ensemble advances
    through them as checkpoints.  The fiber projection is exact for the
    C1 part of the composed symbol up to the quadrature degree.
    `transport` picks the comparison flow: "coupled" keeps the order-eps
    spin backreaction and drift in the translational equations,
    "decoupled" drops them (spin still precesses along the trajectory).
    """
    if transport not in ("coupled", "decoupled"):
        raise ValueError("transport must be 'coupled' or 'decoupled'")
    if quad is None:
        quad = default_quadrature()
    times = [float(t) for t in times]
    if times and times[0] < 0.0:
        raise ValueError("times must be nonnegative")
    coarse = _coarse_stride(grid, nc)
    q, p, nx, ny, nz = _flow_ensemble(coarse, quad)
    if dt is None:
        dt = default_dt(m, span=grid.L + 1.0)
    out = []
    prev = 0.0
    for t in times:
        if t < prev:
            raise ValueError("times must be nondecreasing")
        advance_ensemble(m, q, p, nx, ny, nz, t - prev, dt,
                         coupled=transport == "coupled")
        prev = t
        vals = np.asarray(a(q, p, nx, ny, nz), dtype=np.complex128)
        f = _project_fiber(vals, quad, coarse)
        out.append(upsample_field(f, grid))
    return out


def _cut_matrix(D: np.ndarray, grid: Grid, cut: tuple) -> np.ndarray:
    chi = state_cutoff(grid, cut)
    if D.shape[0] == 2 * grid.N:
        chi = np.concatenate([chi, chi])
    return chi[:, None] * D * chi[None, :]


def _work_radius(m: ModelSpec, a: Observable, t_max: float,
                 pad: float) -> float:
    """Radius covering the transported symbol supports up to t_max.

    Harmonic transport rotates the support in place; free flight in the
    field-gradient mode shears it, widening the position extent by a
    factor (1 + t).
    """
    r = a.radius()
    if m.sg_profile is not None:
        r *= 1.0 + t_max
    return r + pad


def egorov_error(m: ModelSpec, a: Observable, t: float,
                 grid: Grid | None = None, nc: int = 128,
                 dt: float | None = None, cut: tuple | None = None,
                 pad: float = 0.3, n_max: int = 4096,
                 tol: float = 1e-3, transport: str = "coupled") -> float:
    """Physically cut operator norm of the Egorov defect at one (eps, t).

    ||U(t)* Op(P a) U(t) - Op(P(a o Phi^t))|| measured after the smooth
    state cutoff on both sides of the difference.
    """
    grid, cut0 = _grid_and_cut(m.epsilon, _work_radius(m, a, t, pad),
                               n_max=n_max, grid=grid)
    if cut is None:
        cut = cut0
    fields = transported_symbols(m, a, [0.0, t] if t > 0.0 else [0.0],
                                 grid, nc=nc, dt=dt, transport=transport)
    A = quantize_sigma(fields[0], check_support=a.box_localized)
    B = A if t == 0.0 else quantize_sigma(fields[-1],
                                          check_support=a.box_localized)
    At = propagator(m, grid).heisenberg(A, t)
    return operator_norm(_cut_matrix(At - B, grid, cut), tol=tol)


# ------------------------------------------------------- sweeps and reports

class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    stderr: float
    interval: tuple
    used: tuple


def scaling_fit(pairs, floor=0.0, min_points: int = 3) -> ScalingFit:
    """Deterministic log-log slope of error against eps, with interval.

    `pairs` is a sequence of (eps, error); points within 10x of `floor`
    (scalar or per-point) are excluded.  The interval is slope +- 2
    standard errors of the least-squares estimate.  Raises FitError when
    fewer than min_points survive.
    """
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (eps, error)")
    x, y = arr[:, 0], arr[:, 1]
    slope, intercept, keep = fit_loglog(x, y, floor=floor,
                                        min_points=min_points)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    resid = ly - (slope * lx + intercept)
    dof = len(lx) - 2
    if dof > 0:
        stderr = float(np.sqrt((resid @ resid) / dof /
                               ((lx - lx.mean()) @ (lx - lx.mean()))))
    else:
        stderr = float("inf")
    return ScalingFit(slope=slope, intercept=intercept, stderr=stderr,
                      interval=(slope - 2.0 * stderr, slope + 2.0 * stderr),
                      used=tuple(bool(k) for k in keep))


@dataclass(frozen=True)
class SweepConfig:
    """One scaling experiment: observable, eps grid, horizon T / eps^gamma.

    The model is a template whose epsilon is replaced per sweep point.
    Admissible exponents: gamma < 1/4 for spin-dependent observables,
    gamma < 1/2 for spin-independent ones.  Long-time sweeps (gamma > 0)
    require the harmonic-linear mode; fixed-horizon sweeps also accept
    field-gradient models.
    """

    observable: Observable
    eps_list: tuple
    horizon: float = 1.0
    gamma: float = 0.0
    model: ModelSpec | None = None
    n_times: int = 8
    nc: int = 128
    pad: float = 0.3
    grid: tuple | None = None  # explicit (N, L) override, one for all eps
    n_max: int = 4096
    tol: float = 1e-3
    transport: str = "coupled"
    expected_slope: float | None = None
    one_sided: bool = False
    margin: float = 0.3

    def __post_init__(self):
        eps = tuple(sorted({float(e) for e in self.eps_list}, reverse=True))
        if len(eps) < 4:
            raise ValueError("need at least 4 distinct eps values")
        if eps[-1] <= 0:
            raise ValueError("eps values must be positive")
        if eps[0] / eps[-1] < 8.0:
            raise ValueError("eps values must span at least three octaves")
        object.__setattr__(self, "eps_list", eps)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        gmax = 0.25 if self.observable.spin_dependent else 0.5
        if self.gamma >= gmax:
            raise ValueError(
                f"gamma = {self.gamma} outside the admissible range "
                f"[0, {gmax}) for this observable class")
        if self.n_times < 1:
            raise ValueError("need at least one time sample")
        if self.transport not in ("coupled", "decoupled"):
            raise ValueError("transport must be 'coupled' or 'decoupled'")
        if self.model is None:
            object.__setattr__(self, "model", ModelSpec.rabi(eps[0]))
        if self.model.sg_profile is not None and self.gamma > 0:
            raise ValueError("long-time sweeps run in the harmonic-linear mode")


@dataclass(frozen=True)
class SweepRow:
    eps: float
    t: float
    gamma: float
    error: float
    floor: float
    grid_n: int
    grid_l: float
    runtime_ms: float


@dataclass(frozen=True)
class ScalingReport:
    """Sweep artifact: per-point rows, per-eps envelopes, slope verdict.

    `errors` is the max over the positive time samples per eps (the
    theorems bound a sup over the horizon); `floors` is the t = 0
    residual of the identical pipeline.  Points within 10x of their
    floor are excluded from the fit; with fewer than 3 survivors the
    report is inconclusive and never passes.
    """

    config: SweepConfig
    rows: tuple
    eps: tuple
    errors: tuple
    floors: tuple
    hs_errors: tuple
    fit: ScalingFit | None
    inconclusive: bool

    @property
    def slope(self):
        return None if self.fit is None else self.fit.slope

    @property
    def passed(self):
        exp = self.config.expected_slope
        if exp is None:
            return None
        if self.inconclusive or self.fit is None:
            return False
        if self.config.one_sided:
            return self.fit.slope >= exp - self.config.margin
        return abs(self.fit.slope - exp) <= self.config.margin

    def summary(self) -> str:
        cfg = self.config
        if cfg.model.sg_profile is None:
            vec = lambda v: "(" + ", ".join(f"{x:g}" for x in v) + ")"
            model_line = (
                f"model: omega={cfg.model.omega:g} h_c={vec(cfg.model.h_c)}"
                f" h_q={vec(cfg.model.h_q)} h_p={vec(cfg.model.h_p)}")
        else:
            model_line = f"model: field-gradient profile={cfg.model.sg_profile}"
        lines = [
            f"observable: {cfg.observable.kind} sigma={cfg.observable.sigma:g}"
            f"  spin_dependent={cfg.observable.spin_dependent}",
            model_line,
            f"horizon T={cfg.horizon:g}  gamma={cfg.gamma:g}"
            f"  t* = T/eps^gamma  samples={cfg.n_times}"
            f"  transport={cfg.transport}",
            "eps          sup error     hs error      floor         used",
        ]
        used = self.fit.used if self.fit else (False,) * len(self.eps)
        for e, err, hse, flo, u in zip(self.eps, self.errors, self.hs_errors,
                                       self.floors, used):
            lines.append(f"{e:<12.6g} {err:<13.6g} {hse:<13.6g} {flo:<13.6g}"
                         f" {'yes' if u else 'no'}")
        if self.inconclusive or self.fit is None:
            lines.append("fit: inconclusive (fewer than 3 points above floor)")
        else:
            lo, hi = self.fit.interval
            lines.append(f"fit: slope = {self.fit.slope:.4f}"
                         f"  95% interval [{lo:.4f}, {hi:.4f}]")
        if cfg.expected_slope is not None:
            rel = ">=" if cfg.one_sided else "~"
            lines.append(
                f"expected {rel} {cfg.expected_slope:g}"
                f" (margin {cfg.margin:g}) -> "
                + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def long_time_sweep(cfg: SweepConfig) -> ScalingReport:
    """Egorov error over eps at horizons T / eps^gamma, with slope fit.

    Per eps: one grid, one propagator, one flow ensemble advanced through
    n_times checkpoints plus the t = 0 floor sample; the error envelope
    is the max over the positive samples.  gamma = 0 is the fixed-horizon
    order-1 experiment.
    """
    obs = cfg.observable
    rows = []
    sups, floors, hs_sups = [], [], []
    for eps in cfg.eps_list:
        m = replace(cfg.model, epsilon=eps)
        explicit = Grid(N=cfg.grid[0], L=cfg.grid[1], eps=eps) if cfg.grid else None
        t_star = cfg.horizon / eps**cfg.gamma
        grid, cut = _grid_and_cut(eps, _work_radius(m, obs, t_star, cfg.pad),
                                  n_max=cfg.n_max, grid=explicit)
        times = [t_star * k / cfg.n_times for k in range(cfg.n_times + 1)]
        tic = time.perf_counter()
        fields = transported_symbols(m, obs, times, grid, nc=cfg.nc,
                                     transport=cfg.transport)
        P = propagator(m, grid)
        A = quantize_sigma(fields[0], check_support=obs.box_localized)
        setup_ms = 1e3 * (time.perf_counter() - tic)
        eps_rows = []
        sup, hs_sup, floor = 0.0, 0.0, 0.0
        for k, t in enumerate(times):
            tic = time.perf_counter()
            B = A if k == 0 else quantize_sigma(fields[k],
                                                check_support=obs.box_localized)
            D = _cut_matrix(P.heisenberg(A, t) - B, grid, cut)
            err = operator_norm(D, tol=cfg.tol)
            ms = 1e3 * (time.perf_counter() - tic)
            if k == 0:
                floor = err
                ms += setup_ms
            else:
                sup = max(sup, err)
                hs_sup = max(hs_sup, hs_norm(D))
            eps_rows.append([eps, t, cfg.gamma, err, 0.0, grid.N, grid.L, ms])
        for r in eps_rows:
            r[4] = floor
            rows.append(SweepRow(*r))
        sups.append(sup)
        floors.append(floor)
        hs_sups.append(hs_sup)
    try:
        fit = scaling_fit(zip(cfg.eps_list, sups), floor=np.asarray(floors))
        inconclusive = False
    except FitError:
        fit = None
        inconclusive = True
    return ScalingReport(config=cfg, rows=tuple(rows), eps=cfg.eps_list,
                         errors=tuple(sups), floors=tuple(floors),
                         hs_errors=tuple(hs_sups), fit=fit,
                         inconclusive=inconclusive)


def write_sweep_csv(path, rows):
    """Write sweep rows as deterministic CSV (no timestamps, %.12g)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("eps", "t", "gamma", "error", "floor",
                    "grid_N", "grid_L", "runtime_ms"))
        for r in rows:
            w.writerow([f"{r.eps:.12g}", f"{r.t:.12g}", f"{r.gamma:.12g}",
                        f"{r.error:.12g}", f"{r.floor:.12g}", str(r.grid_n),
                        f"{r.grid_l:.12g}", f"{r.runtime_ms:.12g}"])


# ------------------------------------------------------ exact symbol PDE

def _bracket_stability_limit(m: ModelSpec, grid: Grid) -> float:
    """Spectral-radius bound for the projected-bracket generator."""
    if m.sg_profile is not None:
        raise ValueError("harmonic-linear mode only")
    _, cq, cp = m.h0_affine
    hq, hp, hc = (np.linalg.norm(m.h_q), np.linalg.norm(m.h_p),
                  np.linalg.norm(m.h_c))
    vq = grid.p_box + m.epsilon * (abs(cp) + SQRT3 * hp)
    vp = m.omega**2 * grid.L + m.epsilon * (abs(cq) + SQRT3 * hq)
    kq = np.pi * grid.N / grid.L
    kp = np.pi / grid.dp
    rot = 2.0 * (hc + grid.L * hq + grid.p_box * hp)
    return float(vq * kq + vp * kp + rot)


def exact_symbol_evolution(m: ModelSpec, f: SymbolField, t: float,
                           dt: float | None = None) -> SymbolField:
    """Integrate d a/dt = P {h, a} as a closed system on (a0, a).

    Pseudo-spectral in phase space (sigma_bracket), classical RK4 in
    time.  With dt omitted the step is set from the stability limit; an
    explicit dt violating it raises StepSizeError.
    """
    lam = _bracket_stability_limit(m, f.grid)
    if t == 0.0:
        return SymbolField(f.grid, f.a0.copy(), f.a.copy())
    if dt is None:
        dt = 2.0 / lam
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = max(1, int(np.ceil(abs(t) / dt)))
    h = t / n
    if abs(h) * lam > 2.82:
        raise StepSizeError(
            f"dt = {abs(h):.3e} exceeds the RK4 stability step "
            f"{2.82 / lam:.3e} for this grid and model")
    y = SymbolField(f.grid, f.a0.copy(), f.a.copy())
    for _ in range(n):
        k1 = sigma_bracket(m, y)
        k2 = sigma_bracket(m, y + (0.5 * h) * k1)
        k3 = sigma_bracket(m, y + (0.5 * h) * k2)
        k4 = sigma_bracket(m, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def exact_corollary_residual(m: ModelSpec, a: Observable, t: float,
                             nc: int = 128, dt: float | None = None,
                             pad: float = 0.3, n_max: int = 4096,
                             tol: float = 1e-3) -> tuple:
    """Residual of the exact-evolution identity at one (eps, t).

    The coefficient system is integrated on the coarse stride, lifted,
    and quantized; the residual against Heisenberg conjugation is pure
    discretization and must not scale with eps.  The fixed stride keeps
    the integrator step identical across eps, so the residual is the
    same floor for every eps rather than a resolution-dependent one.
    Returns (residual, floor) as SweepRows.
    """
    grid, cut = _grid_and_cut(m.epsilon, a.radius() + pad, n_max=n_max)
    coarse = _coarse_stride(grid, nc)
    quad = default_quadrature()
    tic = time.perf_counter()
    q, p, nx, ny, nz = _flow_ensemble(coarse, quad)
    f0 = _project_fiber(np.asarray(a(q, p, nx, ny, nz), dtype=np.complex128),
                        quad, coarse)
    A = quantize_sigma(upsample_field(f0, grid),
                       check_support=a.box_localized)
    P = propagator(m, grid)
    floor = operator_norm(_cut_matrix(P.heisenberg(A, 0.0) - A, grid, cut),
                          tol=tol)
    ms0 = 1e3 * (time.perf_counter() - tic)
    tic = time.perf_counter()
    ft = exact_symbol_evolution(m, f0, t, dt=dt)
    B = quantize_sigma(upsample_field(ft, grid),
                       check_support=a.box_localized)
    res = operator_norm(_cut_matrix(P.heisenberg(A, t) - B, grid, cut),
                        tol=tol)
    ms = 1e3 * (time.perf_counter() - tic)
    row = SweepRow(m.epsilon, t, 0.0, res, floor, grid.N, grid.L, ms)
    row0 = SweepRow(m.epsilon, 0.0, 0.0, floor, floor, grid.N, grid.L, ms0)
    return row, row0


# ------------------------------------------------------- state expectations

class ExpectationResult(NamedTuple):
    quantum: float
    semiclassical: float

    @property
    def discrepancy(self) -> float:
        return abs(self.quantum - self.semiclassical)


@dataclass(frozen=True)
class WignerState:
    """Coherent-state Wigner symbol at z0 with Bloch vector s.

    w(z, n) = 2 exp(-|z - z0|^2 / eps) (1/2 + (sqrt(3)/2) s . n); its
    quantization has unit trace, which state_expectation verifies.
    """

    q0: float = 0.0
    p0: float = 0.0
    bloch: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        s = np.asarray(self.bloch, dtype=float).reshape(3)
        if np.linalg.norm(s) > 1.0 + 1e-12:
            raise ValueError("Bloch vector must lie in the unit ball")
        object.__setattr__(self, "bloch", tuple(s))

    def field(self, grid: Grid) -> SymbolField:
        U, P = grid.meshes()
        T = 2.0 * np.exp(-((U - self.q0)**2 + (P - self.p0)**2) / grid.eps)
        T = np.broadcast_to(T, (2 * grid.N, grid.N))
        s = np.asarray(self.bloch)
        return SymbolField(grid, 0.5 * T,
                           np.stack([0.5 * s[j] * T for j in range(3)]))

    def fiber_weight(self, nodes: np.ndarray) -> np.ndarray:
        s = np.asarray(self.bloch)
        return 0.5 + (SQRT3 / 2.0) * (nodes @ s)


def state_expectation(m: ModelSpec, a: Observable, w: WignerState, t: float,
                      grid: Grid | None = None, n_hermite: int = 40,
                      pad: float = 0.3, n_max: int = 4096,
                      quad: SphereQuadrature | None = None,
                      nc: int = 128) -> ExpectationResult:
    """Tr(Op(P a) rho(t)) against the flowed phase-space average.

    Quantum side: rho(0) = Op(w), checked to have unit trace, propagated
    by the exact unitary.  Semiclassical side: Gauss-Hermite quadrature
    in z around z0 (sqrt(eps)-scaled) times the sphere rule, applied to
    a o Phi^t weighted by the state's fiber density.
    """
    if quad is None:
        quad = default_quadrature()
    eps = m.epsilon
    radius = max(a.radius() + pad,
                 float(np.hypot(w.q0, w.p0)) + 6.0 * np.sqrt(eps) + pad)
    grid, _ = _grid_and_cut(eps, radius, n_max=n_max, grid=grid)

    rho0 = quantize_sigma(w.field(grid))
    tr = float(np.trace(rho0).real)
    if abs(tr - 1.0) > 1e-6:
        raise ValueError(f"state symbol quantizes to trace {tr:.8f}, not 1")
    A = quantize_sigma(
        transported_symbols(m, a, [0.0], grid, nc=nc, quad=quad)[0],
        check_support=a.box_localized)
    U = propagator(m, grid).unitary(t)
    rho_t = U @ rho0 @ U.conj().T
    quantum = float(np.sum(A * rho_t.T).real)

    x, wx = np.polynomial.hermite.hermgauss(n_hermite)
    zq = (w.q0 + np.sqrt(eps) * x)[:, None] + np.zeros((1, n_hermite))
    zp = (w.p0 + np.sqrt(eps) * x)[None, :] + np.zeros((n_hermite, 1))
    wz = (wx[:, None] * wx[None, :]).ravel()
    K = len(quad.weights)
    q = np.repeat(zq.ravel(), K)
    p = np.repeat(zp.ravel(), K)
    n = np.tile(quad.nodes, (n_hermite**2, 1))
    nx = np.ascontiguousarray(n[:, 0])
    ny = np.ascontiguousarray(n[:, 1])
    nz = np.ascontiguousarray(n[:, 2])
    advance_ensemble(m, q, p, nx, ny, nz, t, default_dt(m, span=grid.L + 1.0))
    vals = np.asarray(a(q, p, nx, ny, nz), dtype=float).reshape(-1, K)
    fiber = vals @ (quad.weights * w.fiber_weight(quad.nodes))
    semi = float((fiber @ wz) * 2.0 / (4.0 * np.pi) / np.pi)
    return ExpectationResult(quantum=quantum, semiclassical=semi)


# ----------------------------------------------------------- Stern-Gerlach

def _bloch_of(w_spin: SpinSymbol) -> np.ndarray:
    """Bloch vector of a spin state symbol w = 1/2 + sqrt(3)(s/2) . n."""
    a0 = complex(w_spin.a0)
    avec = np.asarray(w_spin.a, dtype=complex).reshape(3)
    if abs(a0.imag) > 1e-12 or np.max(np.abs(avec.imag)) > 1e-12:
        raise ValueError("spin state symbol must be real")
    if abs(2.0 * a0.real - 1.0) > 1e-9:
        raise ValueError("spin state symbol must have unit trace (a0 = 1/2)")
    s = 2.0 * avec.real
    if np.linalg.norm(s) > 1.0 + 1e-9:
        raise ValueError("Bloch vector must lie in the unit ball")
    return s


@dataclass(frozen=True)
class SternGerlachReport:
    """Deflection law and outcome moments of one field-gradient run.

    `deflection` is the sigma3-coefficient D of the position shift
    extracted from the flow (the per-branch quantum deflection); the
    pole trajectories carry the raw symbol values +- sqrt(3) D.  Moments
    are those of the two-point outcome law at +-D with the weights
    inferred from the flow mean; fiber averages of symbol powers differ
    from outcome moments beyond the second (symbol powers leave C1).
    """

    eps: float
    t: float
    q0: float
    bloch: tuple
    slope: float
    deflection: float
    deflection_closed: float
    pole_deflections: tuple
    linearity_residual: float
    mean: float
    mean_closed: float
    weights: tuple
    weights_closed: tuple
    moments: tuple
    moments_closed: tuple
    max_rel_error: float


def stern_gerlach_run(m: ModelSpec, w_spin: SpinSymbol, eps: float, t: float,
                      q0: float = 0.0, p1: float = 0.0,
                      quad: SphereQuadrature | None = None,
                      dt: float | None = None) -> SternGerlachReport:
    """Field-gradient deflection against the closed forms.

    The model template must be in field-gradient mode; eps replaces the
    template's value.  Closed forms assume the packet starts at rest
    along the field axis, so p1 != 0 is a domain error.
    """
    if m.sg_profile is None:
        raise ValueError("model must be in field-gradient mode")
    if p1 != 0.0:
        raise ValueError("closed forms require vanishing initial momentum")
    m = replace(m, epsilon=float(eps))
    s = _bloch_of(w_spin)
    if quad is None:
        quad = default_quadrature()
    if dt is None:
        dt = default_dt(m)

    K = len(quad.weights)
    q = np.full(K + 2, float(q0))
    p = np.zeros(K + 2)
    nx = np.concatenate([quad.nodes[:, 0], [0.0, 0.0]])
    ny = np.concatenate([quad.nodes[:, 1], [0.0, 0.0]])
    nz = np.concatenate([quad.nodes[:, 2], [1.0, -1.0]])
    advance_ensemble(m, q, p, nx, ny, nz, t, dt)
    delta = q - q0

    _, db = kernels.sg_field(np.asarray([q0]), *m.profile_code())
    slope = float(db[0])
    D_closed = m.epsilon * t**2 * slope / 4.0

    wgt = quad.weights / (4.0 * np.pi)
    D = float(SQRT3 * np.sum(wgt * quad.nodes[:, 2] * delta[:K]))
    linearity = float(np.max(np.abs(delta[:K] - SQRT3 * D * quad.nodes[:, 2])))
    mean = float(2.0 * np.sum(
        wgt * delta[:K] * (0.5 + (SQRT3 / 2.0) * (quad.nodes @ s))))

    ratio = mean / D if D != 0.0 else 0.0
    weights = (0.5 * (1.0 + ratio), 0.5 * (1.0 - ratio))
    weights_closed = (0.5 * (1.0 + s[2]), 0.5 * (1.0 - s[2]))
    moments = tuple(weights[0] * D**k + weights[1] * (-D)**k
                    for k in range(1, 5))
    moments_closed = tuple(D_closed**k * (1.0 if k % 2 == 0 else s[2])
                           for k in range(1, 5))

    scale = max(abs(D_closed), 1e-300)
    errs = [abs(D - D_closed) / scale,
            abs(mean - D_closed * s[2]) / scale,
            abs(weights[0] - weights_closed[0]),
            abs(weights[1] - weights_closed[1])]
    errs += [abs(mo - mc) / max(abs(mc), scale**k)
             for k, (mo, mc) in enumerate(zip(moments, moments_closed), 1)]
    return SternGerlachReport(
        eps=m.epsilon, t=t, q0=q0, bloch=tuple(s), slope=slope,
        deflection=D, deflection_closed=D_closed,
        pole_deflections=(float(delta[K]), float(delta[K + 1])),
        linearity_residual=linearity, mean=mean,
        mean_closed=D_closed * s[2], weights=weights,
        weights_closed=weights_closed, moments=moments,
        moments_closed=moments_closed, max_rel_error=float(max(errs)))


@dataclass(frozen=True)
class DeflectionProbe:
    """Quantum packet means against the leading-order deflection law."""

    eps: tuple
    t: float
    bloch: tuple
    quantum_means: tuple
    closed_means: tuple
    discrepancies: tuple

    @property
    def ratio(self) -> float:
        return self.discrepancies[0] / self.discrepancies[1]


def _packet_mean(eps: float, t: float, profile: tuple, branch: float,
                 radius: float) -> float:
    """<q>(t) of a 1-d packet under h = p^2/2 + branch * (eps/2) b(q)."""
    grid = Grid.balanced(eps, radius, margin=1.0)
    code_map = {"plateau-linear": 0, "sine": 1}
    U, P = grid.meshes()
    b, _ = kernels.sg_field(U[:, 0], code_map[profile[0]], *profile[1:])
    h = 0.5 * P**2 + branch * 0.5 * eps * b[:, None]
    H = weyl_quantize_scalar(h, grid, check_support=False)
    H = 0.5 * (H + H.conj().T)
    evals, vecs = np.linalg.eigh(H)
    x = grid.x_nodes
    psi = np.exp(-x**2 / (2.0 * eps)).astype(np.complex128)
    psi /= np.linalg.norm(psi)
    c = vecs.conj().T @ psi
    psi_t = vecs @ (np.exp(-1j * evals * t / eps) * c)
    return float(np.sum(x * np.abs(psi_t)**2).real)


def stern_gerlach_quantum_probe(w_spin: SpinSymbol, eps: float = 2.0**-6,
                                t: float = 2.0,
                                profile: tuple = ("sine", 1.0, 1.2, 2.0),
                                radius: float = 2.5) -> DeflectionProbe:
    """eps-scaling probe of the quantum-vs-deflection-law discrepancy.

    The spin branches decouple into scalar packets under p^2/2 -+
    (eps/2) b(q); the Born-weighted mean position is compared to the
    leading-order law D s3, D = eps t^2 b'(0)/4, at eps and eps/2.  The
    discrepancy is the next semiclassical correction and should scale
    as eps^2 (ratio near 4).
    """
    s = _bloch_of(w_spin)
    code_map = {"plateau-linear": 0, "sine": 1}
    _, db = kernels.sg_field(np.asarray([0.0]), code_map[profile[0]],
                             *profile[1:])
    wp, wm = 0.5 * (1.0 + s[2]), 0.5 * (1.0 - s[2])
    qms, closed, disc = [], [], []
    for e in (eps, 0.5 * eps):
        mean_up = _packet_mean(e, t, profile, -1.0, radius)
        mean_dn = _packet_mean(e, t, profile, +1.0, radius)
        qm = wp * mean_up + wm * mean_dn
        D = e * t**2 * float(db[0]) / 4.0
        qms.append(qm)
        closed.append(D * s[2])
        disc.append(abs(qm - D * s[2]))
    return DeflectionProbe(eps=(eps, 0.5 * eps), t=t, bloch=tuple(s),
                           quantum_means=tuple(qms), closed_means=tuple(closed),
                           discrepancies=tuple(disc))


# ------------------------------------------------------------- flow bounds

@dataclass(frozen=True)
class FlowBoundReport:
    """Derivative-flow bounds over sampled initial data on one window.

    Ratios are max over time records and initial states of the measured
    norm against its bound; all must be <= 1 for the bounds to hold.
    b = 2 ||[h_q h_p]||, g = sqrt(3) ||[h_p; -h_q]|| enter the window
    |t| <= eps^{-1/2} sqrt(alpha / (b g)).
    """

    eps: float
    alpha: float
    b: float
    g: float
    window: float
    z_ratio: float
    n_ratio: float
    deviation_ratio: float

    @property
    def passed(self) -> bool:
        return max(self.z_ratio, self.n_ratio, self.deviation_ratio) <= 1.0

    def summary(self) -> str:
        return "\n".join([
            f"eps={self.eps:g} alpha={self.alpha:g} b={self.b:g} g={self.g:g}"
            f" window |t| <= {self.window:.4f}",
            f"max ||dZ|| / (1/(1-alpha))          = {self.z_ratio:.6f}",
            f"max ||dN|| / (b|t|/(1-alpha))       = {self.n_ratio:.6f}",
            f"max ||dZ - R(t)|| / (eps b g t^2/(1-alpha)) = "
            f"{self.deviation_ratio:.6f}",
            "bounds hold" if self.passed else "BOUND VIOLATED",
        ])


def flow_bound_check(m: ModelSpec | None = None, eps: float = 1e-3,
                     alpha: float = 0.5, n_states: int = 8,
                     seed: int = 7, dt: float | None = None,
                     record_every: int = 20) -> FlowBoundReport:
    """Check the derivative-flow bounds on the stated time window.

    Runs the joint variational integration forward and backward from a
    seeded sample of initial states and compares ||dZ||, ||dN||, and
    ||dZ - dZ0|| (dZ0 the free harmonic Jacobian, known in closed form)
    against their bounds.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if m is None:
        m = ModelSpec.rabi(eps)
    else:
        if m.sg_profile is not None:
            raise ValueError("bounds apply to the harmonic-linear mode")
        m = replace(m, epsilon=eps)
    Mb = np.stack([m.h_q, m.h_p], axis=1)  # 3 x 2
    b = 2.0 * float(np.linalg.norm(Mb, ord=2))
    G = SQRT3 * np.stack([m.h_p, -m.h_q])  # 2 x 3
    g = float(np.linalg.norm(G, ord=2))
    if b == 0.0 or g == 0.0:
        raise ValueError("bounds are vacuous without position/momentum "
                         "coupling (b g = 0)")
    window = np.sqrt(alpha / (b * g)) / np.sqrt(eps)

    rng = np.random.default_rng(seed)
    z_ratio = n_ratio = dev_ratio = 0.0
    w = m.omega
    for _ in range(n_states):
        z = rng.uniform(-1.0, 1.0, size=2)
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        v0 = VariationalState(state=ExtendedState(z[0], z[1], n))
        for sign in (1.0, -1.0):
            res = variational_trajectory(m, v0, sign * window, dt=dt,
                                         record_every=record_every)
            zn, nn = res.spectral_norms()
            tt = np.abs(res.times)
            z_ratio = max(z_ratio, float(np.max(zn)) * (1.0 - alpha))
            pos = tt > 0
            n_ratio = max(n_ratio, float(np.max(
                nn[pos] * (1.0 - alpha) / (b * tt[pos]))))
            ct, st = np.cos(w * res.times), np.sin(w * res.times)
            R = np.empty((len(tt), 2, 2))
            R[:, 0, 0] = ct
            R[:, 0, 1] = st / w
            R[:, 1, 0] = -w * st
            R[:, 1, 1] = ct
            dev = np.linalg.norm(res.dZ - R, ord=2, axis=(1, 2))
            dev_ratio = max(dev_ratio, float(np.max(
                dev[pos] * (1.0 - alpha) / (eps * b * g * tt[pos]**2))))
    return FlowBoundReport(eps=eps, alpha=alpha, b=b, g=g, window=float(window),
                           z_ratio=z_ratio, n_ratio=n_ratio,
                           deviation_ratio=dev_ratio)
