"""Weyl calculus on R^2 x S^2 with grid quantization and Egorov-type sweeps."""

from .fitting import FitError, fit_loglog
from .flows import (ExtendedState, FlowResult, ModelSpec, VariationalResult,
                    VariationalState, advance_ensemble, default_dt, energy,
                    hamiltonian_vector_field, integrate_decoupled,
                    integrate_flow, integrate_variational,
                    variational_trajectory)
from .harness import (DeflectionProbe, ExpectationResult, FlowBoundReport,
                      Observable, ScalingFit, ScalingReport, SternGerlachReport,
                      StepSizeError, SweepConfig, SweepRow, WignerState,
                      egorov_error, exact_corollary_residual,
                      exact_symbol_evolution, flow_bound_check,
                      long_time_sweep, scaling_fit, state_expectation,
                      stern_gerlach_quantum_probe, stern_gerlach_run,
                      transported_symbols, upsample_field, write_sweep_csv)
from .quantum import (Propagator, SpinorState, build_hamiltonian,
                      coherent_state, propagate_split_step, propagator)
from .spin_algebra import (SphereQuadrature, SpinSymbol, default_quadrature,
                           dequantize_spin, pauli_vector, poisson_s2,
                           project_C1, quantize_spin, random_symbol,
                           star_spin, sw_kernel)
from .weyl_grid import (DefectReport, Grid, GridLeakageError, MoyalReport,
                        NumericalError,
                        PowerIterationError, SymbolField, commutator_defect,
                        grad_fields, hamiltonian_field, hs_norm,
                        moyal_order3_check, moyal_residual, operator_norm,
                        physical_norm, quantize_sigma, sigma_bracket,
                        state_cutoff, weyl_quantize_scalar, wigner_scalar,
                        wigner_transform)

__version__ = "0.1.0"

__all__ = [
    "DefectReport",
    "DeflectionProbe",
    "ExpectationResult",
    "ExtendedState",
    "FitError",
    "FlowBoundReport",
    "FlowResult",
    "Grid",
    "GridLeakageError",
    "ModelSpec",
    "MoyalReport",
    "NumericalError",
    "Observable",
    "PowerIterationError",
    "Propagator",
    "ScalingFit",
    "ScalingReport",
    "SphereQuadrature",
    "SpinSymbol",
    "SpinorState",
    "StepSizeError",
    "SternGerlachReport",
    "SweepConfig",
    "SweepRow",
    "SymbolField",
    "VariationalResult",
    "VariationalState",
    "WignerState",
    "advance_ensemble",
    "build_hamiltonian",
    "coherent_state",
    "commutator_defect",
    "default_dt",
    "default_quadrature",
    "dequantize_spin",
    "egorov_error",
    "energy",
    "exact_corollary_residual",
    "exact_symbol_evolution",
    "fit_loglog",
    "flow_bound_check",
    "grad_fields",
    "hamiltonian_field",
    "hamiltonian_vector_field",
    "hs_norm",
    "integrate_decoupled",
    "integrate_flow",
    "integrate_variational",
    "long_time_sweep",
    "moyal_order3_check",
    "moyal_residual",
    "operator_norm",
    "pauli_vector",
    "physical_norm",
    "poisson_s2",
    "project_C1",
    "propagate_split_step",
    "propagator",
    "quantize_sigma",
    "quantize_spin",
    "random_symbol",
    "scaling_fit",
    "sigma_bracket",
    "star_spin",
    "state_cutoff",
    "state_expectation",
    "stern_gerlach_quantum_probe",
    "stern_gerlach_run",
    "sw_kernel",
    "transported_symbols",
    "upsample_field",
    "variational_trajectory",
    "weyl_quantize_scalar",
    "wigner_scalar",
    "wigner_transform",
    "write_sweep_csv",
]
