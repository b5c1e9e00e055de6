//! Exact Heisenberg-picture dynamics of `N` coupled, time-dependent quadratic
//! oscillators
//!
//! ```text
//! H(t) = A_{μν}(t) z^μ z^ν + B_μ(t) z^μ + C(t),    z = (q_1..q_N, p_1..p_N)
//! ```
//!
//! built from classical solutions: a solution matrix `V(t)` integrated from
//! reference-oscillator initial data defines `2N` linear invariants `b^μ`
//! (annihilation/creation operators of the invariant), the quadratic
//! Lewis–Riesenfeld invariant `I = Σ ω_i (b_i† b_i + 1/2)`, the affine
//! Heisenberg propagator `z(t) = Z(t) z(0) + d(t)`, and the first and second
//! moments of number and coherent states of `I`.
//!
//! Conventions: `ħ = 1`, `[z^μ, z^ν] = i ε^{μν}`, and phase-space slots are
//! 0-based (`0..N` positions, `N..2N` momenta).
//!
//! [`oracle`] is an independent truncated Fock-space Schrödinger solver used
//! to cross-check the invariant method on small systems.

// `!(x > 0.0)` is used on purpose so that NaN is rejected alongside non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod invariant;
pub mod moments;
pub mod oracle;
pub mod propagator;
pub mod solver;
pub mod symplectic;

pub use nalgebra::{DMatrix, DVector};
pub use nalgebra::Complex;

/// Complex double used throughout.
pub type C64 = Complex<f64>;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use hamiltonian::{
    from_ladder, ladder_to_coefficients, preset, to_ladder, Coefficients, HamiltonianSchedule, LadderRepresentation,
    Preset, PresetParams, SampledTable,
};
pub use invariant::{
    build_primary, fast_inverse, invariant_residual, invariant_residual_parts, lr_invariant, quadratic_residual,
    PrimaryInvariantSet, QuadraticInvariant, ResidualParts,
};
pub use moments::{
    coherent_state_moments, coherent_to_phase_space, number_state_moments, state_moments,
    uncertainty_products, MomentReport, MomentSample, StateSpec,
};
pub use oracle::{oracle_moments, FockConfig, OracleRun};
pub use propagator::{build_propagator, heisenberg_residual, heisenberg_residual_parts, reconstruct_qp, Propagator, QpCoefficients};
pub use solver::{
    assemble_v, canonical_residual, conjugacy_residual, default_dt, integrate_classical, integrate_solution,
    integrate_solution_with,
    ClassicalTrajectory, ReferenceFrequencies, SolutionRecord, SolverOptions,
};
pub use symplectic::{lower_index, raise_index, symplectic_residual, PhaseIndexConvention, SymplecticForm};
