//! Phase synchronization by the generalized power method.
//!
//! Given a Hermitian measurement matrix `C = z*(z*)^H + Δ` of an unknown phase
//! vector `z* ∈ 𝕋ⁿ`, the crate estimates `z*` (modulo a global phase) by
//! maximizing `f(z) = z^H C z` over `𝕋ⁿ` with the iteration
//! `z ← normalize((I + (α/n)C) z)` started from the eigenvector estimator,
//! and verifies the estimation-error and convergence-rate certificates of the
//! resulting trajectory.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); file formats,
//! sweeps and the command-line tool work in `f64`, for which the `*64`
//! aliases below are provided.
//!
//! ```
//! use phasesync::{build_instance, solve_to_maximizer, GpmConfig, SpectralConfig, TruthMode};
//!
//! let inst = build_instance::<f64>(50, 0.5, 7, TruthMode::RandomPhases).unwrap();
//! let sol = solve_to_maximizer(&inst, &GpmConfig::default(), &SpectralConfig::default()).unwrap();
//! assert!(sol.trace.converged());
//! assert!(sol.trace.last().d2_to_truth < 4.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod gpm;
pub mod harness;
pub mod instance;
pub mod matrix;
pub mod phase;
pub mod scalar;
pub mod spectral;

pub use diagnostics::{
    bound_params, criticality_matrix, error_bound_to_maximizer, rho, second_order_check,
    tangent_matrix, verify_run, verify_run_with_noise, BoundParams, BoundReport, CheckOutcome,
    CriticalityReport, Verdict, VerifyConfig,
};
pub use error::{Error, Result};
pub use gpm::{
    gpm_step, run_from_spectral, run_gpm, solve_to_maximizer, Certification, GpmConfig, InitOrigin,
    IterateRecord, IterateTrace, Solution, StepSize, TerminationReason,
};
pub use harness::{execute_run, run_sweep, RunOutput, SweepConfig, SweepReport, TraceFile};
pub use instance::{
    build_instance, load_instance, noise_stats, save_instance, Assumptions, Instance, InstanceTag,
    NoiseStats, TruthMode,
};
pub use matrix::HermitianMatrix;
pub use phase::{dist_l2, dist_linf, normalize_entrywise, objective, PhaseVector, ZeroPolicy};
pub use scalar::Scalar;
pub use spectral::{eigenvector_estimator, spectral_init, SpectralConfig, SpectralEstimate};

pub type PhaseVector64 = PhaseVector<f64>;
pub type HermitianMatrix64 = HermitianMatrix<f64>;
pub type Instance64 = Instance<f64>;
pub type GpmConfig64 = GpmConfig<f64>;
pub type IterateTrace64 = IterateTrace<f64>;
pub type NoiseStats64 = NoiseStats<f64>;
pub type BoundReport64 = BoundReport<f64>;
pub type StepSize64 = StepSize<f64>;
