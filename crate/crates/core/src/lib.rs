//! Nonlocal-dispersal cooperative free-boundary system, end to end: kernel
//! construction and classification, principal eigenvalues of interval
//! operators, steady states by monotone iteration, semi-wave speeds, and
//! explicit front-tracking time integration with spreading/vanishing
//! classification.
//!
//! The model is two mutually beneficial species on the half line, each
//! diffusing by convolution against its own kernel and each delimited by its
//! own moving front that advances in proportion to the dispersal flux across
//! it. Everything here is deterministic; there is no randomness anywhere.

pub mod error;
pub mod evolve;
pub mod grid;
pub mod kernels;
pub mod reaction;
pub mod scenario;
pub mod semiwave;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use evolve::{
    classify, estimate_speed, simulate_fixed_domain, simulate_free_boundary,
    simulate_prescribed_front, CriticalMu, FrontHistory, FrontSample, Outcome, SimOptions,
    SimOutput, SimState, Species, SpeedEstimate, Stepper, Verdict,
};
pub use grid::{Field, Grid};
pub use kernels::{
    convolve, exp_moment, moment_report, sample_kernel, sample_kernel_capped, KernelSpec,
    MomentReport, SampledKernel,
};
pub use reaction::{coexistence_root, eval_reaction, CoexistenceRoot, CoopParams};
pub use scenario::{critical_mu, scalar_as_system, InitialProfile, Numerics, Scenario};
pub use semiwave::{
    minimal_speed, solve_semiwave, speed_bounds, DispersionResult, SemiWaveResult, SpeedBounds,
};
pub use spectral::{
    principal_eigenvalue, principal_eigenvalue_opts, threshold_length, EigenOptions, EigenResult,
    ThresholdResult,
};
pub use steady::{
    sandwich_iteration, scalar_steady_bounded, scalar_steady_halfline, system_steady_bounded,
    system_steady_halfline, weighted_steady, ProfileKind, SandwichSequence, SteadyClass,
    SteadyPair, SteadyProfile, Weight,
};
