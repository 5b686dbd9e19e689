//! Simulation and verification toolkit for scalar SDEs whose drift has
//! finitely many discontinuities.
//!
//! The crate implements the Euler-Maruyama family of schemes (discrete,
//! time-continuous on a fine grid, piecewise-linear interpolant), the
//! transformation `G` to an SDE with Lipschitz coefficients, Brownian path
//! generation with exact coarse/fine coupling, and a deterministic parallel
//! Monte Carlo engine for strong-error and occupation-time studies.
//!
//! All numerics are generic over the scalar type via [`Real`] (`f32` or
//! `f64`); the `*64` aliases below fix the precision used by the CLI and the
//! experiment suite.
//!
//! ```
//! use emx_core::analysis::{final_time_error, fit_rate, ReferenceMode, StudyConfig};
//! use emx_core::randomness::SeedSpec;
//! use emx_core::sde_model::{Diffusion, FunctionSpec, PiecewiseDrift, SdeProblem};
//!
//! // Geometric Brownian motion, measured against its closed-form solution.
//! let problem = SdeProblem::new(
//!     1.0,
//!     PiecewiseDrift::single(FunctionSpec::Affine { a: 0.0, b: 0.05 }),
//!     Diffusion::new(FunctionSpec::Affine { a: 0.0, b: 0.2 }),
//! );
//! let config = StudyConfig {
//!     n_list: vec![16, 32, 64],
//!     n_fine: 256,
//!     m: 200,
//!     reference: ReferenceMode::ClosedFormGbm,
//!     ..StudyConfig::defaults()
//! };
//! let table = final_time_error(&config, &problem, &SeedSpec::new(7, "demo")).unwrap();
//! let fit = fit_rate(&table).unwrap();
//! assert!(fit.slope < -0.3 && fit.slope > -0.7);
//! ```

pub mod analysis;
pub mod error;
pub mod randomness;
pub mod real;
pub mod schemes;
pub mod sde_model;
pub mod transform;

pub use error::Error;
pub use real::Real;

pub type FunctionSpec64 = sde_model::FunctionSpec<f64>;
pub type PiecewiseDrift64 = sde_model::PiecewiseDrift<f64>;
pub type Diffusion64 = sde_model::Diffusion<f64>;
pub type SdeProblem64 = sde_model::SdeProblem<f64>;
pub type ValidationReport64 = sde_model::ValidationReport<f64>;
pub type BrownianPath64 = randomness::BrownianPath<f64>;
pub type GTransform64 = transform::GTransform<f64>;
pub type EmPath64 = schemes::EmPath<f64>;
pub type ContinuousEmEval64 = schemes::ContinuousEmEval<f64>;
pub type StudyConfig64 = analysis::StudyConfig<f64>;
pub type ErrorTable64 = analysis::ErrorTable<f64>;
pub type RateFit64 = analysis::RateFit<f64>;
