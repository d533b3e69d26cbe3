//! Minimum Bregman divergence estimation built around the exponentially
//! weighted divergence (EWD) family.
//!
//! The crate covers the full inference pipeline for the EWD and the density
//! power divergence (DPD) families:
//!
//! - [`divergence`]: convex generators `B`, their derivatives, the induced
//!   weight `w(t) = B''(t) t`, and Bregman divergences between densities.
//! - [`models`]: the parametric families (normal, exponential, Poisson).
//! - [`estimation`]: i.i.d. minimum divergence fits and the M-estimation `psi`.
//! - [`asymptotics`]: `J`, `K`, `xi`, sandwich covariance, influence
//!   functions and asymptotic relative efficiency.
//! - [`regression`]: non-homogeneous estimation for normal linear regression.
//! - [`tuning`]: data-driven tuning parameter selection by estimated MSE.
//! - [`testing`]: restricted estimation and Bregman divergence tests.
//! - [`simulation`]: contamination experiments and FSRE tables.
//! - [`datasets`]: embedded datasets and CSV ingestion.
//!
//! ```
//! use ewd::{datasets, estimation, Generator, Model};
//!
//! let data = datasets::shoshoni();
//! let fit = estimation::estimate_iid(
//!     &Generator::ewd(0.43).unwrap(),
//!     &Model::NormalLocationScale,
//!     &data,
//!     &estimation::Init::Default,
//! )
//! .unwrap();
//! assert!((fit.theta[0] - 0.633).abs() < 1e-3);
//! ```

pub mod asymptotics;
pub mod datasets;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod models;
pub mod numerics;
pub mod regression;
pub mod simulation;
pub mod testing;
pub mod tuning;

pub use divergence::{ConvexGenerator, DensityGrid, Generator};
pub use error::{Error, Result};
pub use models::Model;
