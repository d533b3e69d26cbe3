//! Shared numerical substrate: special functions, quadrature, minimization,
//! small dense linear algebra and seeded random streams.

pub mod linalg;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use linalg::{inverse, product_eigvals, sym_eigvals};
pub use optimize::{minimize, minimize_scalar, OptimizerOptions, OptimizerReport};
pub use quadrature::{integrate, sum_discrete, Grid, IntegrationDomain};
pub use rng::{seeded, substream, ReplicationRng};
pub use special::{ein, exp_integral_e1, EULER_GAMMA};
