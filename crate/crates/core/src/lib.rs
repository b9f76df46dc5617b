//! Smoothed statistical model checking of parametric CTMCs.
//!
//! The crate learns the satisfaction probability of a bounded temporal
//! property as a function of a chemical reaction network's rate parameters.
//! Trajectory labels from exact stochastic simulation feed a sparse
//! variational Gaussian-process classifier (probit link) that can be updated
//! online, and active query strategies pick where to simulate next.
//!
//! The crate is `no_std` and only needs `alloc`; IO, parallelism and the
//! command line live in the companion `smc` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod crn;
pub mod design;
pub mod gp;
pub mod labeling;
pub mod linalg;
pub mod metrics;
pub mod property;
pub mod query;
pub mod rng;
pub mod special;
pub mod ssa;
pub mod streaming;
pub mod svgp;

pub use crn::{parse_model, CrnModel, ModelError, ParameterPoint, ParameterSpace, Reaction};
pub use property::{check, label_batch, parse_property, Property, PropertyError};
pub use rng::RngStream;
pub use ssa::{simulate, simulate_batch, Trajectory};
pub use design::Design;
pub use gp::{GaussHermite, GaussianDist, KernelParams};
pub use labeling::{LabelError, Oracle};
pub use metrics::{metrics, Metrics, MetricsError};
pub use query::{QueryConfig, QueryError, Strategy};
pub use svgp::{Dataset, FitOptions, FitOutcome, PredictiveDist, SvgpError, VariationalPosterior};
