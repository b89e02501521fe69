//! Benchmark target problems.
//!
//! Four targets exercise every sampler code path: a finite table of masses
//! (the ground-truth fixture for exactness tests), the clutter posterior over
//! a Gaussian mean with outliers, robust regression with Cauchy noise, and
//! the attractive fully connected Ising model whose regional bounds come from
//! an LP relaxation. Each module owns its dataset generator and a CSV dump of
//! the dataset for audit.

mod clutter;
mod discrete;
mod ising;
mod regression;

pub use clutter::{clutter_dataset_csv, default_clutter_data, make_clutter, ClutterProblem};
pub use discrete::{make_discrete, DiscreteTable};
pub use ising::{ising_dataset_csv, ising_random_params, make_ising, IsingProblem};
pub use regression::{
    make_regression, regression_dataset, regression_dataset_csv, RegressionProblem,
};
