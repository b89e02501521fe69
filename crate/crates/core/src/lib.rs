//! Exact sampling by racing exponential clocks.
//!
//! This crate views sampling from an unnormalized density f = Q * (f/g) as a
//! competition: realize a Poisson process with mean measure proportional to a
//! tractable proposal Q, perturb each arrival's clock by the density ratio at
//! its location, and the first arrival of the perturbed process is an exact
//! draw from f, no normalizing constant required. Equivalently (negate log
//! time) it is a Gumbel max-perturbation view of the same race.
//!
//! Layers, bottom to top:
//!
//! - [`logdomain`], [`rng`], [`distributions`]: log-space arithmetic, a
//!   deterministic splittable generator, and the primitive samplers
//!   (exponential, Gumbel, truncated Gumbel, Poisson, truncated normal).
//! - [`measures`], [`proposals`]: spaces, regions, and the proposal-measure
//!   trait with counting, spin-uniform, Gaussian-kernel, and Lebesgue
//!   instances.
//! - [`processes`]: Poisson realizations on products, the lazy race stream
//!   (flat and tree-structured), and the equivalent Gumbel value stream.
//! - [`samplers`]: the four exact samplers built on the race: plain
//!   rejection, perturbation with early termination, adaptive partition
//!   rejection, and best-first search over region bounds.
//! - [`problems`]: benchmark targets (finite tables, Gaussian clutter
//!   posterior, heavy-tailed regression posterior, attractive Ising model)
//!   with sound region bounds, including the LP relaxation in [`lp`].
//! - [`stats`], [`experiment`], [`verify`]: goodness-of-fit machinery, the
//!   benchmark harness with CSV output, and the self-check suite.

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod logdomain;
pub mod lp;
pub mod measures;
pub mod problems;
pub mod processes;
pub mod proposals;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod verify;

pub use experiment::{build_problem, run_experiment, ExperimentConfig, ExperimentOutput};
pub use verify::{verify_suite, FaultInjection, VerifySummary};
pub use samplers::{astar_first, osstar_first, per_first, rej_first, RunRecord, Sampler};

pub use error::{Error, Result};
pub use measures::{Point, ProposalMeasure, Region, Space, TargetProblem};
pub use rng::Rng;
