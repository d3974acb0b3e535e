//! Mode-assisted training of restricted Boltzmann machines.
//!
//! The crate is organised bottom-up:
//!
//! * [`rbm`] – parameters, energies, conditionals, Gibbs transitions and the
//!   exact (enumerated) partition function, marginals and log-likelihood.
//! * [`distribution`] and [`datasets`] – empirical data distributions and
//!   the synthetic generators / MNIST reader used in the experiments.
//! * [`solvers`] – ground-state search: exhaustive oracle, gauge utilities,
//!   frustration index, the MAX-2-SAT encoding and the memcomputing-style
//!   dynamical solver.
//! * [`training`] – CD-k / PCD-k estimators, the mode update, its schedule
//!   and learning rate, and the complete training loop.
//! * [`diagnostics`] – spin distance, energy laws, variance tracking, hidden
//!   certainty, modal correspondence and the solver-vs-CD benchmark.
//! * [`experiment`] – TOML-configured replicate runner writing metrics,
//!   checkpoints and summaries.

pub mod datasets;
pub mod diagnostics;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod io;
pub mod math;
pub mod rbm;
pub mod solvers;
pub mod training;

pub use distribution::DataDistribution;
pub use error::{Error, Result};
pub use rbm::{Convention, NodeState, RbmParams};
