//! Local-valley discovery and characterization for Ising spin-glass and
//! RBM energy landscapes.
//!
//! The crate is organized bottom-up:
//!
//! * [`ising`] holds the spin-glass model, energy evaluation and the
//!   single-flip neighborhood.
//! * [`rbm`] trains restricted Boltzmann machines with contrastive
//!   divergence and converts them into Ising models.
//! * [`mc`] contains the Monte Carlo kernels: Metropolis sweeps,
//!   annealing schedules and campaigns, zero-temperature descent and the
//!   warming chain driver.
//! * [`valley`] estimates valley parameters (barrier, size, width, DOS)
//!   and keeps the registry of discovered valleys.
//! * [`samplers`] produces sample sets from simulated annealing, a
//!   simulated-quantum-annealing surrogate, or external read files.
//! * [`compare`] partitions valleys by discovery provenance and builds the
//!   histogram and basin-of-attraction ratio tables.
//! * [`oracle`] enumerates small landscapes exactly and is the ground truth
//!   every estimator is checked against.
//! * [`config`] is the flat key-value run configuration shared with the CLI.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compare;
pub mod config;
mod error;
pub mod ising;
pub mod mc;
pub mod oracle;
pub mod rbm;
mod rng;
pub mod samplers;
pub mod stats;
pub mod valley;

pub use error::{Error, Result};
pub use ising::{IsingModel, SpinConfiguration};
pub use mc::{descend_zero_t, ChainResult, Schedule, ScheduleKind};
pub use oracle::ExactLandscape;
pub use rbm::{Dataset, Rbm, TrainingConfig};
pub use rng::RandomSource;
pub use samplers::{AnnealFunctions, SampleSet};
pub use valley::{ValleyRecord, ValleyRegistry};
