//! Multiclass spatial-filter feature extraction and an evolving interval
//! type-2 neuro-fuzzy classifier for multi-channel trial data, plus the
//! pipeline gluing them together.
//!
//! The crate covers, end to end:
//!
//! - a little-endian binary trial format with a text manifest ([`dataio`]);
//! - Butterworth band-pass filtering and epoching ([`preprocess`]);
//! - per-trial spatial covariances, covariance-norm artifact rejection, and
//!   class averages ([`covariance`]);
//! - two-class spatial filters, joint approximate diagonalization for the
//!   multiclass case, mutual-information filter ranking with error-probability
//!   bounds, and normalized log-variance features ([`csp`]);
//! - a self-regulating interval type-2 neuro-fuzzy classifier that grows,
//!   updates, and prunes its rule base online ([`srit2nfis`]);
//! - particle-swarm search over the classifier's starting hyperparameters
//!   ([`pso`]);
//! - synthetic trial generation with planted ground truth ([`synth`]);
//! - the end-to-end evaluation pipeline with reproducible seeding and
//!   side-by-side reference comparison ([`pipeline`]).
//!
//! # Determinism
//!
//! Every randomized component takes an explicit seed, and all derived random
//! streams are hashed from it ([`util::derive_seed`]). With the default
//! `parallel` feature the heavy loops fan out over a thread pool, but
//! reductions happen in fixed order, so outputs are bit-identical with and
//! without the feature — and across runs.

pub mod covariance;
pub mod csp;
pub mod dataio;
pub mod error;
pub mod pipeline;
pub mod preprocess;
pub mod pso;
pub mod srit2nfis;
pub mod synth;
pub mod util;

pub(crate) mod leio;
pub(crate) mod linalg;
pub(crate) mod par;

pub use error::{Error, Result};
