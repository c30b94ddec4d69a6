//! Background-tracking features and broadcast genre identification.
//!
//! The crate turns per-frame acoustic observations into label alignments over
//! a bank of background transforms, summarises those alignments as
//! block-averaged indicator tracks, and classifies shows by genre with
//! Gaussian mixture, hidden Markov and support vector machine back ends.
//!
//! | module | contents |
//! |--------|----------|
//! | [`corpus`] | frame matrices, label sequences, manifests, deltas, synthetic corpora |
//! | [`transforms`] | CMLLR transforms, their estimation, the background decoder |
//! | [`bgtrack`] | indicator functions, track extraction, SVG rendering |
//! | [`gmm`] | diagonal GMMs: EM, scoring, MAP mean adaptation |
//! | [`hmm`] | ergodic HMMs with GMM emissions: forward, Viterbi, Baum-Welch |
//! | [`svm`] | GMM supervectors and Gaussian-kernel SMO |
//! | [`pipeline`] | model sets, confidence, combination, evaluation, CLI |
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory, e.g. `cargo run --release -p genreid --example genre_pipeline`.

pub mod bgtrack;
pub mod corpus;
pub mod error;
pub mod gmm;
pub mod hmm;
mod jsonio;
mod lattice;
pub mod pipeline;
pub mod svm;
pub mod transforms;

pub use error::{Error, Result};
