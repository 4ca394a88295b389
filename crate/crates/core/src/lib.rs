//! An OOD-generalization defense for image classifiers.
//!
//! Test inputs pass through a Mahalanobis-score gate fitted on in-distribution
//! features; inputs flagged as out-of-distribution are translated back into
//! the model's training distribution by image-to-image translators before
//! classification, while in-distribution inputs reach the model untouched.
//!
//! The crate bundles everything needed to run the experiments end to end:
//! dataset handling ([`datamodel`]), a small CPU neural-network stack
//! ([`nn`]), target-model training ([`classifier`]), evasion attacks
//! ([`attacks`]), the detector ([`ood_detector`]), translator training
//! ([`translation`]), the gated pipeline ([`defense`]), metrics and
//! experiment drivers ([`eval`]), and the `oodmap` CLI ([`cli`]).

pub mod attacks;
pub mod classifier;
pub mod cli;
pub mod datamodel;
pub mod defense;
pub mod error;
pub mod eval;
pub mod nn;
pub mod ood_detector;
pub mod synth;
pub mod translation;
pub mod util;

pub use error::{Error, Result};
