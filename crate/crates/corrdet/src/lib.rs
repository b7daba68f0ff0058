//! Correlation detection on finite sample spaces: planted distribution
//! families with exact probability mass functions, an information-theoretic
//! audit engine (divergences, channels, data-processing margins), the
//! constructive chain machinery relating transcripts to per-hypothesis
//! biases, planted-correlation Gaussian calculus, and memory-budgeted
//! streaming plus broadcast-protocol detectors with bit-exact resource
//! accounting.

pub mod error;
pub mod finite_dist;
pub mod gaussian;
pub mod infotheory;
pub mod lowerbound_chain;
pub mod protocol;
pub mod streaming;
pub mod suites;

mod util;

pub use error::{Error, Result};
