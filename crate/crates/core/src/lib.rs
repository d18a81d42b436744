//! Low-SNR performance of K-user Gaussian interference channels.
//!
//! Minimum energy per bit and wideband (sum) slope for the interference-free
//! reference, TDMA, treating interference as noise, and one-dimensional
//! signaling with phase alignment; the generalized Z-channel outer bound with
//! its PSD membership test; and the Monte Carlo harness over random phases.

pub mod alignment;
pub mod channel;
pub mod error;
pub mod format;
pub mod linalg;
pub mod montecarlo;
pub mod outer_bound;
pub mod rng;
pub mod slope;

pub use alignment::{optimize_phases, AlignOptions, AlignmentResult, PhaseVector};
pub use channel::{make_symmetric, rotation, sample_random, Channel};
pub use error::{Error, Result};
pub use outer_bound::{slope_outer_bound, symmetric_bound, BoundOptions, CovProfile, OuterBound, PsdCertificate, Sym2};
pub use slope::{RateCurve, SlopeReport};
