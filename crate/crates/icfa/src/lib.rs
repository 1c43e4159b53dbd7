//! Achievable rates and linear precoder design for K-user MIMO interference
//! channels driven by finite-alphabet inputs (PSK/PAM/QAM) instead of the
//! usual Gaussian idealization.
//!
//! The crate provides:
//!
//! - exact-enumeration Monte-Carlo estimators of the per-user mutual
//!   information and weighted sum-rate under discrete constellations
//!   ([`rate`]),
//! - the matching weighted sum-rate gradients assembled from expectation
//!   matrices, with finite-difference validation ([`gradient`]),
//! - closed-form low-SNR beamforming and high-SNR power-allocation designs,
//!   plus the interference-alignment saturation-loss accounting ([`designs`]),
//! - a cyclic gradient-ascent optimizer with backtracking line search and
//!   power projection, generic over the objective ([`optimizer`]),
//! - a soft MAP multiuser detector that marginalizes interference over the
//!   discrete alphabet, and the whitening front-end baseline ([`detector`]),
//! - an experiment harness with a plain-text config format and CSV output
//!   ([`config`] and [`sweep`]).
//!
//! All noise expectations are seeded per `(seed, user, sample)` so that any
//! two evaluations with the same configuration are bit-identical; this is
//! what makes line-search comparisons and finite-difference checks on the
//! Monte-Carlo objective meaningful.

pub mod channel;
pub mod config;
pub mod constellation;
pub mod designs;
pub mod detector;
pub mod error;
pub mod gradient;
pub mod linalg;
pub mod mc;
pub mod optimizer;
pub mod rate;
pub mod sweep;

mod enumeration;

pub use channel::{ChannelSet, NoiseSpec, PrecoderSet};
pub use constellation::{Constellation, DifferenceTable, Scheme, SymbolTable};
pub use error::{Error, Result};
pub use mc::McConfig;
pub use rate::{RateEstimate, Weights};

/// Hard ceiling on the product of all users' vector-alphabet sizes.
///
/// Every expectation in this crate enumerates the joint transmit alphabet of
/// all users, so the work per noise draw scales with this product. Desk-scale
/// instances (K <= 3, two antennas, QPSK) stay at or below 4096.
pub const ENUMERATION_CAP: usize = 1 << 20;
