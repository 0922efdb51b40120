//! Mahalanobis distance from noisy high-dimensional data.
//!
//! The precision matrix is estimated by shrinking the eigenvalues of the
//! sample covariance. [`shrinkers::ShrinkageRule::optimal`] is the
//! operator-norm optimal shrinker under the spiked covariance model and
//! [`shrinkers::ShrinkageRule::classical`] is the usual pseudo-inverse of
//! `S - sigma^2 I`. [`rmt`] holds the asymptotic laws used to build and
//! evaluate them, and [`sim`] runs the Monte-Carlo experiments.

// Domain checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod par;
pub mod rmt;
pub mod shrinkers;
pub mod sim;

pub use error::{Error, Result};
pub use faer::{Mat, MatRef};
pub use linalg::{EigenSystem, GroundTruth, SampleSet};
pub use par::Execution;
pub use rmt::{AspectRatio, SpikedModel};
pub use shrinkers::{PrecisionEstimate, RuleKind, ShrinkageRule, ThresholdVariant};
