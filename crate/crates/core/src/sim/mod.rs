//! Data generation and Monte-Carlo drivers for the spiked and manifold experiments.

mod experiment;
mod generate;
mod rng;
mod stats;

pub use experiment::*;
pub use generate::*;
pub use rng::{rep_rng, stream_id, stream_rng, RNG_ALGORITHM};
pub use stats::{summarize, Summary};
