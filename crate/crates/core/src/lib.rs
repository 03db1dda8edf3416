//! Finite-blocklength achievability and converse bounds for channel codes
//! learned from samples of an unknown discrete memoryless channel.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: channels, distributions and information measures
//! - [`learning`]: training sets, the counting estimator and PAC penalties
//! - [`density`]: exact sums of per-letter information densities
//! - [`capacity`]: Blahut–Arimoto and the extremal dispersion LP
//! - [`achievability`]: random-coding-union bound with a learning penalty
//! - [`converse`]: metaconverse with a learning penalty
//! - [`asymptotics`]: normal approximations and Berry–Esseen constants
//! - [`codesim`]: Monte Carlo of the learned concatenated random code

pub mod achievability;
pub mod asymptotics;
pub mod capacity;
pub mod codesim;
pub mod converse;
pub mod channel;
pub mod density;
pub mod error;
pub mod learning;
pub mod lp;
pub mod rng;

pub use achievability::{AchievabilityResult, BoundParams, Method};
pub use asymptotics::{BerryEsseenMoments, NormalApproxResult};
pub use capacity::{CapacityDispersion, CapacityEstimate};
pub use channel::{Dist, Dmc, InfoDensityTable};
pub use codesim::{Codebook, Decoded, SimResult};
pub use converse::ConverseResult;
pub use density::{BetaResult, SparsePmf};
pub use error::{Error, Result};
pub use learning::{PenaltyParams, TrainingBudget, TrainingSet};
