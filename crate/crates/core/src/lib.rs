//! Joint user association and resource allocation for multi-rate 802.11
//! WLANs, run as a controlled coalition matching game.
//!
//! The mechanism has three steps: APs balance load into fractional quota
//! targets; a multiplicative tax over coalition sizes reshapes the worths so
//! players want quota-sized cells; users and APs then play a backward
//! deferred acceptance game whose payoffs are Nash-bargained shares of the
//! modified worths. The matched cells finally transmit under the unmodified
//! MAC, whose saturation throughput model lives in [`mac80211`].
//!
//! - [`model`] — players, scenarios, rates, the coalition family
//! - [`mac80211`] — DCF saturation throughput and attempt rates
//! - [`bargaining`] — Nash-bargaining allocator, fear of ruin
//! - [`control`] — tax rates and single-peakedness certificates
//! - [`loadbalance`] — quota targets and integer caps
//! - [`matching`] — preferences, BDAA, baselines
//! - [`stability`] — brute-force core/pairwise oracles
//! - [`pipeline`] — end-to-end runs, generation, sweeps

pub mod bargaining;
pub mod config;
pub mod control;
pub mod error;
pub mod loadbalance;
pub mod mac80211;
pub mod matching;
pub mod model;
pub mod pipeline;
pub mod stability;

pub use error::{Error, Result};
