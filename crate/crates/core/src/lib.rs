//! Simulation and exact analysis of the two-colour drain urn
//! `[[-b, b - a], [0, -a]]` and of the configuration model for random
//! `d`-regular graphs, whose half-edge counts follow that urn with `a = 2`
//! and `b = d`.
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! * [`urn`]: the urn process, its predicted trajectories and path events.
//! * [`bounds`]: the probability and product estimates, with their validity domains.
//! * [`oracle`]: exact forward dynamic programming over reachable states.
//! * [`config`]: half-edge pairing, simplicity rejection and exhaustive enumeration.
//! * [`stats`]: interval estimates, quantiles and weighted log-log fits.
//! * [`seed`]: the reproducible per-replicate random streams.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bounds;
pub mod config;
pub mod error;
pub mod oracle;
pub mod seed;
pub mod stats;
pub mod urn;

pub use error::{Error, Result};
