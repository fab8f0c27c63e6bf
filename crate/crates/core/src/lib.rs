//! Traffic-aware ambient backscatter over alpha-Ginibre primary networks.
//!
//! The crate covers the whole pipeline: packet traces are turned into
//! feature vectors ([`traffic`]), grouped into traffic patterns by a
//! Dirichlet-process mixture ([`bnp`]), and each pattern's energy outage and
//! coverage at a backscatter tag are computed analytically ([`analytics`])
//! and by simulation over sampled networks ([`geometry`], [`simcore`]).

pub mod analytics;
pub mod bnp;
pub mod error;
pub mod geometry;
pub mod quad;
pub mod simcore;
pub mod traffic;

pub use error::{Error, Result};
