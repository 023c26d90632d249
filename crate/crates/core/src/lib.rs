//! Simulator and optimizer for laser-based indoor optical wireless downlinks
//! with rate splitting (RS) and hierarchical rate splitting (HRS).
//!
//! The pipeline runs from VCSEL beam physics ([`beam`]) through room geometry
//! ([`geometry`]) and the per-user channel matrix ([`channel`]) to precoders
//! ([`precoding`]), rates ([`ratesplit`], [`hrs`]), power allocation
//! ([`optimizer`]) and Monte Carlo sweeps ([`runner`]).

pub mod beam;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hrs;
pub mod optimizer;
pub mod precoding;
pub mod quadrature;
pub mod ratesplit;
pub mod runner;

pub use error::{Error, Result};
