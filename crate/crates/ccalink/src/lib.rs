//! Link-level simulator for pilot-free MIMO-OFDM downlink transmission.
//!
//! A small block of data symbols is repeated across the time-frequency
//! resource grid; the receiver gathers the two copies into a pair of data
//! views and recovers the transmitted block blindly with two-view canonical
//! correlation analysis, no demodulation reference signals required.
//! Pilot-based (LS + MMSE) and perfect-channel receivers are included as
//! baselines, together with a seeded Monte-Carlo sweep harness and CLI.

pub mod channel;
pub mod config;
pub mod error;
pub mod grid;
pub mod harness;
pub mod la;
pub mod rx_baseline;
pub mod rx_cca;
pub mod seeds;
pub mod txchain;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
