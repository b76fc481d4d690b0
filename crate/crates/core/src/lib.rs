//! Core of the tracelens interaction-trace toolkit.
//!
//! Everything in this crate is a pure function of its inputs: dataset
//! generation is seeded, the bias metrics are computed from an interaction
//! log prefix, and the study phase machine is driven by explicit commands.
//! IO, wire formats and the session server live in the `tracelens` crate.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod domain;
mod error;
pub mod gen;
pub mod metrics;
pub mod session;

pub use error::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;
