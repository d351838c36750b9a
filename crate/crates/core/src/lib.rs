//! Near-field beam focusing for multi-user downlink arrays.
//!
//! The crate synthesizes free-space Fresnel-region channels for planar arrays
//! and computes sum-rate maximizing precoders for three transmitter
//! architectures:
//!
//! * fully-digital arrays ([`wmmse`]),
//! * phase-shifter hybrid arrays ([`hybrid`]),
//! * dynamic metasurface antennas with Lorentzian-constrained elements ([`dma`]).
//!
//! [`harness`] turns declarative scenario files into rate curves, power maps
//! and sum-rate tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dma;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod numerics;
pub mod precoder;
pub mod wmmse;

pub use channel::{
    build_channel, build_planar_channel, ArchitectureKind, ArrayGeometry, DmaParams, Links,
    NearFieldChannel, Region, User, Wavefront,
};
pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, ComplexVector, C64};
pub use wmmse::{solve_fully_digital, DigitalPrecoder, WmmseOptions};
pub use hybrid::{solve_hybrid, HybridOptions, HybridPrecoder};
pub use dma::{solve_dma, DmaInit, DmaOptions, DmaPrecoder, ElementResponse};
pub use harness::{load_scenario, parse_scenario, Architecture, Output, Scenario};
pub use precoder::Precoder;
