//! Capacity of the block-noncoherent AWGN channel with phase-only
//! quantization at the receiver and uniform MPSK input.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: parameters, quantizer, constellation, sector likelihoods
//! - [`likelihood`]: sector likelihoods tabulated on a channel-phase grid
//! - [`symmetry`]: canonical forms and orbit tables for outcome vectors
//! - [`capacity`]: block probabilities, entropies, mutual information
//! - [`montecarlo`]: simulation estimates, including dithered constellations
//! - [`analysis`]: ML ambiguity, coherent and fine-quantization references
//! - [`verify`]: the invariant suite behind `phasequant verify`
//! - [`cache`], [`cli`]: orbit-table caching and the command-line front end

pub mod analysis;
pub mod cache;
pub mod capacity;
pub mod channel;
pub mod cli;
pub mod error;
pub mod likelihood;
pub mod montecarlo;
pub mod symmetry;
pub mod verify;

pub use capacity::{capacity_point, CapacityEngine, CapacityPoint};
pub use channel::{ChannelConfig, Constellation, InputVector, OutcomeVector};
pub use error::{Error, Result};
pub use likelihood::SectorLikelihoodTable;
