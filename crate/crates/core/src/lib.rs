//! Real-time dynamics of 2D spin-1/2 antiferromagnets driven entirely by
//! projective total-spin measurements on nearest-neighbor pairs.
//!
//! The crate is organized around one exact reduction: the outcome-summed
//! measurement channel acts on sigma^3-diagonal states as a classical
//! Markov process that swaps antiparallel neighbors with probability 1/2.
//! Large systems are therefore simulated classically ([`engine`]) from
//! thermally sampled initial ensembles ([`sse`]), while a dense quantum
//! oracle ([`oracle`]) certifies the reduction on small lattices. The
//! [`channel`] module holds the exact rational projector algebra the whole
//! construction rests on; [`analysis`] computes observables and the
//! equilibration, diffusion and finite-size fits.

pub mod analysis;
pub mod channel;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod oracle;
pub mod rngstream;
pub mod spins;
pub mod sse;

pub use error::{Error, Result};
