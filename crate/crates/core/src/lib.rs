//! Guaranteed set-membership state estimation for discrete-time polynomial
//! systems with bounded noise.

pub mod error;
pub mod filter;
pub mod geometry;
pub mod polynomial;
pub mod scenario;
pub mod sdp;
pub mod sos;

pub use error::{Error, Result};
