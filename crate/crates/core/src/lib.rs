//! Exact real-space dynamics of a lambda atom driven by a two-photon
//! wavepacket in a chiral, broadband one-dimensional waveguide.
//!
//! * [`model`]: atom, pulse and waveguide parameters.
//! * [`amplitudes`]: closed-form and quadrature evaluation of the excited-state
//!   amplitude `ψ^A(r, t)` and the outgoing two-photon amplitude `φ^BA`.
//! * [`probability`]: ground-state transition probability `p_{a→b}` and the
//!   cascaded single-photon approximation.
//! * [`oracle`]: brute-force integration of the two-excitation amplitudes on a
//!   discrete frequency grid, used to validate everything above.

pub mod amplitudes;
pub mod error;
pub mod model;
pub mod oracle;
pub mod probability;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use model::{coupling_g, AtomParams, ModelConfig, PulseParams};
pub use num_complex::Complex64;
pub use quadrature::QuadratureOptions;
