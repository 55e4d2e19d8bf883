//! Spatial SIR epidemic on the flat unit 2-torus.
//!
//! Agents diffuse as Brownian motions, susceptibles are infected through a
//! kernel-normalized contact rate and infecteds recover at a constant rate.
//! The crate covers the exact particle simulation, the deterministic
//! reaction-diffusion limit, and the Gaussian fluctuation limits around it.
//!
//! Everything here is `no_std` with `alloc`; file formats and the CLI live in
//! the `torus-sir` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod fft;
pub mod fluctuations;
pub mod grid;
pub mod limit_pde;
pub mod math;
pub mod region;
pub mod simulator;
pub mod spectral;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
pub use grid::GridField;
pub use region::Region;
pub use spectral::{BasisIndex, SpectralField};
pub use torus::{KernelMode, KernelSpec, TorusPoint};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
