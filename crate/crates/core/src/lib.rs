//! Lloyd quantization on the unit circle, studied as a discrete dynamical
//! system.
//!
//! The crate covers the Lloyd map under uniform and von Mises densities, the
//! circulant linearisation at the equally spaced codebook and its Fourier
//! spectrum, flip-bifurcation checks, Lyapunov spectra by repeated QR, and a
//! Lloyd iteration that detects and escapes period-2 oscillations.

pub mod angle;
pub mod density;
pub mod error;
pub mod experiments;
pub mod export;
pub mod linearization;
pub mod lyapunov;
pub mod quadrature;
pub mod quantizer;
pub mod sala;
pub mod stability;

pub use angle::{Angle, Configuration};
pub use density::{Density, DensityModel};
pub use error::{Error, Result};
pub use experiments::DensityFamily;
pub use linearization::DenseMatrix;
pub use quantizer::{CentroidMode, Orbit};
pub use sala::SalaConfig;
pub use stability::{StabilityReport, Verdict};
