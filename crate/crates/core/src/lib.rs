//! Coherent ro-vibrational dynamics of a thermal diatomic ensemble as seen
//! by time-resolved coherent anti-Stokes Raman scattering (CARS).
//!
//! The pipeline is: spectroscopic constants ([`molmodel`]) → thermal
//! rotational populations ([`ensemble`]) → pump/Stokes two-photon spectrum
//! ([`pulses`]) → O/Q/S Raman lines with complex amplitudes ([`excitation`])
//! → rotating-frame coherence ρ₀₁(t) ([`dynamics`]) → revival analysis
//! ([`analysis`]) and parameter retrieval ([`fit`]).
//!
//! Units: wavenumbers in cm⁻¹, coherence times in ps, pulse parameters in fs
//! and fs².

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod excitation;
pub mod fit;
pub mod io;
pub mod molmodel;
pub mod pulses;
pub mod units;

pub use error::{Error, Result};
