//! Ensemble averaging for discrete energy spectra.
//!
//! Given a list of energy levels and a total energy, this crate constructs
//! the set of occupation-probability vectors compatible with normalization
//! and that energy (a fixed-energy ensemble), averages the occupations over
//! it under a configurable measure, solves the canonical (Gibbs)
//! distribution matching the same energy, and quantifies how close the two
//! ensembles land.
//!
//! # Layout
//!
//! - [`spectrum`]: domain types (spectra, pure states, occupation vectors)
//!   and phase evolution.
//! - [`canonical`]: Boltzmann weights, partition function, mean energy,
//!   inverse-temperature solving, free energy.
//! - [`microcanonical`]: the fixed-energy ensemble, its closed-form average
//!   for three levels, a quadrature oracle, and a seeded Metropolis sampler.
//! - [`compare`]: agreement metrics and sweeps across spectrum families.
//! - [`reference`]: frozen benchmark cases wiring everything together.
//!
//! # Example
//!
//! ```
//! use ensembles::microcanonical::{EnsembleSpec, Measure, SamplerSettings};
//! use ensembles::spectrum::Spectrum;
//!
//! let spec = EnsembleSpec::new(
//!     Spectrum::new(vec![0.0, 5.0, 8.0])?,
//!     2.0,
//!     Measure::AmplitudeUniform,
//!     SamplerSettings::default(),
//! )?;
//! let avg = ensembles::microcanonical::microcanonical_average(&spec)?;
//! let canon = ensembles::canonical::solve_beta(spec.spectrum(), 2.0)?;
//! assert!((avg.mean_probs.probs()[0] - 0.6736).abs() < 1e-3);
//! assert!((canon.beta - 0.2223).abs() < 1e-3);
//! # Ok::<(), ensembles::EnsembleError>(())
//! ```

pub mod canonical;
pub mod compare;
pub mod error;
pub mod microcanonical;
pub mod reference;
pub mod spectrum;

pub use error::{EnsembleError, Result};
