//! Simulation and verification laboratory for random sparse sampling of
//! Gibbs-weighted dyadic trees.
//!
//! The crate builds the sampled capacity obtained by Bernoulli decimation of
//! the vertices of the `2^d`-ary tree, measures its empirical `L^q` and
//! large-deviation spectra, computes the closed-form predictions (free energy
//! with phase transitions, singularity spectrum), and runs the reconstruction
//! experiment around the sampling-index threshold.
//!
//! Module map:
//! - [`word`]: nodes of the dyadic tree and cube geometry,
//! - [`model`]: Gibbs capacities `mu(I_w) = K nu([w])^alpha 2^(-beta |w|)`
//!   and their thermodynamics (free energy, Legendre spectrum, endpoints),
//! - [`field`]: seeded survival fields with hash and index backends,
//! - [`sampler`]: the neighbor-aware sampled capacity grid and survivor
//!   diagnostics,
//! - [`spectra`]: empirical `L^q` spectra, large-deviation counts, and the
//!   numerical Legendre conjugate,
//! - [`theory`]: closed-form predictions for the sampled capacity,
//! - [`recon`]: pair search and the reconstruction fraction experiment.

pub mod error;
pub mod field;
pub mod gridfile;
pub mod model;
pub mod numerics;
pub mod recon;
pub mod sampler;
pub mod spectra;
pub mod theory;
pub mod word;

pub use error::LabError;
pub use field::{Backend, FieldConfig};
pub use model::{BaseMeasure, GibbsModel};
pub use recon::ReconResult;
pub use sampler::CapacityGrid;
pub use spectra::{Curve, CurveKind};
pub use theory::TheorySummary;
pub use word::DyadicWord;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, LabError>;
