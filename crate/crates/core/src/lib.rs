//! One-dimensional Coulomb gas on `[0, 1]` with nearest-neighbour `1/x`
//! repulsion and a constant external force.
//!
//! The crate computes the conditional spacing statistics of the Gibbs
//! ensemble three ways: through exponentially tilted independent spacing
//! laws calibrated so their means sum to one, through Monte Carlo sampling
//! of configurations, and through brute-force quadrature for two or three
//! spacings. Closed-form predictions for every force regime live in
//! [`theory`].

pub mod calibration;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod quadrature;
pub mod sampler;
pub mod special_fn;
pub mod stats;
pub mod theory;
pub mod tilted;

pub use calibration::{CalibrationResult, ModelParams, Regime, RegimeLabel};
pub use error::{Error, Result};
pub use quadrature::QuadratureSettings;
pub use sampler::{Configuration, McmcSettings, SpacingVector};
pub use theory::SpacingPrediction;
pub use tilted::TiltedSpacingDist;
