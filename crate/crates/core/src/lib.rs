//! Channel-sounding analysis: tapped-delay-line (TDL) extraction from power
//! delay profiles, band-limited CIR reconstruction from TDL parameters, and
//! the metric and loss suite used to score predicted parameters.
//!
//! Power is exchanged in dB everywhere; [`units::SENTINEL_DB`] marks an
//! absent or truncated bin.

pub mod dataset;
pub mod error;
pub mod geo;
pub mod hungarian;
pub mod losses;
pub mod metrics;
pub mod pdp;
pub mod predictor;
pub mod raster;
pub mod synth;
pub mod types;
pub mod units;

pub use error::{Error, Result};
pub use hungarian::{hungarian_assign, TapAssignment};
pub use metrics::EvalReport;
pub use pdp::{DenoiseConfig, ExtractConfig};
pub use synth::SamplingSpec;
pub use types::{Apdp, Cir, PdpSnapshot, Tap, TdlParams};
