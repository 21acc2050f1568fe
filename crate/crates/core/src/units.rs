//! Decibel conventions.
//!
//! Every public API exchanges power in dB. `SENTINEL_DB` marks a truncated
//! or absent bin and is the floor of [`linear_to_db`], so `log10(0)` never
//! reaches the caller.

use crate::error::{Error, Result};

/// Truncated/absent marker in dB.
pub const SENTINEL_DB: f64 = -200.0;

/// Linear value of [`SENTINEL_DB`].
pub const SENTINEL_LINEAR: f64 = 1e-20;

/// Speed of light in metres per nanosecond.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

/// Delay resolution of a 30 MHz sounder.
pub const DEFAULT_BIN_SPACING_NS: f64 = 33.3;

#[inline]
pub fn db_to_linear(x_db: f64) -> f64 {
    if x_db <= SENTINEL_DB {
        SENTINEL_LINEAR
    } else {
        10f64.powf(x_db / 10.0)
    }
}

/// `10·log10(x)`, clamped below at [`SENTINEL_DB`].
pub fn linear_to_db(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("linear power must be >= 0, got {x}")));
    }
    Ok(linear_to_db_clamped(x))
}

/// Infallible variant for values already known to be non-negative.
#[inline]
pub(crate) fn linear_to_db_clamped(x: f64) -> f64 {
    if x <= 0.0 {
        return SENTINEL_DB;
    }
    (10.0 * x.log10()).max(SENTINEL_DB)
}

#[inline]
pub fn is_sentinel(x_db: f64) -> bool {
    x_db <= SENTINEL_DB
}

/// Linear power of a bin with sentinel bins mapped to exactly zero.
#[inline]
pub(crate) fn bin_power(x_db: f64) -> f64 {
    if is_sentinel(x_db) {
        0.0
    } else {
        db_to_linear(x_db)
    }
}
