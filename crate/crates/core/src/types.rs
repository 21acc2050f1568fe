//! Shared domain types. All are plain immutable values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::SENTINEL_DB;

fn check_powers(powers_db: &mut [f64]) -> Result<()> {
    if powers_db.is_empty() {
        return Err(Error::Shape("power vector is empty".into()));
    }
    for (i, p) in powers_db.iter_mut().enumerate() {
        if p.is_nan() || *p == f64::INFINITY {
            return Err(Error::Validation(format!("bin {i} holds non-finite power {p}")));
        }
        // -inf and anything under the floor collapse onto the sentinel
        if *p < SENTINEL_DB {
            *p = SENTINEL_DB;
        }
    }
    Ok(())
}

fn check_spacing(bin_spacing_ns: f64) -> Result<()> {
    if !(bin_spacing_ns.is_finite() && bin_spacing_ns > 0.0) {
        return Err(Error::Validation(format!(
            "bin spacing must be > 0 ns, got {bin_spacing_ns}"
        )));
    }
    Ok(())
}

/// One raw power-delay-profile observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpSnapshot {
    powers_db: Vec<f64>,
    bin_spacing_ns: f64,
    timestamp_s: f64,
}

impl PdpSnapshot {
    pub fn new(mut powers_db: Vec<f64>, bin_spacing_ns: f64, timestamp_s: f64) -> Result<Self> {
        check_powers(&mut powers_db)?;
        check_spacing(bin_spacing_ns)?;
        Ok(Self {
            powers_db,
            bin_spacing_ns,
            timestamp_s,
        })
    }

    pub fn powers_db(&self) -> &[f64] {
        &self.powers_db
    }

    pub fn bin_spacing_ns(&self) -> f64 {
        self.bin_spacing_ns
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }

    pub fn len(&self) -> usize {
        self.powers_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_db.is_empty()
    }

    /// Delay of bin `n` in ns.
    pub fn delay_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_spacing_ns
    }
}

/// Averaged power delay profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Apdp {
    powers_db: Vec<f64>,
    bin_spacing_ns: f64,
    timestamp_s: f64,
    window_len: usize,
}

impl Apdp {
    pub fn new(
        mut powers_db: Vec<f64>,
        bin_spacing_ns: f64,
        timestamp_s: f64,
        window_len: usize,
    ) -> Result<Self> {
        check_powers(&mut powers_db)?;
        check_spacing(bin_spacing_ns)?;
        if window_len == 0 {
            return Err(Error::Config("window_len must be >= 1".into()));
        }
        Ok(Self {
            powers_db,
            bin_spacing_ns,
            timestamp_s,
            window_len,
        })
    }

    /// Treats a single snapshot as a window-1 average.
    pub fn from_snapshot(snapshot: &PdpSnapshot) -> Self {
        Self {
            powers_db: snapshot.powers_db.clone(),
            bin_spacing_ns: snapshot.bin_spacing_ns,
            timestamp_s: snapshot.timestamp_s,
            window_len: 1,
        }
    }

    /// Same bins and spacing, new power vector. Used by stages that rewrite bins.
    pub(crate) fn with_powers(&self, powers_db: Vec<f64>) -> Self {
        debug_assert_eq!(powers_db.len(), self.powers_db.len());
        Self {
            powers_db,
            ..self.clone()
        }
    }

    pub fn powers_db(&self) -> &[f64] {
        &self.powers_db
    }

    pub fn bin_spacing_ns(&self) -> f64 {
        self.bin_spacing_ns
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn len(&self) -> usize {
        self.powers_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_db.is_empty()
    }

    pub fn to_snapshot(&self) -> PdpSnapshot {
        PdpSnapshot {
            powers_db: self.powers_db.clone(),
            bin_spacing_ns: self.bin_spacing_ns,
            timestamp_s: self.timestamp_s,
        }
    }
}

/// A single extracted multipath tap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_bin: usize,
    pub delay_ns: f64,
    pub power_db: f64,
}

impl Tap {
    pub fn at_bin(delay_bin: usize, bin_spacing_ns: f64, power_db: f64) -> Self {
        Self {
            delay_bin,
            delay_ns: delay_bin as f64 * bin_spacing_ns,
            power_db,
        }
    }
}

/// Structured TDL parameter set `{P, K, N, tau, p}`.
///
/// `powers_db` is relative to the first tap (entry 0 is 0 dB) and
/// `first_tap_power_db` carries the absolute scale. Delays are in ns with
/// the first entry at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdlParams {
    pub first_tap_power_db: f64,
    pub k_factor_db: f64,
    pub num_taps: usize,
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
}

impl TdlParams {
    pub fn new(
        first_tap_power_db: f64,
        k_factor_db: f64,
        delays_ns: Vec<f64>,
        powers_db: Vec<f64>,
    ) -> Result<Self> {
        let params = Self {
            first_tap_power_db,
            k_factor_db,
            num_taps: delays_ns.len(),
            delays_ns,
            powers_db,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Validation(format!("{field}: {why}")));
        if self.num_taps == 0 {
            return bad("num_taps", "must be >= 1".into());
        }
        if self.delays_ns.len() != self.num_taps {
            return bad(
                "delays_ns",
                format!("length {} != num_taps {}", self.delays_ns.len(), self.num_taps),
            );
        }
        if self.powers_db.len() != self.num_taps {
            return bad(
                "powers_db",
                format!("length {} != num_taps {}", self.powers_db.len(), self.num_taps),
            );
        }
        if !self.first_tap_power_db.is_finite() {
            return bad("first_tap_power_db", "must be finite".into());
        }
        if !self.k_factor_db.is_finite() {
            return bad("k_factor_db", "must be finite".into());
        }
        if self.delays_ns.iter().any(|d| !d.is_finite()) {
            return bad("delays_ns", "must be finite".into());
        }
        if self.powers_db.iter().any(|p| !p.is_finite()) {
            return bad("powers_db", "must be finite".into());
        }
        if self.delays_ns[0] != 0.0 {
            return bad("delays_ns", format!("first delay must be 0, got {}", self.delays_ns[0]));
        }
        if let Some(w) = self.delays_ns.windows(2).position(|w| w[1] <= w[0]) {
            return bad("delays_ns", format!("not strictly increasing at index {}", w + 1));
        }
        if self.powers_db[0].abs() > 1e-9 {
            return bad("powers_db", format!("first power must be 0 dB, got {}", self.powers_db[0]));
        }
        Ok(())
    }

    /// Absolute power of tap `i` in dB.
    pub fn absolute_power_db(&self, i: usize) -> f64 {
        self.first_tap_power_db + self.powers_db[i]
    }
}

/// Complex baseband impulse response on a uniform grid.
///
/// `samples` are in units relative to the first tap; `first_tap_power_db`
/// is the scale applied when converting to a PDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    samples: Vec<Complex64>,
    sample_period_ns: f64,
    first_tap_power_db: f64,
}

impl Cir {
    pub fn new(samples: Vec<Complex64>, sample_period_ns: f64, first_tap_power_db: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Shape("CIR has no samples".into()));
        }
        if !(sample_period_ns.is_finite() && sample_period_ns > 0.0) {
            return Err(Error::Validation(format!(
                "sample period must be > 0 ns, got {sample_period_ns}"
            )));
        }
        Ok(Self {
            samples,
            sample_period_ns,
            first_tap_power_db,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_period_ns(&self) -> f64 {
        self.sample_period_ns
    }

    pub fn first_tap_power_db(&self) -> f64 {
        self.first_tap_power_db
    }

    pub fn with_first_tap_power(mut self, first_tap_power_db: f64) -> Self {
        self.first_tap_power_db = first_tap_power_db;
        self
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }
}
