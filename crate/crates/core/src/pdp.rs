//! Power-delay-profile processing: sliding-window averaging, adaptive
//! noise-floor denoising, iterative peak search and TDL assembly.

use crate::error::{Error, Result};
use crate::types::{Apdp, PdpSnapshot, Tap, TdlParams};
use crate::units::{bin_power, db_to_linear, is_sentinel, linear_to_db_clamped, SENTINEL_DB, SENTINEL_LINEAR};

/// Default number of raw snapshots per averaging window.
pub const DEFAULT_WINDOW: usize = 9;

/// Domain in which the bottom-fraction noise samples are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FloorAveraging {
    #[default]
    Linear,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Bins at or below this level never enter the noise estimate.
    pub abs_floor_db: f64,
    pub bottom_fraction: f64,
    pub margin_db: f64,
    pub truncate_db: f64,
    pub averaging: FloorAveraging,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            abs_floor_db: -160.0,
            bottom_fraction: 0.20,
            margin_db: 11.0,
            truncate_db: SENTINEL_DB,
            averaging: FloorAveraging::Linear,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncate_db < self.abs_floor_db) {
            return Err(Error::Config(format!(
                "truncate_db ({}) must be below abs_floor_db ({})",
                self.truncate_db, self.abs_floor_db
            )));
        }
        if !(self.bottom_fraction > 0.0 && self.bottom_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "bottom_fraction must lie in (0, 1], got {}",
                self.bottom_fraction
            )));
        }
        if !self.margin_db.is_finite() {
            return Err(Error::Config("margin_db must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub max_taps: usize,
    /// Candidates weaker than the global maximum minus this are noise.
    pub dynamic_range_db: f64,
    /// Half-width, in bins, of the region cleared around each accepted tap.
    pub min_separation_bins: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            max_taps: 40,
            dynamic_range_db: 50.0,
            min_separation_bins: 3,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_taps == 0 || self.min_separation_bins == 0 {
            return Err(Error::Config(
                "max_taps and min_separation_bins must be positive".into(),
            ));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::Config(format!(
                "dynamic_range_db must be positive, got {}",
                self.dynamic_range_db
            )));
        }
        Ok(())
    }
}

/// Bin-wise linear-domain average over each run of `window` consecutive
/// snapshots. Output `i` covers `snapshots[i..i + window]` and carries the
/// timestamp of the centre snapshot.
pub fn sliding_average(snapshots: &[PdpSnapshot], window: usize) -> Result<Vec<Apdp>> {
    if window == 0 {
        return Err(Error::Config("averaging window must be >= 1".into()));
    }
    if window > snapshots.len() {
        return Err(Error::Config(format!(
            "averaging window {window} exceeds the {} available snapshots",
            snapshots.len()
        )));
    }
    let first = &snapshots[0];
    for (i, s) in snapshots.iter().enumerate() {
        if s.len() != first.len() {
            return Err(Error::Shape(format!(
                "snapshot {i} has {} bins, expected {}",
                s.len(),
                first.len()
            )));
        }
        if s.bin_spacing_ns() != first.bin_spacing_ns() {
            return Err(Error::Shape(format!(
                "snapshot {i} has bin spacing {} ns, expected {}",
                s.bin_spacing_ns(),
                first.bin_spacing_ns()
            )));
        }
    }

    if window == 1 {
        return Ok(snapshots.iter().map(Apdp::from_snapshot).collect());
    }
    let n_bins = first.len();
    let linear: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| s.powers_db().iter().map(|&p| db_to_linear(p)).collect())
        .collect();

    let inv = 1.0 / window as f64;
    let mut out = Vec::with_capacity(snapshots.len() - window + 1);
    for start in 0..=snapshots.len() - window {
        let mut acc = vec![0.0; n_bins];
        for row in &linear[start..start + window] {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let powers = acc.iter().map(|&a| linear_to_db_clamped(a * inv)).collect();
        let centre = &snapshots[start + (window - 1) / 2];
        out.push(Apdp::new(powers, first.bin_spacing_ns(), centre.timestamp_s(), window)?);
    }
    Ok(out)
}

/// Averages every snapshot into a single profile.
pub fn average_all(snapshots: &[PdpSnapshot]) -> Result<Apdp> {
    if snapshots.is_empty() {
        return Err(Error::Shape("no snapshots to average".into()));
    }
    let mut v = sliding_average(snapshots, snapshots.len())?;
    Ok(v.remove(0))
}

/// Mean of the weakest `bottom_fraction` of bins above the absolute floor.
pub fn estimate_noise_floor(apdp: &Apdp, cfg: &DenoiseConfig) -> Result<f64> {
    cfg.validate()?;
    let mut valid: Vec<f64> = apdp
        .powers_db()
        .iter()
        .copied()
        .filter(|&p| p > cfg.abs_floor_db)
        .collect();
    if valid.is_empty() {
        return Err(Error::AllNoise {
            floor_db: cfg.abs_floor_db,
        });
    }
    valid.sort_by(f64::total_cmp);
    let take = ((cfg.bottom_fraction * valid.len() as f64).ceil() as usize).clamp(1, valid.len());
    let bottom = &valid[..take];
    let floor = match cfg.averaging {
        FloorAveraging::Linear => {
            let mean = bottom.iter().map(|&p| db_to_linear(p)).sum::<f64>() / take as f64;
            linear_to_db_clamped(mean)
        }
        FloorAveraging::Db => bottom.iter().sum::<f64>() / take as f64,
    };
    Ok(floor)
}

/// Truncation threshold for `apdp`: the noise-floor estimate plus margin.
pub fn noise_threshold(apdp: &Apdp, cfg: &DenoiseConfig) -> Result<f64> {
    Ok(estimate_noise_floor(apdp, cfg)? + cfg.margin_db)
}

/// Result of [`denoise`]: the truncated profile and the threshold that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub apdp: Apdp,
    pub threshold_db: f64,
}

/// Truncates every bin below `noise floor + margin` to `truncate_db`.
///
/// Feeding the output back with [`denoise_with_threshold`] at the same
/// threshold is a no-op; re-estimating the floor from an already-truncated
/// profile is not, since only the surviving bins remain above the floor.
pub fn denoise(apdp: &Apdp, cfg: &DenoiseConfig) -> Result<Denoised> {
    let threshold_db = noise_threshold(apdp, cfg)?;
    Ok(Denoised {
        apdp: denoise_with_threshold(apdp, threshold_db, cfg.truncate_db),
        threshold_db,
    })
}

pub fn denoise_with_threshold(apdp: &Apdp, threshold_db: f64, truncate_db: f64) -> Apdp {
    let powers = apdp
        .powers_db()
        .iter()
        .map(|&p| if p < threshold_db { truncate_db } else { p })
        .collect();
    apdp.with_powers(powers)
}

/// Strict local maxima; endpoints are never peaks.
pub fn local_peak_mask(powers_db: &[f64]) -> Result<Vec<bool>> {
    let n = powers_db.len();
    if n < 3 {
        return Err(Error::Shape(format!(
            "local peak search needs at least 3 bins, got {n}"
        )));
    }
    let mut mask = vec![false; n];
    for t in 1..n - 1 {
        mask[t] = powers_db[t] > powers_db[t - 1].max(powers_db[t + 1]);
    }
    Ok(mask)
}

/// Iterative peak search over a denoised profile.
///
/// Candidates are the precomputed strict local maxima. Each round takes the
/// strongest remaining candidate (lowest index on ties), stops once it falls
/// below the profile maximum minus the dynamic range or nothing but
/// sentinel is left, and clears `±min_separation_bins` around the pick.
/// Taps come back ordered by delay.
pub fn extract_taps(apdp: &Apdp, cfg: &ExtractConfig) -> Result<Vec<Tap>> {
    cfg.validate()?;
    let powers = apdp.powers_db();
    if powers.is_empty() {
        return Err(Error::Shape("empty profile".into()));
    }
    // too short for an interior bin, so nothing can be a peak
    let mut mask = if powers.len() < 3 { vec![false; powers.len()] } else { local_peak_mask(powers)? };
    let mut residue = powers.to_vec();
    let global_max = residue.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let limit = global_max - cfg.dynamic_range_db;

    let mut taps = Vec::new();
    for _ in 0..cfg.max_taps {
        let mut best: Option<usize> = None;
        for (t, &on) in mask.iter().enumerate() {
            if on && best.is_none_or(|b| residue[t] > residue[b]) {
                best = Some(t);
            }
        }
        let Some(k) = best else { break };
        let pk = residue[k];
        if pk < limit || is_sentinel(pk) {
            break;
        }
        taps.push(Tap::at_bin(k, apdp.bin_spacing_ns(), pk));

        let lo = k.saturating_sub(cfg.min_separation_bins);
        let hi = (k + cfg.min_separation_bins).min(residue.len() - 1);
        residue[lo..=hi].fill(SENTINEL_DB);
        mask[lo..=hi].fill(false);
    }
    taps.sort_by_key(|t| t.delay_bin);
    Ok(taps)
}

/// Integrated power of each tap's delay window, in dB.
///
/// Window `i` spans `[bin_i, bin_{i+1})`; the last window runs to the end
/// of the profile. Sentinel bins contribute nothing.
pub fn integrate_tap_powers(apdp: &Apdp, taps: &[Tap]) -> Result<Vec<f64>> {
    if taps.is_empty() {
        return Err(Error::Contract("no taps to integrate".into()));
    }
    if let Some(i) = taps.windows(2).position(|w| w[1].delay_bin <= w[0].delay_bin) {
        return Err(Error::Contract(format!(
            "taps must be strictly sorted by delay (index {})",
            i + 1
        )));
    }
    let powers = apdp.powers_db();
    let last = taps[taps.len() - 1].delay_bin;
    if last >= powers.len() {
        return Err(Error::Contract(format!(
            "tap at bin {last} lies outside a {}-bin profile",
            powers.len()
        )));
    }
    let out = taps
        .iter()
        .enumerate()
        .map(|(i, tap)| {
            let end = taps.get(i + 1).map_or(powers.len(), |t| t.delay_bin);
            let total: f64 = powers[tap.delay_bin..end].iter().map(|&p| bin_power(p)).sum();
            linear_to_db_clamped(total)
        })
        .collect();
    Ok(out)
}

/// Rician K of the first tap: peak-bin power over the rest of its window.
pub fn compute_k_factor(apdp: &Apdp, first_tap: &Tap, first_tap_window_power_db: f64) -> Result<f64> {
    if first_tap.delay_bin >= apdp.len() {
        return Err(Error::Contract(format!(
            "first tap bin {} outside the profile",
            first_tap.delay_bin
        )));
    }
    let p_los_db = first_tap.power_db;
    let los = db_to_linear(p_los_db);
    let total = db_to_linear(first_tap_window_power_db);
    // the window always contains the peak; allow for dB round-off
    if total < los * (1.0 - 1e-9) {
        return Err(Error::Contract(format!(
            "window power {first_tap_window_power_db} dB is below the peak {p_los_db} dB"
        )));
    }
    let nlos = (total - los).max(SENTINEL_LINEAR);
    Ok(p_los_db - linear_to_db_clamped(nlos))
}

/// Everything [`pdp_to_tdl`] computes on the way to the parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub params: TdlParams,
    pub taps: Vec<Tap>,
    pub window_powers_db: Vec<f64>,
    pub threshold_db: f64,
}

/// Denoise, extract, integrate and normalise one profile.
pub fn pdp_to_tdl(apdp: &Apdp, dcfg: &DenoiseConfig, ecfg: &ExtractConfig) -> Result<TdlParams> {
    Ok(pdp_to_tdl_detailed(apdp, dcfg, ecfg)?.params)
}

pub fn pdp_to_tdl_detailed(apdp: &Apdp, dcfg: &DenoiseConfig, ecfg: &ExtractConfig) -> Result<Extraction> {
    let denoised = denoise(apdp, dcfg)?;
    let taps = extract_taps(&denoised.apdp, ecfg)?;
    if taps.is_empty() {
        return Err(Error::NoMultipath);
    }
    let window_powers_db = integrate_tap_powers(&denoised.apdp, &taps)?;
    let k_factor_db = compute_k_factor(&denoised.apdp, &taps[0], window_powers_db[0])?;

    let p0 = window_powers_db[0];
    let bin0 = taps[0].delay_bin;
    let delays_ns = taps
        .iter()
        .map(|t| (t.delay_bin - bin0) as f64 * apdp.bin_spacing_ns())
        .collect();
    let powers_db = window_powers_db.iter().map(|&p| p - p0).collect();
    let params = TdlParams::new(p0, k_factor_db, delays_ns, powers_db)?;
    Ok(Extraction {
        params,
        taps,
        window_powers_db,
        threshold_db: denoised.threshold_db,
    })
}
