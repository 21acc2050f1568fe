//! CIR reconstruction from TDL parameters and the forward fading generator.
//!
//! The first tap is Rician (deterministic LOS phasor plus complex Gaussian
//! scatter), later taps are Rayleigh. Each tap is rendered onto the
//! sampling grid as a Hamming-windowed normalized sinc.
//!
//! Coefficients are drawn in units relative to the first tap; the absolute
//! scale `first_tap_power_db` is applied when the CIR is turned into a PDP.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{Cir, PdpSnapshot, TdlParams};
use crate::units::{db_to_linear, is_sentinel, linear_to_db_clamped, SPEED_OF_LIGHT_M_PER_NS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub sample_period_ns: f64,
    pub grid_len: usize,
    /// Half-width of the Hamming window in samples.
    pub window_half_support: usize,
    pub rng_seed: u64,
    /// Absolute power of complex white noise added to every sample, if any.
    pub noise_floor_db: Option<f64>,
}

impl SamplingSpec {
    pub const DEFAULT_HALF_SUPPORT: usize = 4;

    /// A grid long enough for every tap of `params` at `distance_m` plus
    /// the window support on both sides.
    pub fn covering(params: &TdlParams, distance_m: f64, sample_period_ns: f64, rng_seed: u64) -> Result<Self> {
        let abs = absolute_delays(distance_m, &params.delays_ns)?;
        let max_delay = abs.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            sample_period_ns,
            grid_len: grid_len_for(max_delay, sample_period_ns, Self::DEFAULT_HALF_SUPPORT),
            window_half_support: Self::DEFAULT_HALF_SUPPORT,
            rng_seed,
            noise_floor_db: None,
        })
    }

    pub fn with_noise_floor(mut self, noise_floor_db: Option<f64>) -> Self {
        self.noise_floor_db = noise_floor_db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_ns.is_finite() && self.sample_period_ns > 0.0) {
            return Err(Error::Config(format!(
                "sample period must be > 0 ns, got {}",
                self.sample_period_ns
            )));
        }
        if self.grid_len == 0 || self.window_half_support == 0 {
            return Err(Error::Config("grid_len and window_half_support must be positive".into()));
        }
        Ok(())
    }

    fn last_time_ns(&self) -> f64 {
        (self.grid_len - 1) as f64 * self.sample_period_ns
    }
}

/// Samples needed to hold a tap at `max_delay_ns` plus `2·half_support` of margin.
pub fn grid_len_for(max_delay_ns: f64, sample_period_ns: f64, half_support: usize) -> usize {
    (max_delay_ns / sample_period_ns).ceil() as usize + 2 * half_support + 1
}

/// Splits a total first-tap power into LOS and NLOS parts by the linear K.
pub fn split_power_by_k(p_total_db: f64, k_db: f64) -> (f64, f64) {
    let k = db_to_linear(k_db);
    let total = db_to_linear(p_total_db);
    let los = total * k / (k + 1.0);
    let nlos = total / (k + 1.0);
    (linear_to_db_clamped(los), linear_to_db_clamped(nlos))
}

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `sqrt(p_los)·e^{j2πθ} + σ₀(x + jy)` with `σ₀ = sqrt(p_nlos / 2)`.
///
/// Always consumes one uniform and two normals so substreams stay aligned.
pub fn draw_first_tap_coeff<R: Rng + ?Sized>(p_los_db: f64, p_nlos_db: f64, rng: &mut R) -> Complex64 {
    let theta: f64 = rng.random();
    let (x, y) = gaussian_pair(rng);
    let los_amp = if is_sentinel(p_los_db) { 0.0 } else { db_to_linear(p_los_db).sqrt() };
    let sigma = if is_sentinel(p_nlos_db) { 0.0 } else { (db_to_linear(p_nlos_db) / 2.0).sqrt() };
    Complex64::from_polar(los_amp, 2.0 * PI * theta) + Complex64::new(sigma * x, sigma * y)
}

/// Rayleigh coefficient `σ(x + jy)` with `σ = sqrt(p / 2)`.
pub fn draw_rayleigh_coeff<R: Rng + ?Sized>(p_db: f64, rng: &mut R) -> Complex64 {
    let (x, y) = gaussian_pair(rng);
    if is_sentinel(p_db) {
        return Complex64::new(0.0, 0.0);
    }
    let sigma = (db_to_linear(p_db) / 2.0).sqrt();
    Complex64::new(sigma * x, sigma * y)
}

/// Time of flight plus the relative delays.
pub fn absolute_delays(distance_m: f64, delays_ns: &[f64]) -> Result<Vec<f64>> {
    if !(distance_m >= 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!("distance must be >= 0 m, got {distance_m}")));
    }
    let tof = distance_m / SPEED_OF_LIGHT_M_PER_NS;
    Ok(delays_ns.iter().map(|d| tof + d).collect())
}

/// Normalized sinc, `sin(πx)/(πx)`, exactly zero at non-zero integers.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Symmetric Hamming taper with peak 1 at `u = 0`, zero beyond `±half_width`.
pub fn hamming(u: f64, half_width: f64) -> f64 {
    if u.abs() > half_width {
        0.0
    } else {
        0.54 + 0.46 * (PI * u / half_width).cos()
    }
}

/// Renders taps onto the grid `t_n = n·T_s`.
///
/// The returned CIR has unit scale (`first_tap_power_db = 0`).
pub fn sample_cir(coeffs: &[Complex64], abs_delays_ns: &[f64], spec: &SamplingSpec) -> Result<Cir> {
    spec.validate()?;
    if coeffs.len() != abs_delays_ns.len() {
        return Err(Error::Shape(format!(
            "{} coefficients but {} delays",
            coeffs.len(),
            abs_delays_ns.len()
        )));
    }
    let ts = spec.sample_period_ns;
    let half = spec.window_half_support as f64;
    let mut h = vec![Complex64::new(0.0, 0.0); spec.grid_len];
    for (&c, &tau) in coeffs.iter().zip(abs_delays_ns) {
        if !(tau >= 0.0 && tau <= spec.last_time_ns()) {
            return Err(Error::Range(format!(
                "delay {tau} ns lies outside the grid [0, {}] ns",
                spec.last_time_ns()
            )));
        }
        let centre = tau / ts;
        let lo = (centre - half).ceil().max(0.0) as usize;
        let hi = ((centre + half).floor() as usize).min(spec.grid_len - 1);
        for (n, slot) in h.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let x = n as f64 - centre;
            *slot += c * (sinc(x) * hamming(x, half));
        }
    }
    Cir::new(h, ts, 0.0)
}

/// `|h[n]|²` scaled by the CIR's first-tap power, in dB.
pub fn cir_to_pdp(cir: &Cir) -> PdpSnapshot {
    cir_to_pdp_at(cir, 0.0)
}

pub fn cir_to_pdp_at(cir: &Cir, timestamp_s: f64) -> PdpSnapshot {
    let scale = db_to_linear(cir.first_tap_power_db());
    let powers = cir
        .samples()
        .iter()
        .map(|h| linear_to_db_clamped(h.norm_sqr() * scale))
        .collect();
    PdpSnapshot::new(powers, cir.sample_period_ns(), timestamp_s)
        .expect("a valid CIR always yields a valid PDP")
}

/// Independent generator for draw `index` under `seed`.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one coefficient per tap of `params` (relative units).
pub fn draw_coefficients<R: Rng + ?Sized>(params: &TdlParams, rng: &mut R) -> Vec<Complex64> {
    let (los, nlos) = split_power_by_k(0.0, params.k_factor_db);
    let mut coeffs = Vec::with_capacity(params.num_taps);
    coeffs.push(draw_first_tap_coeff(los, nlos, rng));
    for &p in &params.powers_db[1..] {
        coeffs.push(draw_rayleigh_coeff(p, rng));
    }
    coeffs
}

/// One fading realization: coefficients, rendering and optional noise.
pub fn realize_cir(params: &TdlParams, abs_delays_ns: &[f64], spec: &SamplingSpec, index: u64) -> Result<Cir> {
    let mut rng = draw_rng(spec.rng_seed, index);
    let coeffs = draw_coefficients(params, &mut rng);
    let mut cir = sample_cir(&coeffs, abs_delays_ns, spec)?.with_first_tap_power(params.first_tap_power_db);
    if let Some(noise_db) = spec.noise_floor_db {
        // noise is specified in absolute power; samples are relative
        let sigma = (db_to_linear(noise_db - params.first_tap_power_db) / 2.0).sqrt();
        for s in cir.samples_mut() {
            let (x, y) = gaussian_pair(&mut rng);
            *s += Complex64::new(sigma * x, sigma * y);
        }
    }
    Ok(cir)
}

/// PDP of draw `index`, timestamped with the draw number.
pub fn generate_draw(params: &TdlParams, distance_m: f64, spec: &SamplingSpec, index: u64) -> Result<PdpSnapshot> {
    params.validate()?;
    let abs = absolute_delays(distance_m, &params.delays_ns)?;
    let cir = realize_cir(params, &abs, spec, index)?;
    Ok(cir_to_pdp_at(&cir, index as f64))
}

/// `n_draws` independent fading realizations. Draw `i` uses substream `i`
/// of `spec.rng_seed`, so any subset can be regenerated on its own.
pub fn generate_ensemble(
    params: &TdlParams,
    distance_m: f64,
    n_draws: usize,
    spec: &SamplingSpec,
) -> Result<Vec<PdpSnapshot>> {
    if n_draws == 0 {
        return Err(Error::Config("n_draws must be >= 1".into()));
    }
    params.validate()?;
    let abs = absolute_delays(distance_m, &params.delays_ns)?;
    (0..n_draws as u64)
        .map(|i| Ok(cir_to_pdp_at(&realize_cir(params, &abs, spec, i)?, i as f64)))
        .collect()
}
