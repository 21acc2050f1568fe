//! Evaluation metrics: RMS delay spread, PDP cosine similarity, received
//! power and the route-level RMSE report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PdpSnapshot, TdlParams};
use crate::units::{bin_power, linear_to_db_clamped};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_path_loss_db: f64,
    pub rmse_delay_spread_ns: f64,
    pub rmse_k_factor_db: f64,
    pub pdp_avg_cosine_similarity: f64,
    pub n_samples: usize,
}

fn linear_powers(pdp: &PdpSnapshot) -> Vec<f64> {
    pdp.powers_db().iter().map(|&p| bin_power(p)).collect()
}

/// Second central moment of the PDP in delay, with `t_n = n·spacing`.
pub fn rms_delay_spread(pdp: &PdpSnapshot) -> Result<f64> {
    let p = linear_powers(pdp);
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("delay spread of an all-sentinel PDP".into()));
    }
    let dt = pdp.bin_spacing_ns();
    let mean = p.iter().enumerate().map(|(n, &pn)| pn * n as f64 * dt).sum::<f64>() / total;
    let var = p
        .iter()
        .enumerate()
        .map(|(n, &pn)| pn * (n as f64 * dt - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok(var.sqrt())
}

/// Cosine of the two linear power vectors.
pub fn pdp_cosine_similarity(truth: &PdpSnapshot, pred: &PdpSnapshot) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "PDP lengths differ: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.bin_spacing_ns() != pred.bin_spacing_ns() {
        return Err(Error::Shape(format!(
            "bin spacings differ: {} vs {} ns",
            truth.bin_spacing_ns(),
            pred.bin_spacing_ns()
        )));
    }
    cosine(&linear_powers(truth), &linear_powers(pred))
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedMetric("cosine similarity with an all-zero PDP".into()));
    }
    Ok((dot / (na * nb)).min(1.0))
}

/// Pads the shorter profile with sentinel bins so both share one grid.
pub fn align_pdps(a: &PdpSnapshot, b: &PdpSnapshot) -> Result<(PdpSnapshot, PdpSnapshot)> {
    if a.bin_spacing_ns() != b.bin_spacing_ns() {
        return Err(Error::Shape("cannot align PDPs with different bin spacing".into()));
    }
    let n = a.len().max(b.len());
    let pad = |s: &PdpSnapshot| {
        let mut v = s.powers_db().to_vec();
        v.resize(n, crate::units::SENTINEL_DB);
        PdpSnapshot::new(v, s.bin_spacing_ns(), s.timestamp_s())
    };
    Ok((pad(a)?, pad(b)?))
}

/// Total received power in dB; stands in for path loss.
pub fn received_power_db(pdp: &PdpSnapshot) -> Result<f64> {
    let total: f64 = linear_powers(pdp).iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("received power of an all-sentinel PDP".into()));
    }
    Ok(linear_to_db_clamped(total))
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "rmse over vectors of length {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Shape("rmse over empty vectors".into()));
    }
    let mse = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt())
}

/// Route-level report over paired, aligned snapshots.
pub fn evaluate_route(
    truth_pdps: &[PdpSnapshot],
    pred_pdps: &[PdpSnapshot],
    truth_tdls: &[TdlParams],
    pred_tdls: &[TdlParams],
) -> Result<EvalReport> {
    let n = truth_pdps.len();
    if n == 0 {
        return Err(Error::Contract("empty route".into()));
    }
    if pred_pdps.len() != n || truth_tdls.len() != n || pred_tdls.len() != n {
        return Err(Error::Contract(format!(
            "route sequences differ in length: {n}, {}, {}, {}",
            pred_pdps.len(),
            truth_tdls.len(),
            pred_tdls.len()
        )));
    }
    let mut pl = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut ds = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut cos_sum = 0.0;
    for (t, p) in truth_pdps.iter().zip(pred_pdps) {
        let (t, p) = align_pdps(t, p)?;
        pl.0.push(received_power_db(&t)?);
        pl.1.push(received_power_db(&p)?);
        ds.0.push(rms_delay_spread(&t)?);
        ds.1.push(rms_delay_spread(&p)?);
        cos_sum += pdp_cosine_similarity(&t, &p)?;
    }
    let k_truth: Vec<f64> = truth_tdls.iter().map(|p| p.k_factor_db).collect();
    let k_pred: Vec<f64> = pred_tdls.iter().map(|p| p.k_factor_db).collect();
    Ok(EvalReport {
        rmse_path_loss_db: rmse(&pl.0, &pl.1)?,
        rmse_delay_spread_ns: rmse(&ds.0, &ds.1)?,
        rmse_k_factor_db: rmse(&k_truth, &k_pred)?,
        pdp_avg_cosine_similarity: cos_sum / n as f64,
        n_samples: n,
    })
}
