use serde::Serialize;
use tdlforge::dataset::load_tdl_json;
use tdlforge::pdp::{average_all, pdp_to_tdl};
use tdlforge::synth::SamplingSpec;
use tdlforge::TdlParams;

use super::synth::ensemble;
use super::fmt_db;
use crate::args::{GlobalArgs, RoundtripCmd};
use crate::exit::CliError;
use crate::output::{print_json, table, write_json};

#[derive(Debug, Serialize)]
pub struct TapDiff {
    pub truth_delay_ns: Option<f64>,
    pub recovered_delay_ns: Option<f64>,
    pub truth_power_db: Option<f64>,
    pub recovered_power_db: Option<f64>,
    pub delay_ok: bool,
    pub power_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct RoundtripReport {
    pub draws: usize,
    pub truth_num_taps: usize,
    pub recovered_num_taps: usize,
    pub taps: Vec<TapDiff>,
    pub first_tap_power_error_db: f64,
    pub k_factor_truth_db: f64,
    pub k_factor_recovered_db: f64,
    pub k_factor_error_db: f64,
    pub tol_power_db: f64,
    pub tol_k_db: f64,
    pub pass: bool,
}

pub fn compare(truth: &TdlParams, got: &TdlParams, spacing_ns: f64, tol_power_db: f64, tol_k_db: f64, draws: usize) -> RoundtripReport {
    let n = truth.num_taps.max(got.num_taps);
    let taps: Vec<TapDiff> = (0..n)
        .map(|i| {
            let (td, rd) = (truth.delays_ns.get(i).copied(), got.delays_ns.get(i).copied());
            let (tp, rp) = (truth.powers_db.get(i).copied(), got.powers_db.get(i).copied());
            TapDiff {
                truth_delay_ns: td,
                recovered_delay_ns: rd,
                truth_power_db: tp,
                recovered_power_db: rp,
                delay_ok: matches!((td, rd), (Some(a), Some(b)) if (a - b).abs() <= 1e-6 * spacing_ns),
                power_ok: matches!((tp, rp), (Some(a), Some(b)) if (a - b).abs() <= tol_power_db),
            }
        })
        .collect();
    let p_err = got.first_tap_power_db - truth.first_tap_power_db;
    let k_err = got.k_factor_db - truth.k_factor_db;
    let pass = truth.num_taps == got.num_taps
        && taps.iter().all(|t| t.delay_ok && t.power_ok)
        && p_err.abs() <= tol_power_db
        && k_err.abs() <= tol_k_db;
    RoundtripReport {
        draws,
        truth_num_taps: truth.num_taps,
        recovered_num_taps: got.num_taps,
        taps,
        first_tap_power_error_db: p_err,
        k_factor_truth_db: truth.k_factor_db,
        k_factor_recovered_db: got.k_factor_db,
        k_factor_error_db: k_err,
        tol_power_db,
        tol_k_db,
        pass,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), fmt_db)
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "BREACH"
    }
}

fn render(r: &RoundtripReport) -> String {
    let rows: Vec<Vec<String>> = r
        .taps
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                i.to_string(),
                opt(t.truth_delay_ns),
                opt(t.recovered_delay_ns),
                mark(t.delay_ok).into(),
                opt(t.truth_power_db),
                opt(t.recovered_power_db),
                mark(t.power_ok).into(),
            ]
        })
        .collect();
    format!(
        "N truth {} recovered {} [{}]\nP error {:+.3} dB [{}]\nK truth {:.2} dB recovered {:.2} dB error {:+.3} dB [{}]\n\n{}",
        r.truth_num_taps,
        r.recovered_num_taps,
        mark(r.truth_num_taps == r.recovered_num_taps),
        r.first_tap_power_error_db,
        mark(r.first_tap_power_error_db.abs() <= r.tol_power_db),
        r.k_factor_truth_db,
        r.k_factor_recovered_db,
        r.k_factor_error_db,
        mark(r.k_factor_error_db.abs() <= r.tol_k_db),
        table(&["tap", "delay", "got", "", "power", "got", ""], &rows)
    )
}

pub fn run(a: &RoundtripCmd, g: &GlobalArgs) -> Result<(), CliError> {
    let truth = load_tdl_json(&a.tdl)?;
    let dcfg = a.denoise.config();
    let ecfg = a.peaks.config();
    let noise = a.snr_db.is_finite().then(|| truth.first_tap_power_db - a.snr_db);
    let spec = SamplingSpec::covering(&truth, a.distance, a.sample_period_ns, g.seed)?.with_noise_floor(noise);
    let draws = ensemble(&truth, a.distance, a.draws, &spec)?;
    let apdp = average_all(&draws)?;
    let got = pdp_to_tdl(&apdp, &dcfg, &ecfg)?;
    let report = compare(&truth, &got, a.sample_period_ns, a.tol_power_db, a.tol_k_db, a.draws);

    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    if g.json {
        print_json(&report)?;
    } else {
        println!("{}", render(&report));
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::tolerance(anyhow::anyhow!("round trip outside tolerance")))
    }
}
