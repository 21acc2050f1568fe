use rayon::prelude::*;
use serde::Serialize;
use tdlforge::dataset::{load_tdl_json, save_pdp_csv};
use tdlforge::pdp::average_all;
use tdlforge::synth::{generate_draw, SamplingSpec};
use tdlforge::{PdpSnapshot, TdlParams};

use super::{save_pdps, sibling};
use crate::args::{GlobalArgs, SamplingArgs, SynthCmd};
use crate::exit::CliError;
use crate::output::print_json;

pub fn sampling_spec(params: &TdlParams, distance_m: f64, s: &SamplingArgs, seed: u64) -> Result<SamplingSpec, CliError> {
    let spec = SamplingSpec::covering(params, distance_m, s.sample_period_ns, seed)?.with_noise_floor(s.noise_floor_db);
    spec.validate()?;
    Ok(spec)
}

/// Draws `0..n` in parallel, returned in draw order.
pub fn ensemble(params: &TdlParams, distance_m: f64, n: usize, spec: &SamplingSpec) -> Result<Vec<PdpSnapshot>, CliError> {
    if n == 0 {
        return Err(CliError::validation(anyhow::anyhow!("--draws must be >= 1")));
    }
    let draws: Result<Vec<_>, _> = (0..n as u64)
        .into_par_iter()
        .map(|i| generate_draw(params, distance_m, spec, i))
        .collect();
    Ok(draws?)
}

#[derive(Serialize)]
struct Report {
    draws: usize,
    grid_len: usize,
    sample_period_ns: f64,
    ensemble: String,
    apdp: String,
    apdp_peak_bin: usize,
    apdp_peak_db: f64,
}

pub fn run(a: &SynthCmd, g: &GlobalArgs) -> Result<(), CliError> {
    let params = load_tdl_json(&a.tdl)?;
    let spec = sampling_spec(&params, a.distance, &a.sampling, g.seed)?;
    let draws = ensemble(&params, a.distance, a.draws, &spec)?;
    save_pdps(&a.out, &draws)?;

    let apdp = average_all(&draws)?.to_snapshot();
    let apdp_path = sibling(&a.out, "_apdp");
    save_pdp_csv(&apdp_path, std::slice::from_ref(&apdp))?;

    let (peak_bin, peak_db) = apdp
        .powers_db()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best });
    let report = Report {
        draws: draws.len(),
        grid_len: spec.grid_len,
        sample_period_ns: spec.sample_period_ns,
        ensemble: a.out.display().to_string(),
        apdp: apdp_path.display().to_string(),
        apdp_peak_bin: peak_bin,
        apdp_peak_db: peak_db,
    };
    if g.json {
        print_json(&report)?;
    } else {
        println!(
            "{} draws on a {}-sample grid ({} ns) -> {}\naverage -> {} (peak {:.2} dB at bin {})",
            report.draws, report.grid_len, report.sample_period_ns, report.ensemble, report.apdp, peak_db, peak_bin
        );
    }
    Ok(())
}
