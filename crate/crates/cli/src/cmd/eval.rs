use std::fs;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use tdlforge::dataset::{load_tdl_json, pair_by_timestamp};
use tdlforge::losses::{match_loss, MatchConfig, TapPoint};
use tdlforge::metrics::evaluate_route;
use tdlforge::pdp::average_all;
use tdlforge::predictor::load_predictions;
use tdlforge::synth::{generate_draw, SamplingSpec};
use tdlforge::{EvalReport, PdpSnapshot, TdlParams};

use super::extract::{IndexEntry, INDEX_FILE};
use crate::args::{EvalCmd, GlobalArgs, SamplingArgs};
use crate::exit::CliError;
use crate::output::{print_json, write_json};

/// SplitMix64 finalizer; spreads (seed, snapshot) into unrelated seeds.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn averaged_pdp(params: &TdlParams, distance_m: f64, draws: usize, spec: &SamplingSpec) -> Result<PdpSnapshot, CliError> {
    let snaps = (0..draws as u64)
        .map(|i| generate_draw(params, distance_m, spec, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(average_all(&snaps)?.to_snapshot())
}

/// Truth and prediction PDPs for one pair, on a common grid.
fn reconstruct(
    truth: &TdlParams,
    pred: &TdlParams,
    distance_m: f64,
    draws: usize,
    s: &SamplingArgs,
    seeds: (u64, u64),
) -> Result<(PdpSnapshot, PdpSnapshot), CliError> {
    let st = SamplingSpec::covering(truth, distance_m, s.sample_period_ns, seeds.0)?.with_noise_floor(s.noise_floor_db);
    let sp = SamplingSpec::covering(pred, distance_m, s.sample_period_ns, seeds.1)?.with_noise_floor(s.noise_floor_db);
    let grid_len = st.grid_len.max(sp.grid_len);
    let st = SamplingSpec { grid_len, ..st };
    let sp = SamplingSpec { grid_len, ..sp };
    Ok((averaged_pdp(truth, distance_m, draws, &st)?, averaged_pdp(pred, distance_m, draws, &sp)?))
}

fn tap_points(p: &TdlParams) -> Vec<TapPoint> {
    p.delays_ns.iter().zip(&p.powers_db).map(|(&d, &w)| TapPoint::new(d, w)).collect()
}

#[derive(Serialize)]
struct MatchSummary {
    config: MatchConfig,
    mean_loss: Option<f64>,
    scored: usize,
    /// Pairs with fewer predicted than true taps.
    skipped: usize,
}

#[derive(Serialize)]
struct Console<'a> {
    report: &'a EvalReport,
    truth_snapshots: usize,
    paired: usize,
    unpaired: usize,
    shared_fading: bool,
    match_loss: MatchSummary,
}

pub fn run(a: &EvalCmd, g: &GlobalArgs) -> Result<(), CliError> {
    if a.draws == 0 {
        return Err(CliError::validation(anyhow::anyhow!("--draws must be >= 1")));
    }
    let index_path = a.truth.join(INDEX_FILE);
    let text = fs::read_to_string(&index_path)
        .map_err(|e| CliError::io(anyhow::Error::new(e).context(format!("reading {}", index_path.display()))))?;
    let index: Vec<IndexEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(anyhow::Error::new(e).context(format!("parsing {}", index_path.display()))))?;
    let truth: Vec<TdlParams> = index
        .par_iter()
        .map(|e| load_tdl_json(&a.truth.join(&e.file)))
        .collect::<Result<_, _>>()?;
    let preds = load_predictions(&a.pred)?;

    let truth_ts: Vec<f64> = index.iter().map(|e| e.timestamp_s).collect();
    let pred_ts: Vec<f64> = preds.iter().map(|r| r.timestamp_s).collect();
    let pairing = pair_by_timestamp(&truth_ts, &pred_ts, a.tolerance_s);
    for &i in &pairing.unpaired {
        warn!("no prediction within {} s of truth t={} s", a.tolerance_s, truth_ts[i]);
    }
    if 2 * pairing.unpaired.len() > index.len() || pairing.pairs.is_empty() {
        return Err(CliError::validation(anyhow::anyhow!(
            "{} of {} truth snapshots have no prediction",
            pairing.unpaired.len(),
            index.len()
        )));
    }

    let pdps: Vec<(PdpSnapshot, PdpSnapshot)> = pairing
        .pairs
        .par_iter()
        .map(|&(i, j)| {
            let distance = index[i].distance_m.unwrap_or(a.distance);
            let ts = mix(g.seed, 2 * i as u64);
            let ps = if a.independent_fading { mix(g.seed, 2 * i as u64 + 1) } else { ts };
            reconstruct(&truth[i], &preds[j].tdl, distance, a.draws, &a.sampling, (ts, ps))
        })
        .collect::<Result<_, _>>()?;
    let (truth_pdps, pred_pdps): (Vec<_>, Vec<_>) = pdps.into_iter().unzip();
    let truth_tdls: Vec<TdlParams> = pairing.pairs.iter().map(|&(i, _)| truth[i].clone()).collect();
    let pred_tdls: Vec<TdlParams> = pairing.pairs.iter().map(|&(_, j)| preds[j].tdl.clone()).collect();
    let report = evaluate_route(&truth_pdps, &pred_pdps, &truth_tdls, &pred_tdls)?;
    write_json(&a.out, &report)?;

    let cfg = MatchConfig::default();
    let mut losses = Vec::new();
    for (t, p) in truth_tdls.iter().zip(&pred_tdls) {
        let (tp, pp) = (tap_points(t), tap_points(p));
        if pp.len() >= tp.len() {
            losses.push(match_loss(&pp, &tp, &cfg)?.0);
        }
    }
    let console = Console {
        report: &report,
        truth_snapshots: index.len(),
        paired: pairing.pairs.len(),
        unpaired: pairing.unpaired.len(),
        shared_fading: !a.independent_fading,
        match_loss: MatchSummary {
            config: cfg,
            mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            scored: losses.len(),
            skipped: truth_tdls.len() - losses.len(),
        },
    };
    if g.json {
        print_json(&console)?;
    } else {
        println!(
            "paired {} of {} snapshots ({} fading)\n\
             RMSE path loss     {:.3} dB\n\
             RMSE delay spread  {:.3} ns\n\
             RMSE K-factor      {:.3} dB\n\
             PDP cosine sim     {:.4}",
            console.paired,
            console.truth_snapshots,
            if a.independent_fading { "independent" } else { "shared" },
            report.rmse_path_loss_db,
            report.rmse_delay_spread_ns,
            report.rmse_k_factor_db,
            report.pdp_avg_cosine_similarity,
        );
        match console.match_loss.mean_loss {
            Some(l) => println!(
                "match loss         {l:.4} over {} pairs (delay weight {:.4}/ns)",
                console.match_loss.scored, cfg.delay_weight
            ),
            None => println!("match loss         n/a (every prediction has too few taps)"),
        }
    }
    Ok(())
}
