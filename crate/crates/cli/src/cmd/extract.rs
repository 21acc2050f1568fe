use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tdlforge::dataset::save_tdl_json;
use tdlforge::pdp::{pdp_to_tdl, sliding_average};
use tdlforge::{Error, TdlParams};

use super::load_pdps;
use crate::args::{ExtractCmd, GlobalArgs};
use crate::exit::CliError;
use crate::output::{create_dir, print_json, table, write_json};

pub const INDEX_FILE: &str = "index.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// One line of `index.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub timestamp_s: f64,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub snapshots: usize,
    pub window: usize,
    pub extracted: usize,
    pub no_multipath: usize,
    pub other_failures: usize,
    pub num_taps_histogram: BTreeMap<usize, usize>,
    pub k_factor_db: Option<Stats>,
    pub first_tap_power_db: Option<Stats>,
}

pub fn run(a: &ExtractCmd, g: &GlobalArgs) -> Result<(), CliError> {
    let dcfg = a.denoise.config();
    let ecfg = a.peaks.config();
    dcfg.validate()?;
    ecfg.validate()?;
    if let Some(d) = a.distance {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(CliError::validation(anyhow::anyhow!("--distance must be >= 0, got {d}")));
        }
    }

    let snaps = load_pdps(&a.pdp)?;
    if snaps.is_empty() {
        return Err(CliError::validation(anyhow::anyhow!("{} holds no snapshots", a.pdp.display())));
    }
    let window = if a.window > snaps.len() {
        warn!("window {} exceeds the {} snapshots; averaging all of them", a.window, snaps.len());
        snaps.len()
    } else {
        a.window
    };
    let apdps = sliding_average(&snaps, window)?;
    info!("{} snapshots -> {} averaged profiles", snaps.len(), apdps.len());

    let results: Vec<Result<TdlParams, Error>> = apdps.par_iter().map(|p| pdp_to_tdl(p, &dcfg, &ecfg)).collect();

    create_dir(&a.out)?;
    let mut index = Vec::new();
    let mut hist = BTreeMap::new();
    let (mut ks, mut ps) = (Vec::new(), Vec::new());
    let (mut no_mp, mut other) = (0, 0);
    for (i, (apdp, r)) in apdps.iter().zip(&results).enumerate() {
        match r {
            Ok(params) => {
                let file = format!("tdl_{i:06}.json");
                save_tdl_json(&a.out.join(&file), params)?;
                index.push(IndexEntry {
                    timestamp_s: apdp.timestamp_s(),
                    file,
                    distance_m: a.distance,
                });
                *hist.entry(params.num_taps).or_insert(0) += 1;
                ks.push(params.k_factor_db);
                ps.push(params.first_tap_power_db);
            }
            Err(e @ (Error::NoMultipath | Error::AllNoise { .. })) => {
                warn!("snapshot {i} (t={} s): {e}", apdp.timestamp_s());
                no_mp += 1;
            }
            Err(e) => {
                warn!("snapshot {i} (t={} s): {e}", apdp.timestamp_s());
                other += 1;
            }
        }
    }
    write_json(&a.out.join(INDEX_FILE), &index)?;

    let summary = Summary {
        snapshots: apdps.len(),
        window,
        extracted: index.len(),
        no_multipath: no_mp,
        other_failures: other,
        num_taps_histogram: hist,
        k_factor_db: Stats::of(&ks),
        first_tap_power_db: Stats::of(&ps),
    };
    write_json(&a.out.join(SUMMARY_FILE), &summary)?;

    if g.json {
        print_json(&summary)?;
    } else {
        print_summary(&summary);
    }
    if summary.extracted == 0 {
        return Err(CliError::validation(anyhow::anyhow!(
            "no multipath detected in {} of {} profiles",
            no_mp,
            summary.snapshots
        )));
    }
    Ok(())
}

fn print_summary(s: &Summary) {
    println!(
        "profiles {}  extracted {}  no multipath detected {}  other failures {}",
        s.snapshots, s.extracted, s.no_multipath, s.other_failures
    );
    if !s.num_taps_histogram.is_empty() {
        let rows: Vec<Vec<String>> = s
            .num_taps_histogram
            .iter()
            .map(|(n, c)| vec![n.to_string(), c.to_string()])
            .collect();
        println!("\n{}", table(&["N", "count"], &rows));
    }
    let mut rows = Vec::new();
    for (name, st) in [("K [dB]", &s.k_factor_db), ("P [dB]", &s.first_tap_power_db)] {
        if let Some(st) = st {
            rows.push(vec![
                name.to_string(),
                format!("{:.2}", st.mean),
                format!("{:.2}", st.std),
                format!("{:.2}", st.min),
                format!("{:.2}", st.max),
            ]);
        }
    }
    if !rows.is_empty() {
        println!("\n{}", table(&["", "mean", "std", "min", "max"], &rows));
    }
}
