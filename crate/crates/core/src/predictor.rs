//! Seam for external TDL predictors, plus a nearest-distance baseline.
//!
//! Predictions arrive as JSON lines, one `{"timestamp_s": .., "tdl": {..}}`
//! object per line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TdlParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub timestamp_s: f64,
    pub tdl: TdlParams,
}

/// Anything that maps a sample (timestamp and link distance) to TDL parameters.
pub trait TdlPredictor {
    fn predict(&self, timestamp_s: f64, distance_m: f64) -> Result<TdlParams>;
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            path: path.into(),
            line: idx + 1,
            msg,
        };
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if !rec.timestamp_s.is_finite() {
            return Err(bad("timestamp_s is not finite".into()));
        }
        rec.tdl.validate().map_err(|e| bad(e.to_string()))?;
        out.push(rec);
    }
    out.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, path)
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Serves predictions from a loaded JSONL file, looked up by timestamp.
#[derive(Debug, Clone)]
pub struct FilePredictor {
    records: Vec<PredictionRecord>,
    tolerance_s: f64,
    source: PathBuf,
}

impl FilePredictor {
    pub fn open(path: &Path, tolerance_s: f64) -> Result<Self> {
        Ok(Self {
            records: load_predictions(path)?,
            tolerance_s,
            source: path.into(),
        })
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }
}

impl TdlPredictor for FilePredictor {
    fn predict(&self, timestamp_s: f64, _distance_m: f64) -> Result<TdlParams> {
        let k = self.records.partition_point(|r| r.timestamp_s < timestamp_s);
        let candidates = [k.checked_sub(1), Some(k)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|i| self.records.get(i))
            .filter(|r| (r.timestamp_s - timestamp_s).abs() <= self.tolerance_s)
            .min_by(|a, b| {
                (a.timestamp_s - timestamp_s)
                    .abs()
                    .total_cmp(&(b.timestamp_s - timestamp_s).abs())
            })
            .map(|r| r.tdl.clone())
            .ok_or_else(|| {
                Error::Contract(format!(
                    "no prediction within {} s of t={timestamp_s} in {}",
                    self.tolerance_s,
                    self.source.display()
                ))
            })
    }
}

/// Returns the training TDL whose link distance is closest to the query.
/// On ties the earlier entry wins.
pub fn baseline_nearest_tdl(train_set: &[(f64, TdlParams)], query_distance_m: f64) -> Result<TdlParams> {
    let mut best: Option<(f64, &TdlParams)> = None;
    for (d, p) in train_set {
        let gap = (d - query_distance_m).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, p));
        }
    }
    best.map(|(_, p)| p.clone())
        .ok_or_else(|| Error::Contract("baseline needs a non-empty training set".into()))
}

/// [`baseline_nearest_tdl`] as a [`TdlPredictor`].
#[derive(Debug, Clone)]
pub struct NearestDistanceBaseline {
    pub train_set: Vec<(f64, TdlParams)>,
}

impl TdlPredictor for NearestDistanceBaseline {
    fn predict(&self, _timestamp_s: f64, distance_m: f64) -> Result<TdlParams> {
        baseline_nearest_tdl(&self.train_set, distance_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tdl(p: f64) -> TdlParams {
        TdlParams::new(p, 3.0, vec![0.0, 33.3], vec![0.0, -6.0]).unwrap()
    }

    #[test]
    fn jsonl_loading() {
        let p = Path::new("p.jsonl");
        assert!(parse_predictions("", p).unwrap().is_empty());
        let a = serde_json::to_string(&PredictionRecord { timestamp_s: 2.0, tdl: tdl(-60.0) }).unwrap();
        let b = serde_json::to_string(&PredictionRecord { timestamp_s: 1.0, tdl: tdl(-70.0) }).unwrap();
        let one = parse_predictions(&a, p).unwrap();
        assert_eq!(one.len(), 1);
        let both = parse_predictions(&format!("{a}\n{b}\n"), p).unwrap();
        assert_eq!(both[0].timestamp_s, 1.0);
        assert_eq!(both[1].tdl.first_tap_power_db, -60.0);

        let bad = r#"{"timestamp_s":3,"tdl":{"first_tap_power_db":-60,"k_factor_db":0,"num_taps":1,"delays_ns":[5],"powers_db":[0]}}"#;
        let err = parse_predictions(&format!("{a}\n{bad}\n"), p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn file_predictor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.jsonl");
        let recs = vec![
            PredictionRecord { timestamp_s: 0.0, tdl: tdl(-60.0) },
            PredictionRecord { timestamp_s: 1.0, tdl: tdl(-61.0) },
        ];
        save_predictions(&path, &recs).unwrap();
        let fp = FilePredictor::open(&path, 0.1).unwrap();
        assert_eq!(fp.records(), &recs[..]);
        assert_eq!(fp.predict(0.95, 10.0).unwrap(), tdl(-61.0));
        assert_eq!(fp.predict(0.05, 10.0).unwrap(), tdl(-60.0));
        assert!(fp.predict(0.5, 10.0).is_err());
    }

    #[test]
    fn baseline_examples() {
        assert!(matches!(baseline_nearest_tdl(&[], 5.0), Err(Error::Contract(_))));
        let set = vec![(100.0, tdl(-60.0)), (200.0, tdl(-70.0)), (300.0, tdl(-80.0))];
        assert_eq!(baseline_nearest_tdl(&set[..1], 999.0).unwrap(), tdl(-60.0));
        assert_eq!(baseline_nearest_tdl(&set, 200.0).unwrap(), tdl(-70.0));
        assert_eq!(baseline_nearest_tdl(&set, 260.0).unwrap(), tdl(-80.0));
        assert_eq!(baseline_nearest_tdl(&set, 150.0).unwrap(), tdl(-60.0));
        let b = NearestDistanceBaseline { train_set: set };
        assert_eq!(b.predict(0.0, 240.0).unwrap(), tdl(-70.0));
    }
}
