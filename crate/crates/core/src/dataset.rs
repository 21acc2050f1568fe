//! On-disk formats, timestamp pairing and route-level splitting.
//!
//! PDP CSV: a `# bin_spacing_ns=<float>` header line, then one row per
//! snapshot, `timestamp_s,p_0_db,p_1_db,...`. Binary PDP files start with
//! a 16-byte header (`TDLF`, `u32` bin count, `f64` bin spacing) followed
//! by one record per snapshot: an `f64` timestamp and `n_bins` `f32`
//! powers, all little-endian.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::types::{PdpSnapshot, TdlParams};

pub const BINARY_MAGIC: &[u8; 4] = b"TDLF";
const HEADER_KEY: &str = "bin_spacing_ns";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

fn check_monotone(snapshots: &[PdpSnapshot]) -> Result<()> {
    if let Some(i) = snapshots
        .windows(2)
        .position(|w| !(w[1].timestamp_s() > w[0].timestamp_s()))
    {
        return Err(Error::Validation(format!(
            "timestamps not strictly increasing at snapshot {}",
            i + 1
        )));
    }
    Ok(())
}

pub fn load_pdp_csv(path: &Path) -> Result<Vec<PdpSnapshot>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pdp_csv(&text, path)
}

/// Parses CSV text; `path` is only used in error messages.
pub fn parse_pdp_csv(text: &str, path: &Path) -> Result<Vec<PdpSnapshot>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let spacing = header
        .trim()
        .strip_prefix('#')
        .and_then(|h| h.trim().strip_prefix(HEADER_KEY))
        .and_then(|h| h.trim().strip_prefix('='))
        .ok_or_else(|| parse_err(path, 1, format!("expected `# {HEADER_KEY}=<float>` header")))?
        .trim()
        .parse::<f64>()
        .map_err(|e| parse_err(path, 1, format!("bad bin spacing: {e}")))?;

    let mut out: Vec<PdpSnapshot> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let ts = cells
            .next()
            .unwrap_or_default()
            .parse::<f64>()
            .map_err(|e| parse_err(path, lineno, format!("bad timestamp: {e}")))?;
        let powers = cells
            .enumerate()
            .map(|(j, c)| {
                c.parse::<f64>()
                    .map_err(|e| parse_err(path, lineno, format!("bad power in column {}: {c:?} ({e})", j + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = out.first() {
            if powers.len() != first.len() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("{} bins, expected {}", powers.len(), first.len()),
                ));
            }
        }
        let snap = PdpSnapshot::new(powers, spacing, ts).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        out.push(snap);
    }
    check_monotone(&out)?;
    Ok(out)
}

/// Formats snapshots as CSV. Floats use the shortest representation that
/// reads back to the same bits.
pub fn format_pdp_csv(snapshots: &[PdpSnapshot]) -> Result<String> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Shape("no snapshots to write".into()))?;
    let mut s = format!("# {HEADER_KEY}={}\n", first.bin_spacing_ns());
    for snap in snapshots {
        if snap.bin_spacing_ns() != first.bin_spacing_ns() {
            return Err(Error::Shape("snapshots disagree on bin spacing".into()));
        }
        write!(s, "{}", snap.timestamp_s()).unwrap();
        for p in snap.powers_db() {
            write!(s, ",{p}").unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn save_pdp_csv(path: &Path, snapshots: &[PdpSnapshot]) -> Result<()> {
    fs::write(path, format_pdp_csv(snapshots)?).map_err(|e| Error::io(path, e))
}

pub fn save_pdp_bin(path: &Path, snapshots: &[PdpSnapshot]) -> Result<()> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Shape("no snapshots to write".into()))?;
    let n_bins = first.len();
    let mut buf = Vec::with_capacity(16 + snapshots.len() * (8 + 4 * n_bins));
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(n_bins as u32).to_le_bytes());
    buf.extend_from_slice(&first.bin_spacing_ns().to_le_bytes());
    for s in snapshots {
        if s.len() != n_bins {
            return Err(Error::Shape("snapshots differ in length".into()));
        }
        buf.extend_from_slice(&s.timestamp_s().to_le_bytes());
        for &p in s.powers_db() {
            buf.extend_from_slice(&(p as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_pdp_bin(path: &Path) -> Result<Vec<PdpSnapshot>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 16 || &buf[..4] != BINARY_MAGIC {
        return Err(parse_err(path, 0, "missing TDLF header"));
    }
    let n_bins = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let spacing = f64::from_le_bytes(buf[8..16].try_into().unwrap());
    let rec = 8 + 4 * n_bins;
    let body = &buf[16..];
    if n_bins == 0 || body.len() % rec != 0 {
        return Err(parse_err(path, 0, format!("body of {} bytes is not a whole number of records", body.len())));
    }
    let out = body
        .chunks_exact(rec)
        .enumerate()
        .map(|(i, r)| {
            let ts = f64::from_le_bytes(r[..8].try_into().unwrap());
            let powers = r[8..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect();
            PdpSnapshot::new(powers, spacing, ts).map_err(|e| parse_err(path, i + 1, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    check_monotone(&out)?;
    Ok(out)
}

pub fn tdl_to_json(params: &TdlParams) -> Result<String> {
    params.validate()?;
    Ok(serde_json::to_string_pretty(params)? + "\n")
}

pub fn tdl_from_json(text: &str) -> Result<TdlParams> {
    let params: TdlParams = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
    params.validate()?;
    Ok(params)
}

pub fn save_tdl_json(path: &Path, params: &TdlParams) -> Result<()> {
    fs::write(path, tdl_to_json(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_tdl_json(path: &Path) -> Result<TdlParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tdl_from_json(&text).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    /// `(channel_index, image_index)`, both strictly increasing.
    pub pairs: Vec<(usize, usize)>,
    /// Channel samples left unpaired.
    pub unpaired: Vec<usize>,
}

/// Greedy nearest-neighbour pairing of two sorted timestamp vectors.
///
/// Channel samples are visited in order; each takes the closest image not
/// yet used and later than the previous match. Ties go to the earlier
/// image. Matches further apart than `tolerance_s` are dropped.
pub fn pair_by_timestamp(channel_ts: &[f64], image_ts: &[f64], tolerance_s: f64) -> Pairing {
    let mut out = Pairing::default();
    let mut next = 0usize;
    for (i, &t) in channel_ts.iter().enumerate() {
        let rest = &image_ts[next..];
        if rest.is_empty() {
            out.unpaired.push(i);
            continue;
        }
        // first image at or after t, then compare with its predecessor
        let k = rest.partition_point(|&x| x < t);
        let mut best = k.min(rest.len() - 1);
        if k > 0 && (t - rest[k - 1]).abs() <= (rest[best] - t).abs() {
            best = k - 1;
        }
        if (rest[best] - t).abs() <= tolerance_s {
            out.pairs.push((i, next + best));
            next += best + 1;
        } else {
            out.unpaired.push(i);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRef {
    pub timestamp_s: f64,
    pub pdp_path: String,
    pub tdl_path: String,
    pub global_img_path: String,
    pub local_img_path: String,
    pub mask_path: String,
    pub tx: GeoPoint,
    pub rx: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteManifest {
    pub route_id: String,
    pub sample_refs: Vec<SampleRef>,
    #[serde(default)]
    pub split: Option<Split>,
}

impl RouteManifest {
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .sample_refs
            .windows(2)
            .position(|w| !(w[1].timestamp_s > w[0].timestamp_s))
        {
            return Err(Error::Validation(format!(
                "route {}: timestamps not strictly increasing at sample {}",
                self.route_id,
                i + 1
            )));
        }
        for s in &self.sample_refs {
            s.tx.validate()?;
            s.rx.validate()?;
        }
        Ok(())
    }
}

pub fn load_manifests(path: &Path) -> Result<Vec<RouteManifest>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let routes: Vec<RouteManifest> = serde_json::from_str(&text).map_err(|e| Error::Validation(e.to_string()))?;
    for r in &routes {
        r.validate()?;
    }
    Ok(routes)
}

pub fn save_manifests(path: &Path, routes: &[RouteManifest]) -> Result<()> {
    let text = serde_json::to_string_pretty(routes)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Assigns whole routes to train/val/test.
///
/// Routes are shuffled under `seed`; every split with a non-zero fraction
/// first receives one route, then each remaining route goes to the split
/// furthest below its sample-count target.
pub fn split_routes(manifests: &[RouteManifest], fractions: (f64, f64, f64), seed: u64) -> Result<Vec<RouteManifest>> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|f| !(*f >= 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be >= 0 and sum to 1")));
    }
    let splits = [Split::Train, Split::Val, Split::Test];
    let active: Vec<usize> = (0..3).filter(|&k| fr[k] > 0.0).collect();
    if manifests.len() < active.len() {
        return Err(Error::Config(format!(
            "{} routes cannot fill {} non-empty splits",
            manifests.len(),
            active.len()
        )));
    }

    let mut order: Vec<usize> = (0..manifests.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let total: usize = manifests.iter().map(|m| m.sample_refs.len()).sum();
    let mut counts = [0usize; 3];
    let mut out = manifests.to_vec();
    for (pos, &r) in order.iter().enumerate() {
        let k = if pos < active.len() {
            active[pos]
        } else {
            // largest remaining deficit; ties resolve toward train, val, test
            *active
                .iter()
                .max_by(|&&a, &&b| {
                    let da = fr[a] * total as f64 - counts[a] as f64;
                    let db = fr[b] * total as f64 - counts[b] as f64;
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap()
        };
        counts[k] += manifests[r].sample_refs.len();
        out[r].split = Some(splits[k]);
    }
    Ok(out)
}
