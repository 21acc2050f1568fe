pub mod eval;
pub mod extract;
pub mod geo;
pub mod roundtrip;
pub mod synth;

use std::path::{Path, PathBuf};

use tdlforge::dataset::{load_pdp_bin, load_pdp_csv, save_pdp_bin, save_pdp_csv};
use tdlforge::PdpSnapshot;

use crate::exit::CliError;

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

pub fn load_pdps(path: &Path) -> Result<Vec<PdpSnapshot>, CliError> {
    let r = if is_binary(path) { load_pdp_bin(path) } else { load_pdp_csv(path) };
    r.map_err(CliError::from)
}

pub fn save_pdps(path: &Path, snaps: &[PdpSnapshot]) -> Result<(), CliError> {
    let r = if is_binary(path) { save_pdp_bin(path, snaps) } else { save_pdp_csv(path, snaps) };
    r.map_err(CliError::from)
}

/// `dir/stem_suffix.csv` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.csv"))
}

pub fn fmt_db(x: f64) -> String {
    format!("{x:.2}")
}
