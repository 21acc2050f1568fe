//! `--config FILE`: `key = value` lines turned into flags.
//!
//! Global keys go right after the program name, the rest right after the
//! subcommand name, so anything given on the command line wins. `true` turns on a switch and
//! `false` leaves it off.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::exit::CliError;

const SUBCOMMANDS: [&str; 5] = ["extract", "synth", "roundtrip", "eval", "geo"];
const GLOBAL_FLAGS: [&str; 3] = ["--json", "--jobs", "--seed"];

fn is_global(flag: &OsString) -> bool {
    let s = flag.to_string_lossy();
    let name = s.split('=').next().unwrap_or("");
    GLOBAL_FLAGS.contains(&name)
}

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::validation(anyhow::anyhow!("{}:{}: expected key = value", path.display(), i + 1))
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key == "config" {
            return Err(CliError::validation(anyhow::anyhow!(
                "{}:{}: config files cannot nest",
                path.display(),
                i + 1
            )));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => out.push(format!("--{key}={v}").into()),
        }
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().cloned();
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(v.into());
        }
    }
    found
}

pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(anyhow::Error::new(e).context(format!("reading config {}", path.display()))))?;
    let (global, local): (Vec<_>, Vec<_>) = parse_config(&text, path)?.into_iter().partition(is_global);
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(argv);
    };
    let mut out = argv[..1].to_vec();
    out.extend(global);
    out.extend_from_slice(&argv[1..=pos]);
    out.extend(local);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
