use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tdlforge::pdp::{DenoiseConfig, ExtractConfig, FloorAveraging, DEFAULT_WINDOW};
use tdlforge::units::DEFAULT_BIN_SPACING_NS;

/// Channel-sounding post-processing: PDPs to TDL parameters and back.
#[derive(Debug, Parser)]
#[command(name = "tdlforge", version, args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Machine-readable JSON on stdout instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads; 0 picks one per core. Results never depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// key=value file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, env = "TDLFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a measured PDP file into per-snapshot TDL parameter files.
    #[command(args_override_self = true)]
    Extract(ExtractCmd),
    /// Generate a fading ensemble from a TDL file.
    #[command(args_override_self = true)]
    Synth(SynthCmd),
    /// Synthesize, average and re-extract a TDL; compare with the input.
    #[command(args_override_self = true)]
    Roundtrip(RoundtripCmd),
    /// Score predictions against extracted truth.
    #[command(args_override_self = true)]
    Eval(EvalCmd),
    /// Link geometry and satellite crops for a Tx/Rx pair.
    #[command(args_override_self = true)]
    Geo(GeoCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FloorDomain {
    Linear,
    Db,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    /// Bins at or below this level are ignored when estimating the floor.
    #[arg(long, default_value_t = DenoiseConfig::default().abs_floor_db, allow_negative_numbers = true)]
    pub abs_floor_db: f64,
    /// Share of the weakest valid bins averaged into the floor.
    #[arg(long, default_value_t = DenoiseConfig::default().bottom_fraction)]
    pub bottom_fraction: f64,
    #[arg(long, default_value_t = DenoiseConfig::default().margin_db, allow_negative_numbers = true)]
    pub margin_db: f64,
    #[arg(long, value_enum, default_value_t = FloorDomain::Linear)]
    pub floor_domain: FloorDomain,
}

impl DenoiseArgs {
    pub fn config(&self) -> DenoiseConfig {
        DenoiseConfig {
            abs_floor_db: self.abs_floor_db,
            bottom_fraction: self.bottom_fraction,
            margin_db: self.margin_db,
            averaging: match self.floor_domain {
                FloorDomain::Linear => FloorAveraging::Linear,
                FloorDomain::Db => FloorAveraging::Db,
            },
            ..DenoiseConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PeakArgs {
    #[arg(long, default_value_t = ExtractConfig::default().max_taps)]
    pub max_taps: usize,
    /// Peaks further than this below the strongest one are dropped.
    #[arg(long, default_value_t = ExtractConfig::default().dynamic_range_db)]
    pub dynamic_range_db: f64,
    /// Bins cleared on each side of an accepted peak.
    #[arg(long, default_value_t = ExtractConfig::default().min_separation_bins)]
    pub min_separation: usize,
}

impl PeakArgs {
    pub fn config(&self) -> ExtractConfig {
        ExtractConfig {
            max_taps: self.max_taps,
            dynamic_range_db: self.dynamic_range_db,
            min_separation_bins: self.min_separation,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractCmd {
    /// PDP file, CSV or binary (`.bin`).
    #[arg(long)]
    pub pdp: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Snapshots per sliding average.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Tx-Rx distance recorded with every snapshot.
    #[arg(long)]
    pub distance: Option<f64>,
    #[command(flatten)]
    pub denoise: DenoiseArgs,
    #[command(flatten)]
    pub peaks: PeakArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = DEFAULT_BIN_SPACING_NS)]
    pub sample_period_ns: f64,
    /// Absolute noise power added to every sample.
    #[arg(long, allow_negative_numbers = true)]
    pub noise_floor_db: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    pub tdl: PathBuf,
    /// Tx-Rx distance in metres.
    #[arg(long)]
    pub distance: f64,
    #[arg(long)]
    pub draws: usize,
    /// Ensemble CSV (or `.bin`); the average goes next to it as `<stem>_apdp.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct RoundtripCmd {
    #[arg(long)]
    pub tdl: PathBuf,
    #[arg(long)]
    pub distance: f64,
    #[arg(long, default_value_t = 500)]
    pub draws: usize,
    #[arg(long, default_value_t = DEFAULT_BIN_SPACING_NS)]
    pub sample_period_ns: f64,
    /// Noise sits this far below the first tap.
    #[arg(long, default_value_t = 70.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tol_power_db: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tol_k_db: f64,
    /// Optional report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub denoise: DenoiseArgs,
    #[command(flatten)]
    pub peaks: PeakArgs,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Directory written by `extract` (index.json plus TDL files).
    #[arg(long)]
    pub truth: PathBuf,
    /// Predictions, one JSON record per line.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest timestamp gap accepted when pairing.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance_s: f64,
    /// Distance used when the truth index does not record one.
    #[arg(long, default_value_t = 0.0)]
    pub distance: f64,
    /// Fading draws averaged per reconstructed PDP.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Draw truth and prediction fading independently.
    #[arg(long)]
    pub independent_fading: bool,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct GeoCmd {
    /// Transmitter as `lat,lon`.
    #[arg(long, allow_hyphen_values = true)]
    pub tx: String,
    /// Receiver as `lat,lon`.
    #[arg(long, allow_hyphen_values = true)]
    pub rx: String,
    /// North-up satellite PNG.
    #[arg(long, requires = "georef")]
    pub raster: Option<PathBuf>,
    /// Georeference JSON for the raster and mask.
    #[arg(long)]
    pub georef: Option<PathBuf>,
    /// Building mask PNG on the same grid as the raster.
    #[arg(long, requires = "georef")]
    pub mask: Option<PathBuf>,
    /// Draw Tx, Rx and the link on the global crop.
    #[arg(long)]
    pub annotate: bool,
    #[arg(long)]
    pub out: PathBuf,
}
