//! Flag definitions for the `comvar` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

/// Top-level command line.
#[derive(Debug, Parser)]
#[command(
    name = "comvar",
    version,
    about = "Recover hidden common variables shared by simultaneous observation sets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare midpoint vs endpoint-averaged metric estimates on the
    /// warped-square benchmark
    MetricCompare(MetricCompareArgs),
    /// Recover the coupled-pendulum mode frequencies from two movies
    Pendulum(PendulumArgs),
    /// Recover the shared icon rotation frequency from three movies
    Icons(IconsArgs),
    /// Embed observation sets read from CSV files
    Embed(EmbedArgs),
}

/// Which pipeline turns two observation sets into an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Midpoint metric with row-stochastic normalization (k-nearest
    /// neighborhoods only; time windows are undefined at pair midpoints)
    Alg1,
    /// Anchored metric with landmark normalization
    Alg2,
    /// Euclidean metric on the first set alone (baseline, ignores the
    /// second set)
    SingleSet,
}

impl Algorithm {
    /// The flag spelling, for manifests and messages.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::SingleSet => "single-set",
        }
    }
}

/// Glyph-to-movie assignment for the icons experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    /// Each movie shows the common glyph plus one private glyph
    Disjoint,
    /// Each movie pair shares two glyphs; only one glyph is in all three
    PairwiseShared,
}

impl LayoutArg {
    pub fn name(self) -> &'static str {
        match self {
            LayoutArg::Disjoint => "disjoint",
            LayoutArg::PairwiseShared => "pairwise-shared",
        }
    }
}

#[derive(Debug, Parser)]
pub struct MetricCompareArgs {
    /// Number of samples
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Neighborhood size for the local fits
    #[arg(long, default_value_t = 20)]
    pub k_neighbors: usize,
    /// Ridge coefficient for the local fits (0 keeps the pure
    /// pseudo-inverse weighting)
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Parser)]
pub struct PendulumArgs {
    /// Number of frames
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Sampling interval in seconds
    #[arg(long, default_value_t = 0.0125)]
    pub ts: f64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add an independent nuisance pendulum to each movie
    #[arg(long)]
    pub noisy: bool,
    /// Pipeline variant
    #[arg(long, value_enum, default_value_t = Algorithm::Alg2)]
    pub algorithm: Algorithm,
    /// Number of evenly spaced anchors for alg2 (default: every sample)
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Time-window width for the local fits (default 8)
    #[arg(long)]
    pub window: Option<usize>,
    /// Use k-nearest neighborhoods instead of time windows (required for
    /// alg1)
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    /// Embedding components to keep
    #[arg(long, default_value_t = 2)]
    pub dz: usize,
    /// Kernel bandwidth override (default: median of the metric)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Ridge coefficient override for the local fits
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Average the two per-side quadratic forms instead of using the
    /// first set's
    #[arg(long)]
    pub average_sides: bool,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Parser)]
pub struct IconsArgs {
    /// Glyph-to-movie assignment
    #[arg(long, value_enum, default_value_t = LayoutArg::Disjoint)]
    pub layout: LayoutArg,
    /// Number of frames
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Time-window width for the local fits
    #[arg(long, default_value_t = 7)]
    pub window: usize,
    /// Embedding components to keep
    #[arg(long, default_value_t = 1)]
    pub dz: usize,
    /// Kernel bandwidth override (default: median of the metric)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Parser)]
pub struct EmbedArgs {
    /// First observation set (CSV with header, one row per sample)
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Second observation set, row-aligned with the first
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Observation sets for the K-set pipeline (repeat for each file;
    /// conflicts with --x/--y)
    #[arg(long = "set")]
    pub sets: Vec<PathBuf>,
    /// Pipeline variant for two-set inputs
    #[arg(long, value_enum, default_value_t = Algorithm::Alg2)]
    pub algorithm: Algorithm,
    /// Use k-nearest neighborhoods of this size (default 20 when
    /// --window is absent)
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    /// Use consecutive-sample windows of this width instead of k-nearest
    #[arg(long)]
    pub window: Option<usize>,
    /// Embedding components to keep (default 2 for two sets, 1 for
    /// --set inputs)
    #[arg(long)]
    pub dz: Option<usize>,
    /// Number of evenly spaced anchors for alg2 (default: every sample)
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Kernel bandwidth override (default: median of the metric)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Ridge coefficient override for the local fits
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Average the two per-side quadratic forms instead of using the
    /// first set's
    #[arg(long)]
    pub average_sides: bool,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}
