//! Argument grammar. The full flag reference lives in `docs/cli.md`;
//! model configuration files (TOML or JSON) mirror the model flags and are
//! merged beneath them.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "gfd",
    version,
    about = "Generalized fiducial distributions from data-generating equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the Jacobian-weighted fiducial density on a grid.
    Density(DensityArgs),
    /// Draw from a fiducial distribution (tolerance, exact, or lattice).
    Sample(SampleArgs),
    /// Distribution-function envelope of a lattice model.
    Bounds(BoundsArgs),
    /// Geometric-versus-binomial envelope comparison.
    SlpDemo(SlpDemoArgs),
    /// Two-instrument conditionality demonstration.
    WcpDemo(WcpDemoArgs),
    /// Sequential-stopping conditional-probability ladder.
    SlpPair(SlpPairArgs),
    /// Empirical coverage of fiducial intervals.
    Coverage(CoverageArgs),
    /// Classical single-observation fiducial density from a CDF.
    Fisher(FisherArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    NormalLocation,
    NormalLs,
    TwoInstrument,
    TwoInstrumentMarginal,
    Geometric,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormName {
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentativeName {
    /// Deterministic midpoint of the CDF envelope (the half correction).
    CdfMidpoint,
    /// Random envelope endpoint per draw (same law, randomized).
    RandomEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfName {
    /// `F(x, theta) = Phi(x - theta)`.
    NormalLocation,
    /// `F(x, theta) = 1 - exp(-theta x)` (increasing in theta; rejected by
    /// the monotonicity precondition — useful for exercising failures).
    ExponentialRate,
}

/// Model selection flags shared by most subcommands.
#[derive(Debug, Args, Serialize)]
pub struct ModelFlags {
    /// Built-in model name.
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,

    /// Data dimension (normal models) or trial count (binomial).
    #[arg(long)]
    pub n: Option<usize>,

    /// First instrument spread (two-instrument models).
    #[arg(long)]
    pub sigma1: Option<f64>,

    /// Second instrument spread (two-instrument models).
    #[arg(long)]
    pub sigma2: Option<f64>,

    /// Parameter box as `lo:hi[,lo:hi...]`, one range per coordinate.
    #[arg(long = "box", value_name = "RANGES", allow_hyphen_values = true)]
    pub param_box: Option<String>,

    /// Model configuration file (TOML or JSON) mirroring these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelFlags,

    /// Observed data, inline as `v1,v2,...`.
    #[arg(long, conflicts_with = "data_file", allow_hyphen_values = true)]
    pub data: Option<String>,

    /// Observed data file: one number per line or comma-separated.
    #[arg(long)]
    pub data_file: Option<PathBuf>,

    /// Grid counts per axis, e.g. `400x400` or `2001`.
    #[arg(long)]
    pub grid: Option<String>,

    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,

    /// Optional JSON dump (grid metadata plus values).
    #[arg(long)]
    pub json: Option<PathBuf>,

    /// Manifest path (defaults to `<out>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelFlags,

    /// Observed data for continuous models (inline `v1,v2,...`).
    #[arg(long, conflicts_with = "data_file", allow_hyphen_values = true)]
    pub data: Option<String>,

    #[arg(long)]
    pub data_file: Option<PathBuf>,

    /// Observed lattice value for discrete models.
    #[arg(long, allow_hyphen_values = true)]
    pub observed: Option<i64>,

    /// Near-miss tolerance for the generic sampler.
    #[arg(long, conflicts_with = "eps_ladder")]
    pub eps: Option<f64>,

    /// Comma-separated tolerance ladder, e.g. `0.4,0.2,0.1`; writes one
    /// sample file per rung.
    #[arg(long)]
    pub eps_ladder: Option<String>,

    /// Number of accepted draws.
    #[arg(long)]
    pub draws: usize,

    /// Argmin search grid (continuous models), e.g. `40x40`.
    #[arg(long)]
    pub grid: Option<String>,

    /// RNG seed (stochastic runs never default this).
    #[arg(long)]
    pub seed: u64,

    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    /// Proposal budget.
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: u64,

    /// Norm of the near-miss event.
    #[arg(long, value_enum, default_value_t = NormName::L2)]
    pub norm: NormName,

    /// Point-summary convention for set-valued lattice draws.
    #[arg(long, value_enum, default_value_t = RepresentativeName::CdfMidpoint)]
    pub representative: RepresentativeName,

    /// Output CSV path (draws); metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub model: ModelFlags,

    /// Observed lattice value.
    #[arg(long, allow_hyphen_values = true)]
    pub observed: i64,

    /// Grid node count over the parameter range.
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SlpDemoArgs {
    /// Observed geometric value and binomial trial count.
    #[arg(long)]
    pub n: usize,

    /// Grid node count over (0, 1).
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,

    /// Output CSV (side-by-side envelope table).
    #[arg(long)]
    pub out: PathBuf,

    /// Optional JSON gap report.
    #[arg(long)]
    pub json: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct WcpDemoArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,

    #[arg(long, default_value_t = 10.0)]
    pub sigma2: f64,

    /// Observed measurement.
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,

    /// Observed instrument label (1 or 2).
    #[arg(long)]
    pub m: usize,

    #[arg(long)]
    pub draws: usize,

    #[arg(long)]
    pub seed: u64,

    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    /// Output JSON report.
    #[arg(long)]
    pub out: PathBuf,

    /// Optional CSV density table for plotting.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SlpPairArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,

    /// Comma-separated theta ladder.
    #[arg(long, default_value = "0,0.1,0.2,0.5,1.0", allow_hyphen_values = true)]
    pub theta: String,

    /// Sequence length (the final running mean is the crossing test).
    #[arg(long, default_value_t = 169)]
    pub k_max: usize,

    /// Replications per theta.
    #[arg(long)]
    pub reps: u64,

    #[arg(long)]
    pub seed: u64,

    /// Output JSON report.
    #[arg(long)]
    pub out: PathBuf,

    /// Optional CSV of the conditional-probability ladder.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub model: ModelFlags,

    /// True parameter value.
    #[arg(long, allow_hyphen_values = true)]
    pub xi_true: f64,

    /// Comma-separated confidence levels.
    #[arg(long, default_value = "0.95")]
    pub level: String,

    #[arg(long)]
    pub reps: usize,

    #[arg(long)]
    pub seed: u64,

    /// Grid counts, e.g. `2001` (continuous) or `10000` (lattice).
    #[arg(long)]
    pub grid: Option<String>,

    /// Output JSON summary.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FisherArgs {
    /// Built-in CDF family.
    #[arg(long, value_enum)]
    pub cdf: CdfName,

    /// The single observation.
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,

    /// Grid node count.
    #[arg(long, default_value_t = 2001)]
    pub grid: usize,

    /// Parameter range `lo:hi`.
    #[arg(long = "box", value_name = "RANGE", allow_hyphen_values = true)]
    pub param_box: String,

    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub json: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}
