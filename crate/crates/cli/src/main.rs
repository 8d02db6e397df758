//! `posgap` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or configuration conflict,
//! 3 axiom grid mismatch, 4 axiom search inconclusive.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use posgap::axioms::{Axiom, CdfMode, Engine, Identification};
use posgap::reference::PoolWeighting;
use posgap::{MissingPolicy, ReferenceMode};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_GRID_MISMATCH: u8 = 3;
pub const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "posgap", version, about = "Multidimensional poverty measures with positional depth scores")]
struct Cli {
    /// Worker threads for the inner computations (default: all cores).
    #[arg(long, global = true, env = "POSGAP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure table by poverty cutoff and alpha.
    Compute(ComputeArgs),
    /// Fit a reference distribution and save it.
    Anchor(AnchorArgs),
    /// Subgroup decomposition and dominance curves.
    Decompose(DecomposeArgs),
    /// Rank concordance between positional and normalized gaps.
    CompareAf(CompareArgs),
    /// Per-person intensity and positional gap export.
    Scatter(ScatterArgs),
    /// Run the axiom lab and compare against the expected grid.
    Axioms(AxiomArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    /// Indicator spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec file's missing-value policy.
    #[arg(long, value_parser = parse_str::<MissingPolicy>)]
    pub missing_policy: Option<MissingPolicy>,
    /// Overrides the spec file's subgroup column.
    #[arg(long)]
    pub subgroup_column: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ReferenceArgs {
    /// Data file(s) to measure (CSV with a header row).
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    /// Where the CDFs come from.
    #[arg(long, default_value = "in-sample", value_parser = parse_str::<ReferenceMode>)]
    pub mode: ReferenceMode,
    /// Saved reference document (anchored mode).
    #[arg(long, conflicts_with = "baseline")]
    pub reference: Option<PathBuf>,
    /// Baseline data to anchor on (anchored mode).
    #[arg(long)]
    pub baseline: Vec<PathBuf>,
    /// How pooled periods are weighted.
    #[arg(long, value_enum, default_value_t = Pooling::Concatenate)]
    pub pool_weighting: Pooling,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Poverty cutoffs: numbers in (0, 1], `union` or `intersection`. Defaults
    /// to union, 0.25, 0.33, 0.5, 0.67, 0.75 and intersection.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<String>,
    /// Depth exponents (at least 1).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alpha: Vec<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file. Relative paths resolve against the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory for output files; without `--output` a default file name is used.
    #[arg(long, env = "POSGAP_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Round numbers to 3 decimals for display.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Pooling {
    Concatenate,
    EqualTotals,
}

impl From<Pooling> for PoolWeighting {
    fn from(p: Pooling) -> Self {
        match p {
            Pooling::Concatenate => PoolWeighting::Concatenate,
            Pooling::EqualTotals => PoolWeighting::EqualTotals,
        }
    }
}

#[derive(Args, Debug)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct AnchorArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Baseline data; two or more files are pooled.
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Pooling::Concatenate)]
    pub pool_weighting: Pooling,
    /// Output file. Relative paths resolve against the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = "POSGAP_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecomposeTable {
    Groups,
    Curve,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Score each subgroup against its own in-sample CDFs.
    #[arg(long)]
    pub per_subgroup_in_sample: bool,
    /// Accept the broken decomposition identity of per-subgroup references.
    #[arg(long, requires = "per_subgroup_in_sample")]
    pub allow_inconsistent: bool,
    /// CSV table to write (JSON carries both).
    #[arg(long, value_enum, default_value_t = DecomposeTable::Groups)]
    pub table: DecomposeTable,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CompareTable {
    Summary,
    Scatter,
    Histogram,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    /// Poverty cutoffs, as for `compute`.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<String>,
    /// Width of the rank-difference histogram bins.
    #[arg(long, default_value_t = posgap::concordance::DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    /// CSV table to write (JSON carries all three).
    #[arg(long, value_enum, default_value_t = CompareTable::Summary)]
    pub table: CompareTable,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ScatterArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AxiomTable {
    Cells,
    Grid,
    Witnesses,
}

#[derive(Args, Debug)]
pub struct AxiomArgs {
    #[arg(long, default_value_t = posgap::axioms::LabConfig::default().seed)]
    pub seed: u64,
    /// Random trials per cell.
    #[arg(long, default_value_t = posgap::axioms::LabConfig::default().trials)]
    pub trials: u64,
    /// Only these axioms (repeatable).
    #[arg(long, value_parser = parse_str::<Axiom>)]
    pub axiom: Vec<Axiom>,
    /// Only these CDF modes: anchored, in-sample.
    #[arg(long, value_parser = parse_str::<CdfMode>)]
    pub mode: Vec<CdfMode>,
    /// Only these identification rules: union, intermediate, intersection.
    #[arg(long, value_parser = parse_str::<Identification>)]
    pub identification: Vec<Identification>,
    /// Skip the exhaustive small-instance sweep.
    #[arg(long)]
    pub no_exhaustive: bool,
    /// Run the lab against a deliberately broken engine.
    #[arg(long, hide = true, value_parser = parse_str::<Engine>)]
    pub inject_fault: Option<Engine>,
    /// CSV table to write (JSON carries the full report).
    #[arg(long, value_enum, default_value_t = AxiomTable::Cells)]
    pub table: AxiomTable,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_str<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

/// A configuration conflict that clap cannot express.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let result = match cli.command {
        Command::Compute(a) => commands::compute(&a).map(|_| 0),
        Command::Anchor(a) => commands::anchor(&a).map(|_| 0),
        Command::Decompose(a) => commands::decompose(&a).map(|_| 0),
        Command::CompareAf(a) => commands::compare_af(&a).map(|_| 0),
        Command::Scatter(a) => commands::scatter(&a).map(|_| 0),
        Command::Axioms(a) => commands::axioms(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_ERROR)
            }
        }
    }
}
