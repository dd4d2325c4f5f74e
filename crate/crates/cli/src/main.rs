//! `gmproc`: estimate AR kernels from irregularly sampled series, evaluate
//! their spectra, and run the simulation studies and timing benchmarks.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmproc::likelihood::{CollisionMode, Engine};
use gmproc::simlab::{EstimatorKind, SweepParam};

#[derive(Debug, Parser)]
#[command(name = "gmproc", version, about = "Kernel learning for Gaussian Markov processes from irregular samples")]
pub struct Cli {
    /// Worker threads for parallel runs [default: available parallelism]
    #[arg(long, global = true, env = "GMPROC_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an AR model to a series CSV (`index,value` or `time,value`)
    Estimate(EstimateArgs),
    /// Power spectrum of a model JSON over [0, 0.5] cycles per sample
    Spectrum(SpectrumArgs),
    /// Monte Carlo model-error study of a built-in case (A, B, C) or a case JSON
    SimulateCase(CaseArgs),
    /// Repeat a case over values of one parameter
    Sweep(SweepArgs),
    /// Time the likelihood engines over grid lengths and state dimensions
    Bench(BenchArgs),
    /// Thin an observed series at several average spacings and score the
    /// refits against the full-data fit
    SubsampleStudy(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Collide {
    /// Reject samples that round to the same grid index
    Error,
    /// Average samples that round to the same grid index
    Mean,
}

impl From<Collide> for CollisionMode {
    fn from(c: Collide) -> Self {
        match c {
            Collide::Error => CollisionMode::Error,
            Collide::Mean => CollisionMode::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Prior {
    /// Reference prior on the partial autocorrelations
    Reference,
    /// Flat prior on the partial autocorrelations
    Flat,
}

/// Series ingestion options.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Grid spacing used to round `time,value` input
    #[arg(long, default_value_t = 1.0)]
    pub grid: f64,
    /// Treatment of samples that round to the same grid index
    #[arg(long, value_enum, default_value_t = Collide::Error)]
    pub collide: Collide,
    /// Subtract the sample mean (default for `time,value` input)
    #[arg(long, conflicts_with = "no_demean")]
    pub demean: bool,
    /// Keep the sample mean (default for `index,value` input)
    #[arg(long)]
    pub no_demean: bool,
}

impl InputArgs {
    pub fn demean(&self) -> Option<bool> {
        match (self.demean, self.no_demean) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

/// Sampler budget and engine.
#[derive(Debug, Args)]
pub struct FitArgs {
    /// Likelihood engine: covm, kal, prekal, diagprekal or auto
    #[arg(long, default_value = "auto")]
    pub engine: Engine,
    /// HMC warmup iterations
    #[arg(long, default_value_t = 500)]
    pub warmup: usize,
    /// HMC sampling iterations
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Series CSV
    pub input: PathBuf,
    /// AR order
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Estimator
    #[arg(long, default_value = "ml")]
    pub method: EstimatorKind,
    /// Prior of the posterior mean; implies `--method pmean` or `pmean-f`
    #[arg(long, value_enum)]
    pub prior: Option<Prior>,
    /// Seed of the HMC sampler
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub input_opts: InputArgs,
    /// Directory receiving `model.json` and `report.json`
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write the posterior draws to this CSV
    #[arg(long)]
    pub draws: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Model JSON
    pub model: PathBuf,
    /// Number of frequencies, equally spaced over [0, 0.5]
    #[arg(long, default_value_t = 512)]
    pub nfreq: usize,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Overrides applied to a case spec.
#[derive(Debug, Args)]
pub struct CaseOverrides {
    /// Number of runs [default: 50, or 400 with --full]
    #[arg(long = "s")]
    pub runs: Option<usize>,
    /// Paper-scale number of runs (400)
    #[arg(long)]
    pub full: bool,
    /// Base seed; run r uses seed + r [default: the spec's seed, 0 for built-ins]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Estimated AR order [default: 8 for A and B, 4 for C]
    #[arg(long)]
    pub order: Option<usize>,
    /// Estimators, comma separated [default: ml,pmean]
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<EstimatorKind>>,
    /// Likelihood engine [default: auto]
    #[arg(long)]
    pub engine: Option<Engine>,
    /// HMC warmup iterations [default: 500]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// HMC sampling iterations [default: 1000]
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Built-in case name (A, B, C) or path to a case JSON
    pub case: String,
    #[command(flatten)]
    pub overrides: CaseOverrides,
    /// Per-run CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-estimator summary CSV
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Swept parameter: correlation_length, t_avg, n_grid or p_est
    #[arg(required_unless_present = "spec")]
    pub parameter: Option<SweepParam>,
    /// Comma-separated values
    #[arg(value_delimiter = ',', required_unless_present = "spec")]
    pub values: Option<Vec<f64>>,
    /// Sweep JSON instead of the positional arguments
    #[arg(long, conflicts_with_all = ["parameter", "values", "case"])]
    pub spec: Option<PathBuf>,
    /// Base case: built-in name or case JSON
    #[arg(long, default_value = "A")]
    pub case: String,
    /// Keep n_grid fixed when sweeping t_avg instead of holding the expected n_a
    #[arg(long)]
    pub no_hold: bool,
    #[command(flatten)]
    pub overrides: CaseOverrides,
    /// Aggregate CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-run CSV
    #[arg(long)]
    pub runs_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Bench JSON instead of the flags below
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Engines, comma separated
    #[arg(long, value_delimiter = ',', default_value = "kal,prekal,diagprekal")]
    pub engines: Vec<Engine>,
    /// Grid lengths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
    pub n: Vec<usize>,
    /// Average spacings, comma separated
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub t: Vec<f64>,
    /// AR orders (state dimensions), comma separated
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub state_dim: Vec<usize>,
    /// Keep exactly this many samples instead of thinning by --t
    #[arg(long)]
    pub n_a: Option<usize>,
    /// Repetitions per point (at least 5); the median is reported
    #[arg(long, default_value_t = 9)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Series CSV
    pub input: PathBuf,
    /// Average spacings, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub t: Vec<f64>,
    /// Repetitions per spacing
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// AR order
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Estimators, comma separated
    #[arg(long, value_delimiter = ',', default_value = "ml,pmean")]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub input_opts: InputArgs,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
