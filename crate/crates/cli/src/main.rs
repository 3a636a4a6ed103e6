mod commands;
mod grid;
mod table;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Bad input from the command line; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "starcoal", version, about = "Star-shaped coalescent and Fleming-Viot evaluators, samplers and checks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,

    /// Write the table here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Base seed for every random stream.
    #[arg(long, env = "STARCOAL_SEED", default_value_t = 42, global = true)]
    seed: u64,

    /// Monte Carlo sample size for ensemble summaries.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..), global = true)]
    n_mc: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct TwoTypeArgs {
    /// Mutation rate θ > 0.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    /// Type-1 mutation probability, 0 < p < 1.
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition law from x after time t: density over a ξ-grid, atom in the header.
    Transition {
        #[command(flatten)]
        model: TwoTypeArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value = "0:1:0.01")]
        grid: String,
    },
    /// Stationary density and cdf over a ξ-grid.
    Stationary {
        #[command(flatten)]
        model: TwoTypeArgs,
        #[arg(long, default_value = "0:1:0.01")]
        grid: String,
    },
    /// Central moments E_x[(ξ(t) - p)^n] over n- and t-grids.
    Moments {
        #[command(flatten)]
        model: TwoTypeArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        /// Moment orders.
        #[arg(long, default_value = "1:4:1")]
        n: String,
        #[arg(long, default_value = "0.1,1,10")]
        t: String,
    },
    /// Eigenvalues and eigenpolynomial coefficients up to degree n.
    Eigen {
        #[command(flatten)]
        model: TwoTypeArgs,
        #[arg(long)]
        n: u32,
    },
    /// Distribution of the non-mutant line count, direct and spectral.
    Lines {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value = "0.1,1,10")]
        t: String,
    },
    /// Simulate a process: one path or an ensemble summary.
    Simulate {
        #[command(subcommand)]
        what: Simulate,
    },
    /// Multitype kernels and sampling distributions.
    Multitype {
        #[command(subcommand)]
        what: Multitype,
    },
    /// Mutation-selection drifts, skeleton chain, stationary law, fixation.
    Selection {
        #[command(subcommand)]
        what: Selection,
    },
    /// Run the cross-check battery; exits 1 unless every check passes.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum Simulate {
    /// Forward Fleming-Viot frequency.
    Fv {
        #[command(flatten)]
        model: TwoTypeArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        /// Print one trajectory instead of ensemble moments.
        #[arg(long)]
        path: bool,
    },
    /// Non-mutant line count.
    Lines {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        n: u32,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long)]
        path: bool,
    },
    /// Lineage count of the ancestral selection graph.
    Asg {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long)]
        n: u64,
        /// Horizon for a path; for ensembles, also report P(T_UA <= t).
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long)]
        path: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum Multitype {
    /// Single-line type kernel at time t, from PIM weights or a mutation matrix file.
    Kernel {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        /// PIM weights, e.g. 0.2,0.3,0.5.
        #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
        p: Option<String>,
        /// Whitespace-separated matrix, one row per line, `#` comments.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Infinite-alleles sampling laws for a sample of size n.
    Sampling {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        n: u32,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DriftArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Coefficients c0,c1,... of a polynomial drift v(x) = Σ c_k x^k.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["theta", "p", "beta", "drift_file"])]
    pub drift: Option<String>,
    /// File holding the drift coefficients.
    #[arg(long, conflicts_with_all = ["theta", "p", "beta"])]
    pub drift_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Selection {
    /// Equilibria, skeleton chain and its stationary vector.
    Skeleton {
        #[command(flatten)]
        drift: DriftArgs,
    },
    /// Stationary density and cdf over a ξ-grid.
    Density {
        #[command(flatten)]
        drift: DriftArgs,
        #[arg(long, default_value = "0:1:0.01")]
        grid: String,
    },
    /// Deterministic flow from x over a t-grid.
    Flow {
        #[command(flatten)]
        drift: DriftArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value = "0:10:0.5")]
        t: String,
    },
    /// Fixation probabilities under pure selection over an x-grid.
    Fixation {
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value = "0:1:0.05")]
        grid: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    All,
    Twotype,
    Eigen,
    Lines,
    Multitype,
    Selection,
    Determinism,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<starcoal::Error>(), Some(starcoal::Error::InvalidArgument(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
