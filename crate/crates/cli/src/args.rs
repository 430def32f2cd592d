use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "exmp",
    version,
    about = "Exchangeable Markov processes on k-colorings"
)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of flag values; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for relative output paths (default: $EXMP_OUT_DIR or `.`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the finite mean-field system or its exchangeable limit.
    Simulate(SimulateArgs),
    /// Solve the fluid-limit ODE and write the path as CSV.
    Ode(OdeArgs),
    /// Project an ensemble onto the simplex at given times.
    Project(ProjectArgs),
    /// Empirical transition matrix between two times.
    Qhat(QhatArgs),
    /// Classify the discontinuities of an ensemble.
    Jumps(JumpsArgs),
    #[command(subcommand)]
    Semigroup(SemigroupCommand),
    /// Discrete-time chain driven by a random matrix law.
    Discrete(DiscreteArgs),
    #[command(subcommand)]
    Fixtures(FixtureCommand),
    /// Run every acceptance criterion.
    VerifyAll(VerifyAllArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelKind {
    Constant,
    Glauber,
    ReedFrost,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "constant")]
    pub model: ModelKind,
    /// Row-major k×k off-diagonal rates for `constant`; the diagonal is ignored.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rates: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub field: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    pub recovery: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial frequencies; sites start i.i.d. from them.
    #[arg(long, value_delimiter = ',', required = true)]
    pub y0: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample the infinite limit process instead of the finite system.
    #[arg(long)]
    pub limit: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = "ensemble.jsonl")]
    pub out: PathBuf,
    /// Also write the projection on a uniform grid as tidy CSV.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y0: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Times the solver must land on.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    #[arg(long, default_value = "ode.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    pub times: Vec<f64>,
    #[arg(long, default_value = "projection.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QhatArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub s: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JumpsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Minimum simultaneous fraction of sites that counts as a jump.
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterpArg {
    Step,
    Linear,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Explicit grid times.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Vec<f64>,
    /// Uniform grid with this many steps over the path horizon.
    #[arg(long, conflicts_with = "grid")]
    pub grid_steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum SemigroupCommand {
    /// Build the minimal compatible semigroup of a path given as CSV.
    Build {
        #[arg(long)]
        path: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        interp: InterpArg,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "semigroup.json")]
        out: PathBuf,
    },
    /// Check a semigroup table against a path.
    Check {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        interp: InterpArg,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the inhomogeneous chain of a table on `n` sites.
    Sample {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        y0: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "chain.jsonl")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    /// `identity`, `fixed:Q.json` or `mix:M.json`.
    #[arg(long, default_value = "identity")]
    pub sampler: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y0: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "trace.json")]
    pub out_trace: PathBuf,
    #[arg(long, default_value = "discrete.jsonl")]
    pub out_ensemble: PathBuf,
    /// Compare the empirical matrices with the drawn ones; exit 1 on failure.
    #[arg(long)]
    pub verify: bool,
    /// Fixed tolerance for `verify` instead of the per-row default.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum FixtureCommand {
    /// Sites driven by the Cantor function used as a clock.
    Cantor {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "cantor.jsonl")]
        out: PathBuf,
        /// Also write the limit path, with this many pieces, as CSV.
        #[arg(long)]
        limit_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 6561)]
        pieces: usize,
    },
    /// Process whose limit depends discontinuously on the initial frequency.
    Threshold {
        #[arg(long)]
        y0: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "threshold.jsonl")]
        out: PathBuf,
    },
    /// Two processes with the same marginals and different transitions.
    RecolorPair {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "recolor-x.jsonl")]
        out_x: PathBuf,
        #[arg(long, default_value = "recolor-z.jsonl")]
        out_z: PathBuf,
    },
    /// Two constant-marginal processes, one Feller and one not.
    FellerPair {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "feller-a.jsonl")]
        out_a: PathBuf,
        #[arg(long, default_value = "feller-b.jsonl")]
        out_b: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct VerifyAllArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Fewer sites and replicates; thresholds are unchanged.
    #[arg(long)]
    pub quick: bool,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
    #[arg(long, default_value = "verify-all.json")]
    pub out: PathBuf,
}
