//! `rocp`: robust orthogonal CP decompositions from the command line.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rocp::synth::SolverKind;
use rocp::video::{ForegroundMode, MotionPath};
use rocp::{Error, NoiseSpec, SolverConfig};

/// Process exit codes. Usage errors exit with 2, as reported by clap.
pub mod exit {
    pub const OK: u8 = 0;
    pub const MAX_ITER: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const PARSE: u8 = 5;
    pub const IO: u8 = 6;
    pub const INVALID: u8 = 7;
}

const EXIT_CODES: &str = "\
Exit codes:
  0  success (solver converged)
  2  invalid command line
  3  solver stopped at --max-iter without converging (results are still written)
  4  numerical failure inside a solver
  5  malformed input file
  6  I/O error
  7  invalid parameters or shapes";

#[derive(Parser, Debug)]
#[command(name = "rocp", version, about = "Robust orthogonal CP tensor approximation under the Cauchy loss", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a noisy low-rank tensor and its ground truth.
    Synth(SynthArgs),
    /// Decompose an RCPD1 tensor.
    Decompose(DecomposeArgs),
    /// Run the synthetic benchmark grid.
    Bench(BenchArgs),
    /// Separate a directory of PGM frames into background and foreground.
    Video(VideoArgs),
    /// Write a synthetic moving-block video as PGM frames.
    VideoGen(VideoGenArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Penalty parameter τ.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Proximal weight α.
    #[arg(long, default_value_t = 1e-8)]
    alpha: f64,
    /// Cauchy scale δ.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Stop when the fit changes by at most this much.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Also require ‖⟦σ;U⟧ − T‖ below this; `inf` disables the check.
    /// Defaults to 1e-4, or `inf` for `video`.
    #[arg(long)]
    primal_tol: Option<f64>,
}

impl SolverArgs {
    pub fn config(&self, seed: u64, default_primal_tol: f64) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            alpha: self.alpha,
            delta: self.delta,
            max_iter: self.max_iter,
            tol: self.tol,
            primal_tol: self.primal_tol.unwrap_or(default_primal_tol),
            seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct NoiseArgs {
    /// Mixing weight β for Cauchy and Gaussian noise.
    #[arg(long)]
    beta: Option<f64>,
    /// Cauchy scale of the noise distribution.
    #[arg(long)]
    cauchy_scale: Option<f64>,
    /// Fraction of entries hit by outliers.
    #[arg(long)]
    density: Option<f64>,
    /// Outliers are uniform on [0, outlier-max].
    #[arg(long)]
    outlier_max: Option<f64>,
}

impl NoiseArgs {
    pub fn apply(&self, spec: NoiseSpec) -> NoiseSpec {
        match spec {
            NoiseSpec::None => spec,
            NoiseSpec::Cauchy { scale, mix_beta } => NoiseSpec::Cauchy {
                scale: self.cauchy_scale.unwrap_or(scale),
                mix_beta: self.beta.unwrap_or(mix_beta),
            },
            NoiseSpec::Gaussian { mix_beta } => NoiseSpec::Gaussian { mix_beta: self.beta.unwrap_or(mix_beta) },
            NoiseSpec::Outliers { density, low, high } => NoiseSpec::Outliers {
                density: self.density.unwrap_or(density),
                low,
                high: self.outlier_max.unwrap_or(high),
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Mode sizes, e.g. `20,20,20`.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, short = 'r', default_value_t = 5)]
    rank: usize,
    /// Number of trailing orthonormal modes.
    #[arg(long, short = 't', default_value_t = 1)]
    t: usize,
    /// none, cauchy, outliers or gaussian.
    #[arg(long, default_value = "cauchy")]
    noise: NoiseSpec,
    #[command(flatten)]
    noise_args: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives data.rcpd, truth.rcpd and the manifest.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// RCPD1 input tensor.
    input: PathBuf,
    #[arg(long, short = 'r')]
    rank: usize,
    #[arg(long, short = 't', default_value_t = 1)]
    t: usize,
    #[arg(long, default_value = "hq-admm")]
    solver: SolverKind,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Seed of the random initial factors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground truth to report the normalized error against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory for the factors, trace and manifest.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Noise models of the grid.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "cauchy")]
    noise: Vec<NoiseSpec>,
    /// Mode sizes of the grid.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "20")]
    n: Vec<usize>,
    /// Tensor orders of the grid.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "3")]
    d: Vec<usize>,
    /// Orthonormal mode counts of the grid.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "1")]
    t: Vec<usize>,
    #[arg(long, short = 'r', default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    /// Master seed; every instance derives its own streams from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "hq-admm,als")]
    solvers: Vec<SolverKind>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    noise_args: NoiseArgs,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Output directory; receives bench.csv and the manifest.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VideoArgs {
    /// Directory of P5 PGM frames, read in filename order.
    frames: PathBuf,
    #[arg(long, short = 'r', default_value_t = 30)]
    rank: usize,
    #[command(flatten)]
    solver_args: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale the video to unit Frobenius norm instead of [0, 1] pixels.
    #[arg(long)]
    unit_frobenius: bool,
    /// Foreground rendering: `absolute` or `signed`.
    #[arg(long, default_value = "absolute")]
    foreground: ForegroundMode,
    /// Output directory for frames, factors and the manifest.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VideoGenArgs {
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    bg_rank: usize,
    /// Side of the square moving block.
    #[arg(long, default_value_t = 8)]
    block: usize,
    /// `horizontal` or `diagonal`.
    #[arg(long, default_value = "horizontal")]
    path: MotionPath,
    #[arg(long, default_value_t = 0.8)]
    contrast: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; frames go to `frames/`, the true mask to `mask/`.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } => exit::NUMERICAL,
        Error::Parse { .. } => exit::PARSE,
        Error::Io { .. } => exit::IO,
        Error::Structural(_) | Error::Domain(_) => exit::INVALID,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Decompose(a) => commands::decompose(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Video(a) => commands::video(&a),
        Command::VideoGen(a) => commands::video_gen(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
