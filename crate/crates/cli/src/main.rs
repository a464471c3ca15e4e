//! `qsi`: simulate interferograms, fit fringes, reconstruct states and run
//! the waveplate sweep and tomography benchmark.

mod angle;
mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use angle::parse_angle;

#[derive(Debug, Parser)]
#[command(name = "qsi", version, about = "Quantum state interferography toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// RNG seed; overrides `rng_seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "qsi-out")]
    pub out: PathBuf,
    /// Interferometer config JSON.
    #[arg(long, global = true, env = "QSI_DEFAULT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override one config field, e.g. `--set peak_counts=5000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Suppress summaries and warnings on stdout/stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize interferogram images for a prepared state.
    Simulate(SimulateArgs),
    /// Fit fringes in images and aggregate into (Φ, V, Ī).
    Fit(FitArgs),
    /// Invert fringe estimates into a state.
    Reconstruct(ReconstructArgs),
    /// Run the waveplate grid end to end.
    Sweep(SweepArgs),
    /// Compare against three-setting tomography at equal photon number.
    Bench(BenchArgs),
    /// Measure and reconstruct random pure qudits.
    QuditDemo(QuditDemoArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Polar angle of a qubit state.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Azimuth of a qubit state (default 0).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Coherence of a qubit state, 0..=1 (default 1).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Half-wave plate angle.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Quarter-wave plate angle (default 0).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Prepare with the half-wave plate only.
    #[arg(long)]
    pub no_qwp: bool,
    /// Pure qudit state JSON (`{"dim", "thetas", "phis"}`).
    #[arg(long)]
    pub qudit_file: Option<PathBuf>,
    /// Qudit subspace `k` (levels k, k+1), 1-based.
    #[arg(long)]
    pub subspace: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// PGM or CSV images, or a directory written by `simulate`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Calibration JSON from `sweep`, or a bare normalisation number.
    #[arg(long)]
    pub norm_ref: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Estimate JSON: one object for a qubit, an array for a qudit.
    pub input: PathBuf,
    /// Force μ = 1 and ignore the visibility.
    #[arg(long)]
    pub assume_pure: bool,
    /// Target state (state JSON or a simulate sidecar) for a fidelity.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Qudit dimension; checked against the number of estimates.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_angle, default_value = "10deg")]
    pub alpha_step: f64,
    #[arg(long, value_parser = parse_angle, default_value = "10deg")]
    pub beta_step: f64,
    /// Also measure every HWP angle without the QWP.
    #[arg(long)]
    pub hwp_only: bool,
    /// Only run the HWP-only calibration and write calibration.json.
    #[arg(long)]
    pub calibrate_only: bool,
    /// Reuse an existing calibration instead of measuring one.
    #[arg(long, conflicts_with = "calibrate_only")]
    pub norm_ref: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Total detected photons per reconstruction, shared by both methods.
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    /// Repetitions per state and method.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// JSON array of qubit states; a fixed set is used otherwise.
    #[arg(long)]
    pub states: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuditDemoArgs {
    /// Qudit dimension.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Number of random states.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Use this state instead of random ones.
    #[arg(long, conflicts_with = "count")]
    pub qudit_file: Option<PathBuf>,
    /// Normalise with the analytic reference instead of a simulated sweep.
    #[arg(long)]
    pub ideal_calibration: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(g, a),
        Command::Fit(a) => commands::fit(g, a),
        Command::Reconstruct(a) => commands::reconstruct(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::Bench(a) => commands::bench(g, a),
        Command::QuditDemo(a) => commands::qudit_demo(g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
