//! `heatnet` command line: fixture generation, simulation, optimization and
//! the finite-difference gradient audit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatnet::RadiatorModel;

mod audit;
mod config;
mod report;
mod run;

#[derive(Parser, Debug)]
#[command(name = "heatnet", version, about = "District heating network simulation and topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the steady state of a network for a fixed design.
    Simulate(SimulateArgs),
    /// Warm start plus continuation over the pipe catalog.
    Optimize(OptimizeArgs),
    /// Write a synthetic street-grid superstructure.
    GenGrid(GenGridArgs),
    /// Compare adjoint gradients against finite differences.
    CheckGradients(CheckArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiatorArg {
    Lmtd,
    Mean,
}

impl From<RadiatorArg> for RadiatorModel {
    fn from(r: RadiatorArg) -> Self {
        match r {
            RadiatorArg::Lmtd => RadiatorModel::Lmtd,
            RadiatorArg::Mean => RadiatorModel::ArithmeticMean,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Network definition file (JSON).
    #[arg(long)]
    pub network: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "lmtd")]
    pub radiator_model: RadiatorArg,
    /// Seed recorded in the manifest.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scaled residual tolerance of both Newton stages.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Newton iteration cap per stage.
    #[arg(long)]
    pub newton_max_iter: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Design file as written by `optimize`; defaults to the network's
    /// diameters with open valves and full producer inflow.
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Pipe catalog (JSON); defaults to the built-in table.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Continuation schedule (JSON), explicit stages or ranges.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Keep valves and producer inflows at their warm-start values.
    #[arg(long)]
    pub freeze_operations: bool,
    /// Pump cost weight, €/W.
    #[arg(long)]
    pub lambda_p: Option<f64>,
    /// SQP iteration cap per continuation stage.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Skip the warm start and begin from this design file.
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenGridArgs {
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    /// Number of consumers; defaults to one per junction.
    #[arg(long)]
    pub consumers: Option<usize>,
    /// Weights of the renovated, dwelling and commercial types.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 0.0])]
    pub mix: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Nominal street length, m.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Initial diameter of every street, m.
    #[arg(long)]
    pub diameter: Option<f64>,
    /// Omit the consumer bypass arcs.
    #[arg(long)]
    pub no_bypass: bool,
    /// 10 × 16 grid with 160 consumers; overrides the size options.
    #[arg(long)]
    pub district_160: bool,
    /// Output file.
    #[arg(long, default_value = "network.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Network to audit; defaults to a random 2 × 3 grid drawn from `--seed`.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Design to audit at; defaults to a random design drawn from `--seed`.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "lmtd")]
    pub radiator_model: RadiatorArg,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 1e3)]
    pub gamma: f64,
    #[arg(long, default_value_t = 5.0)]
    pub chi: f64,
    #[arg(long, default_value_t = 0.5)]
    pub upsilon: f64,
    #[arg(long, default_value_t = 5.0)]
    pub omega: f64,
    #[arg(long)]
    pub lambda_p: Option<f64>,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Per-component table (CSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run::simulate(&a),
        Command::Optimize(a) => run::optimize(&a),
        Command::GenGrid(a) => run::gen_grid(&a),
        Command::CheckGradients(a) => audit::check_gradients(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
